//! Occupation-measure approximations of Mather measures, the sign criteria on
//! `∫ ∂H/∂u dμ`, stability classification and the uniqueness routes.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::flow::{flow_endpoint, lie_derivative, rk4_step, vector_field, ContactState, DEFAULT_BLOWUP_CAP};
use crate::hamiltonians::Hamiltonian;
use crate::scalar::Real;
use crate::weakkam::{GraphSample, StationaryResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MeasureKind {
    Dirac,
    Birkhoff,
    Periodic,
}

impl MeasureKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Dirac => "dirac",
            Self::Birkhoff => "birkhoff",
            Self::Periodic => "periodic",
        }
    }
}

/// Normalized weighted atoms approximating an invariant probability measure.
#[derive(Debug, Clone)]
pub struct OccupationMeasure<S> {
    pub atoms: Vec<(ContactState<S>, S)>,
    pub seed: ContactState<S>,
    pub t_burn: S,
    pub t_avg: S,
    pub dt: S,
    pub kind: MeasureKind,
    /// Closest return to the first averaged state after the orbit left its
    /// neighbourhood; `None` if it never left.
    pub return_distance: Option<S>,
    pub period: Option<S>,
}

impl<S: Real> OccupationMeasure<S> {
    pub fn dirac(z: ContactState<S>) -> Self {
        Self {
            atoms: vec![(z, S::one())],
            seed: z,
            t_burn: S::zero(),
            t_avg: S::zero(),
            dt: S::zero(),
            kind: MeasureKind::Dirac,
            return_distance: None,
            period: None,
        }
    }

    pub fn total_weight(&self) -> S {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn integrate(&self, f: impl Fn(&ContactState<S>) -> S) -> S {
        self.atoms.iter().map(|(z, w)| *w * f(z)).sum()
    }

    /// `∫ F∘Φ_s dμ`, pushing every atom forward by the flow.
    pub fn integrate_pushed<M: Hamiltonian<S> + ?Sized>(
        &self,
        model: &M,
        s: S,
        dt: S,
        f: impl Fn(&ContactState<S>) -> S,
    ) -> Result<S> {
        let mut acc = S::zero();
        for (z, w) in &self.atoms {
            acc += *w * f(&flow_endpoint(model, *z, s, dt)?);
        }
        Ok(acc)
    }

    /// Moments used to tell measures apart.
    pub fn signature<M: Hamiltonian<S> + ?Sized>(&self, model: &M) -> [S; 7] {
        let two = S::lit(2.0);
        [
            self.integrate(|z| z.x.sin()),
            self.integrate(|z| z.x.cos()),
            self.integrate(|z| (two * z.x).sin()),
            self.integrate(|z| (two * z.x).cos()),
            self.integrate(|z| z.p),
            self.integrate(|z| z.u),
            hu_average(model, self),
        ]
    }
}

/// `∫ ∂H/∂u dμ`.
pub fn hu_average<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, mu: &OccupationMeasure<S>) -> S {
    mu.integrate(|z| model.d_u(z.x, z.p, z.u))
}

/// Time averaging of one orbit.
#[derive(Debug, Clone, Copy)]
pub struct AveragingConfig<S> {
    pub t_burn: S,
    pub t_avg: S,
    pub dt: S,
    pub n_bins: usize,
    pub rec_tol: S,
}

impl<S: Real> Default for AveragingConfig<S> {
    fn default() -> Self {
        Self {
            t_burn: S::lit(20.0),
            t_avg: S::lit(100.0),
            dt: S::lit(1e-3),
            n_bins: 256,
            rec_tol: S::lit(1e-3),
        }
    }
}

fn bin_states<S: Real>(states: &[ContactState<S>], width: S) -> Vec<(ContactState<S>, S)> {
    let mut bins: BTreeMap<(i64, i64, i64), (usize, S, S, S)> = BTreeMap::new();
    let key = |v: S| (v / width).floor().f64() as i64;
    for z in states {
        let e = bins.entry((key(z.x), key(z.p), key(z.u))).or_insert((0, S::zero(), S::zero(), S::zero()));
        e.0 += 1;
        e.1 += z.x;
        e.2 += z.p;
        e.3 += z.u;
    }
    let total = S::from_usize_lossy(states.len());
    bins.into_values()
        .map(|(c, sx, sp, su)| {
            let k = S::from_usize_lossy(c);
            (ContactState::new(sx / k, sp / k, su / k), k / total)
        })
        .collect()
}

/// Birkhoff average of the orbit from `z0`: the flow is run for `t_burn`,
/// then `t_avg` worth of samples are binned into cells of width `2π/n_bins`.
/// A detected periodic orbit is averaged over a whole number of periods.
pub fn occupation_measure<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    z0: ContactState<S>,
    cfg: &AveragingConfig<S>,
) -> Result<OccupationMeasure<S>> {
    let start = flow_endpoint(model, z0, cfg.t_burn, cfg.dt)?;
    let steps = (cfg.t_avg / cfg.dt).round().f64() as usize;
    let cap = S::lit(DEFAULT_BLOWUP_CAP);
    let mut states = Vec::with_capacity(steps);
    let mut z = start;
    for k in 0..steps {
        states.push(z);
        z = rk4_step(model, &z, cfg.dt);
        if !z.is_finite() || z.p.abs() > cap || z.u.abs() > cap {
            return Err(crate::Error::Diverged {
                t: (cfg.t_burn + cfg.dt * S::from_usize_lossy(k + 1)).f64(),
                p: z.p.abs().f64(),
                u: z.u.abs().f64(),
            });
        }
    }

    let leave = S::lit(10.0) * cfg.rec_tol;
    let dist: Vec<S> = states.iter().map(|s| s.distance(&start)).collect();
    let left = dist.iter().position(|&d| d > leave);
    let mut return_distance = None;
    let mut period = None;
    let mut used = states.len();
    let mut kind = MeasureKind::Birkhoff;
    match left {
        None => kind = MeasureKind::Dirac,
        Some(k_left) => {
            let back = (k_left..dist.len()).find(|&k| dist[k] <= cfg.rec_tol);
            let tail_min = dist[k_left..].iter().copied().fold(S::infinity(), S::min);
            return_distance = Some(tail_min);
            if let Some(mut j) = back {
                while j + 1 < dist.len() && dist[j + 1] < dist[j] {
                    j += 1;
                }
                // parabola through the squared distances around the closest return
                let mut shift = S::zero();
                if j > 0 && j + 1 < dist.len() {
                    let sq = |k: usize| dist[k] * dist[k];
                    let (a, b, c) = (sq(j - 1), sq(j), sq(j + 1));
                    let den = a - S::lit(2.0) * b + c;
                    if den > S::zero() {
                        shift = (a - c) / (S::lit(2.0) * den);
                    }
                }
                let p = cfg.dt * (S::from_usize_lossy(j) + shift);
                let n_periods = (cfg.t_avg / p).floor();
                if n_periods >= S::one() {
                    period = Some(p);
                    used = ((n_periods * p / cfg.dt).round().f64() as usize).clamp(1, states.len());
                    kind = MeasureKind::Periodic;
                }
            }
        }
    }
    let width = S::two_pi() / S::from_usize_lossy(cfg.n_bins.max(1));
    let atoms = if kind == MeasureKind::Dirac {
        let k = S::from_usize_lossy(states.len());
        let mean = |f: fn(&ContactState<S>) -> S| states.iter().map(f).sum::<S>() / k;
        vec![(ContactState::new(mean(|z| z.x), mean(|z| z.p), mean(|z| z.u)), S::one())]
    } else {
        bin_states(&states[..used], width)
    };
    Ok(OccupationMeasure {
        atoms,
        seed: z0,
        t_burn: cfg.t_burn,
        t_avg: cfg.t_avg,
        dt: cfg.dt,
        kind,
        return_distance,
        period,
    })
}

/// Settings for [`measure_ensemble`].
#[derive(Debug, Clone, Copy)]
pub struct EnsembleConfig<S> {
    pub averaging: AveragingConfig<S>,
    pub n_seeds: usize,
    pub fp_tol: S,
    pub graph_tol: S,
    pub dist_tol: S,
    pub dedupe_tol: S,
}

#[derive(Debug, Clone)]
pub struct EnsembleMember<S> {
    pub measure: OccupationMeasure<S>,
    pub hu_average: S,
    /// Fixed-point Diracs, the extreme-point candidates of the family.
    pub extreme_candidate: bool,
}

impl<S: Real> EnsembleMember<S> {
    pub fn kind(&self) -> MeasureKind {
        self.measure.kind
    }
}

fn norm3<S: Real>(v: [S; 3]) -> S {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve3<S: Real>(mut a: [[S; 3]; 3], mut b: [S; 3]) -> Option<[S; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[piv][col].abs() < S::lit(1e-12) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let t = a[col][k];
                a[row][k] -= f * t;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [S::zero(); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Newton iteration on the vector field with a finite-difference Jacobian;
/// stops early on a singular Jacobian.
pub fn polish_fixed_point<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    z: ContactState<S>,
    iters: usize,
) -> ContactState<S> {
    let h = S::lit(1e-6);
    let mut z = z;
    for _ in 0..iters {
        let f = vector_field(model, &z);
        if norm3(f) < S::lit(1e-14) {
            break;
        }
        let mut jac = [[S::zero(); 3]; 3];
        for c in 0..3 {
            let bump = |s: S| {
                let mut q = [z.x, z.p, z.u];
                q[c] += s;
                vector_field(model, &ContactState { x: q[0], p: q[1], u: q[2] })
            };
            let (fp, fm) = (bump(h), bump(-h));
            for r in 0..3 {
                jac[r][c] = (fp[r] - fm[r]) / (h + h);
            }
        }
        let Some(step) = solve3(jac, [-f[0], -f[1], -f[2]]) else {
            break;
        };
        z = ContactState::new(z.x + step[0], z.p + step[1], z.u + step[2]);
    }
    z
}

/// Fixed points of the flow on or near the graph: atoms where the vector
/// field already vanishes, and Newton-polished local minima of its norm.
pub fn graph_fixed_points<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    graph: &GraphSample<S>,
    fp_tol: S,
    graph_tol: S,
    dist_tol: S,
) -> Vec<ContactState<S>> {
    let n = graph.len();
    let norms: Vec<S> = graph.atoms.iter().map(|z| norm3(vector_field(model, z))).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let z = graph.atoms[i];
        if norms[i] <= fp_tol {
            out.push(z);
            continue;
        }
        let prev = norms[(i + n - 1) % n];
        let next = norms[(i + 1) % n];
        if n >= 3 && norms[i] <= prev && norms[i] <= next && norms[i] <= S::lit(10.0) * graph_tol {
            let q = polish_fixed_point(model, z, 8);
            if norm3(vector_field(model, &q)) <= fp_tol && graph.distance_to(&q) <= dist_tol {
                out.push(q);
            }
        }
    }
    out
}

fn same_signature<S: Real>(a: &[S; 7], b: &[S; 7], tol: S) -> bool {
    a.iter().zip(b).all(|(x, y)| (*x - *y).abs() <= tol)
}

/// Invariant measures supported near the Mañé sample: Diracs at fixed points,
/// periodic-orbit measures and Birkhoff averages from seeds spread over it.
pub fn measure_ensemble<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    mane: &GraphSample<S>,
    cfg: &EnsembleConfig<S>,
) -> Vec<EnsembleMember<S>> {
    let mut members: Vec<EnsembleMember<S>> = Vec::new();
    let mut signatures: Vec<[S; 7]> = Vec::new();
    for z in graph_fixed_points(model, mane, cfg.fp_tol, cfg.graph_tol, cfg.dist_tol) {
        if members.iter().any(|m| m.measure.atoms[0].0.distance(&z) <= cfg.dedupe_tol) {
            continue;
        }
        let mu = OccupationMeasure::dirac(z);
        signatures.push(mu.signature(model));
        members.push(EnsembleMember { hu_average: hu_average(model, &mu), measure: mu, extreme_candidate: true });
    }
    let n = mane.len();
    let k = cfg.n_seeds.clamp(1, n.max(1));
    let seeds: Vec<ContactState<S>> = (0..k).map(|j| mane.atoms[j * n / k]).collect();
    let averaged: Vec<OccupationMeasure<S>> = seeds
        .par_iter()
        .filter_map(|&z| occupation_measure(model, z, &cfg.averaging).ok())
        .collect();
    for mu in averaged {
        let sig = mu.signature(model);
        if signatures.iter().any(|s| same_signature(s, &sig, cfg.dedupe_tol)) {
            continue;
        }
        signatures.push(sig);
        members.push(EnsembleMember { hu_average: hu_average(model, &mu), measure: mu, extreme_candidate: false });
    }
    members
}

/// Writes `seed_x,seed_p,seed_u,kind,hu_average` rows.
pub fn write_ensemble_csv<S: Real>(members: &[EnsembleMember<S>], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "seed_x,seed_p,seed_u,kind,hu_average")?;
    for m in members {
        let z = m.measure.seed;
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{},{:.12e}",
            z.x.f64(),
            z.p.f64(),
            z.u.f64(),
            m.kind().label(),
            m.hu_average.f64()
        )?;
    }
    Ok(())
}

/// Averages of `∂H/∂u` over an ensemble and the sign criteria they support.
#[derive(Debug, Clone)]
pub struct CriterionReport<S> {
    pub averages: Vec<S>,
    pub a_min: S,
    pub a_max: S,
    pub diracs: Vec<(ContactState<S>, S)>,
    /// Every average is positive beyond `crit_tol`.
    pub a1: bool,
    /// Some average is negative beyond `crit_tol`.
    pub a2: bool,
}

impl<S: Real> CriterionReport<S> {
    pub fn new(ensemble: &[EnsembleMember<S>], crit_tol: S) -> Self {
        let averages: Vec<S> = ensemble.iter().map(|m| m.hu_average).collect();
        let a_min = averages.iter().copied().fold(S::infinity(), S::min);
        let a_max = averages.iter().copied().fold(S::neg_infinity(), S::max);
        let diracs = ensemble
            .iter()
            .filter(|m| m.extreme_candidate)
            .map(|m| (m.measure.atoms[0].0, m.hu_average))
            .collect();
        Self { a1: a_min > crit_tol, a2: a_min < -crit_tol, averages, a_min, a_max, diracs }
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "quantity,value")?;
        writeln!(out, "A_min,{:.12e}", self.a_min.f64())?;
        writeln!(out, "A_max,{:.12e}", self.a_max.f64())?;
        writeln!(out, "n_measures,{}", self.averages.len())?;
        writeln!(out, "n_diracs,{}", self.diracs.len())?;
        writeln!(out, "A1,{}", self.a1)?;
        writeln!(out, "A2,{}", self.a2)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
    Critical,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Self::AsymptoticallyStable => "asymptotically_stable",
            Self::Unstable => "unstable",
            Self::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport<S> {
    pub verdict: Stability,
    /// Decay rate `A = A_min` when asymptotically stable.
    pub rate: Option<S>,
    pub witness: Option<EnsembleMember<S>>,
    pub criteria: CriterionReport<S>,
}

/// Stable if every average exceeds `crit_tol`, unstable if one falls below
/// `-crit_tol`, critical otherwise.
pub fn classify_stability<S: Real>(ensemble: &[EnsembleMember<S>], crit_tol: S) -> StabilityReport<S> {
    let criteria = CriterionReport::new(ensemble, crit_tol);
    if ensemble.is_empty() {
        return StabilityReport { verdict: Stability::Critical, rate: None, witness: None, criteria };
    }
    if criteria.a1 {
        return StabilityReport {
            verdict: Stability::AsymptoticallyStable,
            rate: Some(criteria.a_min),
            witness: None,
            criteria,
        };
    }
    if criteria.a2 {
        let witness = ensemble
            .iter()
            .min_by(|a, b| a.hu_average.partial_cmp(&b.hu_average).expect("finite averages"))
            .cloned();
        return StabilityReport { verdict: Stability::Unstable, rate: None, witness, criteria };
    }
    StabilityReport { verdict: Stability::Critical, rate: None, witness: None, criteria }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessVerdict {
    UniqueByA3,
    UniqueByReversibleCriterion,
    UniqueByLieCriterion,
    Inconclusive,
}

impl UniquenessVerdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::UniqueByA3 => "unique_by_A3",
            Self::UniqueByReversibleCriterion => "unique_by_reversible_criterion",
            Self::UniqueByLieCriterion => "unique_by_lie_criterion",
            Self::Inconclusive => "inconclusive",
        }
    }

    pub fn is_unique(self) -> bool {
        self != Self::Inconclusive
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniquenessConfig<S> {
    pub u_cap: S,
    pub grid: usize,
    pub crit_tol: S,
    pub lie_tol: S,
    pub b_tol: S,
}

impl<S: Real> Default for UniquenessConfig<S> {
    fn default() -> Self {
        Self {
            u_cap: S::lit(4.0),
            grid: 256,
            crit_tol: S::lit(1e-2),
            lie_tol: S::lit(1e-4),
            b_tol: S::lit(1e-6),
        }
    }
}

/// A point of `{H(x,0,u) = ∂H/∂x(x,0,u) = 0}` with `∂H/∂u` there.
#[derive(Debug, Clone, Copy)]
pub struct BPoint<S> {
    pub x: S,
    pub u: S,
    pub du: S,
}

/// A point of the energy level where `F = ∂H/∂u` and `𝔏F` vanish, with `𝔏²F`.
#[derive(Debug, Clone, Copy)]
pub struct DegeneratePoint<S> {
    pub z: ContactState<S>,
    pub lie2: S,
}

#[derive(Debug, Clone)]
pub struct UniquenessReport<S> {
    pub verdict: UniquenessVerdict,
    pub e_samples: usize,
    pub e_skipped: usize,
    pub min_du: S,
    pub b_points: Vec<BPoint<S>>,
    /// Least `F² + (𝔏F)² + (𝔏²F)²` over the samples, if the route ran.
    pub lie_min: Option<S>,
    pub degenerate: Vec<DegeneratePoint<S>>,
    /// Distinct limits among the supplied stationary results.
    pub distinct_solutions: usize,
}

/// All roots of `f` on `[lo, hi]` by a uniform scan and bisection.
pub fn scan_roots<S: Real>(lo: S, hi: S, cells: usize, f: impl Fn(S) -> S) -> Vec<S> {
    let h = (hi - lo) / S::from_usize_lossy(cells);
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    if fa == S::zero() {
        roots.push(a);
    }
    for k in 1..=cells {
        let b = lo + h * S::from_usize_lossy(k);
        let fb = f(b);
        if fb == S::zero() {
            roots.push(b);
        } else if fa * fb < S::zero() {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..80 {
                let m = (l + r) / S::lit(2.0);
                let fm = f(m);
                if fm == S::zero() {
                    l = m;
                    r = m;
                    break;
                }
                if (fm < S::zero()) == (fl < S::zero()) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            roots.push((l + r) / S::lit(2.0));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Momenta `p` with `H(x, p, u) = 0`, lower root first.
pub fn momentum_roots<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, x: S, u: S) -> Vec<S> {
    let Ok(lv) = model.lagrangian(x, S::zero(), u) else {
        return Vec::new();
    };
    let p0 = lv.argmax_p;
    let hmin = model.eval(x, p0, u);
    if hmin > S::zero() {
        return Vec::new();
    }
    if hmin == S::zero() {
        return vec![p0];
    }
    let side = |dir: S| {
        let mut w = model.p_window().max(S::one());
        let mut far = p0 + dir * w;
        let mut guard = 0;
        while model.eval(x, far, u) <= S::zero() && guard < 60 {
            w = w * S::lit(2.0);
            far = p0 + dir * w;
            guard += 1;
        }
        let (mut a, mut b) = (p0, far);
        for _ in 0..100 {
            let m = (a + b) / S::lit(2.0);
            if model.eval(x, m, u) <= S::zero() {
                a = m;
            } else {
                b = m;
            }
        }
        (a + b) / S::lit(2.0)
    };
    vec![side(-S::one()), side(S::one())]
}

/// Samples of the energy level `{H = 0}`: `u`-roots over an `(x, p)` grid and
/// `p`-roots over an `(x, u)` grid. Returns the samples and the number of
/// `(x, p)` cells without a root in the value window.
pub fn sample_energy_level<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    cfg: &UniquenessConfig<S>,
) -> (Vec<ContactState<S>>, usize) {
    let n = cfg.grid.max(4);
    let pw = model.p_window();
    let xs: Vec<S> = (0..n).map(|i| S::two_pi() * S::from_usize_lossy(i) / S::from_usize_lossy(n)).collect();
    let rows: Vec<(Vec<ContactState<S>>, usize)> = xs
        .par_iter()
        .map(|&x| {
            let mut pts = Vec::new();
            let mut skipped = 0;
            for j in 0..n {
                let p = -pw + S::lit(2.0) * pw * S::from_usize_lossy(j) / S::from_usize_lossy(n - 1);
                let roots = scan_roots(-cfg.u_cap, cfg.u_cap, 64, |u| model.eval(x, p, u));
                if roots.is_empty() {
                    skipped += 1;
                }
                pts.extend(roots.into_iter().map(|u| ContactState::new(x, p, u)));
            }
            for k in 0..n {
                let u = -cfg.u_cap + S::lit(2.0) * cfg.u_cap * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1);
                pts.extend(momentum_roots(model, x, u).into_iter().map(|p| ContactState::new(x, p, u)));
            }
            (pts, skipped)
        })
        .collect();
    let skipped = rows.iter().map(|r| r.1).sum();
    (rows.into_iter().flat_map(|r| r.0).collect(), skipped)
}

/// Points of `{(x, u) : H(x,0,u) = ∂H/∂x(x,0,u) = 0}` found per `x` node and
/// by bisection in `x` where `∂H/∂x` changes sign along a root branch.
pub fn find_b_set<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, cfg: &UniquenessConfig<S>) -> Vec<BPoint<S>> {
    let n = cfg.grid.max(4);
    let x_at = |i: usize| S::two_pi() * S::from_usize_lossy(i) / S::from_usize_lossy(n);
    let roots_at = |x: S| scan_roots(-cfg.u_cap, cfg.u_cap, 512, |u| model.eval(x, S::zero(), u));
    let branches: Vec<Vec<S>> = (0..n).map(|i| roots_at(x_at(i))).collect();
    let hx = |x: S, u: S| model.d_x(x, S::zero(), u);
    let mut out = Vec::new();
    let push = |out: &mut Vec<BPoint<S>>, x: S, u: S| {
        out.push(BPoint { x, u, du: model.d_u(x, S::zero(), u) });
    };
    for i in 0..n {
        let x = x_at(i);
        for &u in &branches[i] {
            if hx(x, u).abs() <= cfg.b_tol {
                push(&mut out, x, u);
                continue;
            }
            // follow the nearest root at the next node
            let next = &branches[(i + 1) % n];
            let x1 = x + S::two_pi() / S::from_usize_lossy(n);
            let Some(&u1) = next.iter().min_by(|a, b| (**a - u).abs().partial_cmp(&(**b - u).abs()).expect("finite")) else {
                continue;
            };
            if hx(x1, u1).abs() <= cfg.b_tol || hx(x, u) * hx(x1, u1) >= S::zero() {
                continue;
            }
            let root_near = |xm: S, guess: S| {
                roots_at(xm)
                    .into_iter()
                    .min_by(|a, b| (*a - guess).abs().partial_cmp(&(*b - guess).abs()).expect("finite"))
            };
            let (mut a, mut b, mut ua) = (x, x1, u);
            let mut found = None;
            for _ in 0..50 {
                let m = (a + b) / S::lit(2.0);
                let Some(um) = root_near(m, ua) else { break };
                found = Some((m, um));
                if (hx(m, um) < S::zero()) == (hx(a, ua) < S::zero()) {
                    a = m;
                    ua = um;
                } else {
                    b = m;
                }
            }
            if let Some((xm, um)) = found {
                if hx(xm, um).abs() <= cfg.b_tol && model.eval(xm, S::zero(), um).abs() <= cfg.b_tol {
                    push(&mut out, xm.wrap_angle(), um);
                }
            }
        }
    }
    out
}

fn lie_terms<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, z: &ContactState<S>) -> [S; 3] {
    let f = |q: &ContactState<S>| model.d_u(q.x, q.p, q.u);
    [f(z), lie_derivative(model, &f, z, 1), lie_derivative(model, &f, z, 2)]
}

/// Points of the energy level where `∂H/∂u` and its first Lie derivative
/// vanish: local minima of `F² + (𝔏F)²` along `x` for each value row of the
/// `(x, u)` parametrization, refined by golden section in `x`.
pub fn degenerate_points<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    cfg: &UniquenessConfig<S>,
) -> Vec<DegeneratePoint<S>> {
    let n = cfg.grid.max(4);
    let dx = S::two_pi() / S::from_usize_lossy(n);
    let us: Vec<S> = (0..n)
        .map(|k| -cfg.u_cap + S::lit(2.0) * cfg.u_cap * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1))
        .collect();
    let point = |x: S, u: S, branch: usize| -> Option<ContactState<S>> {
        let r = momentum_roots(model, x, u);
        let p = *r.get(branch.min(r.len().saturating_sub(1)))?;
        Some(ContactState::new(x, p, u))
    };
    let g_of = |z: &ContactState<S>| {
        let t = lie_terms(model, z);
        t[0] * t[0] + t[1] * t[1]
    };
    us.par_iter()
        .flat_map_iter(|&u| {
            let mut found = Vec::new();
            for branch in 0..2 {
                let g: Vec<Option<S>> = (0..n)
                    .map(|i| point(dx * S::from_usize_lossy(i), u, branch).map(|z| g_of(&z)))
                    .collect();
                for i in 0..n {
                    let Some(gi) = g[i] else { continue };
                    let prev = g[(i + n - 1) % n].unwrap_or(S::infinity());
                    let next = g[(i + 1) % n].unwrap_or(S::infinity());
                    if !(gi <= prev && gi <= next && gi <= S::lit(1e-2)) {
                        continue;
                    }
                    let x0 = dx * S::from_usize_lossy(i);
                    let obj = |x: S| point(x, u, branch).map(|z| g_of(&z)).unwrap_or(S::infinity());
                    let (xr, gr) = golden(x0 - dx, x0 + dx, obj);
                    if gr <= S::lit(1e-10) {
                        if let Some(z) = point(xr, u, branch) {
                            found.push(DegeneratePoint { z, lie2: lie_terms(model, &z)[2] });
                        }
                    }
                }
            }
            found
        })
        .collect()
}

fn golden<S: Real>(lo: S, hi: S, f: impl Fn(S) -> S) -> (S, S) {
    let r = S::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn count_distinct<S: Real>(solutions: &[StationaryResult<S>], tol: S) -> usize {
    let mut reps: Vec<&StationaryResult<S>> = Vec::new();
    for s in solutions.iter().filter(|s| s.converged) {
        if !reps.iter().any(|r| r.solution.n() == s.solution.n() && r.solution.sup_distance(&s.solution) <= tol) {
            reps.push(s);
        }
    }
    reps.len()
}

/// Tries the uniqueness routes in turn: `∂H/∂u > 0` on the whole energy
/// level, then the reversible criterion on `{H = ∂H/∂x = 0, p = 0}`, then
/// the Lie-derivative criterion.
pub fn uniqueness_check<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    solutions: &[StationaryResult<S>],
    cfg: &UniquenessConfig<S>,
) -> UniquenessReport<S> {
    let (samples, e_skipped) = sample_energy_level(model, cfg);
    let min_du = samples.iter().map(|z| model.d_u(z.x, z.p, z.u)).fold(S::infinity(), S::min);
    let mut report = UniquenessReport {
        verdict: UniquenessVerdict::Inconclusive,
        e_samples: samples.len(),
        e_skipped,
        min_du,
        b_points: Vec::new(),
        lie_min: None,
        degenerate: Vec::new(),
        distinct_solutions: count_distinct(solutions, S::lit(10.0) * cfg.crit_tol),
    };
    if !samples.is_empty() && min_du > cfg.crit_tol {
        report.verdict = UniquenessVerdict::UniqueByA3;
        return report;
    }
    if model.reversible() {
        report.b_points = find_b_set(model, cfg);
        if !report.b_points.is_empty() && report.b_points.iter().all(|b| b.du > cfg.crit_tol) {
            report.verdict = UniquenessVerdict::UniqueByReversibleCriterion;
            return report;
        }
    }
    if min_du < -cfg.crit_tol || samples.is_empty() {
        return report;
    }
    report.degenerate = degenerate_points(model, cfg);
    let sums: Vec<S> = samples
        .par_iter()
        .map(|z| {
            let t = lie_terms(model, z);
            t[0] * t[0] + t[1] * t[1] + t[2] * t[2]
        })
        .collect();
    let deg_min = report
        .degenerate
        .iter()
        .map(|d| d.lie2 * d.lie2)
        .fold(S::infinity(), S::min);
    let lie_min = sums.into_iter().fold(S::infinity(), S::min).min(deg_min);
    report.lie_min = Some(lie_min);
    if lie_min > cfg.lie_tol {
        report.verdict = UniquenessVerdict::UniqueByLieCriterion;
    }
    report
}
