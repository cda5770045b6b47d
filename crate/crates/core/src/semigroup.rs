//! Semi-Lagrangian discretization of the backward and forward solution
//! semigroups `T⁻_t`, `T⁺_t` on a periodic grid, and implicit action functions.
//!
//! One backward step at node `x` is
//!
//! ```text
//! w⁺(x) = min_v [ I(w)(x - v dt) + dt · L(x, v, w⁺(x)) ]
//! ```
//!
//! with the self-referential value resolved by a few Picard rounds, and one
//! forward step is its adjoint
//!
//! ```text
//! w⁺(x) = max_v [ I(w)(y) - dt · L(y, v, I(w)(y)) ],   y = x + v dt,
//! ```
//!
//! where `I` is periodic linear interpolation.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{rk4_step, ContactState};
use crate::grid::GridFunction;
use crate::hamiltonians::Hamiltonian;
use crate::scalar::Real;

/// Evolutions whose sup-norm exceeds this are reported as diverged.
pub const DEFAULT_GRID_CAP: f64 = 1e6;

/// Golden-section iterations of the velocity refinement.
const REFINE_ITERS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

/// Time step, velocity candidates and in-step fixed-point rounds.
#[derive(Debug, Clone)]
pub struct StepScheme<S> {
    pub dt: S,
    /// Symmetric candidate set `{-V, ..., V}` with an odd number of entries.
    pub velocities: Vec<S>,
    pub picard_iters: usize,
}

impl<S: Real> StepScheme<S> {
    /// Builds a scheme with `m` candidates over `±V`, where `V` is the largest
    /// speed `|∂H/∂p|` reached by slopes up to `lip_cap` in the value window.
    pub fn for_model<M: Hamiltonian<S> + ?Sized>(
        model: &M,
        dt: S,
        m: usize,
        lip_cap: S,
        u_cap: S,
        picard_iters: usize,
    ) -> Result<Self> {
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::InvalidScheme(format!("velocity grid size {m} must be odd and >= 3")));
        }
        let vmax = speed_bound(model, lip_cap, u_cap);
        let scheme = Self::with_vmax(dt, m, vmax, picard_iters);
        scheme.validate(model)?;
        Ok(scheme)
    }

    pub fn with_vmax(dt: S, m: usize, vmax: S, picard_iters: usize) -> Self {
        let half = (m.max(1) / 2) as isize;
        let h = if half == 0 { S::zero() } else { vmax / S::lit(half as f64) };
        let velocities = (-half..=half).map(|k| h * S::lit(k as f64)).collect();
        Self { dt, velocities, picard_iters }
    }

    pub fn vmax(&self) -> S {
        *self.velocities.last().expect("non-empty velocity grid")
    }

    pub fn velocity_spacing(&self) -> S {
        if self.velocities.len() < 2 {
            S::zero()
        } else {
            self.velocities[1] - self.velocities[0]
        }
    }

    /// Checks `dt·λ < ½`, `V·dt ≤ π` and the shape of the candidate set.
    pub fn validate<M: Hamiltonian<S> + ?Sized>(&self, model: &M) -> Result<()> {
        let m = self.velocities.len();
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::InvalidScheme(format!("velocity grid size {m} must be odd and >= 3")));
        }
        if !(self.dt > S::zero()) {
            return Err(Error::InvalidScheme(format!("dt = {} must be positive", self.dt)));
        }
        if self.dt * model.lambda_bound() >= S::lit(0.5) {
            return Err(Error::InvalidScheme(format!(
                "dt·λ = {} must stay below 1/2",
                self.dt * model.lambda_bound()
            )));
        }
        if self.vmax() * self.dt > S::PI() {
            return Err(Error::InvalidScheme(format!(
                "V·dt = {} exceeds half the circle",
                self.vmax() * self.dt
            )));
        }
        if self.picard_iters == 0 {
            return Err(Error::InvalidScheme("picard_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// `max |∂H/∂p(x, ±lip_cap, u)|` over sampled `x` and `u ∈ {-u_cap, 0, u_cap}`.
pub fn speed_bound<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, lip_cap: S, u_cap: S) -> S {
    let mut v = S::zero();
    for i in 0..32 {
        let x = S::two_pi() * S::lit(i as f64 / 32.0);
        for u in [-u_cap, S::zero(), u_cap] {
            for p in [-lip_cap, lip_cap] {
                v = v.max(model.d_p(x, p, u).abs());
            }
        }
    }
    v
}

/// New node values together with the optimal velocity at each node.
#[derive(Debug, Clone)]
pub struct StepOutput<S> {
    pub grid: GridFunction<S>,
    pub velocity: Vec<S>,
}

fn lagrangian_value<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, x: S, v: S, u: S) -> S {
    match model.lagrangian(x, v, u) {
        Ok(l) if l.value.is_finite() => l.value,
        _ => S::infinity(),
    }
}

/// Minimizes `f` on `[lo, hi]` by golden section, returning the best point
/// found together with its value.
fn golden_min<S: Real>(lo: S, hi: S, f: impl Fn(S) -> S) -> (S, S) {
    let r = S::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..REFINE_ITERS {
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

/// Candidate velocities at one node: the scheme grid, the characteristic
/// speed of the current data and the speeds whose foot point is a node.
fn candidates<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    w: &GridFunction<S>,
    slope: S,
    i: usize,
) -> Vec<S> {
    let vmax = scheme.vmax();
    let mut out = scheme.velocities.clone();
    let x = w.node(i);
    let vc = model.d_p(x, slope, w.values()[i]);
    if vc.is_finite() {
        out.push(vc.max(-vmax).min(vmax));
    }
    let cell = w.dx() / scheme.dt;
    let reach = (vmax / cell).floor().f64() as isize;
    for j in 1..=reach.min(64) {
        let v = cell * S::lit(j as f64);
        out.push(v);
        out.push(-v);
    }
    out
}

fn refine_window<S: Real>(scheme: &StepScheme<S>, v: S) -> (S, S) {
    let dv = scheme.velocity_spacing();
    let vmax = scheme.vmax();
    ((v - dv).max(-vmax), (v + dv).min(vmax))
}

/// One step of the discrete backward semigroup.
pub fn backward_step<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    w: &GridFunction<S>,
) -> GridFunction<S> {
    backward_step_full(model, scheme, w).grid
}

pub fn backward_step_full<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    w: &GridFunction<S>,
) -> StepOutput<S> {
    let dt = scheme.dt;
    let grad = w.gradient();
    let nodes: Vec<(S, S)> = (0..w.n())
        .into_par_iter()
        .map(|i| {
            let x = w.node(i);
            let cands = candidates(model, scheme, w, grad.values[i], i);
            let feet: Vec<S> = cands.iter().map(|&v| w.interp(x - v * dt)).collect();
            let lag = model.lagrangian_at(x);
            let mut u = w.values()[i];
            let mut best_v = S::zero();
            let rounds = scheme.picard_iters;
            for round in 0..rounds {
                if round > 0 && model.separable() {
                    // the optimal velocity does not move with the value
                    u = w.interp(x - best_v * dt) + dt * lag(best_v, u);
                    continue;
                }
                let obj = |v: S| w.interp(x - v * dt) + dt * lag(v, u);
                let (mut bv, mut bf) = (S::zero(), S::infinity());
                for (&v, &foot) in cands.iter().zip(&feet) {
                    let f = foot + dt * lag(v, u);
                    if f < bf {
                        bf = f;
                        bv = v;
                    }
                }
                let (lo, hi) = refine_window(scheme, bv);
                let (rv, rf) = golden_min(lo, hi, obj);
                if rf < bf {
                    bf = rf;
                    bv = rv;
                }
                u = bf;
                best_v = bv;
            }
            (u, best_v)
        })
        .collect();
    let (values, velocity) = nodes.into_iter().unzip();
    StepOutput { grid: GridFunction::from_raw(values), velocity }
}

/// One step of the discrete forward semigroup.
pub fn forward_step<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    w: &GridFunction<S>,
) -> GridFunction<S> {
    forward_step_full(model, scheme, w).grid
}

pub fn forward_step_full<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    w: &GridFunction<S>,
) -> StepOutput<S> {
    let dt = scheme.dt;
    let grad = w.gradient();
    let nodes: Vec<(S, S)> = (0..w.n())
        .into_par_iter()
        .map(|i| {
            let x = w.node(i);
            // maximize by minimizing the negated objective
            let neg = |v: S| {
                let y = x + v * dt;
                let head = w.interp(y);
                dt * lagrangian_value(model, y, v, head) - head
            };
            let (mut bv, mut bf) = (S::zero(), S::infinity());
            for v in candidates(model, scheme, w, grad.values[i], i) {
                let f = neg(v);
                if f < bf {
                    bf = f;
                    bv = v;
                }
            }
            let (lo, hi) = refine_window(scheme, bv);
            let (rv, rf) = golden_min(lo, hi, neg);
            if rf < bf {
                bf = rf;
                bv = rv;
            }
            (-bf, bv)
        })
        .collect();
    let (values, velocity) = nodes.into_iter().unzip();
    StepOutput { grid: GridFunction::from_raw(values), velocity }
}

pub fn step<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    direction: Direction,
    w: &GridFunction<S>,
) -> GridFunction<S> {
    match direction {
        Direction::Backward => backward_step(model, scheme, w),
        Direction::Forward => forward_step(model, scheme, w),
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot<S> {
    pub t: S,
    pub grid: GridFunction<S>,
    pub distance: Option<S>,
}

/// One row of the evolution log.
#[derive(Debug, Clone, Copy)]
pub struct LogEntry<S> {
    pub t: S,
    pub sup_norm: S,
    pub distance: Option<S>,
}

#[derive(Debug, Clone)]
pub struct Evolution<S> {
    pub snapshots: Vec<Snapshot<S>>,
    pub log: Vec<LogEntry<S>>,
}

impl<S: Real> Evolution<S> {
    pub fn final_grid(&self) -> &GridFunction<S> {
        &self.snapshots.last().expect("evolution has snapshots").grid
    }

    /// Writes `t,sup_norm,distance_to_reference` rows.
    pub fn write_log_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "t,sup_norm,distance_to_reference")?;
        for e in &self.log {
            match e.distance {
                Some(d) => writeln!(out, "{:.12e},{:.12e},{:.12e}", e.t.f64(), e.sup_norm.f64(), d.f64())?,
                None => writeln!(out, "{:.12e},{:.12e},", e.t.f64(), e.sup_norm.f64())?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions<'a, S> {
    pub direction: Direction,
    /// Keep a snapshot every this many steps (the final state is always kept).
    pub record_every: usize,
    pub reference: Option<&'a GridFunction<S>>,
    pub cap: S,
}

impl<'a, S: Real> EvolveOptions<'a, S> {
    pub fn backward(record_every: usize) -> Self {
        Self {
            direction: Direction::Backward,
            record_every,
            reference: None,
            cap: S::lit(DEFAULT_GRID_CAP),
        }
    }

    pub fn forward(record_every: usize) -> Self {
        Self { direction: Direction::Forward, ..Self::backward(record_every) }
    }

    pub fn with_reference(mut self, reference: &'a GridFunction<S>) -> Self {
        self.reference = Some(reference);
        self
    }
}

/// Iterates `round(t/dt)` steps from `phi`, logging sup-norms and the
/// distance to an optional reference.
pub fn evolve<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    phi: &GridFunction<S>,
    t: S,
    opts: &EvolveOptions<'_, S>,
) -> Result<Evolution<S>> {
    if !(t > S::zero()) {
        return Err(Error::InvalidConfig(format!("evolution horizon {t} must be positive")));
    }
    let steps = (t / scheme.dt).round().f64() as usize;
    let every = opts.record_every.max(1);
    let dist = |g: &GridFunction<S>| opts.reference.map(|r| g.sup_distance(r));
    let mut w = phi.clone();
    let mut snapshots = vec![Snapshot { t: S::zero(), grid: w.clone(), distance: dist(&w) }];
    let mut log = vec![LogEntry { t: S::zero(), sup_norm: w.sup_norm(), distance: dist(&w) }];
    for k in 1..=steps {
        w = step(model, scheme, opts.direction, &w);
        let tk = scheme.dt * S::from_usize_lossy(k);
        let sup = w.sup_norm();
        if !sup.is_finite() || sup > opts.cap {
            return Err(Error::GridDiverged { t: tk.f64(), sup: sup.f64() });
        }
        if k % every == 0 || k == steps {
            log.push(LogEntry { t: tk, sup_norm: sup, distance: dist(&w) });
            snapshots.push(Snapshot { t: tk, grid: w.clone(), distance: dist(&w) });
        }
    }
    Ok(Evolution { snapshots, log })
}

/// Height of the needle cap used by [`action_function`].
pub fn needle_height<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, lip_cap: S, t: S) -> S {
    S::lit(4.0) * S::two_pi() * lip_cap * (model.lambda_bound() * t).exp()
}

fn needle<S: Real>(n: usize, x0: S, u0: S, rest: S) -> Result<GridFunction<S>> {
    let mut g = GridFunction::constant(n, rest)?;
    let i = g.nearest_node(x0);
    let mut v = g.into_values();
    v[i] = u0;
    g = GridFunction::new(v)?;
    Ok(g)
}

/// Grid approximation of `x ↦ h_{x0,u0}(x, t)`: backward evolution of a
/// needle equal to `u0` at the node nearest `x0` and to a large cap elsewhere.
pub fn action_function<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    n: usize,
    lip_cap: S,
    x0: S,
    u0: S,
    t: S,
) -> Result<GridFunction<S>> {
    check_action_horizon(scheme, t)?;
    let phi = needle(n, x0, u0, u0 + needle_height(model, lip_cap, t))?;
    Ok(evolve(model, scheme, &phi, t, &EvolveOptions::backward(usize::MAX))?.final_grid().clone())
}

/// Grid approximation of `x ↦ h^{x0,u0}(x, t)` by forward evolution of a
/// needle pointing down.
pub fn action_function_dual<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    n: usize,
    lip_cap: S,
    x0: S,
    u0: S,
    t: S,
) -> Result<GridFunction<S>> {
    check_action_horizon(scheme, t)?;
    let phi = needle(n, x0, u0, u0 - needle_height(model, lip_cap, t))?;
    Ok(evolve(model, scheme, &phi, t, &EvolveOptions::forward(usize::MAX))?.final_grid().clone())
}

/// Sup-norm change of both action functions when the needle cap is doubled.
/// The cap only has to exceed the true action, so a large value flags a cap
/// that is too low for the horizon.
pub fn cap_sensitivity<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    n: usize,
    lip_cap: S,
    x0: S,
    u0: S,
    t: S,
) -> Result<S> {
    check_action_horizon(scheme, t)?;
    let h = needle_height(model, lip_cap, t);
    let run = |rest: S, opts: EvolveOptions<'_, S>| -> Result<GridFunction<S>> {
        Ok(evolve(model, scheme, &needle(n, x0, u0, rest)?, t, &opts)?.final_grid().clone())
    };
    let back = run(u0 + h, EvolveOptions::backward(usize::MAX))?.sup_distance(&run(u0 + h + h, EvolveOptions::backward(usize::MAX))?);
    let fwd = run(u0 - h, EvolveOptions::forward(usize::MAX))?.sup_distance(&run(u0 - h - h, EvolveOptions::forward(usize::MAX))?);
    Ok(back.max(fwd))
}

fn check_action_horizon<S: Real>(scheme: &StepScheme<S>, t: S) -> Result<()> {
    if t < S::lit(10.0) * scheme.dt * (S::one() - S::epsilon()) {
        return Err(Error::InvalidConfig(format!("action horizon {t} is shorter than 10·dt")));
    }
    Ok(())
}

/// End point of the orbit from `(x0, p0, u0)` with `x` unwrapped.
fn shoot<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, x0: S, p0: S, u0: S, t: S, dt: S) -> Option<(S, S)> {
    let steps = (t / dt).ceil().f64().max(1.0) as usize;
    let h = t / S::from_usize_lossy(steps);
    let cap = S::lit(crate::flow::DEFAULT_BLOWUP_CAP);
    let mut z = ContactState::new(x0, p0, u0);
    let mut lifted = x0;
    for _ in 0..steps {
        let next = rk4_step(model, &z, h);
        if !next.is_finite() || next.p.abs() > cap || next.u.abs() > cap {
            return None;
        }
        lifted += next.x.angle_diff(z.x);
        z = next;
    }
    Some((lifted, z.u))
}

/// Brute-force `h_{x0,u0}(x, t)`: over initial momenta in `p_grid`, the least
/// final value `u(t)` among contact orbits from `(x0, p0, u0)` that land on
/// `x`, each landing momentum located by bisection between grid momenta.
pub fn shoot_action<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    x0: S,
    u0: S,
    x: S,
    t: S,
    p_grid: &[S],
    flow_dt: S,
) -> Result<S> {
    let shots: Vec<Option<(S, S)>> = p_grid.par_iter().map(|&p| shoot(model, x0, p, u0, t, flow_dt)).collect();
    let tau = S::two_pi();
    let base = x0 + x.angle_diff(x0);
    let mut best = S::infinity();
    for k in 0..p_grid.len().saturating_sub(1) {
        let (Some((xa, _)), Some((xb, _))) = (shots[k], shots[k + 1]) else {
            continue;
        };
        let lo = xa.min(xb);
        let hi = xa.max(xb);
        let m_lo = ((lo - base) / tau).ceil().f64() as i64;
        let m_hi = ((hi - base) / tau).floor().f64() as i64;
        for m in m_lo..=m_hi {
            let target = base + tau * S::lit(m as f64);
            let (mut a, mut b) = (p_grid[k], p_grid[k + 1]);
            let mut fa = xa - target;
            let mut hit = None;
            for _ in 0..60 {
                let mid = (a + b) / S::lit(2.0);
                let Some((xm, um)) = shoot(model, x0, mid, u0, t, flow_dt) else {
                    break;
                };
                hit = Some(um);
                let fm = xm - target;
                if (fm < S::zero()) == (fa < S::zero()) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
                if (b - a).abs() < S::lit(1e-12) {
                    break;
                }
            }
            if let Some(u) = hit {
                best = best.min(u);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::NoShotLands)
    }
}

/// `n` equally spaced momenta spanning `±p_window`.
pub fn momentum_grid<S: Real>(p_window: S, n: usize) -> Vec<S> {
    let n = n.max(2);
    (0..n)
        .map(|k| -p_window + S::lit(2.0) * p_window * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{AdvectedLinear, Discounted, SineCoupled};

    fn disc_scheme(dt: f64) -> (Discounted<f64>, StepScheme<f64>) {
        let m = Discounted::new(4.0);
        let s = StepScheme::for_model(&m, dt, 129, 10.0, 4.0, 3).unwrap();
        (m, s)
    }

    /// Forwards every hook except `separable`, forcing the Picard path.
    struct Generic<'a>(&'a dyn Hamiltonian<f64>);

    impl Hamiltonian<f64> for Generic<'_> {
        fn name(&self) -> String {
            self.0.name()
        }
        fn eval(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.eval(x, p, u)
        }
        fn d_x(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.d_x(x, p, u)
        }
        fn d_p(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.d_p(x, p, u)
        }
        fn d_u(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.d_u(x, p, u)
        }
        fn d_pp(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.d_pp(x, p, u)
        }
        fn lambda_bound(&self) -> f64 {
            self.0.lambda_bound()
        }
        fn p_window(&self) -> f64 {
            self.0.p_window()
        }
        fn lagrangian(&self, x: f64, v: f64, u: f64) -> Result<crate::hamiltonians::LagrangianValue<f64>> {
            self.0.lagrangian(x, v, u)
        }
        fn lagrangian_at<'b>(&'b self, x: f64) -> Box<dyn Fn(f64, f64) -> f64 + 'b> {
            self.0.lagrangian_at(x)
        }
    }

    #[test]
    fn separable_shortcut_matches_picard_loop() {
        let models: [Box<dyn Hamiltonian<f64>>; 2] =
            [Box::new(AdvectedLinear::new(1.0, 1.0, 4.0)), Box::new(Discounted::new(4.0))];
        for m in models {
            assert!(m.separable());
            let s = StepScheme::for_model(m.as_ref(), 1e-2, 129, 10.0, 4.0, 3).unwrap();
            let w = GridFunction::from_fn(128, |x: f64| 0.3 * x.sin() - 0.2 * (2.0 * x).cos()).unwrap();
            let fast = backward_step(m.as_ref(), &s, &w);
            let slow = backward_step(&Generic(m.as_ref()), &s, &w);
            assert!(fast.sup_distance(&slow) < 1e-9, "{}", m.name());
        }
    }

    #[test]
    fn scheme_validation() {
        let m = AdvectedLinear::<f64>::new(1.0, 1.0, 4.0);
        assert!(StepScheme::for_model(&m, 0.3, 129, 10.0, 4.0, 3).is_err());
        assert!(StepScheme::for_model(&m, 1e-2, 128, 10.0, 4.0, 3).is_err());
        assert!(StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 0).is_err());
        let s = StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 3).unwrap();
        assert!((s.vmax() - 11.0).abs() < 1e-12);
        assert_eq!(s.velocities.len(), 129);
        assert_eq!(s.velocities[64], 0.0);
    }

    #[test]
    fn constant_data_discounted_steps() {
        let (m, s) = disc_scheme(1e-3);
        let one = GridFunction::constant(256, 1.0).unwrap();
        let b = backward_step(&m, &s, &one);
        let f = forward_step(&m, &s, &one);
        for i in 0..256 {
            assert!((b.values()[i] - (-1e-3f64).exp()).abs() < 1e-6);
            assert!((f.values()[i] - 1e-3f64.exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn discounted_decay_to_one_over_e() {
        let (m, s) = disc_scheme(1e-3);
        let one = GridFunction::constant(256, 1.0).unwrap();
        let ev = evolve(&m, &s, &one, 1.0, &EvolveOptions::backward(100)).unwrap();
        assert_eq!(ev.snapshots.len(), 11);
        let err = ev.final_grid().values().iter().map(|v| (v - (-1.0f64).exp()).abs()).fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn zero_stays_zero_for_example3() {
        let m = AdvectedLinear::<f64>::new(0.0, 2.0, 4.0);
        let s = StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 3).unwrap();
        let mut w = GridFunction::constant(256, 0.0).unwrap();
        for _ in 0..20 {
            w = backward_step(&m, &s, &w);
            assert!(w.sup_norm() < 1e-10);
            w = forward_step(&m, &s, &w);
            assert!(w.sup_norm() < 1e-10);
        }
    }

    #[test]
    fn steps_preserve_order() {
        let m = AdvectedLinear::<f64>::new(1.0, 1.0, 4.0);
        let s = StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 3).unwrap();
        let a = GridFunction::from_fn(128, |x: f64| x.sin()).unwrap();
        let b = GridFunction::from_fn(128, |x: f64| x.sin() + 0.1 + 0.05 * (2.0 * x).cos()).unwrap();
        for dir in [Direction::Backward, Direction::Forward] {
            let (sa, sb) = (step(&m, &s, dir, &a), step(&m, &s, dir, &b));
            assert!(sa.values().iter().zip(sb.values()).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn recorded_velocity_follows_characteristics() {
        let m = AdvectedLinear::<f64>::new(1.0, 2.0, 4.0);
        let s = StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 3).unwrap();
        let zero = GridFunction::constant(256, 0.0).unwrap();
        let out = backward_step_full(&m, &s, &zero);
        // ∂H/∂p(x, 0, 0) = -a
        assert!(out.velocity.iter().all(|v| (v + 1.0).abs() <= s.velocity_spacing()));
    }

    #[test]
    fn action_function_is_monotone_in_base_value() {
        let m = SineCoupled::<f64>::new(4.0);
        let s = StepScheme::for_model(&m, 1e-2, 129, 10.0, 4.0, 3).unwrap();
        let h1 = action_function(&m, &s, 128, 10.0, 1.0, -0.2, 0.5).unwrap();
        let h2 = action_function(&m, &s, 128, 10.0, 1.0, 0.1, 0.5).unwrap();
        assert!(h1.values().iter().zip(h2.values()).all(|(a, b)| a < b));
        assert!(action_function(&m, &s, 128, 10.0, 1.0, 0.0, 0.05).is_err());
    }

    #[test]
    fn shooting_near_base_point() {
        let m = Discounted::<f64>::new(4.0);
        let ps = momentum_grid(m.p_window(), 81);
        for &t in &[0.2, 0.1, 0.05] {
            let h = shoot_action(&m, 1.0, 0.0, 1.0, t, &ps, 1e-3).unwrap();
            assert!(h.abs() < 1e-9, "{t}: {h}");
        }
        let h = shoot_action(&m, 1.0, 0.5, 1.0, 0.05, &ps, 1e-3).unwrap();
        assert!((h - 0.5 * (-0.05f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn shooting_matches_closed_form_for_discounted() {
        // From (x0, u0) to x in time t for u̇ = ½v² - u with constant-rate
        // optimal controls: compare against the grid for a moderate case.
        let (m, s) = disc_scheme(5e-3);
        let ps = momentum_grid(m.p_window(), 161);
        let grid = action_function(&m, &s, 256, 10.0, 2.0, 0.3, 1.0).unwrap();
        for &x in &[1.5, 2.0, 2.7] {
            let shot = shoot_action(&m, 2.0, 0.3, x, 1.0, &ps, 1e-3).unwrap();
            let tol = 5.0 * (grid.dx() + s.dt) * 1f64.exp();
            assert!((grid.interp(x) - shot).abs() < tol, "x={x}: {} vs {shot}", grid.interp(x));
        }
    }

    #[test]
    fn no_shot_lands_when_unreachable() {
        let m = Discounted::<f64>::new(4.0);
        let ps = momentum_grid(0.1, 11);
        assert!(matches!(shoot_action(&m, 0.0, 0.0, 3.0, 0.5, &ps, 1e-3), Err(Error::NoShotLands)));
    }

    #[test]
    fn f32_step_runs() {
        let m = Discounted::<f32>::new(4.0);
        let s = StepScheme::for_model(&m, 1e-2f32, 65, 5.0, 4.0, 2).unwrap();
        let w = GridFunction::constant(64, 1.0f32).unwrap();
        let b = backward_step(&m, &s, &w);
        assert!((b.values()[0] - (-0.01f32).exp()).abs() < 1e-3);
    }
}
