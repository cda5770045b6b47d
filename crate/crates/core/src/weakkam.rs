//! Stationary viscosity solutions as fixed points of the backward semigroup,
//! their forward conjugates, 1-graphs and Mañé sets.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{rk4_step, ContactState, DEFAULT_BLOWUP_CAP};
use crate::grid::GridFunction;
use crate::hamiltonians::Hamiltonian;
use crate::scalar::Real;
use crate::semigroup::{backward_step, forward_step, StepScheme, DEFAULT_GRID_CAP};

/// Values beyond this (uniformly) count as escaping to infinity.
pub const ESCAPE_LEVEL: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    None,
    ToPlusInfinity,
    ToMinusInfinity,
    Oscillating,
}

impl DivergenceKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ToPlusInfinity => "to_plus_infinity",
            Self::ToMinusInfinity => "to_minus_infinity",
            Self::Oscillating => "oscillating",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryResult<S> {
    pub solution: GridFunction<S>,
    pub converged: bool,
    /// Sup-distance moved over the last unit of evolution time.
    pub residual: S,
    /// `(t, distance to the state one time unit earlier)`.
    pub history: Vec<(S, S)>,
    pub divergence: DivergenceKind,
    pub t_final: S,
}

fn steps_per_unit<S: Real>(scheme: &StepScheme<S>) -> usize {
    ((S::one() / scheme.dt).round().f64() as usize).max(1)
}

fn escape_kind<S: Real>(w: &GridFunction<S>) -> Option<DivergenceKind> {
    let level = S::lit(ESCAPE_LEVEL);
    if w.min() > level {
        Some(DivergenceKind::ToPlusInfinity)
    } else if w.max() < -level {
        Some(DivergenceKind::ToMinusInfinity)
    } else {
        None
    }
}

/// Iterates the backward semigroup from `phi0` until two states one time unit
/// apart are within `tol`, the values escape, or `t_max` is reached.
pub fn find_stationary<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    phi0: &GridFunction<S>,
    t_max: S,
    tol: S,
) -> StationaryResult<S> {
    let per_unit = steps_per_unit(scheme);
    let units = t_max.min(S::lit(1e4)).ceil().f64().max(1.0) as usize;
    let cap = S::lit(DEFAULT_GRID_CAP);
    let mut w = phi0.clone();
    let mut history = Vec::new();
    let mut residual = S::infinity();
    for unit in 1..=units {
        let start = w.clone();
        for _ in 0..per_unit {
            w = backward_step(model, scheme, &w);
        }
        let t = S::from_usize_lossy(unit);
        let sup = w.sup_norm();
        if !sup.is_finite() || sup > cap {
            let kind = escape_kind(&w).unwrap_or(DivergenceKind::Oscillating);
            return StationaryResult { solution: w, converged: false, residual, history, divergence: kind, t_final: t };
        }
        residual = w.sup_distance(&start);
        history.push((t, residual));
        if residual <= tol {
            return StationaryResult {
                solution: w,
                converged: true,
                residual,
                history,
                divergence: DivergenceKind::None,
                t_final: t,
            };
        }
        if let Some(kind) = escape_kind(&w) {
            return StationaryResult { solution: w, converged: false, residual, history, divergence: kind, t_final: t };
        }
    }
    let t_final = S::from_usize_lossy(units);
    StationaryResult {
        solution: w,
        converged: false,
        residual,
        history,
        divergence: DivergenceKind::Oscillating,
        t_final,
    }
}

#[derive(Debug, Clone)]
pub struct ConjugateResult<S> {
    pub solution: GridFunction<S>,
    pub history: Vec<(S, S)>,
    /// Largest `u_+ - u_-` over the nodes; nonpositive up to discretization.
    pub order_excess: S,
}

/// Long-time limit of the forward semigroup started at `u_minus`.
pub fn conjugate_forward<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    scheme: &StepScheme<S>,
    u_minus: &GridFunction<S>,
    t_max: S,
    tol: S,
) -> Result<ConjugateResult<S>> {
    let per_unit = steps_per_unit(scheme);
    let units = t_max.ceil().f64().max(1.0) as usize;
    let mut w = u_minus.clone();
    let mut history = Vec::new();
    let mut last = S::infinity();
    for unit in 1..=units {
        let start = w.clone();
        for _ in 0..per_unit {
            w = forward_step(model, scheme, &w);
        }
        last = w.sup_distance(&start);
        history.push((S::from_usize_lossy(unit), last));
        if last <= tol {
            let order_excess = w.zip_with(u_minus, |a, b| a - b).max();
            if order_excess > tol {
                warn!("forward conjugate exceeds the backward solution by {order_excess}");
            }
            return Ok(ConjugateResult { solution: w, history, order_excess });
        }
    }
    Err(Error::NonConvergence { t_max: t_max.f64(), last_change: last.f64() })
}

/// `10·(dx + dt)`.
pub fn default_graph_tol<S: Real>(dx: S, dt: S) -> S {
    S::lit(10.0) * (dx + dt)
}

/// `10·(dx + dt)·e^λ`.
pub fn default_dist_tol<S: Real>(dx: S, dt: S, lambda: S) -> S {
    default_graph_tol(dx, dt) * lambda.exp()
}

/// Sample of a 1-graph `{(x, Du(x), u(x))}` at differentiability nodes.
#[derive(Debug, Clone)]
pub struct GraphSample<S> {
    pub atoms: Vec<ContactState<S>>,
    /// Grid node of each atom.
    pub nodes: Vec<usize>,
    pub h_residual: Vec<S>,
    pub n: usize,
    pub kinks: usize,
    pub dropped: usize,
    pub graph_tol: S,
    pub source: String,
}

impl<S: Real> GraphSample<S> {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dropped_fraction(&self) -> f64 {
        self.dropped as f64 / self.n as f64
    }

    /// Distance from `z` to the nearest atom.
    pub fn distance_to(&self, z: &ContactState<S>) -> S {
        self.atoms.iter().map(|a| a.distance(z)).fold(S::infinity(), S::min)
    }

    /// Keeps the atoms whose flag is set.
    pub fn subset(&self, keep: &[bool]) -> Self {
        let pick = |i: usize| keep[i];
        Self {
            atoms: (0..self.len()).filter(|&i| pick(i)).map(|i| self.atoms[i]).collect(),
            nodes: (0..self.len()).filter(|&i| pick(i)).map(|i| self.nodes[i]).collect(),
            h_residual: (0..self.len()).filter(|&i| pick(i)).map(|i| self.h_residual[i]).collect(),
            ..self.clone()
        }
    }
}

/// Atoms `(x_i, Du(x_i), u(x_i))` at non-kink nodes with `|H| ≤ graph_tol`.
pub fn extract_graph<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    u_minus: &GridFunction<S>,
    graph_tol: S,
) -> Result<GraphSample<S>> {
    let grad = u_minus.gradient();
    let mut atoms = Vec::new();
    let mut nodes = Vec::new();
    let mut h_residual = Vec::new();
    let (mut kinks, mut dropped) = (0, 0);
    for i in 0..u_minus.n() {
        if grad.kink[i] {
            kinks += 1;
            continue;
        }
        let z = ContactState::new(u_minus.node(i), grad.values[i], u_minus.values()[i]);
        let h = model.eval(z.x, z.p, z.u);
        if h.abs() > graph_tol {
            dropped += 1;
            continue;
        }
        atoms.push(z);
        nodes.push(i);
        h_residual.push(h);
    }
    if atoms.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(GraphSample {
        atoms,
        nodes,
        h_residual,
        n: u_minus.n(),
        kinks,
        dropped,
        graph_tol,
        source: model.name(),
    })
}

/// Result of the graph-invariance filter.
#[derive(Debug, Clone)]
pub struct ManeSample<S> {
    pub graph: GraphSample<S>,
    pub kept: Vec<bool>,
    pub dist_tol: S,
    pub relaxations: usize,
}

impl<S: Real> ManeSample<S> {
    pub fn kept_sample(&self) -> GraphSample<S> {
        self.graph.subset(&self.kept)
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }

    /// Grid nodes whose atom survived the filter.
    pub fn kept_nodes(&self) -> Vec<bool> {
        let mut out = vec![false; self.graph.n];
        for (i, &node) in self.graph.nodes.iter().enumerate() {
            out[node] = self.kept[i];
        }
        out
    }

    /// Writes `x,p,u,kept_flag,H_residual` rows.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "x,p,u,kept_flag,H_residual")?;
        for (i, z) in self.graph.atoms.iter().enumerate() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{},{:.12e}",
                z.x.f64(),
                z.p.f64(),
                z.u.f64(),
                u8::from(self.kept[i]),
                self.graph.h_residual[i].f64()
            )?;
        }
        Ok(())
    }
}

/// Largest distance to the graph along the orbit of `z` over `[0, horizon]`,
/// checked every `check_every` steps; `None` if the orbit blows up.
pub fn orbit_excursion<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    graph: &GraphSample<S>,
    z: ContactState<S>,
    horizon: S,
    flow_dt: S,
    stop_above: S,
) -> Option<S> {
    let steps = (horizon.abs() / flow_dt).round().f64() as usize;
    let h = if horizon < S::zero() { -flow_dt } else { flow_dt };
    let check_every = ((S::lit(0.05) / flow_dt).round().f64() as usize).max(1);
    let cap = S::lit(DEFAULT_BLOWUP_CAP);
    let mut state = z;
    let mut worst = graph.distance_to(&state);
    for k in 1..=steps {
        state = rk4_step(model, &state, h);
        if !state.is_finite() || state.p.abs() > cap || state.u.abs() > cap {
            return None;
        }
        if k % check_every == 0 || k == steps {
            worst = worst.max(graph.distance_to(&state));
            if worst > stop_above {
                return Some(worst);
            }
        }
    }
    Some(worst)
}

/// Keeps the atoms whose forward orbit over `[0, horizon]` stays within
/// `dist_tol` of the graph. An empty result is retried with `dist_tol`
/// doubled, at most three times.
pub fn mane_filter<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    graph: &GraphSample<S>,
    horizon: S,
    dist_tol: S,
    flow_dt: S,
) -> Result<ManeSample<S>> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if horizon < S::lit(20.0) {
        return Err(Error::InvalidConfig(format!("Mañé horizon {horizon} must be at least 20")));
    }
    let mut tol = dist_tol;
    for relaxations in 0..=3 {
        let kept: Vec<bool> = graph
            .atoms
            .par_iter()
            .map(|&z| orbit_excursion(model, graph, z, horizon, flow_dt, tol).is_some_and(|d| d <= tol))
            .collect();
        if kept.iter().any(|k| *k) {
            return Ok(ManeSample { graph: graph.clone(), kept, dist_tol: tol, relaxations });
        }
        if relaxations < 3 {
            warn!("Mañé filter empty at dist_tol = {tol}; relaxing");
            tol = tol * S::lit(2.0);
        }
    }
    Err(Error::EmptyAfterRelaxation { dist_tol: tol.f64() })
}

/// Nodes where the backward and forward solutions agree within `band`.
pub fn coincidence_set<S: Real>(u_minus: &GridFunction<S>, u_plus: &GridFunction<S>, band: S) -> Vec<bool> {
    u_minus
        .values()
        .iter()
        .zip(u_plus.values())
        .map(|(a, b)| (*a - *b).abs() <= band)
        .collect()
}

/// `|A Δ B| / n` for two node sets.
pub fn symmetric_difference_fraction(a: &[bool], b: &[bool]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}
