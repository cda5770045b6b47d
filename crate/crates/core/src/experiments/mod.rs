//! Experiment orchestration on `f64`: configuration, the stationary →
//! graph → Mañé → measures pipeline, Lyapunov runs, the classification table,
//! uniqueness sweeps and CSV emission.

pub mod config;
pub mod lyapunov;
pub mod output;
pub mod sweep;
pub mod table;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use config::{ExperimentConfig, InitialData, ModelKind};
pub use lyapunov::{run_lyapunov, LyapunovRun};
pub use sweep::{run_uniqueness_sweep, SweepReport};
pub use table::{expected_verdict, run_table1, TableCell, TableVerdict};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonians::Hamiltonian;
use crate::mather::{measure_ensemble, AveragingConfig, EnsembleConfig, EnsembleMember, UniquenessConfig};
use crate::semigroup::StepScheme;
use crate::weakkam::{
    coincidence_set, conjugate_forward, extract_graph, find_stationary, mane_filter, symmetric_difference_fraction,
    ConjugateResult, GraphSample, ManeSample, StationaryResult,
};

pub fn scheme_for(cfg: &ExperimentConfig, model: &dyn Hamiltonian<f64>) -> Result<StepScheme<f64>> {
    StepScheme::for_model(model, cfg.dt, cfg.velocities, cfg.lip_cap, cfg.u_cap, cfg.picard)
}

/// Degree-three trigonometric polynomial with coefficients uniform in
/// `[-1, 1]`, scaled so that its values lie in `offset ± amplitude`.
pub fn random_initial(n: usize, rng: &mut ChaCha8Rng, amplitude: f64, offset: f64) -> Result<GridFunction<f64>> {
    let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    GridFunction::from_fn(n, |x: f64| {
        let mut v = c[0];
        for k in 1..=3 {
            let kx = k as f64 * x;
            v += c[2 * k - 1] * kx.cos() + c[2 * k] * kx.sin();
        }
        offset + amplitude * v / 7.0
    })
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// The configured initial function.
pub fn initial_grid(cfg: &ExperimentConfig, model: &dyn Hamiltonian<f64>) -> Result<GridFunction<f64>> {
    match cfg.phi {
        InitialData::Zero => GridFunction::constant(cfg.n, 0.0),
        InitialData::Constant(c) => GridFunction::constant(cfg.n, c),
        InitialData::Random => random_initial(cfg.n, &mut seeded_rng(cfg.seed), cfg.initial_amplitude, cfg.initial_offset),
        InitialData::Known => {
            if model.known_solution(0.0).is_none() {
                return Err(Error::InvalidConfig(format!("{} has no known solution", model.name())));
            }
            GridFunction::from_fn(cfg.n, |x| model.known_solution(x).unwrap_or(0.0))
        }
    }
}

/// Backward iteration from the configured initial function; an error if it
/// does not settle.
pub fn solve_stationary(
    cfg: &ExperimentConfig,
    model: &dyn Hamiltonian<f64>,
    scheme: &StepScheme<f64>,
) -> Result<StationaryResult<f64>> {
    let r = find_stationary(model, scheme, &initial_grid(cfg, model)?, cfg.t_max, cfg.tol);
    if !r.converged {
        return Err(Error::NonConvergence { t_max: r.t_final, last_change: r.residual });
    }
    Ok(r)
}

/// Everything derived from one stationary solution.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub stationary: StationaryResult<f64>,
    pub graph: GraphSample<f64>,
    pub mane: ManeSample<f64>,
    pub ensemble: Vec<EnsembleMember<f64>>,
    pub graph_tol: f64,
    pub dist_tol: f64,
}

pub fn ensemble_config(cfg: &ExperimentConfig, graph_tol: f64, dist_tol: f64) -> EnsembleConfig<f64> {
    EnsembleConfig {
        averaging: AveragingConfig {
            t_burn: cfg.t_burn,
            t_avg: cfg.t_avg,
            dt: cfg.flow_dt,
            ..AveragingConfig::default()
        },
        n_seeds: cfg.n_seeds,
        fp_tol: cfg.fp_tol,
        graph_tol,
        dist_tol,
        dedupe_tol: 1e-3,
    }
}

pub fn uniqueness_config(cfg: &ExperimentConfig) -> UniquenessConfig<f64> {
    UniquenessConfig { u_cap: cfg.u_cap, crit_tol: cfg.crit_tol, lie_tol: cfg.lie_tol, ..UniquenessConfig::default() }
}

/// Stationary solution, its graph, the Mañé filter and the measure ensemble.
pub fn analyze(cfg: &ExperimentConfig, model: &dyn Hamiltonian<f64>, scheme: &StepScheme<f64>) -> Result<Analysis> {
    let stationary = solve_stationary(cfg, model, scheme)?;
    let dx = stationary.solution.dx();
    let graph_tol = cfg.graph_tol_for(dx);
    let dist_tol = cfg.dist_tol_for(dx, model.lambda_bound());
    let graph = extract_graph(model, &stationary.solution, graph_tol)?;
    let mane = mane_filter(model, &graph, cfg.mane_horizon, dist_tol, cfg.flow_dt)?;
    let ensemble = measure_ensemble(model, &mane.kept_sample(), &ensemble_config(cfg, graph_tol, mane.dist_tol));
    Ok(Analysis { stationary, graph, mane, ensemble, graph_tol, dist_tol })
}

/// The two descriptions of the Mañé set on the grid: nodes kept by the
/// graph-invariance filter and nodes where `u_-` and its forward conjugate agree.
#[derive(Debug, Clone)]
pub struct ManeAgreement {
    pub conjugate: ConjugateResult<f64>,
    pub band: f64,
    pub coincidence: Vec<bool>,
    pub filtered: Vec<bool>,
    pub symmetric_difference: f64,
}

/// Forward iteration stops at the scheme's own error scale `dx + dt`; the
/// coincidence band is five times that.
pub fn mane_agreement(
    cfg: &ExperimentConfig,
    model: &dyn Hamiltonian<f64>,
    scheme: &StepScheme<f64>,
    analysis: &Analysis,
) -> Result<ManeAgreement> {
    let u_minus = &analysis.stationary.solution;
    let tol = u_minus.dx() + cfg.dt;
    let conjugate = conjugate_forward(model, scheme, u_minus, cfg.t_max, tol)?;
    let band = 5.0 * tol;
    let coincidence = coincidence_set(u_minus, &conjugate.solution, band);
    let filtered = analysis.mane.kept_nodes();
    let symmetric_difference = symmetric_difference_fraction(&coincidence, &filtered);
    Ok(ManeAgreement { conjugate, band, coincidence, filtered, symmetric_difference })
}
