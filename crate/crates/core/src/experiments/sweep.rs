use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonians::Hamiltonian;
use crate::mather::UniquenessVerdict;
use crate::semigroup::StepScheme;
use crate::weakkam::{find_stationary, DivergenceKind, StationaryResult};

use super::{random_initial, seeded_rng, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub result: StationaryResult<f64>,
    /// Index into [`SweepReport::clusters`] for converged runs.
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Representative limit of each cluster.
    pub clusters: Vec<GridFunction<f64>>,
    pub cluster_radius: f64,
    pub to_plus_infinity: usize,
    pub to_minus_infinity: usize,
    pub oscillating: usize,
    pub uniqueness: Option<UniquenessVerdict>,
}

impl SweepReport {
    pub fn converged(&self) -> usize {
        self.rows.iter().filter(|r| r.result.converged).count()
    }

    pub fn diverged(&self) -> usize {
        self.to_plus_infinity + self.to_minus_infinity + self.oscillating
    }

    /// A uniqueness verdict admits a single cluster; anything else is
    /// compatible with any count.
    pub fn consistent(&self) -> bool {
        match self.uniqueness {
            Some(v) if v.is_unique() => self.clusters.len() <= 1,
            _ => true,
        }
    }

    /// What the sweep alone supports. A sweep cannot enumerate every
    /// solution, so a single limit is never reported as uniqueness.
    pub fn conclusion(&self) -> &'static str {
        match self.clusters.len() {
            0 => "no_limit_reached",
            1 => "no_counterexample_found",
            _ => "multiple_limits_found",
        }
    }

    /// Writes `initial,converged,divergence,t_final,residual,cluster,limit_min,limit_max` rows.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "initial,converged,divergence,t_final,residual,cluster,limit_min,limit_max")?;
        for (i, r) in self.rows.iter().enumerate() {
            let s = &r.result;
            writeln!(
                out,
                "{i},{},{},{},{:.12e},{},{:.12e},{:.12e}",
                s.converged,
                s.divergence.label(),
                s.t_final,
                s.residual,
                r.cluster.map_or_else(String::new, |c| c.to_string()),
                s.solution.min(),
                s.solution.max()
            )?;
        }
        Ok(())
    }
}

/// Backward iteration from `n_initials` seeded random initial functions;
/// converged limits are clustered by sup-distance `≤ 10·tol`.
pub fn run_uniqueness_sweep(
    cfg: &ExperimentConfig,
    model: &dyn Hamiltonian<f64>,
    scheme: &StepScheme<f64>,
    n_initials: usize,
    uniqueness: Option<UniquenessVerdict>,
) -> Result<SweepReport> {
    if n_initials < 5 {
        return Err(Error::InvalidConfig(format!("sweep needs at least 5 initials, got {n_initials}")));
    }
    let mut rng = seeded_rng(cfg.seed);
    let initials = (0..n_initials)
        .map(|_| random_initial(cfg.n, &mut rng, cfg.initial_amplitude, cfg.initial_offset))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<StationaryResult<f64>> = initials
        .par_iter()
        .map(|phi| find_stationary(model, scheme, phi, cfg.t_max, cfg.tol))
        .collect();
    let radius = 10.0 * cfg.tol;
    let mut clusters: Vec<GridFunction<f64>> = Vec::new();
    let mut rows = Vec::with_capacity(results.len());
    let (mut plus, mut minus, mut osc) = (0, 0, 0);
    for result in results {
        let cluster = if result.converged {
            let hit = clusters.iter().position(|c| c.sup_distance(&result.solution) <= radius);
            Some(hit.unwrap_or_else(|| {
                clusters.push(result.solution.clone());
                clusters.len() - 1
            }))
        } else {
            match result.divergence {
                DivergenceKind::ToPlusInfinity => plus += 1,
                DivergenceKind::ToMinusInfinity => minus += 1,
                _ => osc += 1,
            }
            None
        };
        rows.push(SweepRow { result, cluster });
    }
    Ok(SweepReport {
        rows,
        clusters,
        cluster_radius: radius,
        to_plus_infinity: plus,
        to_minus_infinity: minus,
        oscillating: osc,
        uniqueness,
    })
}
