use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonians::Hamiltonian;
use crate::semigroup::{backward_step, StepScheme, DEFAULT_GRID_CAP};
use crate::weakkam::ESCAPE_LEVEL;

use super::ExperimentConfig;

/// Evolution of `u_- ± δ` under the backward semigroup.
#[derive(Debug, Clone)]
pub struct LyapunovRun {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `max(‖T_t(u_- + δ) − u_-‖, ‖T_t(u_- − δ) − u_-‖)`.
    pub dist: Vec<f64>,
    pub dist_plus: Vec<f64>,
    pub dist_minus: Vec<f64>,
    /// Least-squares slope of `ln dist` over the fit window.
    pub rate: Option<f64>,
    pub fit_window: (f64, f64),
    pub excursion: f64,
    /// Time at which a branch left `|w| ≤ ESCAPE_LEVEL` or blew up.
    pub escaped_at: Option<f64>,
}

impl LyapunovRun {
    /// Writes `t,dist,log_dist,dist_plus,dist_minus` rows.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "t,dist,log_dist,dist_plus,dist_minus")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.times[k],
                self.dist[k],
                self.dist[k].ln(),
                self.dist_plus[k],
                self.dist_minus[k]
            )?;
        }
        Ok(())
    }

    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }
}

/// Slope of the least-squares line through `(t, ln d)` for `t` in `[lo, hi]`.
pub fn fit_log_slope(times: &[f64], dist: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(dist)
        .filter(|(t, d)| **t >= lo && **t <= hi && **d > 1e-300)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs both perturbed branches for `cfg.t`, sampling every tenth of a time
/// unit. A branch that escapes stops the run and is kept as a witness.
pub fn run_lyapunov(
    cfg: &ExperimentConfig,
    model: &dyn Hamiltonian<f64>,
    scheme: &StepScheme<f64>,
    u_minus: &GridFunction<f64>,
    delta: f64,
) -> Result<LyapunovRun> {
    let scale = u_minus.sup_norm().max(1.0);
    if !(delta.abs() > 0.0) || delta.abs() > 0.1 * scale {
        return Err(Error::InvalidConfig(format!("perturbation {delta} outside (0, {}]", 0.1 * scale)));
    }
    if cfg.fit_hi > cfg.t {
        log::warn!("fit window [{}, {}] extends past the horizon {}", cfg.fit_lo, cfg.fit_hi, cfg.t);
    }
    let steps = (cfg.t / scheme.dt).round() as usize;
    let every = ((0.1 / scheme.dt).round() as usize).max(1);
    let mut plus = u_minus.map(|v| v + delta.abs());
    let mut minus = u_minus.map(|v| v - delta.abs());
    let mut run = LyapunovRun {
        delta,
        times: vec![0.0],
        dist: vec![delta.abs()],
        dist_plus: vec![plus.sup_distance(u_minus)],
        dist_minus: vec![minus.sup_distance(u_minus)],
        rate: None,
        fit_window: (cfg.fit_lo, cfg.fit_hi),
        excursion: delta.abs(),
        escaped_at: None,
    };
    for k in 1..=steps {
        plus = backward_step(model, scheme, &plus);
        minus = backward_step(model, scheme, &minus);
        let (dp, dm) = (plus.sup_distance(u_minus), minus.sup_distance(u_minus));
        let d = dp.max(dm);
        let t = k as f64 * scheme.dt;
        let blown = !d.is_finite() || d > DEFAULT_GRID_CAP;
        if d.is_finite() {
            run.excursion = run.excursion.max(d);
        }
        if k % every == 0 || k == steps || blown || d > ESCAPE_LEVEL {
            run.times.push(t);
            run.dist.push(d);
            run.dist_plus.push(dp);
            run.dist_minus.push(dm);
        }
        if blown || d > ESCAPE_LEVEL {
            run.escaped_at = Some(t);
            break;
        }
    }
    run.rate = fit_log_slope(&run.times, &run.dist, cfg.fit_lo, cfg.fit_hi);
    Ok(run)
}
