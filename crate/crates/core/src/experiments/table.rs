use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::hamiltonians::Hamiltonian;
use crate::mather::{classify_stability, uniqueness_check, Stability, UniquenessVerdict};

use super::{analyze, run_lyapunov, scheme_for, uniqueness_config, ExperimentConfig, LyapunovRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableVerdict {
    UniqueGloballyStable,
    LocallyStable,
    Unstable,
    Critical,
}

impl TableVerdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::UniqueGloballyStable => "unique_globally_asymptotically_stable",
            Self::LocallyStable => "locally_asymptotically_stable",
            Self::Unstable => "unstable",
            Self::Critical => "critical",
        }
    }

    pub fn combine(stability: Stability, uniqueness: UniquenessVerdict) -> Self {
        match stability {
            Stability::AsymptoticallyStable if uniqueness.is_unique() => Self::UniqueGloballyStable,
            Stability::AsymptoticallyStable => Self::LocallyStable,
            Stability::Unstable => Self::Unstable,
            Stability::Critical => Self::Critical,
        }
    }
}

/// Known classification of `w = 0` for `H = ½p² − ap + (sin x + b)u`.
pub fn expected_verdict(a: f64, b: f64) -> TableVerdict {
    if a == 0.0 {
        if b > 1.0 {
            TableVerdict::UniqueGloballyStable
        } else if b == 1.0 {
            TableVerdict::Critical
        } else {
            TableVerdict::Unstable
        }
    } else if b >= 1.0 {
        TableVerdict::UniqueGloballyStable
    } else if b > 0.0 {
        TableVerdict::LocallyStable
    } else if b == 0.0 {
        TableVerdict::Critical
    } else {
        TableVerdict::Unstable
    }
}

/// Cells on the critical lines carry no pass/fail.
pub fn is_scored(a: f64, b: f64) -> bool {
    expected_verdict(a, b) != TableVerdict::Critical
}

#[derive(Debug, Clone)]
pub struct TableCell {
    pub a: f64,
    pub b: f64,
    pub verdict: TableVerdict,
    pub expected: TableVerdict,
    pub stability: Stability,
    pub uniqueness: UniquenessVerdict,
    pub a_min: f64,
    pub a_max: f64,
    pub lyapunov: LyapunovRun,
    pub scored: bool,
}

impl TableCell {
    pub fn pass(&self) -> bool {
        !self.scored || self.verdict == self.expected
    }

    /// Decay for stable cells, growth beyond ten times the perturbation for
    /// unstable ones.
    pub fn lyapunov_consistent(&self) -> bool {
        let l = &self.lyapunov;
        match self.stability {
            Stability::AsymptoticallyStable => l.rate.is_some_and(|r| r < 0.0) && !l.escaped(),
            Stability::Unstable => l.escaped() || l.excursion >= 10.0 * l.delta.abs(),
            Stability::Critical => true,
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, a: f64, b: f64) -> Result<TableCell> {
    let model = cfg.model_with(a, b);
    let model: &dyn Hamiltonian<f64> = model.as_ref();
    let scheme = scheme_for(cfg, model)?;
    let analysis = analyze(cfg, model, &scheme)?;
    let stability = classify_stability(&analysis.ensemble, cfg.crit_tol);
    let uniqueness = uniqueness_check(model, std::slice::from_ref(&analysis.stationary), &uniqueness_config(cfg));
    let delta = cfg.deltas.first().copied().unwrap_or(1e-2);
    let lyapunov = run_lyapunov(cfg, model, &scheme, &analysis.stationary.solution, delta)?;
    Ok(TableCell {
        a,
        b,
        verdict: TableVerdict::combine(stability.verdict, uniqueness.verdict),
        expected: expected_verdict(a, b),
        stability: stability.verdict,
        uniqueness: uniqueness.verdict,
        a_min: stability.criteria.a_min,
        a_max: stability.criteria.a_max,
        lyapunov,
        scored: is_scored(a, b),
    })
}

/// Classifies every `(a, b)` pair of the Cartesian product, cells in parallel.
pub fn run_table1(cfg: &ExperimentConfig, a_list: &[f64], b_list: &[f64]) -> Result<Vec<TableCell>> {
    let pairs: Vec<(f64, f64)> = a_list.iter().flat_map(|&a| b_list.iter().map(move |&b| (a, b))).collect();
    pairs.par_iter().map(|&(a, b)| run_cell(cfg, a, b)).collect()
}

pub fn write_table_csv(cells: &[TableCell], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "a,b,verdict,A_min,A_max,expected,scored,pass,stability,uniqueness,rate,excursion,lyapunov_consistent"
    )?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{:.12e},{:.12e},{},{},{},{},{},{},{:.12e},{}",
            c.a,
            c.b,
            c.verdict.label(),
            c.a_min,
            c.a_max,
            c.expected.label(),
            c.scored,
            c.pass(),
            c.stability.label(),
            c.uniqueness.label(),
            c.lyapunov.rate.map_or_else(String::new, |r| format!("{r:.12e}")),
            c.lyapunov.excursion,
            c.lyapunov_consistent()
        )?;
    }
    Ok(())
}

/// Rows are `b` values, columns `a` values.
pub fn render_grid(cells: &[TableCell]) -> String {
    let mut a_vals: Vec<f64> = Vec::new();
    let mut b_vals: Vec<f64> = Vec::new();
    for c in cells {
        if !a_vals.contains(&c.a) {
            a_vals.push(c.a);
        }
        if !b_vals.contains(&c.b) {
            b_vals.push(c.b);
        }
    }
    let width = 40;
    let mut s = format!("{:>8}", "");
    for a in &a_vals {
        let _ = write!(s, " | {:<width$}", format!("a = {a}"));
    }
    s.push('\n');
    for b in &b_vals {
        let _ = write!(s, "{:>8}", format!("b = {b}"));
        for a in &a_vals {
            let cell = cells.iter().find(|c| c.a == *a && c.b == *b);
            let text = cell.map_or(String::new(), |c| {
                let mark = if !c.scored { " (unscored)" } else if c.pass() { "" } else { " MISMATCH" };
                format!("{}{mark}", c.verdict.label())
            });
            let _ = write!(s, " | {text:<width$}");
        }
        s.push('\n');
    }
    s
}
