//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Every key has a default, so an
//! empty file is a valid configuration. Recognised keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `model` | `example1`, `example2`, `example3` or `discounted` | `example3` |
//! | `a`, `b` | parameters of `example3` | `0`, `2` |
//! | `f_coeffs`, `g_coeffs` | trig coefficients `c0,a1,b1,...` of `example1` | `-1,0,-0.5` / `0,0,0.5` |
//! | `u_cap` | value window `[-u_cap, u_cap]` for model bounds and searches | `4` |
//! | `n` | grid nodes (power of two, at least 64) | `256` |
//! | `dt` | semigroup time step | `0.01` |
//! | `velocities` | velocity candidates per step (odd) | `129` |
//! | `picard` | implicit rounds per backward step | `3` |
//! | `lip_cap` | Lipschitz cap used to size the velocity grid | `10` |
//! | `flow_dt` | RK4 step for characteristics and averages | `0.001` |
//! | `t` | horizon of `flow`, `evolve`, `action` and Lyapunov runs | `20` |
//! | `t_max` | horizon of stationary searches | `200` |
//! | `t_burn`, `t_avg` | Birkhoff burn-in and averaging horizon | `20`, `100` |
//! | `mane_horizon` | horizon of the graph-invariance filter | `20` |
//! | `tol` | stationarity tolerance per unit time | `1e-6` |
//! | `crit_tol` | sign threshold of the stability criteria | `0.01` |
//! | `graph_tol`, `dist_tol` | graph and support tolerances, `auto` for the grid-derived value | `auto` |
//! | `fp_tol` | vector-field norm accepted at a fixed point | `1e-6` |
//! | `lie_tol` | floor of the Lie-derivative sum of squares | `1e-4` |
//! | `n_seeds` | Birkhoff seeds of the measure ensemble | `8` |
//! | `deltas` | perturbation sizes of Lyapunov runs | `0.01` |
//! | `fit_lo`, `fit_hi` | window of the decay-rate fit | `5`, `20` |
//! | `n_initials` | random initial functions of the uniqueness sweep | `10` |
//! | `initial_amplitude`, `initial_offset` | sweep initials lie in `offset ± amplitude` | `1`, `0` |
//! | `phi` | initial function: `zero`, `known`, `random` or a number | `zero` |
//! | `direction` | `backward` or `forward` for `evolve` | `backward` |
//! | `x0`, `p0`, `u0` | base state of `flow` and `action` | `0`, `1`, `0` |
//! | `table_a`, `table_b` | parameter lists of `table1` | `0,1` / `2,1,0.5,0,-1` |
//! | `expect` | verdict that `classify` must reproduce | unset |
//! | `seed` | RNG seed | `42` |
//! | `out` | output directory | `out` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonians::{AdvectedLinear, Discounted, Model, PrescribedSolution, SineCoupled, TrigPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Example1,
    Example2,
    Example3,
    Discounted,
}

impl ModelKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Self::Example1),
            "example2" => Ok(Self::Example2),
            "example3" => Ok(Self::Example3),
            "discounted" => Ok(Self::Discounted),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::Discounted => "discounted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Zero,
    Known,
    Random,
    Constant(f64),
}

impl InitialData {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "known" => Ok(Self::Known),
            "random" => Ok(Self::Random),
            other => other
                .parse()
                .map(Self::Constant)
                .map_err(|_| Error::InvalidConfig(format!("bad initial function `{other}`"))),
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Known => "known".into(),
            Self::Random => "random".into(),
            Self::Constant(c) => fmt_f64(*c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub a: f64,
    pub b: f64,
    pub f_coeffs: Vec<f64>,
    pub g_coeffs: Vec<f64>,
    pub u_cap: f64,
    pub n: usize,
    pub dt: f64,
    pub velocities: usize,
    pub picard: usize,
    pub lip_cap: f64,
    pub flow_dt: f64,
    pub t: f64,
    pub t_max: f64,
    pub t_burn: f64,
    pub t_avg: f64,
    pub mane_horizon: f64,
    pub tol: f64,
    pub crit_tol: f64,
    pub graph_tol: Option<f64>,
    pub dist_tol: Option<f64>,
    pub fp_tol: f64,
    pub lie_tol: f64,
    pub n_seeds: usize,
    pub deltas: Vec<f64>,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub n_initials: usize,
    pub initial_amplitude: f64,
    pub initial_offset: f64,
    pub phi: InitialData,
    pub forward: bool,
    pub x0: f64,
    pub p0: f64,
    pub u0: f64,
    pub table_a: Vec<f64>,
    pub table_b: Vec<f64>,
    pub expect: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Example3,
            a: 0.0,
            b: 2.0,
            f_coeffs: vec![-1.0, 0.0, -0.5],
            g_coeffs: vec![0.0, 0.0, 0.5],
            u_cap: 4.0,
            n: 256,
            dt: 1e-2,
            velocities: 129,
            picard: 3,
            lip_cap: 10.0,
            flow_dt: 1e-3,
            t: 20.0,
            t_max: 200.0,
            t_burn: 20.0,
            t_avg: 100.0,
            mane_horizon: 20.0,
            tol: 1e-6,
            crit_tol: 1e-2,
            graph_tol: None,
            dist_tol: None,
            fp_tol: 1e-6,
            lie_tol: 1e-4,
            n_seeds: 8,
            deltas: vec![1e-2],
            fit_lo: 5.0,
            fit_hi: 20.0,
            n_initials: 10,
            initial_amplitude: 1.0,
            initial_offset: 0.0,
            phi: InitialData::Zero,
            forward: false,
            x0: 0.0,
            p0: 1.0,
            u0: 0.0,
            table_a: vec![0.0, 1.0],
            table_b: vec![2.0, 1.0, 0.5, 0.0, -1.0],
            expect: None,
            seed: 42,
            out: PathBuf::from("out"),
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), fmt_f64)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_auto(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; the same entry point serves files and command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => self.model = ModelKind::parse(v)?,
            "a" => self.a = parse_num(key, v)?,
            "b" => self.b = parse_num(key, v)?,
            "f_coeffs" => self.f_coeffs = parse_list(key, v)?,
            "g_coeffs" => self.g_coeffs = parse_list(key, v)?,
            "u_cap" => self.u_cap = parse_num(key, v)?,
            "n" => self.n = parse_num(key, v)?,
            "dt" => self.dt = parse_num(key, v)?,
            "velocities" => self.velocities = parse_num(key, v)?,
            "picard" => self.picard = parse_num(key, v)?,
            "lip_cap" => self.lip_cap = parse_num(key, v)?,
            "flow_dt" => self.flow_dt = parse_num(key, v)?,
            "t" => self.t = parse_num(key, v)?,
            "t_max" => self.t_max = parse_num(key, v)?,
            "t_burn" => self.t_burn = parse_num(key, v)?,
            "t_avg" => self.t_avg = parse_num(key, v)?,
            "mane_horizon" => self.mane_horizon = parse_num(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "crit_tol" => self.crit_tol = parse_num(key, v)?,
            "graph_tol" => self.graph_tol = parse_auto(key, v)?,
            "dist_tol" => self.dist_tol = parse_auto(key, v)?,
            "fp_tol" => self.fp_tol = parse_num(key, v)?,
            "lie_tol" => self.lie_tol = parse_num(key, v)?,
            "n_seeds" => self.n_seeds = parse_num(key, v)?,
            "deltas" => self.deltas = parse_list(key, v)?,
            "fit_lo" => self.fit_lo = parse_num(key, v)?,
            "fit_hi" => self.fit_hi = parse_num(key, v)?,
            "n_initials" => self.n_initials = parse_num(key, v)?,
            "initial_amplitude" => self.initial_amplitude = parse_num(key, v)?,
            "initial_offset" => self.initial_offset = parse_num(key, v)?,
            "phi" => self.phi = InitialData::parse(v)?,
            "direction" => {
                self.forward = match v {
                    "backward" => false,
                    "forward" => true,
                    other => return Err(Error::InvalidConfig(format!("bad direction `{other}`"))),
                }
            }
            "x0" => self.x0 = parse_num(key, v)?,
            "p0" => self.p0 = parse_num(key, v)?,
            "u0" => self.u0 = parse_num(key, v)?,
            "table_a" => self.table_a = parse_list(key, v)?,
            "table_b" => self.table_b = parse_list(key, v)?,
            "expect" => self.expect = Some(v.to_string()),
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 64 || !self.n.is_power_of_two() {
            return bad(format!("n = {} must be a power of two, at least 64", self.n));
        }
        let lambda = self.model().lambda_bound();
        if !(self.dt > 0.0) || self.dt * lambda >= 0.5 {
            return bad(format!("dt = {} needs 0 < dt·λ < 1/2 (λ = {lambda})", self.dt));
        }
        let positive = [
            ("tol", self.tol),
            ("crit_tol", self.crit_tol),
            ("fp_tol", self.fp_tol),
            ("lie_tol", self.lie_tol),
            ("flow_dt", self.flow_dt),
            ("u_cap", self.u_cap),
            ("lip_cap", self.lip_cap),
            ("t", self.t),
            ("t_max", self.t_max),
            ("t_avg", self.t_avg),
            ("mane_horizon", self.mane_horizon),
            ("graph_tol", self.graph_tol.unwrap_or(1.0)),
            ("dist_tol", self.dist_tol.unwrap_or(1.0)),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return bad(format!("`{k}` must be positive, got {v}"));
            }
        }
        if self.t_burn < 0.0 {
            return bad("`t_burn` must be nonnegative".into());
        }
        if !(self.fit_lo < self.fit_hi) {
            return bad("need fit_lo < fit_hi".into());
        }
        if self.deltas.iter().any(|d| !(d.abs() > 0.0)) {
            return bad("perturbations must be nonzero".into());
        }
        Ok(())
    }

    pub fn model(&self) -> Model<f64> {
        self.model_with(self.a, self.b)
    }

    /// The configured model with `example3` parameters replaced.
    pub fn model_with(&self, a: f64, b: f64) -> Model<f64> {
        match self.model {
            ModelKind::Example1 => Box::new(PrescribedSolution::new(
                TrigPoly::new(self.f_coeffs.clone()),
                TrigPoly::new(self.g_coeffs.clone()),
                self.u_cap,
            )),
            ModelKind::Example2 => Box::new(SineCoupled::new(self.u_cap)),
            ModelKind::Example3 => Box::new(AdvectedLinear::new(a, b, self.u_cap)),
            ModelKind::Discounted => Box::new(Discounted::new(self.u_cap)),
        }
    }

    /// Canonical text with every key in a fixed order; identical configurations
    /// serialize identically.
    pub fn canonical(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("model", self.model.label().into());
        m.insert("a", fmt_f64(self.a));
        m.insert("b", fmt_f64(self.b));
        m.insert("f_coeffs", fmt_list(&self.f_coeffs));
        m.insert("g_coeffs", fmt_list(&self.g_coeffs));
        m.insert("u_cap", fmt_f64(self.u_cap));
        m.insert("n", self.n.to_string());
        m.insert("dt", fmt_f64(self.dt));
        m.insert("velocities", self.velocities.to_string());
        m.insert("picard", self.picard.to_string());
        m.insert("lip_cap", fmt_f64(self.lip_cap));
        m.insert("flow_dt", fmt_f64(self.flow_dt));
        m.insert("t", fmt_f64(self.t));
        m.insert("t_max", fmt_f64(self.t_max));
        m.insert("t_burn", fmt_f64(self.t_burn));
        m.insert("t_avg", fmt_f64(self.t_avg));
        m.insert("mane_horizon", fmt_f64(self.mane_horizon));
        m.insert("tol", fmt_f64(self.tol));
        m.insert("crit_tol", fmt_f64(self.crit_tol));
        m.insert("graph_tol", fmt_auto(self.graph_tol));
        m.insert("dist_tol", fmt_auto(self.dist_tol));
        m.insert("fp_tol", fmt_f64(self.fp_tol));
        m.insert("lie_tol", fmt_f64(self.lie_tol));
        m.insert("n_seeds", self.n_seeds.to_string());
        m.insert("deltas", fmt_list(&self.deltas));
        m.insert("fit_lo", fmt_f64(self.fit_lo));
        m.insert("fit_hi", fmt_f64(self.fit_hi));
        m.insert("n_initials", self.n_initials.to_string());
        m.insert("initial_amplitude", fmt_f64(self.initial_amplitude));
        m.insert("initial_offset", fmt_f64(self.initial_offset));
        m.insert("phi", self.phi.label());
        m.insert("direction", if self.forward { "forward" } else { "backward" }.into());
        m.insert("x0", fmt_f64(self.x0));
        m.insert("p0", fmt_f64(self.p0));
        m.insert("u0", fmt_f64(self.u0));
        m.insert("table_a", fmt_list(&self.table_a));
        m.insert("table_b", fmt_list(&self.table_b));
        if let Some(e) = &self.expect {
            m.insert("expect", e.clone());
        }
        m.insert("seed", self.seed.to_string());
        // the output directory does not change results and is left out
        let mut s = String::new();
        for (k, v) in m {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn graph_tol_for(&self, dx: f64) -> f64 {
        self.graph_tol.unwrap_or_else(|| crate::weakkam::default_graph_tol(dx, self.dt))
    }

    pub fn dist_tol_for(&self, dx: f64, lambda: f64) -> f64 {
        self.dist_tol.unwrap_or_else(|| crate::weakkam::default_dist_tol(dx, self.dt, lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::parse("# nothing\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parse_and_roundtrip() {
        let text = "model = example3\na = 1 # advection\nb=0.5\ndeltas = 0.01, -0.01\ndist_tol = 0.2\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!((cfg.a, cfg.b), (1.0, 0.5));
        assert_eq!(cfg.deltas, vec![0.01, -0.01]);
        assert_eq!(cfg.dist_tol, Some(0.2));
        let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(again.canonical(), cfg.canonical());
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn hash_tracks_content_not_layout() {
        let a = ExperimentConfig::parse("b = 2\nn = 256").unwrap();
        let b = ExperimentConfig::parse("n=256\n\n  b =2.0  # same").unwrap();
        let c = ExperimentConfig::parse("b = 2.5").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("n = 100").is_err());
        assert!(ExperimentConfig::parse("dt = 0.4").is_err());
        assert!(ExperimentConfig::parse("tol = 0").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
        assert!(ExperimentConfig::parse("model = example9").is_err());
    }
}
