//! Periodic uniform grids on the circle.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Node values `w(x_i)` at `x_i = 2πi/n`, extended periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<S> {
    values: Vec<S>,
}

/// Central-difference gradient with kink flags.
#[derive(Debug, Clone)]
pub struct Gradient<S> {
    pub values: Vec<S>,
    /// `true` where left and right differences disagree too much.
    pub kink: Vec<bool>,
}

impl<S: Real> GridFunction<S> {
    pub const MIN_NODES: usize = 64;

    pub fn new(values: Vec<S>) -> Result<Self> {
        let n = values.len();
        if n < Self::MIN_NODES || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid size {n} must be a power of two >= {}",
                Self::MIN_NODES
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("grid values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(S) -> S) -> Result<Self> {
        let dx = S::two_pi() / S::from_usize_lossy(n);
        Self::new((0..n).map(|i| f(dx * S::from_usize_lossy(i))).collect())
    }

    pub fn constant(n: usize, c: S) -> Result<Self> {
        Self::new(vec![c; n])
    }

    /// Builds a grid without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> S {
        S::two_pi() / S::from_usize_lossy(self.n())
    }

    pub fn node(&self, i: usize) -> S {
        self.dx() * S::from_usize_lossy(i)
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: isize) -> S {
        let n = self.n() as isize;
        self.values[i.rem_euclid(n) as usize]
    }

    /// Index of the node nearest to the angle `x`.
    pub fn nearest_node(&self, x: S) -> usize {
        let s = (x.wrap_angle() / self.dx()).round();
        (s.f64() as usize) % self.n()
    }

    /// Piecewise-linear periodic interpolation.
    #[inline]
    pub fn interp(&self, x: S) -> S {
        let s = x.wrap_angle() / self.dx();
        let i = s.floor();
        let theta = s - i;
        let i = i.f64() as isize;
        let a = self.at(i);
        let b = self.at(i + 1);
        a + theta * (b - a)
    }

    pub fn min(&self) -> S {
        self.values.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn max(&self) -> S {
        self.values.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn sup_norm(&self) -> S {
        self.values.iter().map(|v| v.abs()).fold(S::zero(), S::max)
    }

    pub fn sup_distance(&self, other: &Self) -> S {
        assert_eq!(self.n(), other.n(), "grid sizes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max)
    }

    /// Largest absolute forward difference quotient.
    pub fn lipschitz(&self) -> S {
        let dx = self.dx();
        (0..self.n() as isize)
            .map(|i| ((self.at(i + 1) - self.at(i)) / dx).abs())
            .fold(S::zero(), S::max)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.n(), other.n(), "grid sizes differ");
        Self::from_raw(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Central differences. A node is a kink when its one-sided differences
    /// jump by more than ten times the median jump, and also by more than
    /// `sqrt(dx)·(1 + median |D|)`, which smooth data stays below.
    pub fn gradient(&self) -> Gradient<S> {
        let n = self.n() as isize;
        let dx = self.dx();
        let fwd: Vec<S> = (0..n).map(|i| (self.at(i + 1) - self.at(i)) / dx).collect();
        let left = |i: isize| fwd[(i - 1).rem_euclid(n) as usize];
        let jumps: Vec<S> = (0..n).map(|i| (fwd[i as usize] - left(i)).abs()).collect();
        let median = |v: &[S]| {
            let mut v = v.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite differences"));
            v[v.len() / 2]
        };
        let slopes: Vec<S> = fwd.iter().map(|d| d.abs()).collect();
        let floor = dx.sqrt() * (S::one() + median(&slopes));
        let threshold = (S::lit(10.0) * median(&jumps)).max(floor);
        let values = (0..n).map(|i| (left(i) + fwd[i as usize]) / S::lit(2.0)).collect();
        let kink = jumps.iter().map(|&j| j > threshold).collect();
        Gradient { values, kink }
    }

    /// Writes `x,value[,gradient]` rows.
    pub fn write_csv(&self, with_gradient: bool, out: &mut dyn Write) -> std::io::Result<()> {
        if with_gradient {
            let g = self.gradient();
            writeln!(out, "x,value,gradient")?;
            for i in 0..self.n() {
                writeln!(
                    out,
                    "{:.12e},{:.12e},{:.12e}",
                    self.node(i).f64(),
                    self.values[i].f64(),
                    g.values[i].f64()
                )?;
            }
        } else {
            writeln!(out, "x,value")?;
            for i in 0..self.n() {
                writeln!(out, "{:.12e},{:.12e}", self.node(i).f64(), self.values[i].f64())?;
            }
        }
        Ok(())
    }
}
