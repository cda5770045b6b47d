//! Contact Hamiltonians `H(x, p, u)` on the circle, their partial derivatives,
//! the Legendre-dual Lagrangian and the built-in model catalog.
//!
//! Every model is an immutable value implementing [`Hamiltonian`]. Built-in
//! models supply analytic derivatives and closed-form Lagrangians; a
//! user-supplied model only has to implement [`Hamiltonian::eval`] and the
//! metadata, in which case the derivatives fall back to central differences
//! with step `1e-6` (accurate to roughly `1e-9` for well-scaled models, and
//! much worse near steep regions) and the Lagrangian falls back to the
//! Newton solver in [`legendre`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Step used by the finite-difference fallbacks.
fn fd_step<S: Real>() -> S {
    S::lit(1e-6).max(S::epsilon().cbrt())
}

fn central<S: Real>(f: impl Fn(S) -> S) -> S {
    let h = fd_step::<S>();
    (f(h) - f(-h)) / (h + h)
}

/// A contact Hamiltonian on `T*S × R`.
pub trait Hamiltonian<S: Real>: Send + Sync {
    fn name(&self) -> String;

    /// Spatial dimension. Only the circle is supported.
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: S, p: S, u: S) -> S;

    fn d_x(&self, x: S, p: S, u: S) -> S {
        central(|h| self.eval(x + h, p, u))
    }

    fn d_p(&self, x: S, p: S, u: S) -> S {
        central(|h| self.eval(x, p + h, u))
    }

    fn d_u(&self, x: S, p: S, u: S) -> S {
        central(|h| self.eval(x, p, u + h))
    }

    /// Second derivative in `p`; used as the Newton slope in [`legendre`].
    fn d_pp(&self, x: S, p: S, u: S) -> S {
        central(|h| self.d_p(x, p + h, u))
    }

    /// The constant `λ` with `|∂H/∂u| ≤ λ` everywhere.
    fn lambda_bound(&self) -> S;

    /// Whether `H(x, p, u) = H(x, -p, u)` holds identically.
    fn reversible(&self) -> bool {
        false
    }

    /// A priori momentum bound used to truncate searches.
    fn p_window(&self) -> S;

    /// `L(x, v, u) = sup_p (p v - H(x, p, u))` together with its maximizer.
    fn lagrangian(&self, x: S, v: S, u: S) -> Result<LagrangianValue<S>> {
        legendre(self, x, v, u)
    }

    /// A stationary solution known in closed form, if the model has one.
    fn known_solution(&self, _x: S) -> Option<S> {
        None
    }

    /// Whether `L(x, v, u) - L(x, v, u')` does not depend on `v`, so that the
    /// optimal velocity of a semigroup step does not depend on the value.
    fn separable(&self) -> bool {
        false
    }

    /// `(v, u) ↦ L(x, v, u)` at a frozen position, `+∞` where the transform
    /// fails. Models with costly `x`-dependence override this.
    fn lagrangian_at<'a>(&'a self, x: S) -> Box<dyn Fn(S, S) -> S + 'a> {
        Box::new(move |v, u| match self.lagrangian(x, v, u) {
            Ok(l) if l.value.is_finite() => l.value,
            _ => S::infinity(),
        })
    }
}

pub type Model<S> = Box<dyn Hamiltonian<S>>;

/// Value of the Lagrangian and the momentum attaining the supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianValue<S> {
    pub value: S,
    pub argmax_p: S,
}

pub fn eval_hamiltonian<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, x: S, p: S, u: S) -> S {
    model.eval(x, p, u)
}

const NEWTON_BUDGET: usize = 50;
const BISECTION_BUDGET: usize = 200;
const BRACKET_EXPANSIONS: usize = 60;

/// Solves `∂H/∂p(x, p, u) = v` for `p` by safeguarded Newton and returns the
/// Legendre transform. Newton starts at `p = 0`; the root is bracketed inside
/// `±p_window`, doubling the window until the sign changes.
pub fn legendre<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    x: S,
    v: S,
    u: S,
) -> Result<LagrangianValue<S>> {
    if !v.is_finite() {
        return Err(Error::BracketExhausted { velocity: v.f64() });
    }
    let g = |p: S| model.d_p(x, p, u) - v;

    let mut half = model.p_window().max(S::one());
    let mut lo = -half;
    let mut hi = half;
    let mut expansions = 0;
    while !(g(lo) <= S::zero() && g(hi) >= S::zero()) {
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS {
            return Err(Error::BracketExhausted { velocity: v.f64() });
        }
        half = half + half;
        lo = -half;
        hi = half;
    }

    let scale = S::one().max(v.abs());
    let target = S::lit(1e-13).max(S::epsilon() * S::lit(64.0)) * scale;
    let mut p = S::zero().max(lo).min(hi);
    let mut done = false;
    for _ in 0..NEWTON_BUDGET {
        let r = g(p);
        if r.abs() <= target {
            done = true;
            break;
        }
        if r < S::zero() {
            lo = p;
        } else {
            hi = p;
        }
        let slope = model.d_pp(x, p, u);
        let mut next = p - r / slope;
        if !(slope > S::zero()) || !next.is_finite() || next <= lo || next >= hi {
            next = (lo + hi) / S::lit(2.0);
        }
        p = next;
    }
    if !done {
        for _ in 0..BISECTION_BUDGET {
            let r = g(p);
            if r.abs() <= target || hi - lo <= S::epsilon() * (S::one() + p.abs()) {
                break;
            }
            if r < S::zero() {
                lo = p;
            } else {
                hi = p;
            }
            p = (lo + hi) / S::lit(2.0);
        }
    }
    Ok(LagrangianValue {
        value: p * v - model.eval(x, p, u),
        argmax_p: p,
    })
}

/// `∂L/∂u(x, v, u) = -∂H/∂u(x, p*, u)` where `p*` is the Legendre maximizer.
pub fn lagrangian_du<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, x: S, v: S, u: S) -> Result<S> {
    let lv = model.lagrangian(x, v, u)?;
    Ok(-model.d_u(x, lv.argmax_p, u))
}

/// Trigonometric polynomial `c0 + Σ_k (a_k cos kx + b_k sin kx)`.
///
/// Coefficients are stored flat as `[c0, a1, b1, a2, b2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly<S> {
    coeffs: Vec<S>,
}

impl<S: Real> TrigPoly<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(S::zero());
        }
        if coeffs.len().is_multiple_of(2) {
            coeffs.push(S::zero());
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    fn terms(&self) -> impl Iterator<Item = (S, S, S)> + '_ {
        self.coeffs[1..]
            .chunks(2)
            .enumerate()
            .map(|(i, c)| (S::from_usize_lossy(i + 1), c[0], c[1]))
    }

    pub fn eval(&self, x: S) -> S {
        self.coeffs[0]
            + self
                .terms()
                .map(|(k, a, b)| a * (k * x).cos() + b * (k * x).sin())
                .sum::<S>()
    }

    pub fn deriv(&self, x: S) -> S {
        self.terms()
            .map(|(k, a, b)| k * (b * (k * x).cos() - a * (k * x).sin()))
            .sum()
    }

    pub fn deriv2(&self, x: S) -> S {
        self.terms()
            .map(|(k, a, b)| -k * k * (a * (k * x).cos() + b * (k * x).sin()))
            .sum()
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_bound(&self) -> S {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Upper bound on `sup |f'|`.
    pub fn deriv_sup_bound(&self) -> S {
        self.terms().map(|(k, a, b)| k * (a.abs() + b.abs())).sum()
    }

    fn label(&self) -> String {
        self.coeffs
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// `H = u + p²/2`.
#[derive(Debug, Clone)]
pub struct Discounted<S> {
    p_window: S,
}

impl<S: Real> Discounted<S> {
    pub fn new(u_cap: S) -> Self {
        // ½p² = -u on the zero level.
        Self {
            p_window: (S::lit(2.0) * u_cap).sqrt().max(S::one()),
        }
    }
}

impl<S: Real> Hamiltonian<S> for Discounted<S> {
    fn name(&self) -> String {
        "discounted".to_string()
    }
    fn eval(&self, _x: S, p: S, u: S) -> S {
        u + p * p / S::lit(2.0)
    }
    fn d_x(&self, _x: S, _p: S, _u: S) -> S {
        S::zero()
    }
    fn d_p(&self, _x: S, p: S, _u: S) -> S {
        p
    }
    fn d_u(&self, _x: S, _p: S, _u: S) -> S {
        S::one()
    }
    fn d_pp(&self, _x: S, _p: S, _u: S) -> S {
        S::one()
    }
    fn lambda_bound(&self) -> S {
        S::one()
    }
    fn reversible(&self) -> bool {
        true
    }
    fn p_window(&self) -> S {
        self.p_window
    }
    fn lagrangian(&self, _x: S, v: S, u: S) -> Result<LagrangianValue<S>> {
        Ok(LagrangianValue {
            value: v * v / S::lit(2.0) - u,
            argmax_p: v,
        })
    }
    fn separable(&self) -> bool {
        true
    }

    fn known_solution(&self, _x: S) -> Option<S> {
        Some(S::zero())
    }
}

/// `H = p² - g'(x) p - f(x) (u - g(x))`, for which `g` is a classical
/// stationary solution.
#[derive(Debug, Clone)]
pub struct PrescribedSolution<S> {
    f: TrigPoly<S>,
    g: TrigPoly<S>,
    p_window: S,
}

impl<S: Real> PrescribedSolution<S> {
    pub fn new(f: TrigPoly<S>, g: TrigPoly<S>, u_cap: S) -> Self {
        let g1 = g.deriv_sup_bound();
        let quarter = g1 * g1 / S::lit(4.0);
        let p_window = g1 / S::lit(2.0) + (quarter + f.sup_bound() * (u_cap + g.sup_bound())).sqrt();
        Self {
            f,
            g,
            p_window: p_window.max(S::one()),
        }
    }

    /// `f = -1 - ½ sin x`, `g = ½ sin x`: `f < 0` at both critical points of `g`.
    pub fn default_pair(u_cap: S) -> Self {
        let h = S::lit(0.5);
        Self::new(
            TrigPoly::new(vec![-S::one(), S::zero(), -h]),
            TrigPoly::new(vec![S::zero(), S::zero(), h]),
            u_cap,
        )
    }

    pub fn f(&self) -> &TrigPoly<S> {
        &self.f
    }

    pub fn g(&self) -> &TrigPoly<S> {
        &self.g
    }
}

impl<S: Real> Hamiltonian<S> for PrescribedSolution<S> {
    fn name(&self) -> String {
        format!("example1(f={},g={})", self.f.label(), self.g.label())
    }
    fn eval(&self, x: S, p: S, u: S) -> S {
        p * p - self.g.deriv(x) * p - self.f.eval(x) * (u - self.g.eval(x))
    }
    fn d_x(&self, x: S, p: S, u: S) -> S {
        -self.g.deriv2(x) * p - self.f.deriv(x) * (u - self.g.eval(x)) + self.f.eval(x) * self.g.deriv(x)
    }
    fn d_p(&self, x: S, p: S, _u: S) -> S {
        p + p - self.g.deriv(x)
    }
    fn d_u(&self, x: S, _p: S, _u: S) -> S {
        -self.f.eval(x)
    }
    fn d_pp(&self, _x: S, _p: S, _u: S) -> S {
        S::lit(2.0)
    }
    fn lambda_bound(&self) -> S {
        self.f.sup_bound()
    }
    fn p_window(&self) -> S {
        self.p_window
    }
    fn lagrangian(&self, x: S, v: S, u: S) -> Result<LagrangianValue<S>> {
        let shifted = v + self.g.deriv(x);
        Ok(LagrangianValue {
            value: shifted * shifted / S::lit(4.0) + self.f.eval(x) * (u - self.g.eval(x)),
            argmax_p: shifted / S::lit(2.0),
        })
    }
    fn lagrangian_at<'a>(&'a self, x: S) -> Box<dyn Fn(S, S) -> S + 'a> {
        let (dg, fx, gx) = (self.g.deriv(x), self.f.eval(x), self.g.eval(x));
        Box::new(move |v, u| (v + dg) * (v + dg) / S::lit(4.0) + fx * (u - gx))
    }
    fn separable(&self) -> bool {
        true
    }

    fn known_solution(&self, x: S) -> Option<S> {
        Some(self.g.eval(x))
    }
}

/// `H = ½p² + ½u + sin u`.
#[derive(Debug, Clone)]
pub struct SineCoupled<S> {
    p_window: S,
}

impl<S: Real> SineCoupled<S> {
    pub fn new(u_cap: S) -> Self {
        Self {
            p_window: (u_cap + S::lit(2.0)).sqrt(),
        }
    }
}

impl<S: Real> Hamiltonian<S> for SineCoupled<S> {
    fn name(&self) -> String {
        "example2".to_string()
    }
    fn eval(&self, _x: S, p: S, u: S) -> S {
        let h = S::lit(0.5);
        h * p * p + h * u + u.sin()
    }
    fn d_x(&self, _x: S, _p: S, _u: S) -> S {
        S::zero()
    }
    fn d_p(&self, _x: S, p: S, _u: S) -> S {
        p
    }
    fn d_u(&self, _x: S, _p: S, u: S) -> S {
        S::lit(0.5) + u.cos()
    }
    fn d_pp(&self, _x: S, _p: S, _u: S) -> S {
        S::one()
    }
    fn lambda_bound(&self) -> S {
        S::lit(1.5)
    }
    fn reversible(&self) -> bool {
        true
    }
    fn p_window(&self) -> S {
        self.p_window
    }
    fn lagrangian(&self, _x: S, v: S, u: S) -> Result<LagrangianValue<S>> {
        let h = S::lit(0.5);
        Ok(LagrangianValue {
            value: h * v * v - h * u - u.sin(),
            argmax_p: v,
        })
    }
    fn separable(&self) -> bool {
        true
    }

    fn known_solution(&self, _x: S) -> Option<S> {
        Some(S::zero())
    }
}

/// `H = ½p² - a p + (sin x + b) u`.
#[derive(Debug, Clone)]
pub struct AdvectedLinear<S> {
    a: S,
    b: S,
    p_window: S,
}

impl<S: Real> AdvectedLinear<S> {
    pub fn new(a: S, b: S, u_cap: S) -> Self {
        let two = S::lit(2.0);
        let p_window = a.abs() + (a * a + two * (S::one() + b.abs()) * (S::one() + u_cap)).sqrt();
        Self { a, b, p_window }
    }

    pub fn a(&self) -> S {
        self.a
    }

    pub fn b(&self) -> S {
        self.b
    }
}

impl<S: Real> Hamiltonian<S> for AdvectedLinear<S> {
    fn name(&self) -> String {
        format!("example3(a={},b={})", self.a, self.b)
    }
    fn eval(&self, x: S, p: S, u: S) -> S {
        S::lit(0.5) * p * p - self.a * p + (x.sin() + self.b) * u
    }
    fn d_x(&self, x: S, _p: S, u: S) -> S {
        x.cos() * u
    }
    fn d_p(&self, _x: S, p: S, _u: S) -> S {
        p - self.a
    }
    fn d_u(&self, x: S, _p: S, _u: S) -> S {
        x.sin() + self.b
    }
    fn d_pp(&self, _x: S, _p: S, _u: S) -> S {
        S::one()
    }
    fn lambda_bound(&self) -> S {
        S::one() + self.b.abs()
    }
    fn reversible(&self) -> bool {
        self.a == S::zero()
    }
    fn p_window(&self) -> S {
        self.p_window
    }
    fn lagrangian(&self, x: S, v: S, u: S) -> Result<LagrangianValue<S>> {
        let shifted = v + self.a;
        Ok(LagrangianValue {
            value: S::lit(0.5) * shifted * shifted - (x.sin() + self.b) * u,
            argmax_p: shifted,
        })
    }
    fn lagrangian_at<'a>(&'a self, x: S) -> Box<dyn Fn(S, S) -> S + 'a> {
        let (a, c) = (self.a, x.sin() + self.b);
        Box::new(move |v, u| S::lit(0.5) * (v + a) * (v + a) - c * u)
    }
    fn separable(&self) -> bool {
        true
    }

    fn known_solution(&self, _x: S) -> Option<S> {
        Some(S::zero())
    }
}

/// One representative of each built-in family: `example1` with its default
/// `(f, g)`, `example2`, `example3(a=0,b=2)` and `discounted`.
pub fn builtin_catalog<S: Real>(u_cap: S) -> Vec<Model<S>> {
    vec![
        Box::new(PrescribedSolution::default_pair(u_cap)),
        Box::new(SineCoupled::new(u_cap)),
        Box::new(AdvectedLinear::new(S::zero(), S::lit(2.0), u_cap)),
        Box::new(Discounted::new(u_cap)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Wraps a built-in so that only `eval` and metadata are visible,
    /// exercising the finite-difference and Newton fallbacks.
    struct EvalOnly<'a>(&'a dyn Hamiltonian<f64>);

    impl Hamiltonian<f64> for EvalOnly<'_> {
        fn name(&self) -> String {
            self.0.name()
        }
        fn eval(&self, x: f64, p: f64, u: f64) -> f64 {
            self.0.eval(x, p, u)
        }
        fn lambda_bound(&self) -> f64 {
            self.0.lambda_bound()
        }
        fn p_window(&self) -> f64 {
            self.0.p_window()
        }
    }

    fn all_models() -> Vec<Model<f64>> {
        let mut v = builtin_catalog(4.0);
        v.push(Box::new(AdvectedLinear::<f64>::new(1.0, 1.0, 4.0)));
        v.push(Box::new(AdvectedLinear::<f64>::new(-0.7, 0.5, 4.0)));
        v
    }

    #[test]
    fn eval_examples() {
        let ex3 = AdvectedLinear::<f64>::new(1.0, 1.0, 4.0);
        assert_eq!(eval_hamiltonian(&ex3, 0.0, 0.0, 0.0), 0.0);
        let ex2 = SineCoupled::<f64>::new(4.0);
        for x in [0.0, 1.0, 4.0] {
            assert_eq!(ex2.eval(x, 0.0, 0.0), 0.0);
        }
        let ex3 = AdvectedLinear::<f64>::new(0.0, 2.0, 4.0);
        assert!((ex3.eval(PI / 2.0, 1.0, 1.0) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn catalog_metadata() {
        let cat = builtin_catalog::<f64>(4.0);
        let by_name = |n: &str| cat.iter().find(|m| m.name() == n).expect(n);
        assert_eq!(by_name("example3(a=0,b=2)").lambda_bound(), 3.0);
        assert_eq!(by_name("discounted").lambda_bound(), 1.0);
        assert!(by_name("example2").reversible());
        assert!(cat.iter().any(|m| m.name().starts_with("example1(")));
        assert_eq!(cat.len(), 4);
    }

    #[test]
    fn closed_form_lagrangians() {
        let ex1 = PrescribedSolution::<f64>::default_pair(4.0);
        let ex3 = AdvectedLinear::<f64>::new(1.0, 0.5, 4.0);
        let disc = Discounted::<f64>::new(4.0);
        for &(x, v, u) in &[(0.3, -1.2, 0.4), (2.0, 0.7, -1.0), (5.5, 3.0, 2.0)] {
            let dg = ex1.g().deriv(x);
            let want = 0.25 * (v + dg) * (v + dg) + ex1.f().eval(x) * (u - ex1.g().eval(x));
            assert!((legendre(&ex1, x, v, u).unwrap().value - want).abs() < 1e-10);

            let lv = legendre(&ex3, x, v, u).unwrap();
            let want = 0.5 * (v + 1.0) * (v + 1.0) - (x.sin() + 0.5) * u;
            assert!((lv.value - want).abs() < 1e-10);
            assert!((lv.argmax_p - (v + 1.0)).abs() < 1e-10);

            let lv = legendre(&disc, x, v, u).unwrap();
            assert!((lv.value - (0.5 * v * v - u)).abs() < 1e-10);
            assert!((lv.argmax_p - v).abs() < 1e-10);
        }
    }

    #[test]
    fn lagrangian_du_examples() {
        let ex1 = PrescribedSolution::<f64>::default_pair(4.0);
        let ex3 = AdvectedLinear::<f64>::new(1.0, 0.5, 4.0);
        let disc = Discounted::<f64>::new(4.0);
        for &(x, v, u) in &[(0.3, -1.2, 0.4), (4.0, 2.5, -3.0)] {
            assert!((lagrangian_du(&ex1, x, v, u).unwrap() - ex1.f().eval(x)).abs() < 1e-14);
            assert!((lagrangian_du(&ex3, x, v, u).unwrap() + (x.sin() + 0.5)).abs() < 1e-14);
            assert_eq!(lagrangian_du(&disc, x, v, u).unwrap(), -1.0);
        }
    }

    #[test]
    fn newton_matches_closed_form_and_first_order_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in all_models() {
            let fallback = EvalOnly(m.as_ref());
            for _ in 0..200 {
                let x = rng.gen_range(0.0..2.0 * PI);
                let v = rng.gen_range(-6.0..6.0);
                let u = rng.gen_range(-3.0..3.0);
                let closed = m.lagrangian(x, v, u).unwrap();
                let newton = legendre(m.as_ref(), x, v, u).unwrap();
                assert!((m.d_p(x, newton.argmax_p, u) - v).abs() <= 1e-10);
                assert!((closed.value - newton.value).abs() < 1e-9, "{}", m.name());
                // Finite-difference slopes only; still converges through the bracket.
                let fd = legendre(&fallback, x, v, u).unwrap();
                assert!((fd.value - closed.value).abs() < 1e-6, "{}", m.name());
            }
        }
    }

    #[test]
    fn legendre_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in all_models() {
            for _ in 0..50 {
                let x = rng.gen_range(0.0..2.0 * PI);
                let p = rng.gen_range(-3.0..3.0);
                let u = rng.gen_range(-2.0..2.0);
                // Golden-section maximization of p v - L over a velocity window.
                let centre = m.d_p(x, p, u);
                let obj = |v: f64| p * v - m.lagrangian(x, v, u).unwrap().value;
                let (mut lo, mut hi) = (centre - 2.0, centre + 2.0);
                let r = (5f64.sqrt() - 1.0) / 2.0;
                for _ in 0..120 {
                    let a = hi - r * (hi - lo);
                    let b = lo + r * (hi - lo);
                    if obj(a) > obj(b) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                let h = obj(0.5 * (lo + hi));
                assert!((h - m.eval(x, p, u)).abs() < 1e-8, "{}", m.name());
            }
        }
    }

    #[test]
    fn lagrangian_du_is_minus_hamiltonian_du() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in all_models() {
            for _ in 0..100 {
                let x = rng.gen_range(0.0..2.0 * PI);
                let p = rng.gen_range(-3.0..3.0);
                let u = rng.gen_range(-2.0..2.0);
                let v = m.d_p(x, p, u);
                let lu = lagrangian_du(m.as_ref(), x, v, u).unwrap();
                assert!((lu + m.d_u(x, p, u)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for m in all_models() {
            for _ in 0..1000 {
                let x = rng.gen_range(0.0..2.0 * PI);
                let p = rng.gen_range(-3.0..3.0);
                let u = rng.gen_range(-3.0..3.0);
                let fd = [
                    (m.eval(x + h, p, u) - m.eval(x - h, p, u)) / (2.0 * h),
                    (m.eval(x, p + h, u) - m.eval(x, p - h, u)) / (2.0 * h),
                    (m.eval(x, p, u + h) - m.eval(x, p, u - h)) / (2.0 * h),
                ];
                let an = [m.d_x(x, p, u), m.d_p(x, p, u), m.d_u(x, p, u)];
                for (a, f) in an.iter().zip(fd.iter()) {
                    assert!((a - f).abs() <= 1e-5 * a.abs().max(1.0), "{}: {a} vs {f}", m.name());
                }
            }
        }
    }

    #[test]
    fn structural_assumptions_on_sampled_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in all_models() {
            let lam = m.lambda_bound();
            for _ in 0..500 {
                let x = rng.gen_range(0.0..2.0 * PI);
                let p = rng.gen_range(-4.0..4.0);
                let u = rng.gen_range(-4.0..4.0);
                let dp = 1e-3;
                let second = m.eval(x, p + dp, u) - 2.0 * m.eval(x, p, u) + m.eval(x, p - dp, u);
                assert!(second > 0.0, "convexity fails for {}", m.name());
                assert!(m.d_u(x, p, u).abs() <= lam + 1e-12);
                if m.reversible() {
                    assert!((m.eval(x, p, u) - m.eval(x, -p, u)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bracket_exhausted_for_non_superlinear_model() {
        struct Saturating;
        impl Hamiltonian<f64> for Saturating {
            fn name(&self) -> String {
                "saturating".into()
            }
            fn eval(&self, _x: f64, p: f64, _u: f64) -> f64 {
                (1.0 + p * p).sqrt()
            }
            fn lambda_bound(&self) -> f64 {
                0.0
            }
            fn p_window(&self) -> f64 {
                1.0
            }
        }
        assert!(matches!(
            legendre(&Saturating, 0.0, 2.0, 0.0),
            Err(Error::BracketExhausted { .. })
        ));
        assert!(legendre(&Saturating, 0.0, 0.5, 0.0).is_ok());
    }

    #[test]
    fn trig_poly_derivatives() {
        let t = TrigPoly::<f64>::new(vec![0.3, -0.2, 0.5, 0.1, -0.4]);
        let h = 1e-5;
        for &x in &[0.0, 1.1, 4.0] {
            assert!(((t.eval(x + h) - t.eval(x - h)) / (2.0 * h) - t.deriv(x)).abs() < 1e-8);
            assert!(((t.deriv(x + h) - t.deriv(x - h)) / (2.0 * h) - t.deriv2(x)).abs() < 1e-8);
        }
        assert_eq!(t.degree(), 2);
        assert_eq!(TrigPoly::<f64>::new(vec![1.0, 2.0]).coeffs().len(), 3);
    }

    #[test]
    fn frozen_lagrangian_matches_transform() {
        for m in all_models() {
            for &x in &[0.0, 1.3, 4.0] {
                let l = m.lagrangian_at(x);
                for &(v, u) in &[(0.0, 0.0), (0.7, -0.4), (-1.5, 1.1)] {
                    let want = m.lagrangian(x, v, u).unwrap().value;
                    assert!((l(v, u) - want).abs() < 1e-12, "{}", m.name());
                }
            }
        }
    }
}
