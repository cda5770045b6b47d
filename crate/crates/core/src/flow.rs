//! Integration of the contact Hamiltonian system
//!
//! ```text
//! ẋ = ∂H/∂p,   ṗ = -∂H/∂x - (∂H/∂u) p,   u̇ = (∂H/∂p) p - H
//! ```
//!
//! with classical fixed-step RK4, Lie derivatives along the flow and the
//! level-set identity `d/dt H = -(∂H/∂u) H`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::hamiltonians::Hamiltonian;
use crate::scalar::Real;

/// Orbits with `|p|` or `|u|` above this are reported as diverged.
pub const DEFAULT_BLOWUP_CAP: f64 = 1e6;

/// A point `(x, p, u)` of `T*S × R`; `x` is kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState<S> {
    pub x: S,
    pub p: S,
    pub u: S,
}

impl<S: Real> ContactState<S> {
    pub fn new(x: S, p: S, u: S) -> Self {
        Self { x: x.wrap_angle(), p, u }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.u.is_finite()
    }

    /// Euclidean distance in `(x, p, u)` with the angular metric in `x`.
    pub fn distance(&self, other: &Self) -> S {
        let dx = self.x.angle_diff(other.x);
        let dp = self.p - other.p;
        let du = self.u - other.u;
        (dx * dx + dp * dp + du * du).sqrt()
    }
}

/// Right-hand side of the contact system at `z`.
pub fn vector_field<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, z: &ContactState<S>) -> [S; 3] {
    let (x, p, u) = (z.x, z.p, z.u);
    let hp = model.d_p(x, p, u);
    [
        hp,
        -model.d_x(x, p, u) - model.d_u(x, p, u) * p,
        hp * p - model.eval(x, p, u),
    ]
}

pub fn vector_field_norm<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, z: &ContactState<S>) -> S {
    let f = vector_field(model, z);
    (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()
}

/// One classical RK4 step of signed size `h`.
pub fn rk4_step<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, z: &ContactState<S>, h: S) -> ContactState<S> {
    let two = S::lit(2.0);
    let six = S::lit(6.0);
    let shift = |k: &[S; 3], c: S| ContactState {
        x: z.x + c * k[0],
        p: z.p + c * k[1],
        u: z.u + c * k[2],
    };
    let k1 = vector_field(model, z);
    let k2 = vector_field(model, &shift(&k1, h / two));
    let k3 = vector_field(model, &shift(&k2, h / two));
    let k4 = vector_field(model, &shift(&k3, h));
    let inc = |i: usize| h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    ContactState::new(z.x + inc(0), z.p + inc(1), z.u + inc(2))
}

/// Sampled orbit of the contact flow.
#[derive(Debug, Clone)]
pub struct OrbitSample<S> {
    pub t0: S,
    /// Positive step size; `backward` gives the direction of time.
    pub dt: S,
    pub backward: bool,
    pub states: Vec<ContactState<S>>,
    pub model: String,
}

impl<S: Real> OrbitSample<S> {
    pub fn time(&self, k: usize) -> S {
        let off = self.dt * S::from_usize_lossy(k);
        if self.backward {
            self.t0 - off
        } else {
            self.t0 + off
        }
    }

    pub fn first(&self) -> &ContactState<S> {
        &self.states[0]
    }

    pub fn last(&self) -> &ContactState<S> {
        self.states.last().expect("orbit has at least one state")
    }

    /// Signed step between consecutive samples.
    pub fn step(&self) -> S {
        if self.backward {
            -self.dt
        } else {
            self.dt
        }
    }
}

fn check_flow_args<S: Real>(t: S, dt: S) -> Result<usize> {
    if !(dt > S::zero()) || dt > S::lit(1e-2) * (S::one() + S::epsilon()) {
        return Err(Error::InvalidConfig(format!("flow step dt = {dt} must lie in (0, 1e-2]")));
    }
    let ratio = (t.abs() / dt).round();
    if ratio.f64() > 1e8 {
        return Err(Error::InvalidConfig(format!("|T|/dt = {ratio} exceeds 1e8")));
    }
    Ok(ratio.f64() as usize)
}

/// Integrates from `z0` for time `t` (negative integrates backwards) with
/// `round(|t|/dt)` RK4 steps.
pub fn flow<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, z0: ContactState<S>, t: S, dt: S) -> Result<OrbitSample<S>> {
    flow_capped(model, z0, t, dt, S::lit(DEFAULT_BLOWUP_CAP))
}

pub fn flow_capped<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    z0: ContactState<S>,
    t: S,
    dt: S,
    cap: S,
) -> Result<OrbitSample<S>> {
    let steps = check_flow_args(t, dt)?;
    let h = if steps == 0 { dt } else { t.abs() / S::from_usize_lossy(steps) };
    let backward = t < S::zero();
    let signed = if backward { -h } else { h };
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = ContactState::new(z0.x, z0.p, z0.u);
    states.push(z);
    for k in 1..=steps {
        z = rk4_step(model, &z, signed);
        if !z.is_finite() || z.p.abs() > cap || z.u.abs() > cap {
            return Err(Error::Diverged {
                t: (signed * S::from_usize_lossy(k)).f64(),
                p: z.p.abs().f64(),
                u: z.u.abs().f64(),
            });
        }
        states.push(z);
    }
    Ok(OrbitSample {
        t0: S::zero(),
        dt: h,
        backward,
        states,
        model: model.name(),
    })
}

/// Integrates without storing intermediate states; returns the final state.
pub fn flow_endpoint<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    z0: ContactState<S>,
    t: S,
    dt: S,
) -> Result<ContactState<S>> {
    let steps = check_flow_args(t, dt)?;
    if steps == 0 {
        return Ok(z0);
    }
    let h = t / S::from_usize_lossy(steps);
    let cap = S::lit(DEFAULT_BLOWUP_CAP);
    let mut z = z0;
    for k in 1..=steps {
        z = rk4_step(model, &z, h);
        if !z.is_finite() || z.p.abs() > cap || z.u.abs() > cap {
            return Err(Error::Diverged {
                t: (h * S::from_usize_lossy(k)).f64(),
                p: z.p.abs().f64(),
                u: z.u.abs().f64(),
            });
        }
    }
    Ok(z)
}

/// `max_k |H(z_k) - H(z_0) exp(-∫ ∂H/∂u ds)|`, integral by the trapezoid rule.
pub fn level_residual<S: Real, M: Hamiltonian<S> + ?Sized>(model: &M, orbit: &OrbitSample<S>) -> S {
    let h_of = |z: &ContactState<S>| model.eval(z.x, z.p, z.u);
    let du_of = |z: &ContactState<S>| model.d_u(z.x, z.p, z.u);
    let z0 = orbit.first();
    let h0 = h_of(z0);
    let step = orbit.step();
    let half = S::lit(0.5);
    let mut integral = S::zero();
    let mut prev = du_of(z0);
    let mut worst = S::zero();
    for z in orbit.states.iter().skip(1) {
        let cur = du_of(z);
        integral += half * step * (prev + cur);
        prev = cur;
        let r = (h_of(z) - h0 * (-integral).exp()).abs();
        if r > worst {
            worst = r;
        }
    }
    worst
}

/// Stencil step of the finite-difference Lie derivatives.
pub const LIE_STENCIL: f64 = 1e-3;

/// `k`-th time derivative of `F` along the flow at `z` (`k` ∈ {0, 1, 2}),
/// by five-point central differences over a short RK4 orbit.
///
/// # Panics
/// If `k > 2`.
pub fn lie_derivative<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    f: &dyn Fn(&ContactState<S>) -> S,
    z: &ContactState<S>,
    k: usize,
) -> S {
    assert!(k <= 2, "Lie derivatives are available up to order 2");
    let f0 = f(z);
    if k == 0 {
        return f0;
    }
    let h = S::lit(LIE_STENCIL);
    let zp1 = rk4_step(model, z, h);
    let zp2 = rk4_step(model, &zp1, h);
    let zm1 = rk4_step(model, z, -h);
    let zm2 = rk4_step(model, &zm1, -h);
    let (fp1, fp2, fm1, fm2) = (f(&zp1), f(&zp2), f(&zm1), f(&zm2));
    let twelve = S::lit(12.0);
    if k == 1 {
        (fm2 - fp2 + S::lit(8.0) * (fp1 - fm1)) / (twelve * h)
    } else {
        (-fp2 + S::lit(16.0) * (fp1 + fm1) - S::lit(30.0) * f0 - fm2) / (twelve * h * h)
    }
}

/// Writes `t,x,p,u,H` rows.
pub fn write_orbit_csv<S: Real, M: Hamiltonian<S> + ?Sized>(
    model: &M,
    orbit: &OrbitSample<S>,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    writeln!(out, "t,x,p,u,H")?;
    for (k, z) in orbit.states.iter().enumerate() {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            orbit.time(k).f64(),
            z.x.f64(),
            z.p.f64(),
            z.u.f64(),
            model.eval(z.x, z.p, z.u).f64()
        )?;
    }
    Ok(())
}
