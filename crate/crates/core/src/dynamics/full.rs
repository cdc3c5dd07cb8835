//! Symplectic integration of the full planetary problem in canonical
//! astrocentric variables: positions relative to the star, momenta measured
//! in the barycentric frame. The Hamiltonian splits as
//! `Σ_j (|p̃_j|²/2β_j − 𝒢m₀m_j/r_j) + p̃₁·p̃₂/m₀ − 𝒢m₁m₂/Δ`,
//! integrated with the SABA₃ scheme: Keplerian drifts at the Gauss–Legendre
//! substeps, interaction steps in between. The interaction itself splits into
//! a momentum drift and a position kick, composed symmetrically so the whole
//! map stays time-reversible.

use super::{Chart, Trajectory};
use crate::error::{Error, Result};
use crate::hambuild::OrbitalConfig;
use crate::orbit::{elements_to_state, state_to_elements, PlanarElements};

/// Planar state of the two-planet system: astrocentric positions and the
/// conjugate (barycentric) momenta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullState {
    pub pos: [[f64; 2]; 2],
    pub mom: [[f64; 2]; 2],
}

impl FullState {
    /// Builds the canonical state from astrocentric osculating elements.
    /// The elements fix the true astrocentric velocities ṙ_j, which relate
    /// to the barycentric momenta through ṙ_j = p̃_j/β_j + p̃_k/m₀ — a 2×2
    /// linear solve per component.
    pub fn from_elements(cfg: &OrbitalConfig, elements: &[PlanarElements; 2]) -> Result<Self> {
        let mut pos = [[0.0; 2]; 2];
        let mut vel = [[0.0; 2]; 2];
        for j in 0..2 {
            let (r, v) = elements_to_state(cfg.mu_grav(j), &elements[j])?;
            pos[j] = r;
            vel[j] = v;
        }
        let (b1, b2, m0) = (cfg.beta(0), cfg.beta(1), cfg.m0);
        let mut mom = [[0.0; 2]; 2];
        for i in 0..2 {
            let det = 1.0 / (b1 * b2) - 1.0 / (m0 * m0);
            mom[0][i] = (vel[0][i] / b2 - vel[1][i] / m0) / det;
            mom[1][i] = (vel[1][i] / b1 - vel[0][i] / m0) / det;
        }
        Ok(FullState { pos, mom })
    }

    /// True astrocentric velocity ṙ_j = ∂H/∂p̃_j = p̃_j/β_j + p̃_k/m₀.
    pub fn velocity(&self, cfg: &OrbitalConfig, j: usize) -> [f64; 2] {
        let k = 1 - j;
        [
            self.mom[j][0] / cfg.beta(j) + self.mom[k][0] / cfg.m0,
            self.mom[j][1] / cfg.beta(j) + self.mom[k][1] / cfg.m0,
        ]
    }

    pub fn to_elements(&self, cfg: &OrbitalConfig) -> Result<[PlanarElements; 2]> {
        let mut out = [PlanarElements { a: 0.0, e: 0.0, omega: 0.0, mean_anom: 0.0 }; 2];
        for j in 0..2 {
            out[j] = state_to_elements(cfg.mu_grav(j), self.pos[j], self.velocity(cfg, j))?;
        }
        Ok(out)
    }

    pub fn energy(&self, cfg: &OrbitalConfig) -> f64 {
        let mut h = 0.0;
        for j in 0..2 {
            let p2 = self.mom[j][0].powi(2) + self.mom[j][1].powi(2);
            let r = self.pos[j][0].hypot(self.pos[j][1]);
            h += p2 / (2.0 * cfg.beta(j)) - cfg.g_const * cfg.m0 * cfg.planet_mass(j) / r;
        }
        let dx = self.pos[0][0] - self.pos[1][0];
        let dy = self.pos[0][1] - self.pos[1][1];
        h += (self.mom[0][0] * self.mom[1][0] + self.mom[0][1] * self.mom[1][1]) / cfg.m0
            - cfg.g_const * cfg.planet_mass(0) * cfg.planet_mass(1) / dx.hypot(dy);
        h
    }
}

/// Stumpff functions C(z) and S(z), with series fallbacks near zero.
fn stumpff(z: f64) -> (f64, f64) {
    if z > 1e-6 {
        let s = z.sqrt();
        ((1.0 - s.cos()) / z, (s - s.sin()) / (z * s))
    } else if z < -1e-6 {
        let s = (-z).sqrt();
        ((s.cosh() - 1.0) / (-z), (s.sinh() - s) / (-z * s))
    } else {
        // C = 1/2 − z/24 + z²/720, S = 1/6 − z/120 + z²/5040
        (0.5 - z / 24.0 + z * z / 720.0, 1.0 / 6.0 - z / 120.0 + z * z / 5040.0)
    }
}

/// Exact Keplerian propagation by `dt` in universal variables: Newton on the
/// universal anomaly with Stumpff-function kinematics, valid across all
/// conic regimes.
pub fn kepler_universal(
    mu: f64,
    pos: [f64; 2],
    vel: [f64; 2],
    dt: f64,
) -> Result<([f64; 2], [f64; 2])> {
    if dt == 0.0 {
        return Ok((pos, vel));
    }
    let r0 = pos[0].hypot(pos[1]);
    let v2 = vel[0] * vel[0] + vel[1] * vel[1];
    let vr0 = (pos[0] * vel[0] + pos[1] * vel[1]) / r0;
    let sqrt_mu = mu.sqrt();
    let alpha = 2.0 / r0 - v2 / mu; // 1/a, any sign
    let mut chi = if alpha > 1e-12 {
        sqrt_mu * alpha * dt
    } else {
        dt.signum() * sqrt_mu.sqrt() * dt.abs().sqrt() / r0.sqrt()
    };
    let mut converged = false;
    for _ in 0..64 {
        let z = alpha * chi * chi;
        let (c, s) = stumpff(z);
        let f = r0 * vr0 / sqrt_mu * chi * chi * c
            + (1.0 - alpha * r0) * chi * chi * chi * s
            + r0 * chi
            - sqrt_mu * dt;
        let fp = r0 * vr0 / sqrt_mu * chi * (1.0 - z * s)
            + (1.0 - alpha * r0) * chi * chi * c
            + r0;
        let step = f / fp;
        chi -= step;
        if step.abs() < 1e-14 * chi.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "universal Kepler step: μ={mu}, dt={dt}"
        )));
    }
    let z = alpha * chi * chi;
    let (c, s) = stumpff(z);
    let f = 1.0 - chi * chi * c / r0;
    let g = dt - chi * chi * chi * s / sqrt_mu;
    let new_pos = [f * pos[0] + g * vel[0], f * pos[1] + g * vel[1]];
    let r = new_pos[0].hypot(new_pos[1]);
    let fdot = sqrt_mu / (r * r0) * (z * chi * s - chi);
    let gdot = 1.0 - chi * chi * c / r;
    let new_vel = [fdot * pos[0] + gdot * vel[0], fdot * pos[1] + gdot * vel[1]];
    Ok((new_pos, new_vel))
}

/// SABA₃ substep fractions: Gauss–Legendre nodes for the drifts, weights for
/// the interaction steps.
const C1: f64 = 0.5 - 0.25819888974716112567; // (1 − √15/5)/2 split
const C2: f64 = 0.25819888974716112567; // √15/10
const D1: f64 = 5.0 / 18.0;
const D2: f64 = 4.0 / 9.0;

fn drift_kepler(cfg: &OrbitalConfig, state: &mut FullState, dt: f64) -> Result<()> {
    for j in 0..2 {
        let beta = cfg.beta(j);
        let v = [state.mom[j][0] / beta, state.mom[j][1] / beta];
        let (r, v) = kepler_universal(cfg.mu_grav(j), state.pos[j], v, dt)?;
        state.pos[j] = r;
        state.mom[j] = [beta * v[0], beta * v[1]];
    }
    Ok(())
}

/// One interaction step of size `dt`: half position-kick, full momentum
/// drift, half position-kick — symmetric, so SABA₃'s palindrome survives.
fn interaction(cfg: &OrbitalConfig, state: &mut FullState, dt: f64) {
    let kick = |state: &mut FullState, dt: f64| {
        let dx = state.pos[0][0] - state.pos[1][0];
        let dy = state.pos[0][1] - state.pos[1][1];
        let d3 = dx.hypot(dy).powi(3);
        let k = cfg.g_const * cfg.planet_mass(0) * cfg.planet_mass(1) / d3;
        state.mom[0][0] -= dt * k * dx;
        state.mom[0][1] -= dt * k * dy;
        state.mom[1][0] += dt * k * dx;
        state.mom[1][1] += dt * k * dy;
    };
    kick(state, dt / 2.0);
    // T₁ = p̃₁·p̃₂/m₀ advances each position along the other's momentum
    for j in 0..2 {
        state.pos[j][0] += dt * state.mom[1 - j][0] / cfg.m0;
        state.pos[j][1] += dt * state.mom[1 - j][1] / cfg.m0;
    }
    kick(state, dt / 2.0);
}

/// One SABA₃ step.
pub fn saba3_step(cfg: &OrbitalConfig, state: &mut FullState, dt: f64) -> Result<()> {
    drift_kepler(cfg, state, C1 * dt)?;
    interaction(cfg, state, D1 * dt);
    drift_kepler(cfg, state, C2 * dt)?;
    interaction(cfg, state, D2 * dt);
    drift_kepler(cfg, state, C2 * dt)?;
    interaction(cfg, state, D1 * dt);
    drift_kepler(cfg, state, C1 * dt)?;
    Ok(())
}

/// Integrates the full problem from the configured initial elements over `t`
/// years, sampling every `sample_every` steps into an element-chart
/// trajectory `(a₁, e₁, ω₁, λ₁, a₂, e₂, ω₂, λ₂)`.
pub fn integrate_full(
    cfg: &OrbitalConfig,
    t_span: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    let inner_period = {
        let a = cfg.planets[0].a;
        2.0 * std::f64::consts::PI * (a.powi(3) / cfg.mu_grav(0)).sqrt()
    };
    if dt > inner_period / 40.0 {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} exceeds 1/40 of the inner period {inner_period:.4}"
        )));
    }
    let elements = [cfg.initial_elements(0), cfg.initial_elements(1)];
    let mut state = FullState::from_elements(cfg, &elements)?;
    let steps = (t_span / dt).ceil() as usize;
    let mut traj = Trajectory::new(Chart::Elements, 8);
    let record = |traj: &mut Trajectory, t: f64, state: &FullState| -> Result<()> {
        let el = state.to_elements(cfg)?;
        traj.push(
            t,
            vec![
                el[0].a,
                el[0].e,
                el[0].omega,
                el[0].lambda(),
                el[1].a,
                el[1].e,
                el[1].omega,
                el[1].lambda(),
            ],
        );
        Ok(())
    };
    record(&mut traj, 0.0, &state)?;
    for step in 1..=steps {
        saba3_step(cfg, &mut state, dt)?;
        if step % sample_every == 0 || step == steps {
            record(&mut traj, step as f64 * dt, &state)?;
        }
    }
    Ok(traj)
}
