//! Planar two-body helpers: Kepler's equation, element/state conversions, and
//! exact Keplerian propagation. Everything here works with the gravitational
//! parameter `μ = 𝒢(m₀+m_j)` of an astrocentric orbit and planar (2-D)
//! positions and velocities.

use crate::error::{Error, Result};

/// Planar orbital elements: semi-major axis, eccentricity, argument of
/// periapsis and mean anomaly (both radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarElements {
    pub a: f64,
    pub e: f64,
    pub omega: f64,
    pub mean_anom: f64,
}

impl PlanarElements {
    /// Mean longitude λ = M + ω.
    pub fn lambda(&self) -> f64 {
        self.mean_anom + self.omega
    }
}

/// Solves Kepler's equation `E − e sin E = M` by Newton iteration.
pub fn solve_kepler(mean_anom: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidInput(format!("eccentricity {e} outside [0,1)")));
    }
    let m = mean_anom.rem_euclid(2.0 * std::f64::consts::PI);
    let mut big_e = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..64 {
        let f = big_e - e * big_e.sin() - m;
        let fp = 1.0 - e * big_e.cos();
        let step = f / fp;
        big_e -= step;
        if step.abs() < 4e-15 * big_e.abs().max(1.0) {
            // one final polish pass keeps the residual at rounding level
            let f = big_e - e * big_e.sin() - m;
            big_e -= f / (1.0 - e * big_e.cos());
            return Ok(big_e + (mean_anom - m));
        }
    }
    Err(Error::NoConvergence(format!("Kepler equation at M={mean_anom}, e={e}")))
}

/// Position and velocity in the orbital plane from elements.
pub fn elements_to_state(mu: f64, el: &PlanarElements) -> Result<([f64; 2], [f64; 2])> {
    let big_e = solve_kepler(el.mean_anom, el.e)?;
    let (sin_e, cos_e) = big_e.sin_cos();
    let sq = (1.0 - el.e * el.e).sqrt();
    let n = (mu / el.a.powi(3)).sqrt();
    // perifocal frame
    let xp = el.a * (cos_e - el.e);
    let yp = el.a * sq * sin_e;
    let r = el.a * (1.0 - el.e * cos_e);
    let vxp = -el.a * el.a * n * sin_e / r;
    let vyp = el.a * el.a * n * sq * cos_e / r;
    // rotate by the argument of periapsis
    let (s, c) = el.omega.sin_cos();
    Ok((
        [c * xp - s * yp, s * xp + c * yp],
        [c * vxp - s * vyp, s * vxp + c * vyp],
    ))
}

/// Planar elements from position and velocity (bound, prograde orbits).
pub fn state_to_elements(mu: f64, pos: [f64; 2], vel: [f64; 2]) -> Result<PlanarElements> {
    let r = pos[0].hypot(pos[1]);
    let v2 = vel[0] * vel[0] + vel[1] * vel[1];
    let energy = v2 / 2.0 - mu / r;
    if energy >= 0.0 {
        return Err(Error::InvalidInput(format!("unbound orbit (energy {energy})")));
    }
    let a = -mu / (2.0 * energy);
    let rv = pos[0] * vel[0] + pos[1] * vel[1];
    // planar eccentricity vector
    let ex = ((v2 - mu / r) * pos[0] - rv * vel[0]) / mu;
    let ey = ((v2 - mu / r) * pos[1] - rv * vel[1]) / mu;
    let e = ex.hypot(ey);
    let omega = ey.atan2(ex);
    // true longitude minus ω gives the true anomaly; convert through the
    // eccentric anomaly to the mean anomaly
    let nu = pos[1].atan2(pos[0]) - omega;
    let big_e = 2.0 * ((1.0 - e).sqrt() * (nu / 2.0).tan()).atan2((1.0 + e).sqrt());
    let mean_anom = big_e - e * big_e.sin();
    Ok(PlanarElements { a, e, omega, mean_anom })
}

/// Exact two-body propagation by `dt`: only the mean anomaly advances.
pub fn kepler_propagate(
    mu: f64,
    pos: [f64; 2],
    vel: [f64; 2],
    dt: f64,
) -> Result<([f64; 2], [f64; 2])> {
    let mut el = state_to_elements(mu, pos, vel)?;
    let n = (mu / el.a.powi(3)).sqrt();
    el.mean_anom += n * dt;
    elements_to_state(mu, &el)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: f64 = 39.476926421373015;

    #[test]
    fn kepler_residual_at_rounding_level() {
        for &e in &[0.0, 0.038, 0.278, 0.7, 0.95] {
            for i in 0..50 {
                let m = -7.0 + 0.3 * i as f64;
                let big_e = solve_kepler(m, e).unwrap();
                assert!((big_e - e * big_e.sin() - m).abs() < 1e-12, "e={e}, M={m}");
            }
        }
    }

    #[test]
    fn elements_state_round_trip() {
        let el = PlanarElements { a: 0.7606, e: 0.278, omega: 6.158, mean_anom: 0.3831 };
        let (pos, vel) = elements_to_state(MU, &el).unwrap();
        let back = state_to_elements(MU, pos, vel).unwrap();
        assert!((back.a - el.a).abs() < 1e-12);
        assert!((back.e - el.e).abs() < 1e-12);
        let wrap = |x: f64| (x - el.omega).sin().atan2((x - el.omega).cos());
        assert!(wrap(back.omega).abs() < 1e-10);
        let dm = (back.mean_anom - el.mean_anom).sin().atan2((back.mean_anom - el.mean_anom).cos());
        assert!(dm.abs() < 1e-10);
    }

    #[test]
    fn state_conserves_energy_and_momentum() {
        let el = PlanarElements { a: 1.5854, e: 0.038, omega: 2.085, mean_anom: 3.447 };
        let (pos, vel) = elements_to_state(MU, &el).unwrap();
        let r = pos[0].hypot(pos[1]);
        let v2 = vel[0] * vel[0] + vel[1] * vel[1];
        assert!((v2 / 2.0 - MU / r + MU / (2.0 * el.a)).abs() < 1e-12);
        let h = pos[0] * vel[1] - pos[1] * vel[0];
        let want = (MU * el.a * (1.0 - el.e * el.e)).sqrt();
        assert!((h - want).abs() < 1e-12);
    }

    #[test]
    fn propagation_full_period_is_identity() {
        let el = PlanarElements { a: 0.7606, e: 0.278, omega: 1.0, mean_anom: 2.0 };
        let (pos, vel) = elements_to_state(MU, &el).unwrap();
        let period = 2.0 * std::f64::consts::PI * (el.a.powi(3) / MU).sqrt();
        let (p2, v2) = kepler_propagate(MU, pos, vel, period).unwrap();
        assert!((p2[0] - pos[0]).abs() < 1e-10 && (p2[1] - pos[1]).abs() < 1e-10);
        assert!((v2[0] - vel[0]).abs() < 1e-9 && (v2[1] - vel[1]).abs() < 1e-9);
    }

    /// Independent oracle: high-order fixed-step RK4 on the two-body equations
    /// must match the exact Keplerian propagation.
    #[test]
    fn propagation_matches_rk4_oracle() {
        let el = PlanarElements { a: 1.0, e: 0.3, omega: 0.7, mean_anom: 0.0 };
        let (mut pos, mut vel) = elements_to_state(MU, &el).unwrap();
        let t_end = 0.08;
        let (pk, vk) = kepler_propagate(MU, pos, vel, t_end).unwrap();
        // RK4 with a very small step
        let steps = 4000;
        let h = t_end / steps as f64;
        let accel = |p: [f64; 2]| {
            let r3 = p[0].hypot(p[1]).powi(3);
            [-MU * p[0] / r3, -MU * p[1] / r3]
        };
        for _ in 0..steps {
            let k1v = accel(pos);
            let k1p = vel;
            let k2v = accel([pos[0] + h / 2.0 * k1p[0], pos[1] + h / 2.0 * k1p[1]]);
            let k2p = [vel[0] + h / 2.0 * k1v[0], vel[1] + h / 2.0 * k1v[1]];
            let k3v = accel([pos[0] + h / 2.0 * k2p[0], pos[1] + h / 2.0 * k2p[1]]);
            let k3p = [vel[0] + h / 2.0 * k2v[0], vel[1] + h / 2.0 * k2v[1]];
            let k4v = accel([pos[0] + h * k3p[0], pos[1] + h * k3p[1]]);
            let k4p = [vel[0] + h * k3v[0], vel[1] + h * k3v[1]];
            for i in 0..2 {
                pos[i] += h / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
                vel[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
        }
        assert!((pos[0] - pk[0]).abs() < 1e-10 && (pos[1] - pk[1]).abs() < 1e-10);
        assert!((vel[0] - vk[0]).abs() < 1e-9 && (vel[1] - vk[1]).abs() < 1e-9);
    }
}
