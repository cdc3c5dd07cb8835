//! Adaptive integration of Hamiltonian flows whose Hamiltonian is a real
//! polynomial in the oscillator variables (Y₁, Y₂, X₁, X₂). The vector field
//! Ẏ = −∂H/∂X, Ẋ = +∂H/∂Y is evaluated from symbolically differentiated
//! polynomials, and the steps are Dormand–Prince 5(4) with a proportional
//! step controller. Flows of √J-chart series should be routed through this
//! polynomial chart, where the origin is regular.

use super::{Chart, Trajectory};
use crate::error::{Error, Result};
use crate::pseries::CartPoly;

/// A polynomial Hamiltonian with its cached gradient.
pub struct PolyFlow {
    hamiltonian: CartPoly,
    grad: [CartPoly; 4],
}

impl PolyFlow {
    pub fn new(hamiltonian: CartPoly) -> Self {
        let grad = [
            hamiltonian.partial(0),
            hamiltonian.partial(1),
            hamiltonian.partial(2),
            hamiltonian.partial(3),
        ];
        PolyFlow { hamiltonian, grad }
    }

    pub fn energy(&self, z: [f64; 4]) -> f64 {
        self.hamiltonian.evaluate(z)
    }

    /// Ẏ_j = −∂H/∂X_j, Ẋ_j = +∂H/∂Y_j.
    pub fn rhs(&self, z: [f64; 4]) -> [f64; 4] {
        [
            -self.grad[2].evaluate(z),
            -self.grad[3].evaluate(z),
            self.grad[0].evaluate(z),
            self.grad[1].evaluate(z),
        ]
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Dp54<'a> {
    flow: &'a PolyFlow,
    rtol: f64,
    atol: f64,
}

impl Dp54<'_> {
    /// One trial step; returns (next state, error estimate scale).
    fn trial(&self, z: [f64; 4], k1: [f64; 4], h: f64) -> ([f64; 4], [f64; 4], f64) {
        let mut k = [[0.0; 4]; 7];
        k[0] = k1;
        for stage in 0..6 {
            let mut zi = z;
            for (s, ks) in k.iter().enumerate().take(stage + 1) {
                for d in 0..4 {
                    zi[d] += h * A[stage][s] * ks[d];
                }
            }
            k[stage + 1] = self.flow.rhs(zi);
        }
        let mut z5 = z;
        let mut err = 0.0f64;
        for d in 0..4 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][d];
                d4 += B4[s] * k[s][d];
            }
            z5[d] += h * d5;
            let scale = self.atol + self.rtol * z[d].abs().max(z5[d].abs());
            err += ((h * (d5 - d4)) / scale).powi(2);
        }
        // FSAL: k7 is the derivative at the accepted point
        (z5, k[6], (err / 4.0).sqrt())
    }

    /// Advances exactly to `t_target`, adapting internally.
    fn advance(&self, z: &mut [f64; 4], t: &mut f64, t_target: f64, h: &mut f64) -> Result<()> {
        let dir = (t_target - *t).signum();
        if dir == 0.0 {
            return Ok(());
        }
        let mut k1 = self.flow.rhs(*z);
        let mut rejections = 0usize;
        while (*t - t_target) * dir < 0.0 {
            let mut hs = h.abs().min((t_target - *t).abs()) * dir;
            if hs == 0.0 {
                break;
            }
            let (z5, k_last, err) = self.trial(*z, k1, hs);
            if err <= 1.0 {
                *t += hs;
                *z = z5;
                k1 = k_last;
                rejections = 0;
                let factor = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                *h = (hs * factor).abs();
            } else {
                rejections += 1;
                if rejections > 40 {
                    return Err(Error::NoConvergence(format!(
                        "step control stalled at t = {t}, err = {err:.3e}"
                    )));
                }
                hs *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                *h = hs.abs();
                if h.abs() < 1e-300 {
                    return Err(Error::Singular(format!("step size underflow at t = {t}")));
                }
            }
        }
        Ok(())
    }
}

/// Integrates Ẏ = −∂H/∂X, Ẋ = +∂H/∂Y from `x0` over `t_span`, sampling the
/// state every `dt_sample`. Returns the trajectory and the worst relative
/// energy drift seen at the sample points.
pub fn integrate_poly(
    hamiltonian: &CartPoly,
    x0: [f64; 4],
    t_span: f64,
    dt_sample: f64,
    rtol: f64,
) -> Result<(Trajectory, f64)> {
    if dt_sample <= 0.0 || t_span <= 0.0 {
        return Err(Error::InvalidInput("t_span and dt_sample must be positive".into()));
    }
    let flow = PolyFlow::new(hamiltonian.clone());
    let stepper = Dp54 { flow: &flow, rtol, atol: rtol * 1e-3 };
    let e0 = flow.energy(x0);
    let e_scale = e0.abs().max(1e-30);
    let n = (t_span / dt_sample).round().max(1.0) as usize;
    let mut traj = Trajectory::new(Chart::Oscillator, 4);
    traj.push(0.0, x0.to_vec());
    let mut z = x0;
    let mut t = 0.0;
    let mut h = dt_sample.min(t_span) * 0.1;
    let mut drift = 0.0f64;
    for i in 1..=n {
        stepper.advance(&mut z, &mut t, i as f64 * dt_sample, &mut h)?;
        drift = drift.max(((flow.energy(z) - e0) / e_scale).abs());
        traj.push(t, z.to_vec());
    }
    Ok((traj, drift))
}
