//! Numerical ground truth and comparison machinery: symplectic integration of
//! the full planetary problem, adaptive flows of the polynomial normal forms,
//! semi-analytic torus reconstructions, resonant-angle diagnostics, and the
//! metrics that quantify how well two trajectories agree.

mod full;
mod poly;
mod recon;

pub use full::{integrate_full, kepler_universal, saba3_step, FullState};
pub use poly::{integrate_poly, PolyFlow};
pub use recon::{reconstruct_birkhoff, reconstruct_torus};

use crate::adapt::naff_decompose;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::io::Write;

/// Which coordinates a trajectory's state columns live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    /// Planar orbital elements (a, e, ω, λ) per planet.
    Elements,
    /// Astrocentric cartesian positions and momenta.
    Cartesian,
    /// Diagonalized oscillator variables (Y₁, Y₂, X₁, X₂).
    Oscillator,
    /// Action–angle pairs (J₁, J₂, ϑ₁, ϑ₂).
    ActionAngle,
    /// Shifted action–angle pairs (p₁, p₂, q₁, q₂) of the adapted chart.
    Adapted,
}

impl Chart {
    pub fn label(&self) -> &'static str {
        match self {
            Chart::Elements => "elements",
            Chart::Cartesian => "cartesian",
            Chart::Oscillator => "oscillator",
            Chart::ActionAngle => "action-angle",
            Chart::Adapted => "adapted",
        }
    }
}

/// A uniformly sampled trajectory in a tagged chart.
#[derive(Clone, Debug)]
pub struct Trajectory {
    chart: Chart,
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(chart: Chart, dim: usize) -> Self {
        Trajectory { chart, dim, times: Vec::new(), states: Vec::new() }
    }

    /// Appends a sample; times must increase strictly and states be finite.
    pub fn push(&mut self, t: f64, state: Vec<f64>) {
        assert_eq!(state.len(), self.dim, "state dimension mismatch");
        assert!(state.iter().all(|x| x.is_finite()), "non-finite state at t={t}");
        if let Some(&last) = self.times.last() {
            assert!(t > last, "non-increasing time {t} after {last}");
        }
        self.times.push(t);
        self.states.push(state);
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    /// Sample spacing, assuming (and checking) near-uniform times.
    pub fn dt(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::InvalidInput("trajectory has fewer than 2 samples".into()));
        }
        let dt = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
                return Err(Error::InvalidInput("non-uniform sampling".into()));
            }
        }
        Ok(dt)
    }

    /// Cubic (Catmull–Rom) interpolation of every column at time `t`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        let dt = self.dt()?;
        let t0 = self.times[0];
        if t < t0 - 1e-9 * dt || t > *self.times.last().unwrap() + 1e-9 * dt {
            return Err(Error::InvalidInput(format!("t = {t} outside trajectory span")));
        }
        let n = self.len();
        let s = ((t - t0) / dt).clamp(0.0, (n - 1) as f64);
        let i1 = (s.floor() as usize).min(n - 2);
        let u = s - i1 as f64;
        let i0 = i1.saturating_sub(1);
        let i2 = i1 + 1;
        let i3 = (i1 + 2).min(n - 1);
        let mut out = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let (p0, p1, p2, p3) = (
                self.states[i0][j],
                self.states[i1][j],
                self.states[i2][j],
                self.states[i3][j],
            );
            out.push(
                p1 + 0.5
                    * u
                    * (p2 - p0
                        + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
                            + u * (3.0 * (p1 - p2) + p3 - p0))),
            );
        }
        Ok(out)
    }

    /// Writes `t, x_0, ..., x_{d-1}` rows with a chart-tag header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# chart: {}", self.chart.label())?;
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = s.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{t:.10e},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Removes 2π jumps so consecutive samples differ by less than π.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    let mut prev = f64::NAN;
    for &a in angles {
        if prev.is_finite() {
            let mut d = a + offset - prev;
            while d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                d += 2.0 * std::f64::consts::PI;
            }
        }
        prev = a + offset;
        out.push(prev);
    }
    out
}

/// Total excursion of the unwrapped angle, in radians.
pub fn angle_range(angles: &[f64]) -> f64 {
    let u = unwrap_angles(angles);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in u {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// An angle librates iff its unwrapped excursion stays below a full turn.
pub fn is_librating(angles: &[f64]) -> bool {
    angle_range(angles) < 2.0 * std::f64::consts::PI
}

/// Resonant-angle diagnostics of an element-chart trajectory:
/// σ = λ₁ − 3λ₂ + 2ω₁ and δ = ω₂ − ω₁.
pub struct ResonantAngles {
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

pub fn resonant_angles(traj: &Trajectory) -> Result<ResonantAngles> {
    if traj.chart() != Chart::Elements || traj.dim() != 8 {
        return Err(Error::ChartMismatch {
            expected: "elements(8)".into(),
            got: format!("{}({})", traj.chart().label(), traj.dim()),
        });
    }
    let (om1, la1) = (traj.column(2), traj.column(3));
    let (om2, la2) = (traj.column(6), traj.column(7));
    let sigma: Vec<f64> = (0..traj.len())
        .map(|i| la1[i] - 3.0 * la2[i] + 2.0 * om1[i])
        .collect();
    let delta: Vec<f64> = (0..traj.len()).map(|i| om2[i] - om1[i]).collect();
    Ok(ResonantAngles { sigma, delta, e1: traj.column(1), e2: traj.column(5) })
}

/// Per-signal agreement metrics between two trajectories on their common
/// time range.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    /// RMS of the pointwise difference, per column.
    pub rms: Vec<f64>,
    /// RMS difference divided by the reference signal's RMS deviation from
    /// its mean, per column.
    pub rms_relative: Vec<f64>,
    /// Peak-to-peak amplitude of `b` over that of `a`, per column.
    pub amplitude_ratio: Vec<f64>,
    /// Fundamental frequencies of `a` per column (rad/yr).
    pub freq_a: Vec<f64>,
    /// Fundamental frequencies of `b` per column (rad/yr).
    pub freq_b: Vec<f64>,
}

impl ComparisonReport {
    pub fn freq_rel_diff(&self, j: usize) -> f64 {
        (self.freq_b[j] - self.freq_a[j]).abs() / self.freq_a[j].abs()
    }
}

fn fundamental(signal: &[f64], dt: f64) -> Result<f64> {
    let z: Vec<C64> = signal.iter().map(|&x| C64::new(x, 0.0)).collect();
    let dec = naff_decompose(&z, dt, 4)?;
    Ok(dec.nu1.abs())
}

/// Resamples both trajectories onto the overlap of their time ranges and
/// reports RMS differences, amplitude ratios and fundamental frequencies.
pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<ComparisonReport> {
    if a.chart() != b.chart() || a.dim() != b.dim() {
        return Err(Error::ChartMismatch {
            expected: format!("{}({})", a.chart().label(), a.dim()),
            got: format!("{}({})", b.chart().label(), b.dim()),
        });
    }
    let t_lo = a.times()[0].max(b.times()[0]);
    let t_hi = a.times().last().unwrap().min(*b.times().last().unwrap());
    if t_hi <= t_lo {
        return Err(Error::InvalidInput("disjoint time ranges".into()));
    }
    let n = 1 << (63 - ((a.len().min(b.len())) as u64).leading_zeros());
    let n = (n as usize).clamp(64, 1 << 16);
    let dt = (t_hi - t_lo) / n as f64;
    let mut sa = vec![Vec::with_capacity(n); a.dim()];
    let mut sb = vec![Vec::with_capacity(n); a.dim()];
    for i in 0..n {
        let t = t_lo + i as f64 * dt;
        let xa = a.interpolate(t)?;
        let xb = b.interpolate(t)?;
        for j in 0..a.dim() {
            sa[j].push(xa[j]);
            sb[j].push(xb[j]);
        }
    }
    let mut report = ComparisonReport {
        rms: Vec::new(),
        rms_relative: Vec::new(),
        amplitude_ratio: Vec::new(),
        freq_a: Vec::new(),
        freq_b: Vec::new(),
    };
    for j in 0..a.dim() {
        let mut sq = 0.0;
        for i in 0..n {
            sq += (sa[j][i] - sb[j][i]).powi(2);
        }
        let rms = (sq / n as f64).sqrt();
        let mean: f64 = sa[j].iter().sum::<f64>() / n as f64;
        let dev: f64 =
            (sa[j].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let span = |s: &[f64]| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in s {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        };
        let (wa, wb) = (span(&sa[j]), span(&sb[j]));
        report.rms.push(rms);
        report.rms_relative.push(if dev > 0.0 { rms / dev } else { rms });
        report.amplitude_ratio.push(if wa > 0.0 { wb / wa } else { f64::NAN });
        report.freq_a.push(fundamental(&sa[j], dt).unwrap_or(f64::NAN));
        report.freq_b.push(fundamental(&sb[j], dt).unwrap_or(f64::NAN));
    }
    Ok(report)
}
