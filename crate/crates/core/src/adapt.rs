//! Action-angle coordinates adapted to the integrable approximation.
//!
//! The slow orbit of the normal form in the cartesian pair (Y₁, X₁) is far
//! from circular. A frequency-analysis decomposition of the complex signal
//! Y₁(t) + iX₁(t) into a constant component and a pair of counter-rotating
//! lines identifies the ellipse that approximates the orbit; translating by
//! X₁* and rescaling by α turns that ellipse into a circle, after which
//! ordinary polar action-angle variables — with the slow action measured
//! from the enclosed area p₁* and the fast one from its mean J₂* — put the
//! Hamiltonian in the translation-free form the Kolmogorov stage needs.

use crate::error::{Error, Result};
use crate::pseries::{ActionKey, ActionSeries, SqrtSeries, C64};

/// One line of a quasi-periodic signal: `A e^{i(kν₁t + φ)}`.
#[derive(Clone, Copy, Debug)]
pub struct SignalComponent {
    /// Multiple of the fundamental this line sits at.
    pub k: i32,
    /// The line's own fitted frequency (`≈ k·ν₁`).
    pub freq: f64,
    pub amplitude: f64,
    /// Phase in (−π, π].
    pub phase: f64,
}

/// Frequency-analysis decomposition of a uniformly sampled complex signal.
#[derive(Clone, Debug)]
pub struct QuasiPeriodicDecomposition {
    /// Fundamental frequency (positive; the strongest rotating line defines
    /// it up to sign, which goes into the components' `k`).
    pub nu1: f64,
    /// Extracted lines, sorted by decreasing amplitude.
    pub components: Vec<SignalComponent>,
    /// Mean squared modulus of what is left after removing all components.
    pub residual_power: f64,
}

impl QuasiPeriodicDecomposition {
    pub fn component_at(&self, k: i32) -> Option<&SignalComponent> {
        self.components.iter().find(|c| c.k == k)
    }
}

/// Windowed correlation `⟨f, e^{iνt}⟩` with a Hann window.
fn windowed_projection(signal: &[C64], dt: f64, nu: f64) -> C64 {
    let n = signal.len();
    let mut acc = C64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for (i, f) in signal.iter().enumerate() {
        let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos());
        let t = i as f64 * dt;
        acc += w * f * C64::new(0.0, -nu * t).exp();
        wsum += w;
    }
    acc / wsum
}

/// Golden-section maximization of the projection modulus on [a, b].
fn refine_peak(signal: &[C64], dt: f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = windowed_projection(signal, dt, c).norm();
    let mut fd = windowed_projection(signal, dt, d).norm();
    for _ in 0..96 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = windowed_projection(signal, dt, c).norm();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = windowed_projection(signal, dt, d).norm();
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    (a + b) / 2.0
}

/// Newton polish of a peak location: drives `Re(c̄·∂c/∂ν) = 0` using the
/// analytic derivatives of the windowed projection, with times centered on
/// the window to keep the derivatives well-conditioned. The flat top of the
/// Hann response limits golden-section bracketing to ~√ε accuracy; the
/// stationarity condition recovers the rest.
fn polish_peak(signal: &[C64], dt: f64, mut nu: f64, guard: f64) -> f64 {
    let n = signal.len();
    let t_c = (n - 1) as f64 * dt / 2.0;
    for _ in 0..12 {
        let mut c = C64::new(0.0, 0.0);
        let mut c1 = C64::new(0.0, 0.0);
        let mut c2 = C64::new(0.0, 0.0);
        let mut wsum = 0.0;
        for (i, f) in signal.iter().enumerate() {
            let w =
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos());
            let tau = i as f64 * dt - t_c;
            let e = w * f * C64::new(0.0, -nu * tau).exp();
            c += e;
            c1 += e * C64::new(0.0, -tau);
            c2 -= e * tau * tau;
            wsum += w;
        }
        let (c, c1, c2) = (c / wsum, c1 / wsum, c2 / wsum);
        let g = (c.conj() * c1).re;
        let gp = (c1.conj() * c1 + c.conj() * c2).re;
        if gp == 0.0 {
            break;
        }
        let step = (-g / gp).clamp(-guard, guard);
        nu += step;
        if step.abs() < 1e-16 * (1.0 + nu.abs()) {
            break;
        }
    }
    nu
}

/// Coarse peak location by FFT of the Hann-windowed signal, returning the
/// frequency of the strongest bin.
fn fft_peak(signal: &[C64], dt: f64) -> f64 {
    let n = signal.len();
    let mut buf: Vec<C64> = signal
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let w =
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos());
            f * w
        })
        .collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (best, _) = buf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .unwrap();
    let b = if best <= n / 2 { best as f64 } else { best as f64 - n as f64 };
    2.0 * std::f64::consts::PI * b / (n as f64 * dt)
}

/// Decomposes a uniformly sampled complex signal into `n_components` lines
/// by iterative peeling: FFT-seeded, golden-section-refined Hann-windowed
/// projections, with two re-fitting sweeps to undo the bias the lines exert
/// on each other.
pub fn naff_decompose(
    signal: &[C64],
    dt: f64,
    n_components: usize,
) -> Result<QuasiPeriodicDecomposition> {
    if signal.len() < 16 {
        return Err(Error::InvalidInput(format!("only {} samples", signal.len())));
    }
    let n = signal.len();
    let bin = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mut residual = signal.to_vec();
    let mut lines: Vec<(f64, C64)> = Vec::with_capacity(n_components);

    let subtract = |residual: &mut Vec<C64>, nu: f64, c: C64, sign: f64| {
        for (i, r) in residual.iter_mut().enumerate() {
            *r += sign * c * C64::new(0.0, nu * i as f64 * dt).exp();
        }
    };

    for _ in 0..n_components {
        let seed = fft_peak(&residual, dt);
        let nu = refine_peak(&residual, dt, seed - bin, seed + bin);
        let nu = polish_peak(&residual, dt, nu, bin / 2.0);
        let c = windowed_projection(&residual, dt, nu);
        if c.norm() < 1e-12 {
            return Err(Error::InvalidInput(
                "no dominant peak left in the residual".into(),
            ));
        }
        if lines.iter().any(|(f, _)| (f - nu).abs() < 0.5 * bin) {
            return Err(Error::InvalidInput(format!(
                "component at frequency {nu:e} is not resolvable from an already extracted line"
            )));
        }
        subtract(&mut residual, nu, c, -1.0);
        lines.push((nu, c));
    }

    // re-fit each line against residual + itself to shed cross-line bias
    for _ in 0..2 {
        for idx in 0..lines.len() {
            let (nu_old, c_old) = lines[idx];
            subtract(&mut residual, nu_old, c_old, 1.0);
            let nu = polish_peak(&residual, dt, nu_old, 0.1 * bin);
            let c = windowed_projection(&residual, dt, nu);
            subtract(&mut residual, nu, c, -1.0);
            lines[idx] = (nu, c);
        }
    }

    let residual_power =
        residual.iter().map(|r| r.norm_sqr()).sum::<f64>() / residual.len() as f64;
    lines.sort_by(|a, b| b.1.norm().partial_cmp(&a.1.norm()).unwrap());
    // the fundamental is the strongest genuinely rotating line
    let fundamental = lines
        .iter()
        .find(|(f, _)| f.abs() > 0.25 * bin)
        .ok_or_else(|| Error::InvalidInput("all extracted lines are constant".into()))?
        .0;
    let nu1 = fundamental.abs();
    let components = lines
        .iter()
        .map(|&(f, c)| SignalComponent {
            k: (f / nu1).round() as i32,
            freq: f,
            amplitude: c.norm(),
            phase: c.arg(),
        })
        .collect();
    Ok(QuasiPeriodicDecomposition { nu1, components, residual_power })
}

/// From the three-line (k = 0, ±1) picture of the slow orbit, computes the
/// translation X₁* (the constant component, aligned with the X₁ axis) and
/// the dilation α = √((c₋−c₊)/(c₋+c₊)) built from the amplitudes of the two
/// rotating lines.
pub fn fit_circularization(dec: &QuasiPeriodicDecomposition) -> Result<(f64, f64)> {
    let constant = dec
        .component_at(0)
        .ok_or_else(|| Error::InvalidInput("no constant (k = 0) component".into()))?;
    let off_axis = (constant.phase.abs() - std::f64::consts::FRAC_PI_2).abs();
    if off_axis > 0.1 {
        return Err(Error::InvalidInput(format!(
            "constant component is {off_axis:.3} rad off the X₁ axis"
        )));
    }
    let x1_star = constant.amplitude * constant.phase.sin();
    let c_minus = dec
        .component_at(-1)
        .map(|c| c.amplitude)
        .ok_or_else(|| Error::InvalidInput("no k = −1 component".into()))?;
    let c_plus = dec.component_at(1).map(|c| c.amplitude).unwrap_or(0.0);
    if c_minus <= c_plus {
        return Err(Error::InvalidInput(format!(
            "c₋ = {c_minus:e} does not dominate c₊ = {c_plus:e}"
        )));
    }
    let alpha = ((c_minus - c_plus) / (c_minus + c_plus)).sqrt();
    Ok((x1_star, alpha))
}

/// Area enclosed by a sampled closed curve, divided by 2π: the action of the
/// one-degree-of-freedom orbit. The curve must close and wind once around
/// its centroid.
pub fn enclosed_action(curve: &[[f64; 2]]) -> Result<f64> {
    if curve.len() < 8 {
        return Err(Error::InvalidInput(format!("only {} curve samples", curve.len())));
    }
    let n = curve.len();
    let diameter = curve
        .iter()
        .map(|p| {
            (p[0] - curve[0][0]).hypot(p[1] - curve[0][1])
        })
        .fold(0.0, f64::max);
    let gap = (curve[n - 1][0] - curve[0][0]).hypot(curve[n - 1][1] - curve[0][1]);
    if gap > 1e-3 * diameter {
        return Err(Error::InvalidInput(format!(
            "curve is open: endpoint gap {gap:e} vs diameter {diameter:e}"
        )));
    }
    let cx = curve.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = curve.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    // winding consistency about the centroid guards against figure-eights
    let mut winding = 0.0;
    let mut area = 0.0;
    for i in 0..n - 1 {
        let (a, b) = (curve[i], curve[i + 1]);
        area += 0.5 * (a[0] * b[1] - b[0] * a[1]);
        let t0 = (a[1] - cy).atan2(a[0] - cx);
        let t1 = (b[1] - cy).atan2(b[0] - cx);
        let mut dt = t1 - t0;
        while dt > std::f64::consts::PI {
            dt -= 2.0 * std::f64::consts::PI;
        }
        while dt < -std::f64::consts::PI {
            dt += 2.0 * std::f64::consts::PI;
        }
        winding += dt;
    }
    let turns = winding / (2.0 * std::f64::consts::PI);
    if (turns.abs() - 1.0).abs() > 0.01 {
        return Err(Error::InvalidInput(format!(
            "curve winds {turns:.3} times around its centroid (self-intersecting?)"
        )));
    }
    Ok(area.abs() / (2.0 * std::f64::consts::PI))
}

/// The adapted chart: the circularizing dilation/translation on the slow
/// pair, plus the action offsets that make the target torus pass near
/// `p = 0`.
#[derive(Clone, Copy, Debug)]
pub struct AdaptedChart {
    pub alpha: f64,
    pub x1_star: f64,
    /// Enclosed action of the slow reference orbit.
    pub p1_star: f64,
    /// Mean of J₂ along the reference flow.
    pub j2_star: f64,
    /// Calibrated slow-action shift; starts at `p1_star`, later adjusted by
    /// the Newton calibration of the torus.
    pub i1_tilde: f64,
}

impl AdaptedChart {
    pub fn new(alpha: f64, x1_star: f64, p1_star: f64, j2_star: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(p1_star > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adapted chart needs α > 0 and p₁* > 0, got {alpha}, {p1_star}"
            )));
        }
        Ok(AdaptedChart { alpha, x1_star, p1_star, j2_star, i1_tilde: p1_star })
    }

    /// Maps an adapted point `(p, q)` to the oscillator variables `(J, ϑ)`.
    pub fn to_oscillator(&self, p: [f64; 2], q: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        let w_sq = 2.0 * (p[0] + self.i1_tilde);
        if w_sq < 0.0 || p[1] + self.j2_star < 0.0 {
            return Err(Error::NegativeAction(w_sq.min(p[1] + self.j2_star)));
        }
        let w = w_sq.sqrt();
        let (v1, u1) = (w * q[0].cos(), w * q[0].sin());
        let y1 = v1 / self.alpha;
        let x1 = self.alpha * u1 + self.x1_star;
        let j1 = (y1 * y1 + x1 * x1) / 2.0;
        let theta1 = x1.atan2(y1);
        Ok(([j1, p[1] + self.j2_star], [theta1, q[1]]))
    }
}

/// Generalized binomial coefficient `(half choose d)` for half-integer
/// exponents of the action shifts.
fn gen_binom(half: f64, d: u32) -> f64 {
    let mut acc = 1.0;
    for t in 0..d {
        acc *= (half - t as f64) / (t as f64 + 1.0);
    }
    acc
}

/// Integer binomial as f64 (small arguments only).
fn binom(n: u32, k: u32) -> f64 {
    gen_binom(n as f64, k)
}

/// `(2(p + shift))^{n/2}` expanded in powers of `p` up to `action_cap`,
/// as coefficients indexed by the power of `p`. With a zero shift only even
/// `n` survive as polynomials.
fn shifted_power(n: u32, shift: f64, action_cap: u32) -> Result<Vec<f64>> {
    if shift == 0.0 {
        if n % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "odd power {n} of √(2p) with zero action shift is not polynomial"
            )));
        }
        let mut out = vec![0.0; action_cap as usize + 1];
        if n / 2 <= action_cap {
            out[(n / 2) as usize] = 2f64.powi((n / 2) as i32);
        }
        return Ok(out);
    }
    let lead = (2.0 * shift).powf(n as f64 / 2.0);
    let mut out = vec![0.0; action_cap as usize + 1];
    for (d, slot) in out.iter_mut().enumerate() {
        *slot = lead * gen_binom(n as f64 / 2.0, d as u32) / shift.powi(d as i32);
    }
    Ok(out)
}

/// Re-expresses an oscillator Hamiltonian in the adapted chart, expanding
/// the action shifts into the `𝔓_{ℓ,2s}` classes of the Kolmogorov stage.
pub fn adapted_expansion(
    hamiltonian: &SqrtSeries,
    chart: &AdaptedChart,
    action_cap: u32,
    fourier_cap: u32,
) -> Result<ActionSeries> {
    let mut out = ActionSeries::new(action_cap, fourier_cap);
    let a_plus = (1.0 / chart.alpha + chart.alpha) / 2.0;
    let a_minus = (1.0 / chart.alpha - chart.alpha) / 2.0;
    let i_x1 = C64::new(0.0, chart.x1_star);

    for (key, coeff) in hamiltonian.terms() {
        let (l1, l2) = (key.l[0] as u32, key.l[1] as u32);
        let (k1, k2) = (key.k[0] as i32, key.k[1] as i32);
        let m_plus = ((l1 as i32 + k1) / 2) as u32;
        let m_minus = ((l1 as i32 - k1) / 2) as u32;
        // (√J₁)^{l₁} e^{ik₁ϑ₁} = (Y₁+iX₁)^{m₊} (Y₁−iX₁)^{m₋} / √2^{l₁}, and
        // in the adapted chart Y₁±iX₁ = A₊(We^{±iq₁}) + A₋(We^{∓iq₁}) ± iX₁*
        // with W = √(2(p₁+Ĩ₁))
        let base = coeff / 2f64.powf(l1 as f64 / 2.0);
        // (√J₂)^{l₂} = (p₂+J₂*)^{l₂/2}: strip the factor 2^{l₂/2} the
        // cartesian-form helper carries
        let p2_powers: Vec<f64> = shifted_power(l2, chart.j2_star, action_cap)?
            .into_iter()
            .map(|c| c / 2f64.powf(l2 as f64 / 2.0))
            .collect();
        for i in 0..=m_plus {
            for jj in 0..=(m_plus - i) {
                let t = m_plus - i - jj;
                let c_plus = binom(m_plus, i)
                    * binom(m_plus - i, jj)
                    * a_plus.powi(i as i32)
                    * a_minus.powi(jj as i32);
                let f_plus = C64::new(c_plus, 0.0) * i_x1.powu(t);
                for ip in 0..=m_minus {
                    for jp in 0..=(m_minus - ip) {
                        let tp = m_minus - ip - jp;
                        let c_min = binom(m_minus, ip)
                            * binom(m_minus - ip, jp)
                            * a_minus.powi(ip as i32)
                            * a_plus.powi(jp as i32);
                        let f_min = C64::new(c_min, 0.0) * (-i_x1).powu(tp);
                        let w_pow = i + jj + ip + jp;
                        let harmonic = i as i32 - jj as i32 + ip as i32 - jp as i32;
                        if harmonic.unsigned_abs() + k2.unsigned_abs() > fourier_cap {
                            continue;
                        }
                        let factor = base * f_plus * f_min;
                        if factor.norm_sqr() == 0.0 {
                            continue;
                        }
                        let p1_powers = shifted_power(w_pow, chart.i1_tilde, action_cap)?;
                        for (d1, c1) in p1_powers.iter().enumerate() {
                            if *c1 == 0.0 {
                                continue;
                            }
                            for (d2, c2) in p2_powers.iter().enumerate() {
                                if *c2 == 0.0 || d1 + d2 > action_cap as usize {
                                    continue;
                                }
                                out.insert(
                                    ActionKey::new(
                                        [d1 as u8, d2 as u8],
                                        [harmonic as i16, k2 as i16],
                                    ),
                                    factor * (*c1 * *c2),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    let defect = out.reality_defect();
    if defect > 1e-10 * out.norm().max(1e-300) {
        return Err(Error::RealityViolation { residue: defect, scale: out.norm() });
    }
    Ok(out)
}
