use std::collections::BTreeMap;

use super::config::{OrbitalConfig, PoincarePoint};
use super::poincare::PoincareSeries;
use crate::error::{Error, Result};
use crate::pseries::{CartPoly, C64};

/// Canonical chart of the 3:1 resonance. New momenta `p = A·(I₁,I₂,L₁,L₂)`
/// and angles `q = B·(−ω₁,−ω₂,λ₁,λ₂)` with AᵀB = 1, so the transformation is
/// canonical by construction; `(I_j, −ω_j)` are the standard secular pairs.
///
/// The four pairs are: the eccentricity-exchange pair (p_δ, δ=ω₂−ω₁), the
/// libration pair (p_σ, σ=λ₁−3λ₂+2ω₁), and the two cyclic pairs
/// (p_φ, φ=−ω₂) and (p_θ, θ=λ₂) whose momenta stay as parameters after the
/// fast-angle average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonantChart {
    /// Rows (p_δ, p_σ, p_φ, p_θ) over columns (I₁, I₂, L₁, L₂).
    pub action_map: [[i32; 4]; 4],
    /// Rows (δ, σ, φ, θ) over columns (−ω₁, −ω₂, λ₁, λ₂).
    pub angle_map: [[i32; 4]; 4],
    /// Conserved value of p_φ = I₁+I₂+2L₁ (total angular-momentum deficit
    /// combination) at the initial conditions.
    pub p_phi: f64,
    /// Conserved value of p_θ = L₂+3L₁ at the initial conditions.
    pub p_theta: f64,
}

impl ResonantChart {
    pub fn for_3to1(p_phi: f64, p_theta: f64) -> Self {
        ResonantChart {
            action_map: [
                [1, 0, 2, 0], // p_δ = I₁ + 2L₁
                [0, 0, 1, 0], // p_σ = L₁
                [1, 1, 2, 0], // p_φ = I₁ + I₂ + 2L₁
                [0, 0, 3, 1], // p_θ = 3L₁ + L₂
            ],
            angle_map: [
                [1, -1, 0, 0],  // δ = ω₂ − ω₁
                [-2, 0, 1, -3], // σ = λ₁ − 3λ₂ + 2ω₁
                [0, 1, 0, 0],   // φ = −ω₂
                [0, 0, 0, 1],   // θ = λ₂
            ],
            p_phi,
            p_theta,
        }
    }

    /// The momentum map applied to (I₁, I₂, L₁, L₂).
    pub fn actions_to_momenta(&self, v: [f64; 4]) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (i, row) in self.action_map.iter().enumerate() {
            p[i] = row.iter().zip(v.iter()).map(|(&a, &x)| a as f64 * x).sum();
        }
        p
    }

    /// Old actions (I₁, I₂, L₁, L₂) from the new momenta.
    pub fn momenta_to_actions(&self, p: [f64; 4]) -> [f64; 4] {
        [
            p[0] - 2.0 * p[1],        // I₁ = p_δ − 2p_σ
            p[2] - p[0],              // I₂ = p_φ − p_δ
            p[1],                     // L₁ = p_σ
            p[3] - 3.0 * p[1],        // L₂ = p_θ − 3p_σ
        ]
    }

    /// The angle map applied to pericenter longitudes and mean longitudes.
    pub fn angles_from(&self, omega: [f64; 2], lambda: [f64; 2]) -> [f64; 4] {
        let u = [-omega[0], -omega[1], lambda[0], lambda[1]];
        let mut q = [0.0; 4];
        for (i, row) in self.angle_map.iter().enumerate() {
            q[i] = row.iter().zip(u.iter()).map(|(&a, &x)| a as f64 * x).sum();
        }
        q
    }

    /// Image of a Fourier harmonic: a term `e^{i(k·λ + m·ω)}` becomes
    /// `e^{i n·(δ,σ,φ,θ)}` with `n = A·(−m₁,−m₂,k₁,k₂)`.
    pub fn harmonic_image(&self, k: [i32; 2], m: [i32; 2]) -> [i32; 4] {
        let h = [-m[0], -m[1], k[0], k[1]];
        let mut n = [0; 4];
        for (i, row) in self.action_map.iter().enumerate() {
            n[i] = row.iter().zip(h.iter()).map(|(&a, &x)| a * x).sum();
        }
        n
    }

    /// Canonicity defect `‖AᵀB − 1‖_∞`; zero for a valid chart.
    pub fn canonicity_defect(&self) -> i32 {
        let mut worst = 0;
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0;
                for r in 0..4 {
                    s += self.action_map[r][i] * self.angle_map[r][j];
                }
                let want = if i == j { 1 } else { 0 };
                worst = worst.max((s - want).abs());
            }
        }
        worst
    }

    /// Chart values (momenta, angles) from per-planet Poincaré points.
    pub fn from_poincare(&self, pts: &[PoincarePoint; 2]) -> ([f64; 4], [f64; 4]) {
        let mut omega = [0.0; 2];
        let mut lambda = [0.0; 2];
        let mut v = [0.0; 4];
        for j in 0..2 {
            v[j] = (pts[j].xi * pts[j].xi + pts[j].eta * pts[j].eta) / 2.0;
            v[2 + j] = pts[j].l;
            omega[j] = (-pts[j].eta).atan2(pts[j].xi);
            lambda[j] = pts[j].lambda;
        }
        (self.actions_to_momenta(v), self.angles_from(omega, lambda))
    }
}

/// Builds the resonant chart with p_φ, p_θ fixed by the observed initial
/// conditions.
pub fn resonant_chart_for(cfg: &OrbitalConfig) -> ResonantChart {
    let chart = cfg.poincare_chart();
    let pts = [
        chart.from_elements(cfg, 0, &cfg.initial_elements(0)),
        chart.from_elements(cfg, 1, &cfg.initial_elements(1)),
    ];
    let proto = ResonantChart::for_3to1(0.0, 0.0);
    let (p, _) = proto.from_poincare(&pts);
    ResonantChart::for_3to1(p[2], p[3])
}

/// Monomial of the reduced model: `(√I₁)^{g₁}(√I₂)^{g₂} L₁^{l₁} L₂^{l₂}
/// e^{i(n₁δ + n₂σ)}`, with the √2 factors of `√(2I)` folded into the
/// coefficient and `I_j, L_j` understood as functions of (p_δ, p_σ) and the
/// two parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResKey {
    pub g: [u8; 2],
    pub l: [u8; 2],
    pub n: [i8; 2],
}

impl ResKey {
    pub fn conj(&self) -> ResKey {
        ResKey { g: self.g, l: self.l, n: [-self.n[0], -self.n[1]] }
    }
}

/// The fast-angle averaged resonant Hamiltonian over (p_δ, p_σ, δ, σ).
#[derive(Clone, Debug, Default)]
pub struct ResonantSeries {
    terms: BTreeMap<ResKey, C64>,
}

/// What the θ-average dropped and whether anything depended on φ.
#[derive(Clone, Copy, Debug)]
pub struct ReductionDiagnostics {
    /// Coefficient mass `Σ|c|` removed with the fast-angle harmonics.
    pub averaged_norm: f64,
    /// Coefficient mass of terms with n_θ = 0 but n_φ ≠ 0. Rotation
    /// invariance makes this exactly zero; anything else means the input
    /// series is inconsistent with the resonance chart.
    pub phi_residual_norm: f64,
}

impl ResonantSeries {
    pub fn terms(&self) -> impl Iterator<Item = (&ResKey, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn accumulate(&mut self, key: ResKey, coeff: C64) {
        let entry = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *entry += coeff;
        if entry.re == 0.0 && entry.im == 0.0 {
            self.terms.remove(&key);
        }
    }

    /// Largest relative reality defect over conjugate pairs.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (key, c) in &self.terms {
            let mate = self.terms.get(&key.conj()).copied().unwrap_or(C64::new(0.0, 0.0));
            worst = worst.max((c - mate.conj()).norm() / (c.norm() + mate.norm()));
        }
        worst
    }

    /// Old-chart actions (I₁, I₂, L₁, L₂) at (p_δ, p_σ); errors if an
    /// eccentricity action turns negative.
    fn base_actions(chart: &ResonantChart, p: [f64; 2]) -> Result<[f64; 4]> {
        let v = chart.momenta_to_actions([p[0], p[1], chart.p_phi, chart.p_theta]);
        for &i in &v[..2] {
            if i < 0.0 {
                return Err(Error::NegativeAction(i));
            }
        }
        Ok(v)
    }

    /// Value of the reduced Hamiltonian.
    pub fn evaluate(&self, chart: &ResonantChart, p: [f64; 2], q: [f64; 2]) -> Result<f64> {
        let v = Self::base_actions(chart, p)?;
        let mut sum = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for (key, c) in &self.terms {
            let radial = v[0].powf(key.g[0] as f64 / 2.0)
                * v[1].powf(key.g[1] as f64 / 2.0)
                * v[2].powi(key.l[0] as i32)
                * v[3].powi(key.l[1] as i32);
            let term = c * radial * C64::from_polar(1.0, key.n[0] as f64 * q[0] + key.n[1] as f64 * q[1]);
            sum += term;
            scale += term.norm();
        }
        if sum.im.abs() > 1e-9 * scale.max(1e-300) {
            return Err(Error::RealityViolation { residue: sum.im.abs(), scale });
        }
        Ok(sum.re)
    }

    /// Value, gradient and Hessian in (p_δ, p_σ) at the symmetric angles
    /// (δ, σ) = (π, π), where every harmonic reduces to a sign.
    pub fn derivs_at_pi(&self, chart: &ResonantChart, p: [f64; 2]) -> Result<(f64, [f64; 2], [[f64; 2]; 2])> {
        let v = Self::base_actions(chart, p)?;
        // ∂(I₁,I₂,L₁,L₂)/∂(p_δ,p_σ)
        let dv = [[1.0, -2.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -3.0]];
        let mut value = C64::new(0.0, 0.0);
        let mut grad = [C64::new(0.0, 0.0); 2];
        let mut hess = [[C64::new(0.0, 0.0); 2]; 2];
        for (key, c) in &self.terms {
            let sign = if (key.n[0] + key.n[1]).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let q = [
                key.g[0] as f64 / 2.0,
                key.g[1] as f64 / 2.0,
                key.l[0] as f64,
                key.l[1] as f64,
            ];
            // factors f_i = v_i^{q_i} with first and second derivatives
            let mut f = [0.0; 4];
            let mut f1 = [0.0; 4];
            let mut f2 = [0.0; 4];
            for i in 0..4 {
                f[i] = v[i].powf(q[i]);
                f1[i] = if q[i] == 0.0 { 0.0 } else { q[i] * v[i].powf(q[i] - 1.0) };
                f2[i] = if q[i] == 0.0 || q[i] == 1.0 {
                    0.0
                } else {
                    q[i] * (q[i] - 1.0) * v[i].powf(q[i] - 2.0)
                };
            }
            let prod = f[0] * f[1] * f[2] * f[3];
            let others = |i: usize| f.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).product::<f64>();
            let w = c * sign;
            value += w * prod;
            for a in 0..2 {
                let mut d = 0.0;
                for i in 0..4 {
                    d += dv[i][a] * f1[i] * others(i);
                }
                grad[a] += w * d;
            }
            for a in 0..2 {
                for b in 0..2 {
                    let mut d = 0.0;
                    for i in 0..4 {
                        // diagonal second derivative of factor i
                        d += dv[i][a] * dv[i][b] * f2[i] * others(i);
                        // cross terms between distinct factors
                        for j in 0..4 {
                            if j != i {
                                let rest: f64 = f
                                    .iter()
                                    .enumerate()
                                    .filter(|&(r, _)| r != i && r != j)
                                    .map(|(_, &x)| x)
                                    .product();
                                d += dv[i][a] * dv[j][b] * f1[i] * f1[j] * rest / 2.0;
                                d += dv[j][a] * dv[i][b] * f1[i] * f1[j] * rest / 2.0;
                            }
                        }
                    }
                    hess[a][b] += w * d;
                }
            }
        }
        let scale = self.terms.values().map(|c| c.norm()).sum::<f64>().max(1e-300);
        if value.im.abs() > 1e-9 * scale {
            return Err(Error::RealityViolation { residue: value.im.abs(), scale });
        }
        Ok((
            value.re,
            [grad[0].re, grad[1].re],
            [[hess[0][0].re, hess[0][1].re], [hess[1][0].re, hess[1][1].re]],
        ))
    }

    /// Taylor expansion around `(p*, (π,π))` in canonical displacements
    /// `y = p − p*`, `x = (δ−π, σ−π)`, to total degree `cap`.
    pub fn to_cart(&self, chart: &ResonantChart, p_star: [f64; 2], cap: u32) -> Result<CartPoly> {
        let v_star = Self::base_actions(chart, p_star)?;
        // v_i = v_i* + (dv_i · y)
        let dv = [[1.0, -2.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -3.0]];
        let mut acc: BTreeMap<[u8; 4], C64> = BTreeMap::new();
        for (key, c) in &self.terms {
            let q = [
                key.g[0] as f64 / 2.0,
                key.g[1] as f64 / 2.0,
                key.l[0] as f64,
                key.l[1] as f64,
            ];
            // radial part: product over i of (v_i* + dv_i·y)^{q_i}, expanded
            // as a polynomial in (y₁, y₂) up to degree `cap`
            let mut radial: BTreeMap<[u8; 2], f64> = BTreeMap::new();
            radial.insert([0, 0], 1.0);
            for i in 0..4 {
                if q[i] == 0.0 {
                    continue;
                }
                if v_star[i] <= 0.0 && q[i].fract() != 0.0 {
                    return Err(Error::NegativeAction(v_star[i]));
                }
                // binomial series of v^{q} around v*
                let mut factor: BTreeMap<[u8; 2], f64> = BTreeMap::new();
                let mut coeff = v_star[i].powf(q[i]);
                factor.insert([0, 0], coeff);
                let mut lin: BTreeMap<[u8; 2], f64> = BTreeMap::new();
                lin.insert([1, 0], dv[i][0]);
                lin.insert([0, 1], dv[i][1]);
                let mut power: BTreeMap<[u8; 2], f64> = BTreeMap::new();
                power.insert([0, 0], 1.0);
                for n in 1..=cap {
                    // C(q, n) v*^{q−n}
                    coeff *= (q[i] - (n as f64 - 1.0)) / (n as f64 * v_star[i]);
                    if coeff == 0.0 {
                        break;
                    }
                    power = poly2_mul(&power, &lin, cap);
                    for (k, w) in &power {
                        *factor.entry(*k).or_insert(0.0) += coeff * w;
                    }
                }
                radial = poly2_mul(&radial, &factor, cap);
            }
            // angular part: e^{i n·x} per angle, expanded to degree `cap`,
            // including the sign e^{inπ} of the base point
            let sign = if (key.n[0] + key.n[1]).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let mut angular: BTreeMap<[u8; 2], C64> = BTreeMap::new();
            angular.insert([0, 0], C64::new(sign, 0.0));
            for (j, &n) in key.n.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let mut expo: BTreeMap<[u8; 2], C64> = BTreeMap::new();
                let mut term = C64::new(1.0, 0.0);
                let mut k = [0u8; 2];
                expo.insert(k, term);
                for m in 1..=cap {
                    term *= C64::new(0.0, n as f64) / m as f64;
                    k[j] = m as u8;
                    expo.insert(k, term);
                }
                angular = poly2c_mul(&angular, &expo, cap);
            }
            // combine into the 4-variable polynomial (y₁, y₂, x₁, x₂)
            for (ky, wy) in &radial {
                for (kx, wx) in &angular {
                    let deg = ky[0] + ky[1] + kx[0] + kx[1];
                    if (deg as u32) > cap {
                        continue;
                    }
                    let key4 = [ky[0], ky[1], kx[0], kx[1]];
                    let entry = acc.entry(key4).or_insert(C64::new(0.0, 0.0));
                    *entry += c * *wy * wx;
                }
            }
        }
        let mut poly = CartPoly::new(cap);
        let scale = acc.values().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        for (key, c) in acc {
            if c.im.abs() > 1e-9 * scale {
                return Err(Error::RealityViolation { residue: c.im.abs(), scale });
            }
            if c.re != 0.0 {
                poly.insert(key, c.re);
            }
        }
        Ok(poly)
    }
}

fn poly2_mul(a: &BTreeMap<[u8; 2], f64>, b: &BTreeMap<[u8; 2], f64>, cap: u32) -> BTreeMap<[u8; 2], f64> {
    let mut out = BTreeMap::new();
    for (ka, wa) in a {
        for (kb, wb) in b {
            let k = [ka[0] + kb[0], ka[1] + kb[1]];
            if (k[0] + k[1]) as u32 > cap {
                continue;
            }
            *out.entry(k).or_insert(0.0) += wa * wb;
        }
    }
    out
}

fn poly2c_mul(a: &BTreeMap<[u8; 2], C64>, b: &BTreeMap<[u8; 2], C64>, cap: u32) -> BTreeMap<[u8; 2], C64> {
    let mut out = BTreeMap::new();
    for (ka, wa) in a {
        for (kb, wb) in b {
            let k = [ka[0] + kb[0], ka[1] + kb[1]];
            if (k[0] + k[1]) as u32 > cap {
                continue;
            }
            *out.entry(k).or_insert(C64::new(0.0, 0.0)) += wa * wb;
        }
    }
    out
}

/// Averages the fast angle θ out of the expanded Hamiltonian and rewrites the
/// survivors over the resonant chart.
pub fn to_resonant_average(
    poin: &PoincareSeries,
    chart: &ResonantChart,
) -> Result<(ResonantSeries, ReductionDiagnostics)> {
    if chart.canonicity_defect() != 0 {
        return Err(Error::InvalidConfig("resonant chart is not canonical".into()));
    }
    let mut out = ResonantSeries::default();
    let mut averaged_norm = 0.0;
    let mut phi_residual_norm = 0.0;
    for (key, c) in poin.terms() {
        let m = [key.zm[0] as i32 - key.zp[0] as i32, key.zm[1] as i32 - key.zp[1] as i32];
        let n = chart.harmonic_image([key.k[0] as i32, key.k[1] as i32], m);
        if n[3] != 0 {
            averaged_norm += c.norm();
            continue;
        }
        if n[2] != 0 {
            phi_residual_norm += c.norm();
            continue;
        }
        let g = [key.zp[0] + key.zm[0], key.zp[1] + key.zm[1]];
        // z^α z̄^β = (2I)^{(α+β)/2} e^{−i(α−β)ω}: fold the 2^{g/2} in
        let factor = 2.0f64.powf((g[0] + g[1]) as f64 / 2.0);
        let n8 = [n[0] as i8, n[1] as i8];
        out.accumulate(ResKey { g, l: key.l, n: n8 }, c * factor);
    }
    Ok((out, ReductionDiagnostics { averaged_norm, phi_residual_norm }))
}

/// Newton search for the symmetric equilibrium of the reduced model at
/// (δ, σ) = (π, π).
pub fn find_equilibrium(
    series: &ResonantSeries,
    chart: &ResonantChart,
    guess: [f64; 2],
) -> Result<[f64; 2]> {
    let mut p = guess;
    let mut best_grad = f64::INFINITY;
    for _ in 0..80 {
        let (_, grad, hess) = series.derivs_at_pi(chart, p)?;
        let gnorm = grad[0].hypot(grad[1]);
        best_grad = best_grad.min(gnorm);
        if gnorm < 1e-12 {
            return Ok(p);
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        if det == 0.0 {
            return Err(Error::Singular("Hessian of the reduced model".into()));
        }
        let step = [
            -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
            -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det,
        ];
        p = [p[0] + step[0], p[1] + step[1]];
    }
    Err(Error::NoConvergence(format!(
        "equilibrium search stalled with |∇H| = {best_grad:e}"
    )))
}
