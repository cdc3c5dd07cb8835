use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::config::{OrbitalConfig, PoincareChart};
use crate::error::{Error, Result};
use crate::orbit::{elements_to_state, PlanarElements};
use crate::pseries::C64;

/// Truncation orders for the expansion of the Hamiltonian in Poincaré
/// variables.
#[derive(Clone, Copy, Debug)]
pub struct ExpansionCaps {
    /// Joint polynomial degree in the fast actions L₁, L₂ for the
    /// perturbation (the Keplerian part keeps two extra orders).
    pub l_deg: u32,
    /// Joint polynomial degree in the secular variables (ξ, η).
    pub s_deg: u32,
    /// Fourier cap |k₁|+|k₂| on the mean-longitude harmonics.
    pub k_cap: u32,
    /// Multiplier on both angle grids (1 = standard, 2 = refined; used to
    /// cross-check quadrature convergence).
    pub angle_refine: u32,
    /// Monomials whose contribution at the sampling scales falls below
    /// `prune_rel` times the largest one are quadrature noise and get dropped.
    pub prune_rel: f64,
}

impl Default for ExpansionCaps {
    fn default() -> Self {
        ExpansionCaps { l_deg: 2, s_deg: 6, k_cap: 12, angle_refine: 1, prune_rel: 1e-13 }
    }
}

/// Monomial key of the expansion: `L^l z^zp z̄^zm e^{i k·λ}` with the complex
/// secular variables `z_j = ξ_j + i η_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoinKey {
    pub l: [u8; 2],
    pub zp: [u8; 2],
    pub zm: [u8; 2],
    pub k: [i8; 2],
}

impl PoinKey {
    pub fn secular_degree(&self) -> u32 {
        (self.zp[0] + self.zp[1] + self.zm[0] + self.zm[1]) as u32
    }
    pub fn l_degree(&self) -> u32 {
        (self.l[0] + self.l[1]) as u32
    }
    /// Key of the complex-conjugate monomial.
    pub fn conj(&self) -> PoinKey {
        PoinKey { l: self.l, zp: self.zm, zm: self.zp, k: [-self.k[0], -self.k[1]] }
    }
}

/// The expanded Hamiltonian: Keplerian part plus the full mutual perturbation,
/// as a Fourier–Taylor series over `(L, λ, z, z̄)`.
#[derive(Clone, Debug, Default)]
pub struct PoincareSeries {
    terms: BTreeMap<PoinKey, C64>,
}

impl PoincareSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, key: PoinKey, coeff: C64) {
        let entry = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *entry += coeff;
        if entry.re == 0.0 && entry.im == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PoinKey, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn prune_below(&mut self, eps: f64) -> usize {
        let before = self.terms.len();
        self.terms.retain(|_, c| c.norm() >= eps);
        before - self.terms.len()
    }

    /// Largest relative reality defect `|c − conj(c_mate)| / (|c| + |c_mate|)`
    /// over all conjugate monomial pairs.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (key, c) in &self.terms {
            let mate = self.terms.get(&key.conj()).copied().unwrap_or(C64::new(0.0, 0.0));
            worst = worst.max((c - mate.conj()).norm() / (c.norm() + mate.norm()));
        }
        worst
    }

    /// Numerical value at a phase-space point; the imaginary residue must
    /// cancel to rounding if the series is a real function.
    pub fn evaluate(&self, l: [f64; 2], lambda: [f64; 2], xi: [f64; 2], eta: [f64; 2]) -> Result<f64> {
        let z = [C64::new(xi[0], eta[0]), C64::new(xi[1], eta[1])];
        let zb = [z[0].conj(), z[1].conj()];
        let mut sum = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for (key, c) in &self.terms {
            let mut term = *c;
            for j in 0..2 {
                term *= l[j].powi(key.l[j] as i32);
                term *= z[j].powi(key.zp[j] as i32);
                term *= zb[j].powi(key.zm[j] as i32);
                term *= C64::from_polar(1.0, key.k[j] as f64 * lambda[j]);
            }
            sum += term;
            scale += term.norm();
        }
        if sum.im.abs() > 1e-10 * scale.max(1e-300) {
            return Err(Error::RealityViolation { residue: sum.im.abs(), scale });
        }
        Ok(sum.re)
    }
}

/// Numerical health report of the expansion.
#[derive(Clone, Copy, Debug)]
pub struct ExpansionDiagnostics {
    /// Largest monomial contribution at the sampling scales, before pruning.
    pub max_coeff: f64,
    /// Number of quadrature-noise terms removed.
    pub pruned_terms: usize,
    /// Largest FFT mode violating rotation invariance (k₁+k₂ = m₁+m₂); should
    /// sit at rounding noise relative to `max_coeff`.
    pub rotation_residual: f64,
    /// Worst absolute residual of the radial least-squares fits, relative to
    /// the largest mode amplitude.
    pub fit_residual: f64,
}

/// The exact mutual interaction `T⁽¹⁾+U⁽¹⁾ = r̃₁·r̃₂/m₀ − 𝒢 m₁m₂/‖r₁−r₂‖`
/// evaluated from the osculating two-body orbits. This is the function the
/// series approximates; tests compare the two pointwise.
pub fn perturbation_exact(
    cfg: &OrbitalConfig,
    chart: &PoincareChart,
    l: [f64; 2],
    lambda: [f64; 2],
    xi: [f64; 2],
    eta: [f64; 2],
) -> Result<f64> {
    let mut pos = [[0.0; 2]; 2];
    let mut mom = [[0.0; 2]; 2];
    for j in 0..2 {
        let (p, m) = planet_state(cfg, chart, j, l[j], lambda[j], xi[j], eta[j])?;
        pos[j] = p;
        mom[j] = m;
    }
    Ok(interaction(cfg, &pos, &mom))
}

fn interaction(cfg: &OrbitalConfig, pos: &[[f64; 2]; 2], mom: &[[f64; 2]; 2]) -> f64 {
    let t1 = (mom[0][0] * mom[1][0] + mom[0][1] * mom[1][1]) / cfg.m0;
    let dx = pos[0][0] - pos[1][0];
    let dy = pos[0][1] - pos[1][1];
    let u1 = -cfg.g_const * cfg.planet_mass(0) * cfg.planet_mass(1) / dx.hypot(dy);
    t1 + u1
}

/// Astrocentric position and conjugate momentum `r̃_j = β_j v_j` of planet `j`
/// at the given Poincaré point.
fn planet_state(
    cfg: &OrbitalConfig,
    chart: &PoincareChart,
    j: usize,
    l: f64,
    lambda: f64,
    xi: f64,
    eta: f64,
) -> Result<([f64; 2], [f64; 2])> {
    let big_lambda = chart.lambda_star[j] + l;
    if big_lambda <= 0.0 {
        return Err(Error::InvalidInput(format!("Λ_{j} = {big_lambda} not positive")));
    }
    let beta = cfg.beta(j);
    let mu = cfg.mu_grav(j);
    let a = (big_lambda / beta).powi(2) / mu;
    let d = (xi * xi + eta * eta) / (2.0 * big_lambda);
    if d >= 1.0 {
        return Err(Error::InvalidInput(format!("secular amplitude {d} out of range")));
    }
    let e = (d * (2.0 - d)).sqrt();
    let omega = if xi == 0.0 && eta == 0.0 { 0.0 } else { (-eta).atan2(xi) };
    let el = PlanarElements { a, e, omega, mean_anom: lambda - omega };
    let (p, v) = elements_to_state(mu, &el)?;
    Ok((p, [beta * v[0], beta * v[1]]))
}

/// Keplerian coefficient of `L_j^n`: Taylor of `−𝒢²(m₀+m_j)²β_j³/(2Λ²)` around
/// `Λ_j*`, with the constant dropped.
fn kepler_coeff(cfg: &OrbitalConfig, chart: &PoincareChart, j: usize, n: u32) -> f64 {
    let c = cfg.mu_grav(j).powi(2) * cfg.beta(j).powi(3);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    -c * (n as f64 + 1.0) * sign / (2.0 * chart.lambda_star[j].powi(n as i32 + 2))
}

/// Builds the Fourier–Taylor expansion of the full planetary Hamiltonian
/// around the Poincaré reference chart.
///
/// The perturbation is sampled on a product grid: per planet, mean longitudes
/// on `4·k_cap` nodes, secular angles on `4·s_deg` nodes, five secular radii,
/// and a six-point stencil in (L₁, L₂). A 4-D FFT projects onto angular modes
/// (keeping only those allowed by rotation invariance), a guarded radial
/// least-squares fit separates the secular degrees, and the stencil fit
/// resolves the L-polynomial. The Keplerian part is added in closed form.
pub fn build_expansion(
    cfg: &OrbitalConfig,
    caps: &ExpansionCaps,
) -> Result<(PoincareSeries, ExpansionDiagnostics)> {
    cfg.validate()?;
    let geom = FitGeometry::new(cfg, caps)?;
    let chart = cfg.poincare_chart();
    let (n_lam, n_phi, n_rho) = (geom.n_lam, geom.n_phi, geom.rho.len());

    // per-planet state tables over (L index, ρ index, λ index, φ index)
    let mut tables: Vec<Vec<([f64; 2], [f64; 2])>> = Vec::with_capacity(2);
    for j in 0..2 {
        let mut tab = Vec::with_capacity(3 * n_rho * n_lam * n_phi);
        for li in 0..3 {
            let l = [0.0, geom.h[j], -geom.h[j]][li];
            for ri in 0..n_rho {
                let r = geom.rho[ri][j];
                for il in 0..n_lam {
                    let lambda = 2.0 * std::f64::consts::PI * il as f64 / n_lam as f64;
                    for ip in 0..n_phi {
                        let phi = 2.0 * std::f64::consts::PI * ip as f64 / n_phi as f64;
                        let (xi, eta) = (r * phi.cos(), r * phi.sin());
                        tab.push(planet_state(cfg, &chart, j, l, lambda, xi, eta)?);
                    }
                }
            }
        }
        tables.push(tab);
    }
    let table_at = |j: usize, li: usize, ri: usize, il: usize, ip: usize| {
        tables[j][((li * n_rho + ri) * n_lam + il) * n_phi + ip]
    };

    let sampler = |idx: SampleIndex| {
        let (p1, m1) = table_at(0, idx.li[0], idx.ri[0], idx.il[0], idx.ip[0]);
        let (p2, m2) = table_at(1, idx.li[1], idx.ri[1], idx.il[1], idx.ip[1]);
        interaction(cfg, &[p1, p2], &[m1, m2])
    };

    let (mut series, diag) = fit_series(&geom, &sampler)?;

    // Keplerian part, two orders beyond the perturbation's L-degree
    for j in 0..2 {
        for n in 1..=(caps.l_deg + 2) {
            let mut l = [0u8; 2];
            l[j] = n as u8;
            series.accumulate(
                PoinKey { l, zp: [0, 0], zm: [0, 0], k: [0, 0] },
                C64::new(kepler_coeff(cfg, &chart, j, n), 0.0),
            );
        }
    }
    Ok((series, diag))
}

/// Grid geometry for the perturbation fit.
pub(crate) struct FitGeometry {
    n_lam: usize,
    n_phi: usize,
    /// Secular sampling radii per planet.
    rho: Vec<[f64; 2]>,
    /// Step of the L stencil per planet.
    h: [f64; 2],
    /// Guard degree of the radial fits (kept: `caps.s_deg`).
    guard_total: u32,
    caps: ExpansionCaps,
}

/// Indices of one sample: L-stencil value (0 → 0, 1 → +h, 2 → −h), radius,
/// mean longitude and secular angle per planet.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SampleIndex {
    pub li: [usize; 2],
    pub ri: [usize; 2],
    pub il: [usize; 2],
    pub ip: [usize; 2],
}

impl FitGeometry {
    fn new(cfg: &OrbitalConfig, caps: &ExpansionCaps) -> Result<Self> {
        if caps.angle_refine == 0 || caps.l_deg > 6 || caps.s_deg > 12 || caps.k_cap > 120 {
            return Err(Error::InvalidConfig(format!("expansion caps out of range: {caps:?}")));
        }
        let chart = cfg.poincare_chart();
        let n_lam = (4 * caps.k_cap.max(2) * caps.angle_refine) as usize;
        let n_phi = (4 * caps.s_deg.max(2) * caps.angle_refine) as usize;
        // Secular sampling radii, expressed through eccentricity. Small radii
        // keep the unmodelled Taylor tail (degrees past the guard) far below
        // the kept coefficients; one radius per even degree up to the guard
        // keeps the per-axis Vandermonde full-rank.
        let guard_total = caps.s_deg + 4;
        let n_rho = (guard_total / 2 + 1) as usize;
        let e_max = 0.24;
        let mut rho = vec![[0.0f64; 2]; n_rho];
        for j in 0..2 {
            for i in 0..n_rho {
                let e = e_max * (i + 1) as f64 / n_rho as f64;
                rho[i][j] = (2.0 * chart.lambda_star[j] * (1.0 - (1.0 - e * e).sqrt())).sqrt();
            }
        }
        let h = [1e-3 * chart.lambda_star[0], 1e-3 * chart.lambda_star[1]];
        Ok(FitGeometry { n_lam, n_phi, rho, h, guard_total, caps: *caps })
    }
}

/// Projects grid samples of a real function of the Poincaré variables onto
/// the monomial basis: 4-D FFT over the angles, guarded radial least squares
/// over the secular radii, six-point stencil over (L₁, L₂).
pub(crate) fn fit_series(
    geom: &FitGeometry,
    sampler: &(dyn Fn(SampleIndex) -> f64 + Sync),
) -> Result<(PoincareSeries, ExpansionDiagnostics)> {
    let caps = &geom.caps;
    let (n_lam, n_phi) = (geom.n_lam, geom.n_phi);
    let n_rho = geom.rho.len();
    let h = geom.h;
    // stencil point -> (L₁ value index, L₂ value index)
    let stencil: [(usize, usize); 6] = [(0, 0), (1, 0), (2, 0), (0, 1), (0, 2), (1, 1)];

    // angular modes allowed by the caps and by rotation invariance
    let modes = admissible_modes(caps);
    if modes.is_empty() {
        return Err(Error::InvalidConfig("no angular modes within caps".into()));
    }

    let mut planner = FftPlanner::<f64>::new();
    let fft_lam: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n_lam);
    let fft_phi: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n_phi);

    // one task per (stencil point, ρ-combination): fill the 4-D angle grid,
    // FFT it, read off the admissible modes and the rotation-invariance defect
    let tasks: Vec<(usize, usize, usize)> = (0..stencil.len())
        .flat_map(|s| (0..n_rho).flat_map(move |r1| (0..n_rho).map(move |r2| (s, r1, r2))))
        .collect();

    struct TaskOut {
        s: usize,
        rho_idx: usize,
        mode_values: Vec<C64>,
        rotation_residual: f64,
    }

    let results: Vec<TaskOut> = tasks
        .par_iter()
        .map(|&(s, r1, r2)| {
            let (li1, li2) = stencil[s];
            let mut grid = vec![C64::new(0.0, 0.0); n_lam * n_lam * n_phi * n_phi];
            let mut idx = 0;
            for il1 in 0..n_lam {
                for il2 in 0..n_lam {
                    for ip1 in 0..n_phi {
                        for ip2 in 0..n_phi {
                            let sample = sampler(SampleIndex {
                                li: [li1, li2],
                                ri: [r1, r2],
                                il: [il1, il2],
                                ip: [ip1, ip2],
                            });
                            grid[idx] = C64::new(sample, 0.0);
                            idx += 1;
                        }
                    }
                }
            }
            fft4(&mut grid, [n_lam, n_lam, n_phi, n_phi], &fft_lam, &fft_phi);
            let norm = 1.0 / (n_lam * n_lam * n_phi * n_phi) as f64;
            let fetch = |k1: i32, k2: i32, m1: i32, m2: i32| {
                let i0 = k1.rem_euclid(n_lam as i32) as usize;
                let i1 = k2.rem_euclid(n_lam as i32) as usize;
                let i2 = m1.rem_euclid(n_phi as i32) as usize;
                let i3 = m2.rem_euclid(n_phi as i32) as usize;
                grid[((i0 * n_lam + i1) * n_phi + i2) * n_phi + i3] * norm
            };
            let mode_values: Vec<C64> =
                modes.iter().map(|m| fetch(m.k[0], m.k[1], m.m[0], m.m[1])).collect();
            // rotation invariance says modes with k₁+k₂ ≠ m₁+m₂ vanish; probe
            // the nearest violating shells
            let mut worst = 0.0f64;
            for m in modes.iter().step_by(7) {
                for dm in [-1i32, 1] {
                    worst = worst.max(fetch(m.k[0], m.k[1], m.m[0] + dm, m.m[1]).norm());
                }
            }
            TaskOut { s, rho_idx: r1 * n_rho + r2, mode_values, rotation_residual: worst }
        })
        .collect();

    let n_modes = modes.len();
    let n_combo = n_rho * n_rho;
    // vals[s][mode][rho-combo]
    let mut vals = vec![C64::new(0.0, 0.0); stencil.len() * n_modes * n_combo];
    let mut rotation_residual = 0.0f64;
    for out in results {
        rotation_residual = rotation_residual.max(out.rotation_residual);
        for (mi, v) in out.mode_values.iter().enumerate() {
            vals[(out.s * n_modes + mi) * n_combo + out.rho_idx] = *v;
        }
    }

    // group modes by their secular-harmonic pair; each group shares one radial fit
    let mut groups: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
    for (mi, m) in modes.iter().enumerate() {
        groups.entry((m.m[0], m.m[1])).or_default().push(mi);
    }

    let guard_total = geom.guard_total;
    let rho_max = [geom.rho[n_rho - 1][0], geom.rho[n_rho - 1][1]];
    let mut fits: HashMap<(i32, i32), RadialFit> = HashMap::new();

    // radial solve per stencil point: (k, m, ρ-data) -> coefficients over
    // (d₁, d₂); then regroup by monomial for the L fit
    let mut by_monomial: BTreeMap<MonoKey, [C64; 6]> = BTreeMap::new();
    let mut max_resid = 0.0f64;
    let mut max_scale = 0.0f64;
    for s in 0..stencil.len() {
        for (&(m1, m2), group) in &groups {
            let fit = fits
                .entry((m1.abs(), m2.abs()))
                .or_insert_with(|| RadialFit::new(m1.abs(), m2.abs(), guard_total, &geom.rho, rho_max));
            for &mi in group {
                let data: Vec<C64> = (0..n_combo)
                    .map(|rc| vals[(s * n_modes + mi) * n_combo + rc])
                    .collect();
                let (coeffs, resid, scale) = fit.solve(&data);
                max_resid = max_resid.max(resid);
                max_scale = max_scale.max(scale);
                for (&(d1, d2), c) in fit.dpairs.iter().zip(coeffs.iter()) {
                    if (d1 + d2) as u32 > caps.s_deg {
                        continue; // guard degrees absorb the truncation error
                    }
                    let key = MonoKey {
                        zp: [((d1 as i32 + m1) / 2) as u8, ((d2 as i32 + m2) / 2) as u8],
                        zm: [((d1 as i32 - m1) / 2) as u8, ((d2 as i32 - m2) / 2) as u8],
                        k: [modes[mi].k[0] as i8, modes[mi].k[1] as i8],
                    };
                    by_monomial.entry(key).or_insert([C64::new(0.0, 0.0); 6])[s] += *c;
                }
            }
        }
    }

    // six-point stencil solve for the L dependence
    let mut series = PoincareSeries::new();
    for (key, f) in &by_monomial {
        let c0 = f[0];
        let c1 = (f[1] - f[2]) * 0.5;
        let c3 = (f[1] + f[2]) * 0.5 - c0;
        let c2 = (f[3] - f[4]) * 0.5;
        let c4 = (f[3] + f[4]) * 0.5 - c0;
        let c5 = f[5] - c0 - c1 - c2 - c3 - c4;
        let l_monos: [((u8, u8), C64); 6] = [
            ((0, 0), c0),
            ((1, 0), c1 / h[0]),
            ((0, 1), c2 / h[1]),
            ((2, 0), c3 / (h[0] * h[0])),
            ((0, 2), c4 / (h[1] * h[1])),
            ((1, 1), c5 / (h[0] * h[1])),
        ];
        for ((n1, n2), c) in l_monos {
            if (n1 + n2) as u32 > caps.l_deg {
                continue;
            }
            series.accumulate(
                PoinKey { l: [n1, n2], zp: key.zp, zm: key.zm, k: key.k },
                c,
            );
        }
    }

    let fit_residual = if max_scale > 0.0 { max_resid / max_scale } else { 0.0 };

    // enforce reality exactly: average every coefficient with the conjugate
    // of its mate (the stencil's h⁻² unscaling amplifies rounding noise into
    // small asymmetries otherwise)
    let symmetrized: Vec<(PoinKey, C64)> = series
        .terms
        .iter()
        .map(|(key, c)| {
            let mate = series.terms.get(&key.conj()).copied().unwrap_or(C64::new(0.0, 0.0));
            (*key, (c + mate.conj()) * 0.5)
        })
        .collect();
    series.terms = symmetrized.into_iter().filter(|(_, c)| c.norm() > 0.0).collect();

    // prune by each monomial's contribution at the sampling scales, so that
    // coefficients in different units are compared fairly
    let weight = |key: &PoinKey| {
        rho_max[0].powi((key.zp[0] + key.zm[0]) as i32)
            * rho_max[1].powi((key.zp[1] + key.zm[1]) as i32)
            * h[0].powi(key.l[0] as i32)
            * h[1].powi(key.l[1] as i32)
    };
    let max_coeff = series
        .terms()
        .map(|(key, c)| c.norm() * weight(key))
        .fold(0.0, f64::max);
    let threshold = caps.prune_rel * max_coeff;
    let before = series.len();
    series.terms.retain(|key, c| c.norm() * weight(key) >= threshold);
    let pruned_terms = before - series.len();

    Ok((
        series,
        ExpansionDiagnostics { max_coeff, pruned_terms, rotation_residual, fit_residual },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct MonoKey {
    zp: [u8; 2],
    zm: [u8; 2],
    k: [i8; 2],
}

#[derive(Clone, Copy, Debug)]
struct AngularMode {
    k: [i32; 2],
    m: [i32; 2],
}

/// Modes within the Fourier caps that satisfy rotation invariance
/// (k₁+k₂ = m₁+m₂) and admit at least one secular monomial.
fn admissible_modes(caps: &ExpansionCaps) -> Vec<AngularMode> {
    let kc = caps.k_cap as i32;
    let sc = caps.s_deg as i32;
    let mut out = Vec::new();
    for k1 in -kc..=kc {
        for k2 in -(kc - k1.abs())..=(kc - k1.abs()) {
            let total = k1 + k2;
            for m1 in -sc..=sc {
                let m2 = total - m1;
                if m1.abs() + m2.abs() <= sc {
                    out.push(AngularMode { k: [k1, k2], m: [m1, m2] });
                }
            }
        }
    }
    out
}

/// Precomputed least-squares system for one pair of secular harmonics:
/// columns are the admissible radial monomials ρ₁^{d₁}ρ₂^{d₂} (with guard
/// degrees) scaled to unit size at the largest sampling radius.
struct RadialFit {
    dpairs: Vec<(u8, u8)>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    design: nalgebra::DMatrix<f64>,
    unscale: Vec<f64>,
}

impl RadialFit {
    fn new(m1: i32, m2: i32, guard_total: u32, rho: &[[f64; 2]], rho_max: [f64; 2]) -> Self {
        let mut dpairs = Vec::new();
        let mut d1 = m1;
        while d1 <= guard_total as i32 {
            let mut d2 = m2;
            while d1 + d2 <= guard_total as i32 {
                dpairs.push((d1 as u8, d2 as u8));
                d2 += 2;
            }
            d1 += 2;
        }
        let n_rho = rho.len();
        let rows = n_rho * n_rho;
        let mut design = nalgebra::DMatrix::zeros(rows, dpairs.len());
        for r1 in 0..n_rho {
            for r2 in 0..n_rho {
                let t1 = rho[r1][0] / rho_max[0];
                let t2 = rho[r2][1] / rho_max[1];
                for (c, &(d1, d2)) in dpairs.iter().enumerate() {
                    design[(r1 * n_rho + r2, c)] = t1.powi(d1 as i32) * t2.powi(d2 as i32);
                }
            }
        }
        let unscale = dpairs
            .iter()
            .map(|&(d1, d2)| 1.0 / (rho_max[0].powi(d1 as i32) * rho_max[1].powi(d2 as i32)))
            .collect();
        let svd = nalgebra::SVD::new(design.clone(), true, true);
        RadialFit { dpairs, svd, design, unscale }
    }

    /// Solves for the radial coefficients of one mode; returns them unscaled
    /// together with the absolute fit residual and the data scale.
    fn solve(&self, data: &[C64]) -> (Vec<C64>, f64, f64) {
        let rows = data.len();
        let mut rhs = nalgebra::DMatrix::zeros(rows, 2);
        for (i, v) in data.iter().enumerate() {
            rhs[(i, 0)] = v.re;
            rhs[(i, 1)] = v.im;
        }
        let sol = self.svd.solve(&rhs, 1e-13).expect("SVD of a fixed full-rank design");
        let fitted = &self.design * &sol;
        let mut resid2 = 0.0;
        let mut scale2 = 0.0;
        for i in 0..rows {
            resid2 += (fitted[(i, 0)] - rhs[(i, 0)]).powi(2) + (fitted[(i, 1)] - rhs[(i, 1)]).powi(2);
            scale2 += rhs[(i, 0)].powi(2) + rhs[(i, 1)].powi(2);
        }
        let coeffs = (0..self.dpairs.len())
            .map(|c| C64::new(sol[(c, 0)], sol[(c, 1)]) * self.unscale[c])
            .collect();
        (coeffs, resid2.sqrt(), scale2.sqrt())
    }
}

/// In-place forward FFT along all four axes of a row-major 4-D array.
fn fft4(data: &mut [C64], shape: [usize; 4], fft_lam: &Arc<dyn Fft<f64>>, fft_phi: &Arc<dyn Fft<f64>>) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total);
    for axis in 0..4 {
        let n = shape[axis];
        let fft = if axis < 2 { fft_lam } else { fft_phi };
        assert_eq!(fft.len(), n);
        // stride between consecutive elements along `axis`, number of lines
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut line = vec![C64::new(0.0, 0.0); n];
        for o in 0..outer {
            let block = o * n * stride;
            for s in 0..stride {
                for i in 0..n {
                    line[i] = data[block + i * stride + s];
                }
                fft.process(&mut line);
                for i in 0..n {
                    data[block + i * stride + s] = line[i];
                }
            }
        }
    }
}
