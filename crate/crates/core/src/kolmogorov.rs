//! Translation-free Kolmogorov normalization. Starting from an action–angle
//! Hamiltonian E + ω·p + Σ f_ℓ^(0,s) with f ∈ 𝔓_{ℓ,2s}, each step r removes
//! the angle-dependent terms that are constant (via χ₀) and linear (via χ₁)
//! in the actions at trig order 2r. The frequency vector is not held fixed:
//! the angle average of the linear block updates ω at every step, so no
//! action translation is ever needed. A Newton iteration on the initial
//! shift of the first action then steers the limit frequency to a target.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pseries::{ActionKey, ActionSeries, C64};

/// exp(L_χ)f for action–angle series. Unlike the graded √J chart, bracket
/// chains here shrink geometrically instead of dying on the caps, so the
/// sum is cut once a term's contribution drops below `tol` relative to f.
fn lie_exp_tol(f: &ActionSeries, chi: &ActionSeries, tol: f64) -> Result<ActionSeries> {
    let mut out = f.clone();
    let mut power = f.clone();
    let scale = f.norm().max(1e-300);
    let mut fact = 1.0f64;
    for j in 1..=96usize {
        power = power.bracket(chi)?;
        if power.is_empty() {
            return Ok(out);
        }
        fact *= j as f64;
        out = out.add(&power.scale(C64::new(1.0 / fact, 0.0)))?;
        if power.norm() / fact < tol * scale {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence(format!(
        "Lie series tail still at relative norm {:e} after 96 brackets",
        power.norm() / (fact * scale)
    )))
}

/// Per-step norms: the plotted convergence diagnostics of the normalization.
#[derive(Clone, Debug)]
pub struct KolmoStepRecord {
    pub step: usize,
    pub chi0_norm: f64,
    pub chi1_norm: f64,
    /// Σ over s > r of ‖f₀^(r,s)‖ + ‖f₁^(r,s)‖: what is left to remove.
    pub remainder_norm: f64,
    pub smallest_divisor: f64,
    pub omega: [f64; 2],
}

/// Coordinate chain of a finished normalization: the composition of all
/// exp(L_χ) maps between normalized and original action–angle variables.
#[derive(Clone, Debug, Default)]
pub struct KolmoChain {
    /// Generators in application order: χ₀^(1), χ₁^(1), χ₀^(2), ...
    pub generators: Vec<ActionSeries>,
}

impl KolmoChain {
    /// Maps a normalized-coordinates point to original coordinates by
    /// transforming the coordinate functions p₁, p₂, cos q_a, sin q_a with
    /// the generators in reverse order (exchange theorem) and evaluating.
    pub fn forward(&self, p: [f64; 2], q: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        self.apply(p, q, false)
    }

    /// Original → normalized: negated generators in forward order.
    pub fn backward(&self, p: [f64; 2], q: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        self.apply(p, q, true)
    }

    fn apply(&self, p: [f64; 2], q: [f64; 2], inverse: bool) -> Result<([f64; 2], [f64; 2])> {
        let Some(first) = self.generators.first() else {
            return Ok((p, q));
        };
        let (ac, fc) = (first.action_cap(), first.fourier_cap());
        let mut coords: Vec<ActionSeries> = Vec::with_capacity(6);
        for a in 0..2 {
            let mut pa = ActionSeries::new(ac, fc);
            let mut j = [0u8; 2];
            j[a] = 1;
            pa.insert(ActionKey::new(j, [0, 0]), C64::new(1.0, 0.0));
            coords.push(pa);
            for sign in [1i16, -1] {
                // (cos q_a ∓ ... ) assembled below from e^{±iq_a}
                let mut e = ActionSeries::new(ac, fc);
                let mut k = [0i16; 2];
                k[a] = sign;
                e.insert(ActionKey::new([0, 0], k), C64::new(0.5, 0.0));
                coords.push(e);
            }
        }
        for slot in coords.iter_mut() {
            if inverse {
                for chi in self.generators.iter().rev() {
                    *slot = lie_exp_tol(slot, &chi.scale(C64::new(-1.0, 0.0)), 1e-15)?;
                }
            } else {
                for chi in self.generators.iter() {
                    *slot = lie_exp_tol(slot, chi, 1e-15)?;
                }
            }
        }
        let mut p_out = [0.0f64; 2];
        let mut q_out = [0.0f64; 2];
        for a in 0..2 {
            p_out[a] = coords[3 * a].evaluate(p, q)?;
            // the half-weighted exponentials give cos = e⁺+e⁻, i·sin = e⁺−e⁻
            let plus = coords[3 * a + 1].evaluate_complex(p, q);
            let minus = coords[3 * a + 2].evaluate_complex(p, q);
            let cos = (plus + minus).re;
            let sin = (plus - minus).im;
            q_out[a] = sin.atan2(cos);
        }
        Ok((p_out, q_out))
    }
}

/// The Hamiltonian after `step` normalization steps, organized by the
/// (action degree ℓ, trig class s) grading, together with the accumulated
/// generating functions and the norm ledger.
#[derive(Clone, Debug)]
pub struct KolmogorovState {
    pub step: usize,
    pub energy: f64,
    pub omega: [f64; 2],
    terms: BTreeMap<(u32, u32), ActionSeries>,
    action_cap: u32,
    fourier_cap: u32,
    pub chain: KolmoChain,
    pub ledger: Vec<KolmoStepRecord>,
}

impl KolmogorovState {
    /// Buckets a raw action–angle Hamiltonian into the graded containers:
    /// the k = 0 constant becomes the energy, the k = 0 linear part the
    /// frequency vector, and every other term lands in f_ℓ^(0,s) with
    /// s = ⌈|k|/2⌉.
    pub fn from_hamiltonian(h: &ActionSeries) -> Result<Self> {
        let defect = h.reality_defect();
        if defect > 1e-10 * h.norm().max(1e-300) {
            return Err(Error::RealityViolation { residue: defect, scale: h.norm() });
        }
        let (ac, fc) = (h.action_cap(), h.fourier_cap());
        let mut state = KolmogorovState {
            step: 0,
            energy: 0.0,
            omega: [0.0; 2],
            terms: BTreeMap::new(),
            action_cap: ac,
            fourier_cap: fc,
            chain: KolmoChain::default(),
            ledger: Vec::new(),
        };
        for (key, c) in h.terms() {
            let ell = key.action_degree();
            if key.k == [0, 0] {
                match ell {
                    0 => {
                        state.energy += c.re;
                        continue;
                    }
                    1 => {
                        let a = if key.j[0] == 1 { 0 } else { 1 };
                        state.omega[a] += c.re;
                        continue;
                    }
                    _ => {}
                }
            }
            let s = key.trig_degree().div_ceil(2);
            state
                .terms
                .entry((ell, s))
                .or_insert_with(|| ActionSeries::new(ac, fc))
                .insert(*key, *c);
        }
        if state.omega[0] == 0.0 && state.omega[1] == 0.0 {
            return Err(Error::InvalidInput("no linear (frequency) part".into()));
        }
        Ok(state)
    }

    pub fn container(&self, ell: u32, s: u32) -> ActionSeries {
        self.terms
            .get(&(ell, s))
            .cloned()
            .unwrap_or_else(|| ActionSeries::new(self.action_cap, self.fourier_cap))
    }

    /// Largest trig class carried: 2·s_max = fourier cap.
    fn s_max(&self) -> u32 {
        self.fourier_cap / 2
    }

    /// Reassembles E + ω·p + Σ f_ℓ^(r,s) into a single series.
    pub fn hamiltonian(&self) -> ActionSeries {
        let mut h = ActionSeries::constant(self.energy, self.action_cap, self.fourier_cap);
        let lin = ActionSeries::omega_dot_p(self.omega, self.action_cap, self.fourier_cap);
        h = h.add(&lin).expect("same caps");
        for g in self.terms.values() {
            h = h.add(g).expect("same caps");
        }
        h
    }

    /// Σ_{s>r} ‖f₀^(r,s)‖ + ‖f₁^(r,s)‖.
    pub fn remainder_norm(&self) -> f64 {
        self.terms
            .iter()
            .filter(|((ell, s), _)| *ell <= 1 && *s > self.step as u32)
            .map(|(_, g)| g.norm())
            .sum()
    }

    /// The defining invariant: no constant or linear angle-dependent blocks
    /// survive at classes s ≤ r.
    pub fn invariant_defect(&self) -> f64 {
        self.terms
            .iter()
            .filter(|((ell, s), _)| *ell <= 1 && *s <= self.step as u32)
            .map(|(_, g)| g.norm())
            .sum()
    }

    /// One normalization step: χ₀ removes f₀^(r−1,r), χ₁ removes the
    /// angle-dependent part of the transformed f₁ block at class r, and the
    /// angle average of that block updates ω.
    pub fn kolmo_step(&mut self, floor_rel: f64) -> Result<()> {
        let r = self.step as u32 + 1;
        let floor = floor_rel * self.omega[0].hypot(self.omega[1]);
        let (chi0, de, div0) = solve_chi0(&self.container(0, r), self.omega, floor)?;
        self.energy += de;
        self.terms.remove(&(0, r));

        // Ĥ = exp(L_{χ₀})H: push every container (m,t) to (m−j, t+jr) with
        // weight 1/j!. The cancellation of f₀^(r−1,r) against L_{χ₀}(ω·p)
        // is the removal above.
        let hat = self.pushed(&chi0, r, true)?;
        self.terms = hat;

        let hat_f1 = self.container(1, r);
        let (chi1, domega, div1) = solve_chi1(&hat_f1, self.omega, floor)?;
        self.omega[0] += domega[0];
        self.omega[1] += domega[1];
        self.terms.remove(&(1, r));

        // H^(r) = exp(L_{χ₁})Ĥ: same push, but the (1,r) block re-enters
        // with the exp-of-ω·p bookkeeping weight (i−1)/i! at class ir.
        let mut new_terms = self.pushed(&chi1, r, false)?;
        if !hat_f1.is_empty() {
            let mut cur = hat_f1.clone();
            let mut fact = 1.0f64; // i!
            for i in 2..=(self.s_max() / r).max(1) {
                cur = cur.bracket(&chi1)?;
                if cur.is_empty() {
                    break;
                }
                fact *= i as f64;
                let dest = (1u32, i * r);
                if dest.1 > self.s_max() {
                    break;
                }
                let w = (i as f64 - 1.0) / fact;
                let entry = new_terms
                    .entry(dest)
                    .or_insert_with(|| ActionSeries::new(self.action_cap, self.fourier_cap));
                *entry = entry.add(&cur.scale(C64::new(w, 0.0)))?;
            }
        }
        new_terms.retain(|_, g| !g.is_empty());
        self.terms = new_terms;

        self.step = r as usize;
        self.chain.generators.push(chi0.clone());
        self.chain.generators.push(chi1.clone());
        self.ledger.push(KolmoStepRecord {
            step: self.step,
            chi0_norm: chi0.norm(),
            chi1_norm: chi1.norm(),
            remainder_norm: self.remainder_norm(),
            smallest_divisor: div0.min(div1),
            omega: self.omega,
        });
        Ok(())
    }

    /// exp(L_χ) on all containers. With an angle-only χ (`lowers = true`,
    /// χ ∈ 𝔓_{0,2r}) each bracket lowers ℓ by one and raises the class by
    /// r; with a linear χ (𝔓_{1,2r}) the degree is preserved. The (1,r)
    /// source is skipped in the linear pass — its images carry the special
    /// weight handled by the caller.
    fn pushed(
        &self,
        chi: &ActionSeries,
        r: u32,
        lowers: bool,
    ) -> Result<BTreeMap<(u32, u32), ActionSeries>> {
        let mut out: BTreeMap<(u32, u32), ActionSeries> = BTreeMap::new();
        for ((m, t), g) in &self.terms {
            if !lowers && (*m, *t) == (1, r) {
                continue;
            }
            let mut cur = g.clone();
            let mut fact = 1.0f64;
            let mut j = 0u32;
            loop {
                let dest_ell = if lowers { m.checked_sub(j) } else { Some(*m) };
                let Some(dest_ell) = dest_ell else { break };
                let dest_s = t + j * r;
                if dest_s > self.s_max() {
                    break;
                }
                if !cur.is_empty() {
                    let entry = out
                        .entry((dest_ell, dest_s))
                        .or_insert_with(|| ActionSeries::new(self.action_cap, self.fourier_cap));
                    *entry = entry.add(&cur.scale(C64::new(1.0 / fact, 0.0)))?;
                }
                if lowers && dest_ell == 0 {
                    break; // next bracket with an angle-only χ vanishes
                }
                j += 1;
                fact *= j as f64;
                cur = cur.bracket(chi)?;
                if cur.is_empty() {
                    break;
                }
            }
        }
        out.retain(|_, g| !g.is_empty());
        Ok(out)
    }

    /// Runs `steps` normalization steps.
    pub fn normalize(&mut self, steps: usize, floor_rel: f64) -> Result<()> {
        for _ in 0..steps {
            self.kolmo_step(floor_rel)?;
        }
        Ok(())
    }
}

/// Splits an action-independent block into its angle average (an energy
/// increment) and the generating function χ₀ = Σ c_k/(i k·ω) e^{ik·q}.
/// Returns (χ₀, ΔE, smallest divisor met).
pub fn solve_chi0(
    f0: &ActionSeries,
    omega: [f64; 2],
    floor: f64,
) -> Result<(ActionSeries, f64, f64)> {
    let mut chi = ActionSeries::new(f0.action_cap(), f0.fourier_cap());
    let mut de = 0.0;
    let mut smallest = f64::INFINITY;
    for (key, c) in f0.terms() {
        if key.action_degree() != 0 {
            return Err(Error::InvalidInput(format!(
                "χ₀ source has action degree {}",
                key.action_degree()
            )));
        }
        if key.k == [0, 0] {
            de += c.re;
            continue;
        }
        let d = key.k[0] as f64 * omega[0] + key.k[1] as f64 * omega[1];
        if d.abs() < floor {
            return Err(Error::SmallDivisor {
                k1: key.k[0] as i32,
                k2: key.k[1] as i32,
                value: d.abs(),
                floor,
            });
        }
        smallest = smallest.min(d.abs());
        chi.insert(*key, *c / C64::new(0.0, d));
    }
    Ok((chi, de, smallest))
}

/// Splits a linear-in-actions block into its angle average (the frequency
/// increment Δω) and the generating function χ₁. Returns (χ₁, Δω, smallest
/// divisor met).
pub fn solve_chi1(
    f1: &ActionSeries,
    omega: [f64; 2],
    floor: f64,
) -> Result<(ActionSeries, [f64; 2], f64)> {
    let mut chi = ActionSeries::new(f1.action_cap(), f1.fourier_cap());
    let mut smallest = f64::INFINITY;
    for (key, c) in f1.terms() {
        if key.action_degree() != 1 {
            return Err(Error::InvalidInput(format!(
                "χ₁ source has action degree {}",
                key.action_degree()
            )));
        }
        if key.k == [0, 0] {
            continue; // the average: handled below as Δω
        }
        let d = key.k[0] as f64 * omega[0] + key.k[1] as f64 * omega[1];
        if d.abs() < floor {
            return Err(Error::SmallDivisor {
                k1: key.k[0] as i32,
                k2: key.k[1] as i32,
                value: d.abs(),
                floor,
            });
        }
        smallest = smallest.min(d.abs());
        chi.insert(*key, *c / C64::new(0.0, d));
    }
    let domega = f1.linear_average_coeffs()?;
    Ok((chi, domega, smallest))
}

/// Newton iteration on a scalar frequency map: finds the shift Ĩ₁ with
/// `freq_of(Ĩ₁) = target`, the derivative taken by central differences with
/// step 1e−2·|Ĩ₁⁽⁰⁾|. Returns (Ĩ₁, achieved frequency, iterations).
pub fn newton_calibrate(
    mut freq_of: impl FnMut(f64) -> Result<f64>,
    i1_initial: f64,
    target: f64,
    tol: f64,
) -> Result<(f64, f64, usize)> {
    let h = 1e-2 * i1_initial.abs();
    if h == 0.0 {
        return Err(Error::InvalidInput("zero initial shift".into()));
    }
    let mut i1 = i1_initial;
    for n in 1..=10 {
        let f = freq_of(i1)?;
        if (f - target).abs() < tol {
            return Ok((i1, f, n - 1));
        }
        let deriv = (freq_of(i1 + h)? - freq_of(i1 - h)?) / (2.0 * h);
        if deriv.abs() < 1e-300 || !deriv.is_finite() {
            return Err(Error::Singular("degenerate frequency map".into()));
        }
        i1 += (target - f) / deriv;
    }
    let f = freq_of(i1)?;
    if (f - target).abs() < tol {
        Ok((i1, f, 10))
    } else {
        Err(Error::NoConvergence(format!(
            "calibration residual {:e} after 10 iterations",
            (f - target).abs()
        )))
    }
}
