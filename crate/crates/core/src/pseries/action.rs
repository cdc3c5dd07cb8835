use std::collections::BTreeMap;

use super::{lie::SeriesOps, C64};
use crate::error::{Error, Result};

/// Monomial index of an action-series term: `p₁^{j₁} p₂^{j₂} e^{i(k₁q₁+k₂q₂)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionKey {
    pub j: [u8; 2],
    pub k: [i16; 2],
}

impl ActionKey {
    pub fn new(j: [u8; 2], k: [i16; 2]) -> Self {
        ActionKey { j, k }
    }

    /// Total action degree |j|.
    pub fn action_degree(&self) -> u32 {
        self.j[0] as u32 + self.j[1] as u32
    }

    /// Total trigonometric degree |k|₁.
    pub fn trig_degree(&self) -> u32 {
        self.k[0].unsigned_abs() as u32 + self.k[1].unsigned_abs() as u32
    }

    fn conj(&self) -> Self {
        ActionKey { j: self.j, k: [-self.k[0], -self.k[1]] }
    }
}

/// Sparse truncated series in standard action-angle pairs `(p, q)` with
/// integer powers of the actions: the class-𝔓 representation of the
/// Kolmogorov stage.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSeries {
    terms: BTreeMap<ActionKey, C64>,
    action_cap: u32,
    fourier_cap: u32,
}

impl ActionSeries {
    pub fn new(action_cap: u32, fourier_cap: u32) -> Self {
        ActionSeries { terms: BTreeMap::new(), action_cap, fourier_cap }
    }

    pub fn action_cap(&self) -> u32 {
        self.action_cap
    }

    pub fn fourier_cap(&self) -> u32 {
        self.fourier_cap
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ActionKey, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &ActionKey) -> C64 {
        self.terms.get(key).copied().unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Adds `c` to the coefficient at `key`, dropping terms beyond the caps.
    pub fn insert(&mut self, key: ActionKey, c: C64) {
        if key.action_degree() > self.action_cap || key.trig_degree() > self.fourier_cap {
            return;
        }
        self.accumulate(key, c);
    }

    fn accumulate(&mut self, key: ActionKey, c: C64) {
        use std::collections::btree_map::Entry;
        if c.re == 0.0 && c.im == 0.0 {
            return;
        }
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.re == 0.0 && v.im == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn constant(c: f64, action_cap: u32, fourier_cap: u32) -> Self {
        let mut s = ActionSeries::new(action_cap, fourier_cap);
        s.accumulate(ActionKey::new([0, 0], [0, 0]), C64::new(c, 0.0));
        s
    }

    /// `ω₁p₁ + ω₂p₂`.
    pub fn omega_dot_p(omega: [f64; 2], action_cap: u32, fourier_cap: u32) -> Self {
        let mut s = ActionSeries::new(action_cap, fourier_cap);
        s.accumulate(ActionKey::new([1, 0], [0, 0]), C64::new(omega[0], 0.0));
        s.accumulate(ActionKey::new([0, 1], [0, 0]), C64::new(omega[1], 0.0));
        s
    }

    fn check_caps(&self, other: &Self) -> Result<()> {
        if self.action_cap != other.action_cap || self.fourier_cap != other.fourier_cap {
            return Err(Error::CapMismatch(format!(
                "action caps ({},{}) vs ({},{})",
                self.action_cap, self.fourier_cap, other.action_cap, other.fourier_cap
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_caps(other)?;
        let mut out = self.clone();
        for (key, c) in &other.terms {
            out.accumulate(*key, *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_caps(other)?;
        let mut out = self.clone();
        for (key, c) in &other.terms {
            out.accumulate(*key, -*c);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        if factor.re == 0.0 && factor.im == 0.0 {
            return out;
        }
        for (key, c) in &self.terms {
            out.terms.insert(*key, *c * factor);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_caps(other)?;
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = ActionKey::new(
                    [ka.j[0] + kb.j[0], ka.j[1] + kb.j[1]],
                    [ka.k[0] + kb.k[0], ka.k[1] + kb.k[1]],
                );
                if key.action_degree() > self.action_cap || key.trig_degree() > self.fourier_cap {
                    continue;
                }
                out.accumulate(key, *ca * *cb);
            }
        }
        Ok(out)
    }

    /// Poisson bracket `{f, g} = Σ_a (∂f/∂q_a ∂g/∂p_a − ∂f/∂p_a ∂g/∂q_a)`.
    ///
    /// The per-pair, per-degree-of-freedom contribution carries the integer
    /// factor `w = k_a^f j_a^g − j_a^f k_a^g`, evaluated exactly before any
    /// coefficient multiplication.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.check_caps(other)?;
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        let i_unit = C64::new(0.0, 1.0);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let prod = *ca * *cb * i_unit;
                for a in 0..2 {
                    let w = ka.k[a] as i32 * kb.j[a] as i32 - ka.j[a] as i32 * kb.k[a] as i32;
                    if w == 0 {
                        continue;
                    }
                    let mut j = [ka.j[0] + kb.j[0], ka.j[1] + kb.j[1]];
                    debug_assert!(j[a] >= 1);
                    j[a] -= 1;
                    let key = ActionKey::new(j, [ka.k[0] + kb.k[0], ka.k[1] + kb.k[1]]);
                    if key.action_degree() > self.action_cap
                        || key.trig_degree() > self.fourier_cap
                    {
                        continue;
                    }
                    out.accumulate(key, prod * w as f64);
                }
            }
        }
        Ok(out)
    }

    /// Retains exactly the terms with `k_which = 0`.
    pub fn angle_average(&self, which: usize) -> Result<Self> {
        if which >= 2 {
            return Err(Error::InvalidInput(format!("angle index {which} out of range")));
        }
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        for (key, c) in &self.terms {
            if key.k[which] == 0 {
                out.terms.insert(*key, *c);
            }
        }
        Ok(out)
    }

    /// Average over both angles: retains exactly the `k = 0` terms.
    pub fn angle_average_all(&self) -> Self {
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        for (key, c) in &self.terms {
            if key.k == [0, 0] {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    /// ℓ¹ norm: the sum of coefficient moduli.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Total action degree if homogeneous, `None` otherwise (or if empty).
    pub fn action_class(&self) -> Option<u32> {
        let mut it = self.terms.keys();
        let first = it.next()?.action_degree();
        it.all(|k| k.action_degree() == first).then_some(first)
    }

    /// Membership in 𝔓_{ℓ,sK}: action degree exactly `l` on every term and
    /// trig degree at most `s_k` everywhere.
    pub fn is_in_class(&self, l: u32, s_k: u32) -> bool {
        self.terms.keys().all(|key| key.action_degree() == l && key.trig_degree() <= s_k)
    }

    pub fn max_trig_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.trig_degree()).max().unwrap_or(0)
    }

    /// The homogeneous part of action degree `l`.
    pub fn action_part(&self, l: u32) -> Self {
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        for (key, c) in &self.terms {
            if key.action_degree() == l {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    /// Largest violation of the reality pairing `c(j,−k) = conj(c(j,k))`.
    pub fn reality_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(key, c)| (self.coefficient(&key.conj()) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn prune_below(&mut self, eps: f64) {
        self.terms.retain(|_, c| c.norm() > eps);
    }

    /// Re-truncates to different caps.
    pub fn with_caps(&self, action_cap: u32, fourier_cap: u32) -> Self {
        let mut out = ActionSeries::new(action_cap, fourier_cap);
        for (key, c) in &self.terms {
            if key.action_degree() <= action_cap && key.trig_degree() <= fourier_cap {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    /// Coefficients of `p₁` and `p₂` in the angle-averaged part; they must be
    /// real up to rounding since they feed the frequency update.
    pub fn linear_average_coeffs(&self) -> Result<[f64; 2]> {
        let mut out = [0.0f64; 2];
        for a in 0..2 {
            let mut j = [0u8; 2];
            j[a] = 1;
            let c = self.coefficient(&ActionKey::new(j, [0, 0]));
            if c.im.abs() > 1e-12 * c.norm().max(1e-300) {
                return Err(Error::RealityViolation { residue: c.im.abs(), scale: c.norm() });
            }
            out[a] = c.re;
        }
        Ok(out)
    }

    /// Translates the actions: `p ← p + ξ`, re-expanding each monomial.
    pub fn translate(&self, xi: [f64; 2]) -> Self {
        let mut out = ActionSeries::new(self.action_cap, self.fourier_cap);
        for (key, c) in &self.terms {
            // (p₁+ξ₁)^{j₁}(p₂+ξ₂)^{j₂} expanded by the binomial theorem;
            // degrees are at most 2 in practice so this is tiny.
            for n0 in 0..=key.j[0] {
                for n1 in 0..=key.j[1] {
                    let b0 = binomial(key.j[0], n0) * xi[0].powi((key.j[0] - n0) as i32);
                    let b1 = binomial(key.j[1], n1) * xi[1].powi((key.j[1] - n1) as i32);
                    out.accumulate(ActionKey::new([n0, n1], key.k), *c * (b0 * b1));
                }
            }
        }
        out
    }

    pub fn evaluate_complex(&self, p: [f64; 2], q: [f64; 2]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (key, c) in &self.terms {
            let radial = p[0].powi(key.j[0] as i32) * p[1].powi(key.j[1] as i32);
            let phase = key.k[0] as f64 * q[0] + key.k[1] as f64 * q[1];
            acc += *c * radial * C64::from_polar(1.0, phase);
        }
        acc
    }

    /// Evaluates a real series at a phase point.
    pub fn evaluate(&self, p: [f64; 2], q: [f64; 2]) -> Result<f64> {
        let mut acc = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for (key, c) in &self.terms {
            let radial = p[0].powi(key.j[0] as i32) * p[1].powi(key.j[1] as i32);
            let phase = key.k[0] as f64 * q[0] + key.k[1] as f64 * q[1];
            let v = *c * radial * C64::from_polar(1.0, phase);
            acc += v;
            scale += v.norm();
        }
        if acc.im.abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::RealityViolation { residue: acc.im.abs(), scale });
        }
        Ok(acc.re)
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

impl SeriesOps for ActionSeries {
    fn zero_like(&self) -> Self {
        ActionSeries::new(self.action_cap, self.fourier_cap)
    }

    fn add_scaled(&mut self, other: &Self, factor: f64) {
        for (key, c) in &other.terms {
            if key.action_degree() <= self.action_cap && key.trig_degree() <= self.fourier_cap {
                self.accumulate(*key, *c * factor);
            }
        }
    }

    fn bracket(&self, other: &Self) -> Result<Self> {
        ActionSeries::bracket(self, other)
    }

    fn norm(&self) -> f64 {
        ActionSeries::norm(self)
    }

    fn is_empty(&self) -> bool {
        ActionSeries::is_empty(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// `amp·cos(k·q)·p^j` as the two conjugate exponential terms.
    fn cos_term(amp: f64, j: [u8; 2], k: [i16; 2], s: &mut ActionSeries) {
        s.insert(ActionKey::new(j, k), c(amp / 2.0, 0.0));
        s.insert(ActionKey::new(j, [-k[0], -k[1]]), c(amp / 2.0, 0.0));
    }

    #[test]
    fn norm_of_cosine() {
        // 3 cos(q₁) p₁ → two exponential terms of modulus 1.5 → norm 3.
        let mut g = ActionSeries::new(2, 12);
        cos_term(3.0, [1, 0], [1, 0], &mut g);
        assert!((g.norm() - 3.0).abs() < 1e-15);
        assert!(ActionSeries::new(2, 12).norm() == 0.0);
    }

    #[test]
    fn bracket_lowers_action_degree() {
        // {p₁p₂, cos(q₁+2q₂)} = (1·p₂ + 2·p₁) sin(q₁+2q₂)
        let mut f = ActionSeries::new(2, 12);
        f.insert(ActionKey::new([1, 1], [0, 0]), c(1.0, 0.0));
        let mut g = ActionSeries::new(2, 12);
        cos_term(1.0, [0, 0], [1, 2], &mut g);
        let b = g.bracket(&f).unwrap();
        // sin(q₁+2q₂) has coefficients ∓i/2 at k = ±(1,2).
        assert!((b.coefficient(&ActionKey::new([0, 1], [1, 2])) - c(0.0, 0.5)).norm() < 1e-15);
        assert!((b.coefficient(&ActionKey::new([1, 0], [1, 2])) - c(0.0, 1.0)).norm() < 1e-15);
        assert!(b.is_in_class(1, 3));
    }

    #[test]
    fn bracket_of_pure_angle_series_vanishes() {
        let mut f = ActionSeries::new(2, 12);
        cos_term(1.0, [0, 0], [1, 0], &mut f);
        let mut g = ActionSeries::new(2, 12);
        cos_term(2.0, [0, 0], [0, 3], &mut g);
        assert!(f.bracket(&g).unwrap().is_empty());
    }

    #[test]
    fn averages_and_linear_coeffs() {
        let mut f = ActionSeries::new(2, 12);
        f.insert(ActionKey::new([1, 0], [0, 0]), c(0.25, 0.0));
        f.insert(ActionKey::new([0, 1], [0, 0]), c(-0.5, 0.0));
        cos_term(3.0, [1, 0], [0, 2], &mut f);
        let avg = f.angle_average_all();
        assert_eq!(avg.len(), 2);
        assert_eq!(avg.linear_average_coeffs().unwrap(), [0.25, -0.5]);
        // averaging over q₂ only also removes the cos(2q₂) pair here
        assert_eq!(f.angle_average(1).unwrap(), avg);
    }

    #[test]
    fn translate_matches_pointwise() {
        let mut f = ActionSeries::new(2, 8);
        f.insert(ActionKey::new([2, 0], [0, 0]), c(1.5, 0.0));
        f.insert(ActionKey::new([1, 1], [0, 0]), c(-0.7, 0.0));
        cos_term(0.3, [0, 2], [1, 1], &mut f);
        let xi = [0.11, -0.23];
        let g = f.translate(xi);
        let p = [0.4, 0.9];
        let q = [1.3, -0.2];
        let want = f.evaluate([p[0] + xi[0], p[1] + xi[1]], q).unwrap();
        let got = g.evaluate(p, q).unwrap();
        assert!((want - got).abs() < 1e-14);
    }

    #[test]
    fn fourier_cap_truncates_products() {
        let mut f = ActionSeries::new(2, 4);
        cos_term(1.0, [0, 0], [3, 0], &mut f);
        let p = f.mul(&f).unwrap();
        // only the k = 0 beat survives the |k| ≤ 4 cap
        assert_eq!(p.len(), 1);
        assert!((p.coefficient(&ActionKey::new([0, 0], [0, 0])) - c(0.5, 0.0)).norm() < 1e-15);
    }
}
