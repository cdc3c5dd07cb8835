use std::collections::BTreeMap;

use super::{lie::SeriesOps, C64};
use crate::error::{Error, Result};

/// Monomial index of a √J-series term: `(√J₁)^{l₁}(√J₂)^{l₂} e^{i(k₁ϑ₁+k₂ϑ₂)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SqrtKey {
    pub l: [u8; 2],
    pub k: [i8; 2],
}

impl SqrtKey {
    pub fn new(l: [u8; 2], k: [i8; 2]) -> Self {
        SqrtKey { l, k }
    }

    /// Total degree in √J.
    pub fn degree(&self) -> u32 {
        self.l[0] as u32 + self.l[1] as u32
    }

    /// The harmonic must have the same parity as the exponent and cannot
    /// exceed it in modulus: `k_j ∈ {−l_j, −l_j+2, …, l_j}`.
    pub fn on_lattice(&self) -> bool {
        (0..2).all(|j| {
            let l = self.l[j] as i32;
            let k = self.k[j] as i32;
            k.abs() <= l && (k - l).rem_euclid(2) == 0
        })
    }

    fn conj(&self) -> Self {
        SqrtKey { l: self.l, k: [-self.k[0], -self.k[1]] }
    }
}

/// Sparse truncated series in the action-angle chart `(J, ϑ)` with half-integer
/// powers of the actions: the class-𝒫 representation of the Birkhoff stage.
#[derive(Clone, Debug, PartialEq)]
pub struct SqrtSeries {
    terms: BTreeMap<SqrtKey, C64>,
    degree_cap: u32,
}

impl SqrtSeries {
    pub fn new(degree_cap: u32) -> Self {
        SqrtSeries { terms: BTreeMap::new(), degree_cap }
    }

    pub fn degree_cap(&self) -> u32 {
        self.degree_cap
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SqrtKey, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &SqrtKey) -> C64 {
        self.terms.get(key).copied().unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Adds `c` to the coefficient at `key`, validating the parity lattice and
    /// silently dropping terms beyond the degree cap.
    pub fn insert(&mut self, key: SqrtKey, c: C64) -> Result<()> {
        if !key.on_lattice() {
            return Err(Error::ParityViolation {
                l1: key.l[0],
                l2: key.l[1],
                k1: key.k[0],
                k2: key.k[1],
            });
        }
        if key.degree() > self.degree_cap {
            return Ok(());
        }
        self.accumulate(key, c);
        Ok(())
    }

    fn accumulate(&mut self, key: SqrtKey, c: C64) {
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

    /// The constant series `c`.
    pub fn constant(c: f64, degree_cap: u32) -> Self {
        let mut s = SqrtSeries::new(degree_cap);
        s.accumulate(SqrtKey::new([0, 0], [0, 0]), C64::new(c, 0.0));
        s
    }

    /// `ω₁J₁ + ω₂J₂`, the leading integrable part in action-angle variables.
    pub fn omega_dot_j(omega: [f64; 2], degree_cap: u32) -> Self {
        let mut s = SqrtSeries::new(degree_cap);
        s.accumulate(SqrtKey::new([2, 0], [0, 0]), C64::new(omega[0], 0.0));
        s.accumulate(SqrtKey::new([0, 2], [0, 0]), C64::new(omega[1], 0.0));
        s
    }

    /// The action `J_j` itself.
    pub fn action(j: usize, degree_cap: u32) -> Self {
        let mut s = SqrtSeries::new(degree_cap);
        let mut l = [0u8; 2];
        l[j] = 2;
        s.accumulate(SqrtKey::new(l, [0, 0]), C64::new(1.0, 0.0));
        s
    }

    /// The cartesian coordinate `Y_j = √(2J_j) cos ϑ_j` as a series.
    pub fn y_coord(j: usize, degree_cap: u32) -> Self {
        let mut s = SqrtSeries::new(degree_cap);
        let mut l = [0u8; 2];
        l[j] = 1;
        let mut kp = [0i8; 2];
        kp[j] = 1;
        let c = C64::new(1.0 / 2f64.sqrt(), 0.0);
        s.accumulate(SqrtKey::new(l, kp), c);
        s.accumulate(SqrtKey::new(l, [-kp[0], -kp[1]]), c);
        s
    }

    /// The cartesian coordinate `X_j = √(2J_j) sin ϑ_j` as a series.
    pub fn x_coord(j: usize, degree_cap: u32) -> Self {
        let mut s = SqrtSeries::new(degree_cap);
        let mut l = [0u8; 2];
        l[j] = 1;
        let mut kp = [0i8; 2];
        kp[j] = 1;
        let c = C64::new(0.0, -1.0 / 2f64.sqrt());
        s.accumulate(SqrtKey::new(l, kp), c);
        s.accumulate(SqrtKey::new(l, [-kp[0], -kp[1]]), -c);
        s
    }

    fn check_caps(&self, other: &Self) -> Result<()> {
        if self.degree_cap != other.degree_cap {
            return Err(Error::CapMismatch(format!(
                "degree caps {} vs {}",
                self.degree_cap, other.degree_cap
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
        let mut out = SqrtSeries::new(self.degree_cap);
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
        let mut out = SqrtSeries::new(self.degree_cap);
        for (ka, ca) in &self.terms {
            let da = ka.degree();
            for (kb, cb) in &other.terms {
                if da + kb.degree() > self.degree_cap {
                    continue;
                }
                let key = SqrtKey::new(
                    [ka.l[0] + kb.l[0], ka.l[1] + kb.l[1]],
                    [ka.k[0] + kb.k[0], ka.k[1] + kb.k[1]],
                );
                out.accumulate(key, *ca * *cb);
            }
        }
        Ok(out)
    }

    /// Poisson bracket `{f, g} = Σ_j (∂f/∂ϑ_j ∂g/∂J_j − ∂f/∂J_j ∂g/∂ϑ_j)`.
    ///
    /// Per pair of terms and per degree of freedom the contribution carries the
    /// integer factor `w = k_j^f l_j^g − l_j^f k_j^g`; pairs with `w = 0`
    /// contribute nothing exactly, which keeps the result on the parity
    /// lattice without any floating-point cancellation.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.check_caps(other)?;
        let mut out = SqrtSeries::new(self.degree_cap);
        let half_i = C64::new(0.0, 0.5);
        for (ka, ca) in &self.terms {
            let da = ka.degree();
            if da == 0 {
                continue;
            }
            for (kb, cb) in &other.terms {
                let db = kb.degree();
                if db == 0 || da + db < 2 || da + db - 2 > self.degree_cap {
                    continue;
                }
                let prod = *ca * *cb;
                for j in 0..2 {
                    let w = ka.k[j] as i32 * kb.l[j] as i32 - ka.l[j] as i32 * kb.k[j] as i32;
                    if w == 0 {
                        continue;
                    }
                    let mut l = [ka.l[0] + kb.l[0], ka.l[1] + kb.l[1]];
                    debug_assert!(l[j] >= 2);
                    l[j] -= 2;
                    let key = SqrtKey::new(l, [ka.k[0] + kb.k[0], ka.k[1] + kb.k[1]]);
                    debug_assert!(key.on_lattice());
                    out.accumulate(key, prod * half_i * w as f64);
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
        let mut out = SqrtSeries::new(self.degree_cap);
        for (key, c) in &self.terms {
            if key.k[which] == 0 {
                out.terms.insert(*key, *c);
            }
        }
        Ok(out)
    }

    /// ℓ¹ norm: the sum of coefficient moduli.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Total √J degree if the series is homogeneous, `None` otherwise (or if
    /// empty).
    pub fn class(&self) -> Option<u32> {
        let mut it = self.terms.keys();
        let first = it.next()?.degree();
        it.all(|k| k.degree() == first).then_some(first)
    }

    pub fn is_in_class(&self, s: u32) -> bool {
        self.terms.keys().all(|k| k.degree() == s)
    }

    /// The homogeneous part of total √J degree `s`.
    pub fn class_part(&self, s: u32) -> Self {
        let mut out = SqrtSeries::new(self.degree_cap);
        for (key, c) in &self.terms {
            if key.degree() == s {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    /// Largest violation of the reality pairing `c(ℓ,−k) = conj(c(ℓ,k))`.
    pub fn reality_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(key, c)| (self.coefficient(&key.conj()) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Drops terms with coefficient modulus at or below `eps` (callers use this
    /// only to clear quadrature noise, never inside the algebra itself).
    pub fn prune_below(&mut self, eps: f64) {
        self.terms.retain(|_, c| c.norm() > eps);
    }

    /// Re-truncates to a different degree cap.
    pub fn with_cap(&self, degree_cap: u32) -> Self {
        let mut out = SqrtSeries::new(degree_cap);
        for (key, c) in &self.terms {
            if key.degree() <= degree_cap {
                out.terms.insert(*key, *c);
            }
        }
        out
    }

    pub fn evaluate_complex(&self, j: [f64; 2], theta: [f64; 2]) -> Result<C64> {
        if j[0] < 0.0 || j[1] < 0.0 {
            return Err(Error::NegativeAction(j[0].min(j[1])));
        }
        let sq = [j[0].sqrt(), j[1].sqrt()];
        let mut acc = C64::new(0.0, 0.0);
        for (key, c) in &self.terms {
            let radial = sq[0].powi(key.l[0] as i32) * sq[1].powi(key.l[1] as i32);
            let phase = key.k[0] as f64 * theta[0] + key.k[1] as f64 * theta[1];
            acc += *c * radial * C64::from_polar(1.0, phase);
        }
        Ok(acc)
    }

    /// Evaluates a real series at a phase point; the imaginary residue must
    /// sit at rounding level relative to the total term magnitude.
    pub fn evaluate(&self, j: [f64; 2], theta: [f64; 2]) -> Result<f64> {
        if j[0] < 0.0 || j[1] < 0.0 {
            return Err(Error::NegativeAction(j[0].min(j[1])));
        }
        let sq = [j[0].sqrt(), j[1].sqrt()];
        let mut acc = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for (key, c) in &self.terms {
            let radial = sq[0].powi(key.l[0] as i32) * sq[1].powi(key.l[1] as i32);
            let phase = key.k[0] as f64 * theta[0] + key.k[1] as f64 * theta[1];
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

impl SeriesOps for SqrtSeries {
    fn zero_like(&self) -> Self {
        SqrtSeries::new(self.degree_cap)
    }

    fn add_scaled(&mut self, other: &Self, factor: f64) {
        for (key, c) in &other.terms {
            if key.degree() <= self.degree_cap {
                self.accumulate(*key, *c * factor);
            }
        }
    }

    fn bracket(&self, other: &Self) -> Result<Self> {
        SqrtSeries::bracket(self, other)
    }

    fn norm(&self) -> f64 {
        SqrtSeries::norm(self)
    }

    fn is_empty(&self) -> bool {
        SqrtSeries::is_empty(self)
    }
}
