use std::collections::BTreeMap;

use super::{C64, SqrtKey, SqrtSeries};
use crate::error::{Error, Result};

/// Real polynomial in the cartesian-like variables `(Y₁, Y₂, X₁, X₂)`
/// (equivalently `(y₁, y₂, x₁, x₂)` around an equilibrium), truncated at a
/// total degree cap. Exponents are stored in the order `[Y₁, Y₂, X₁, X₂]`.
///
/// This chart is regular at the origin, so it is the one used for numerical
/// flows of averaged Hamiltonians and for the symplectic diagonalization; the
/// conversion to and from [`SqrtSeries`] (`Y_j = √(2J_j) cos ϑ_j`,
/// `X_j = √(2J_j) sin ϑ_j`) is exact on polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct CartPoly {
    terms: BTreeMap<[u8; 4], f64>,
    degree_cap: u32,
}

fn degree(m: &[u8; 4]) -> u32 {
    m.iter().map(|&e| e as u32).sum()
}

impl CartPoly {
    pub fn new(degree_cap: u32) -> Self {
        CartPoly { terms: BTreeMap::new(), degree_cap }
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

    pub fn terms(&self) -> impl Iterator<Item = (&[u8; 4], &f64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &[u8; 4]) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn insert(&mut self, m: [u8; 4], c: f64) {
        if degree(&m) > self.degree_cap {
            return;
        }
        self.accumulate(m, c);
    }

    fn accumulate(&mut self, m: [u8; 4], c: f64) {
        use std::collections::btree_map::Entry;
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn variable(idx: usize, degree_cap: u32) -> Self {
        let mut p = CartPoly::new(degree_cap);
        let mut m = [0u8; 4];
        m[idx] = 1;
        p.accumulate(m, 1.0);
        p
    }

    pub fn constant(c: f64, degree_cap: u32) -> Self {
        let mut p = CartPoly::new(degree_cap);
        p.accumulate([0; 4], c);
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            if degree(m) <= out.degree_cap {
                out.accumulate(*m, *c);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            if degree(m) <= out.degree_cap {
                out.accumulate(*m, -*c);
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = CartPoly::new(self.degree_cap);
        if factor == 0.0 {
            return out;
        }
        for (m, c) in &self.terms {
            out.terms.insert(*m, *c * factor);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = CartPoly::new(self.degree_cap);
        for (ma, ca) in &self.terms {
            let da = degree(ma);
            for (mb, cb) in &other.terms {
                if da + degree(mb) > self.degree_cap {
                    continue;
                }
                let m = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2], ma[3] + mb[3]];
                out.accumulate(m, *ca * *cb);
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn evaluate(&self, z: [f64; 4]) -> f64 {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut v = *c;
            for i in 0..4 {
                v *= z[i].powi(m[i] as i32);
            }
            acc += v;
        }
        acc
    }

    pub fn partial(&self, var: usize) -> Self {
        let mut out = CartPoly::new(self.degree_cap);
        for (m, c) in &self.terms {
            if m[var] == 0 {
                continue;
            }
            let mut d = *m;
            d[var] -= 1;
            out.accumulate(d, *c * m[var] as f64);
        }
        out
    }

    /// The homogeneous part of total degree `d`.
    pub fn degree_part(&self, d: u32) -> Self {
        let mut out = CartPoly::new(self.degree_cap);
        for (m, c) in &self.terms {
            if degree(m) == d {
                out.terms.insert(*m, *c);
            }
        }
        out
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(degree).max().unwrap_or(0)
    }

    pub fn prune_below(&mut self, eps: f64) {
        self.terms.retain(|_, c| c.abs() > eps);
    }

    /// The symmetric matrix `S` of the quadratic part, `H₂ = ½ zᵀ S z`.
    pub fn quadratic_matrix(&self) -> [[f64; 4]; 4] {
        let mut s = [[0.0f64; 4]; 4];
        for (m, c) in &self.terms {
            if degree(m) != 2 {
                continue;
            }
            let idx: Vec<usize> =
                (0..4).flat_map(|i| std::iter::repeat(i).take(m[i] as usize)).collect();
            let (i, j) = (idx[0], idx[1]);
            if i == j {
                s[i][i] += 2.0 * c;
            } else {
                s[i][j] += *c;
                s[j][i] += *c;
            }
        }
        s
    }

    /// Substitutes `z_old = C · z_new` (each old variable replaced by a linear
    /// form in the new ones) and re-truncates.
    pub fn substitute_linear(&self, c_matrix: &[[f64; 4]; 4]) -> Self {
        let cap = self.degree_cap;
        let forms: Vec<CartPoly> = (0..4)
            .map(|i| {
                let mut f = CartPoly::new(cap);
                for j in 0..4 {
                    let mut m = [0u8; 4];
                    m[j] = 1;
                    f.accumulate(m, c_matrix[i][j]);
                }
                f
            })
            .collect();
        // cache powers of each linear form up to the cap
        let mut powers: Vec<Vec<CartPoly>> = Vec::with_capacity(4);
        for f in &forms {
            let mut ps = vec![CartPoly::constant(1.0, cap)];
            for d in 1..=cap as usize {
                ps.push(ps[d - 1].mul(f));
            }
            powers.push(ps);
        }
        let mut out = CartPoly::new(cap);
        for (m, c) in &self.terms {
            let mut acc = CartPoly::constant(*c, cap);
            for i in 0..4 {
                if m[i] > 0 {
                    acc = acc.mul(&powers[i][m[i] as usize]);
                }
            }
            for (mm, cc) in &acc.terms {
                out.accumulate(*mm, *cc);
            }
        }
        out
    }

    /// Exact rewrite into the action-angle chart: each monomial in
    /// `(Y, X)` becomes a finite parity-respecting sum of
    /// `(√J)^ℓ e^{ik·ϑ}` terms.
    pub fn to_sqrt_series(&self, degree_cap: u32) -> Result<SqrtSeries> {
        let mut out = SqrtSeries::new(degree_cap);
        for (m, c) in &self.terms {
            // per degree of freedom: Y_j^{n} X_j^{w} → harmonic list
            let h0 = harmonics_for(m[0], m[2]);
            let h1 = harmonics_for(m[1], m[3]);
            let l = [m[0] + m[2], m[1] + m[3]];
            for (k0, c0) in &h0 {
                for (k1, c1) in &h1 {
                    let key = SqrtKey::new(l, [*k0, *k1]);
                    out.insert(key, *c0 * *c1 * *c)?;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`CartPoly::to_sqrt_series`], exact on real series of
    /// polynomial origin. The imaginary residue of the reassembled
    /// coefficients must vanish to rounding.
    pub fn from_sqrt_series(series: &SqrtSeries, degree_cap: u32) -> Result<CartPoly> {
        let mut acc: BTreeMap<[u8; 4], C64> = BTreeMap::new();
        let sqrt_half = C64::new(0.5f64.sqrt(), 0.0);
        for (key, coeff) in series.terms() {
            // (√J)^ℓ e^{ikϑ} = ((Y+iX)/√2)^{(ℓ+k)/2} ((Y−iX)/√2)^{(ℓ−k)/2}
            let mut dof: [Vec<([u8; 2], C64)>; 2] = [Vec::new(), Vec::new()];
            for j in 0..2 {
                let a = ((key.l[j] as i32 + key.k[j] as i32) / 2) as u8;
                let b = ((key.l[j] as i32 - key.k[j] as i32) / 2) as u8;
                let scale = sqrt_half.powi((a + b) as i32);
                let mut list = Vec::new();
                for p in 0..=a {
                    for q in 0..=b {
                        let coef = binomial(a, p)
                            * binomial(b, q)
                            * C64::i().powi((a - p) as i32)
                            * (-C64::i()).powi((b - q) as i32);
                        list.push(([p + q, a + b - p - q], scale * coef));
                    }
                }
                dof[j] = list;
            }
            for ([y0, x0], c0) in &dof[0] {
                for ([y1, x1], c1) in &dof[1] {
                    let m = [*y0, *y1, *x0, *x1];
                    if degree(&m) > degree_cap {
                        continue;
                    }
                    *acc.entry(m).or_insert_with(|| C64::new(0.0, 0.0)) += *coeff * *c0 * *c1;
                }
            }
        }
        let scale: f64 = acc.values().map(|c| c.norm()).sum();
        let mut out = CartPoly::new(degree_cap);
        for (m, c) in acc {
            if c.im.abs() > 1e-10 * scale.max(1e-300) {
                return Err(Error::RealityViolation { residue: c.im.abs(), scale });
            }
            out.accumulate(m, c.re);
        }
        Ok(out)
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Fourier coefficients of `Y^n X^w` in one degree of freedom: returns the
/// list of `(k, c)` with `Y^n X^w = (√J)^{n+w} Σ c e^{ikϑ}`.
fn harmonics_for(n: u8, w: u8) -> Vec<(i8, C64)> {
    // Y = √J (e^{iϑ}+e^{−iϑ})/√2, X = √J (−i)(e^{iϑ}−e^{−iϑ})/√2
    let sqrt_half = 0.5f64.sqrt();
    let mut acc: BTreeMap<i8, C64> = BTreeMap::new();
    let scale = sqrt_half.powi((n + w) as i32) * (-C64::i()).powi(w as i32);
    for p in 0..=n {
        for q in 0..=w {
            let sign = if (w - q) % 2 == 0 { 1.0 } else { -1.0 };
            let c = binomial(n, p) * binomial(w, q) * sign;
            let k = (2 * (p as i32 + q as i32) - (n as i32 + w as i32)) as i8;
            *acc.entry(k).or_insert_with(|| C64::new(0.0, 0.0)) += scale * c;
        }
    }
    acc.into_iter().filter(|(_, c)| c.norm() > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_monomial_maps_to_action() {
        // (Y₁² + X₁²)/2 → J₁
        let mut p = CartPoly::new(8);
        p.insert([2, 0, 0, 0], 0.5);
        p.insert([0, 0, 2, 0], 0.5);
        let s = p.to_sqrt_series(8).unwrap();
        assert_eq!(s.len(), 1);
        let c = s.coefficient(&SqrtKey::new([2, 0], [0, 0]));
        assert!((c - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_coordinate_parity() {
        // Y₁ → √(2J₁) cos ϑ₁: terms at (ℓ,k) = (1,±1) with coefficient 1/√2
        let p = CartPoly::variable(0, 8);
        let s = p.to_sqrt_series(8).unwrap();
        assert_eq!(s.len(), 2);
        let c = s.coefficient(&SqrtKey::new([1, 0], [1, 0]));
        assert!((c - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn round_trip_degree_four() {
        let mut p = CartPoly::new(8);
        p.insert([2, 1, 0, 1], 0.7);
        p.insert([0, 0, 3, 1], -1.2);
        p.insert([1, 1, 1, 1], 0.31);
        p.insert([0, 4, 0, 0], 2.5);
        let s = p.to_sqrt_series(8).unwrap();
        let back = CartPoly::from_sqrt_series(&s, 8).unwrap();
        assert!(back.sub(&p).norm() < 1e-13 * p.norm());
    }

    #[test]
    fn evaluation_consistency_between_charts() {
        let mut p = CartPoly::new(8);
        p.insert([2, 0, 1, 0], 0.4);
        p.insert([1, 2, 0, 1], -0.9);
        let s = p.to_sqrt_series(8).unwrap();
        let j = [0.13f64, 0.21];
        let th = [0.7f64, -1.9];
        let z = [
            (2.0 * j[0]).sqrt() * th[0].cos(),
            (2.0 * j[1]).sqrt() * th[1].cos(),
            (2.0 * j[0]).sqrt() * th[0].sin(),
            (2.0 * j[1]).sqrt() * th[1].sin(),
        ];
        let a = p.evaluate(z);
        let b = s.evaluate(j, th).unwrap();
        assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn quadratic_matrix_and_substitution() {
        // H₂ = 2(y₁²+x₁²) + 5(y₂²+x₂²), identity substitution leaves it fixed
        let mut p = CartPoly::new(4);
        p.insert([2, 0, 0, 0], 2.0);
        p.insert([0, 0, 2, 0], 2.0);
        p.insert([0, 2, 0, 0], 5.0);
        p.insert([0, 0, 0, 2], 5.0);
        let s = p.quadratic_matrix();
        assert_eq!(s[0][0], 4.0);
        assert_eq!(s[1][1], 10.0);
        assert_eq!(s[0][1], 0.0);
        let ident = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        assert_eq!(p.substitute_linear(&ident), p);
    }

    #[test]
    fn substitution_matches_pointwise() {
        let mut p = CartPoly::new(6);
        p.insert([1, 2, 0, 1], 0.8);
        p.insert([0, 0, 2, 0], -0.3);
        p.insert([3, 0, 0, 0], 0.05);
        let c = [
            [0.9, 0.1, -0.2, 0.0],
            [0.0, 1.1, 0.0, 0.3],
            [0.2, 0.0, 0.8, -0.1],
            [-0.4, 0.0, 0.0, 1.0],
        ];
        let q = p.substitute_linear(&c);
        let znew = [0.3, -0.2, 0.5, 0.1];
        let mut zold = [0.0f64; 4];
        for i in 0..4 {
            for j in 0..4 {
                zold[i] += c[i][j] * znew[j];
            }
        }
        assert!((q.evaluate(znew) - p.evaluate(zold)).abs() < 1e-13);
    }
}
