//! Resonant Birkhoff normalization: starting from the oscillator form
//! `ℋ^(0) = ω·J + Σ_{ℓ≥1} h_ℓ` (h_ℓ of √J-class ℓ+2), remove the dependence
//! on the fast libration angle ϑ₂ order by order. After r̃ steps the
//! Hamiltonian splits into an integrable approximation 𝒵^(r̃) — whose terms
//! all have k₂ = 0, so J₂ is one of its constants of motion — plus a
//! remainder of higher class, and the composed Lie transforms form the
//! near-identity change of coordinates connecting the two pictures.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pseries::{lie_exp, lie_triangle, SqrtKey, SqrtSeries, C64};

/// Per-step record of the normalization: the sizes that a convergence
/// analysis of the construction feeds on.
#[derive(Clone, Copy, Debug)]
pub struct BirkhoffStepRecord {
    pub step: usize,
    /// ℓ¹ norm of the generating function χ_r.
    pub chi_norm: f64,
    /// ℓ¹ norm of the normal part Z_r extracted at this step.
    pub normal_norm: f64,
    /// Total norm of the terms still carrying ϑ₂ above the current step.
    pub remainder_norm: f64,
    /// Smallest divisor |k·ω| used by the step.
    pub smallest_divisor: f64,
    /// Norm of the k₂ ≠ 0 residue left at grade r after the transform —
    /// the numerical defect of the homological equation.
    pub residual: f64,
}

/// The outcome of the normalization: the ϑ₂-free Hamiltonian, the remainder,
/// the generating chain and the per-step ledger.
#[derive(Clone, Debug)]
pub struct BirkhoffNormalForm {
    pub omega: [f64; 2],
    pub steps: usize,
    /// 𝒵^(r̃) = ω·J + Z₁ + … + Z_r̃; every term has k₂ = 0.
    pub normal: SqrtSeries,
    /// Σ_{ℓ>r̃} h_ℓ^(r̃), the part the normalization has not touched.
    pub remainder: SqrtSeries,
    pub chain: TransformChain,
    pub ledger: Vec<BirkhoffStepRecord>,
}

impl BirkhoffNormalForm {
    /// The full transformed Hamiltonian ℋ^(r̃) = 𝒵^(r̃) + remainder.
    pub fn hamiltonian(&self) -> SqrtSeries {
        self.normal.add(&self.remainder).expect("caps match by construction")
    }
}

/// A composition of Lie transforms `exp(L_{χ₁}) ∘ … ∘ exp(L_{χ_r})`, applied
/// numerically to points by transforming the four coordinate functions.
#[derive(Clone, Debug, Default)]
pub struct TransformChain {
    pub generators: Vec<SqrtSeries>,
}

impl TransformChain {
    /// Maps a normalized-coordinates point to original coordinates: every
    /// coordinate function picks up the generators in reverse order with the
    /// innermost transform applied first, per the exchange theorem.
    pub fn forward(&self, point: [f64; 4]) -> Result<[f64; 4]> {
        self.apply(point, false)
    }

    /// The inverse map (original → normalized): negated generators in the
    /// opposite order.
    pub fn backward(&self, point: [f64; 4]) -> Result<[f64; 4]> {
        self.apply(point, true)
    }

    fn apply(&self, point: [f64; 4], inverse: bool) -> Result<[f64; 4]> {
        let Some(cap) = self.generators.first().map(|g| g.degree_cap()) else {
            return Ok(point);
        };
        let (j, theta) = yx_to_action_angle(point);
        let mut out = [0.0f64; 4];
        for (idx, slot) in out.iter_mut().enumerate() {
            let mut coord = if idx < 2 {
                SqrtSeries::y_coord(idx, cap)
            } else {
                SqrtSeries::x_coord(idx - 2, cap)
            };
            if inverse {
                for chi in self.generators.iter() {
                    coord = lie_exp(&coord, &chi.scale(C64::new(-1.0, 0.0)), 64)?;
                }
            } else {
                for chi in self.generators.iter().rev() {
                    coord = lie_exp(&coord, chi, 64)?;
                }
            }
            *slot = coord.evaluate(j, theta)?;
        }
        Ok(out)
    }
}

/// `(Y, X) → (J, ϑ)` for both oscillators, with `Y = √(2J) cos ϑ`,
/// `X = √(2J) sin ϑ`.
pub fn yx_to_action_angle(point: [f64; 4]) -> ([f64; 2], [f64; 2]) {
    let j = [
        (point[0] * point[0] + point[2] * point[2]) / 2.0,
        (point[1] * point[1] + point[3] * point[3]) / 2.0,
    ];
    let theta = [point[2].atan2(point[0]), point[3].atan2(point[1])];
    (j, theta)
}

/// Splits `h` into the ϑ₂-average `Z` and the generating function `χ` that
/// kills the rest: each k₂ ≠ 0 term is divided by `i k·ω`, so that
/// `{ω·J, χ} + h = Z` exactly.
pub fn solve_homological_fast(
    h: &SqrtSeries,
    omega: [f64; 2],
    divisor_floor: f64,
) -> Result<(SqrtSeries, SqrtSeries, f64)> {
    let z = h.angle_average(1)?;
    let mut chi = SqrtSeries::new(h.degree_cap());
    let mut smallest = f64::INFINITY;
    for (key, c) in h.terms() {
        if key.k[1] == 0 {
            continue;
        }
        let kw = key.k[0] as f64 * omega[0] + key.k[1] as f64 * omega[1];
        if kw.abs() < divisor_floor {
            return Err(Error::SmallDivisor {
                k1: key.k[0] as i32,
                k2: key.k[1] as i32,
                value: kw.abs(),
                floor: divisor_floor,
            });
        }
        smallest = smallest.min(kw.abs());
        chi.insert(*key, *c / C64::new(0.0, kw))?;
    }
    Ok((chi, z, smallest))
}

/// Runs `steps` normalization steps on a Hamiltonian whose class-2 part is
/// the oscillator pair `ω·J` (read off the series itself). The divisor floor
/// is `floor_rel·‖ω‖`.
pub fn normalize(
    hamiltonian: &SqrtSeries,
    steps: usize,
    floor_rel: f64,
) -> Result<BirkhoffNormalForm> {
    let cap = hamiltonian.degree_cap();
    let grade_cap = cap as i64 - 2;
    if (steps as i64) > grade_cap {
        return Err(Error::InvalidInput(format!(
            "{steps} steps need class {} but the series is capped at {cap}",
            steps + 2
        )));
    }
    let omega = [
        hamiltonian.coefficient(&SqrtKey::new([2, 0], [0, 0])).re,
        hamiltonian.coefficient(&SqrtKey::new([0, 2], [0, 0])).re,
    ];
    if omega[0] == 0.0 || omega[1] == 0.0 {
        return Err(Error::InvalidInput("class-2 part carries no ω·J".into()));
    }
    let divisor_floor = floor_rel * omega[0].hypot(omega[1]);

    // grade ℓ holds the class ℓ+2 part; constants and linear terms are not
    // part of a proper oscillator Hamiltonian and are rejected
    let mut grades: BTreeMap<i64, SqrtSeries> = BTreeMap::new();
    for s in 2..=cap {
        let part = hamiltonian.class_part(s);
        if !part.is_empty() {
            grades.insert(s as i64 - 2, part);
        }
    }
    let low = hamiltonian.class_part(0).norm() + hamiltonian.class_part(1).norm();
    if low > 0.0 {
        return Err(Error::InvalidInput(format!(
            "series has constant/linear terms of norm {low:e}; translate to the equilibrium first"
        )));
    }

    let mut generators = Vec::with_capacity(steps);
    let mut ledger = Vec::with_capacity(steps);
    for r in 1..=steps as i64 {
        let h_r = match grades.get(&r) {
            Some(h) => h.clone(),
            None => SqrtSeries::new(cap),
        };
        let (chi, z, smallest) = solve_homological_fast(&h_r, omega, divisor_floor)?;
        if chi.is_empty() {
            // already normal at this grade: nothing to transform
            ledger.push(BirkhoffStepRecord {
                step: r as usize,
                chi_norm: 0.0,
                normal_norm: z.norm(),
                remainder_norm: tail_norm(&grades, r),
                smallest_divisor: smallest,
                residual: 0.0,
            });
            generators.push(chi);
            continue;
        }
        grades = lie_triangle(&grades, &chi, r, grade_cap)?;
        // grade r is now Z_r up to roundoff; pin it to its exact ϑ₂ average
        // and record the defect
        let at_r = grades.remove(&r).unwrap_or_else(|| SqrtSeries::new(cap));
        let clean = at_r.angle_average(1)?;
        let residual = at_r.sub(&clean)?.norm();
        if !clean.is_empty() {
            grades.insert(r, clean);
        }
        ledger.push(BirkhoffStepRecord {
            step: r as usize,
            chi_norm: chi.norm(),
            normal_norm: z.norm(),
            remainder_norm: tail_norm(&grades, r),
            smallest_divisor: smallest,
            residual,
        });
        generators.push(chi);
    }

    let mut normal = SqrtSeries::new(cap);
    let mut remainder = SqrtSeries::new(cap);
    for (&g, s) in &grades {
        if g <= steps as i64 {
            normal = normal.add(s)?;
        } else {
            remainder = remainder.add(s)?;
        }
    }
    Ok(BirkhoffNormalForm {
        omega,
        steps,
        normal,
        remainder,
        chain: TransformChain { generators },
        ledger,
    })
}

fn tail_norm(grades: &BTreeMap<i64, SqrtSeries>, r: i64) -> f64 {
    grades.iter().filter(|(&g, _)| g > r).map(|(_, s)| s.norm()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: u32 = 8;

    fn real_pair(s: &mut SqrtSeries, l: [u8; 2], k: [i8; 2], c: C64) {
        s.insert(SqrtKey::new(l, k), c).unwrap();
        s.insert(SqrtKey::new(l, [-k[0], -k[1]]), c.conj()).unwrap();
    }

    #[test]
    fn pure_fast_harmonic_is_divided_away() {
        // h = (√J₂)² e^{i2ϑ₂} + c.c. with ω = (1, 3): χ = h-term/(6i) + c.c.
        let mut h = SqrtSeries::new(CAP);
        real_pair(&mut h, [0, 2], [0, 2], C64::new(1.0, 0.0));
        let (chi, z, smallest) = solve_homological_fast(&h, [1.0, 3.0], 1e-10).unwrap();
        assert!(z.is_empty());
        assert!((smallest - 6.0).abs() < 1e-15);
        let want = C64::new(1.0, 0.0) / C64::new(0.0, 6.0);
        assert!((chi.coefficient(&SqrtKey::new([0, 2], [0, 2])) - want).norm() < 1e-15);
        assert!(chi.reality_defect() < 1e-15);
    }

    #[test]
    fn slow_terms_pass_through_untouched() {
        let mut h = SqrtSeries::new(CAP);
        real_pair(&mut h, [3, 0], [1, 0], C64::new(0.4, -0.2));
        real_pair(&mut h, [1, 2], [-1, 0], C64::new(-0.1, 0.3));
        let (chi, z, _) = solve_homological_fast(&h, [1.0, 3.0], 1e-10).unwrap();
        assert!(chi.is_empty());
        assert_eq!(z, h);
    }

    #[test]
    fn homological_residual_vanishes_on_random_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let omega = [-0.0789, -0.616];
        for _ in 0..50 {
            // a random real series of class 5
            let mut h = SqrtSeries::new(CAP);
            for _ in 0..12 {
                let l1 = rng.gen_range(0..=5u8);
                let l = [l1, 5 - l1];
                let pick = |l: u8, rng: &mut rand_chacha::ChaCha8Rng| -> i8 {
                    if l == 0 {
                        0
                    } else {
                        -(l as i8) + 2 * rng.gen_range(0..=l as i8)
                    }
                };
                let k = [pick(l[0], &mut rng), pick(l[1], &mut rng)];
                let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                real_pair(&mut h, l, k, c);
            }
            let (chi, z, _) = solve_homological_fast(&h, omega, 1e-12).unwrap();
            let osc = SqrtSeries::omega_dot_j(omega, CAP);
            let residual = osc.bracket(&chi).unwrap().add(&h).unwrap().sub(&z).unwrap();
            assert!(residual.norm() < 1e-13 * h.norm().max(1.0), "{:e}", residual.norm());
        }
    }

    #[test]
    fn divisor_floor_aborts_with_the_offending_harmonic() {
        let mut h = SqrtSeries::new(CAP);
        // k·ω = 3·1 + 1·(−3+1e−14) ≈ 1e−14
        real_pair(&mut h, [3, 1], [3, 1], C64::new(1.0, 0.0));
        let err = solve_homological_fast(&h, [1.0, -3.0 + 1e-14], 1e-10).unwrap_err();
        match err {
            Error::SmallDivisor { k1, k2, .. } => assert_eq!((k1, k2).1.abs() + k1.abs(), 4),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn theta2_free_hamiltonian_is_already_normal() {
        let mut h = SqrtSeries::omega_dot_j([0.7, -0.3], CAP);
        real_pair(&mut h, [2, 2], [2, 0], C64::new(0.05, 0.01));
        real_pair(&mut h, [4, 0], [0, 0], C64::new(-0.02, 0.0));
        let nf = normalize(&h, 4, 1e-10).unwrap();
        assert!(nf.remainder.is_empty());
        assert!(nf.normal.sub(&h).unwrap().norm() < 1e-15);
        assert!(nf.chain.generators.iter().all(|g| g.is_empty()));
    }

    fn sample_hamiltonian() -> SqrtSeries {
        let mut h = SqrtSeries::omega_dot_j([-0.0789, -0.616], CAP);
        real_pair(&mut h, [3, 0], [1, 0], C64::new(0.021, 0.0));
        real_pair(&mut h, [1, 2], [1, -2], C64::new(-0.013, 0.008));
        real_pair(&mut h, [2, 1], [0, 1], C64::new(0.009, -0.004));
        real_pair(&mut h, [0, 4], [0, 2], C64::new(0.006, 0.0));
        real_pair(&mut h, [2, 2], [-2, 2], C64::new(-0.004, 0.002),);
        real_pair(&mut h, [1, 4], [1, -2], C64::new(0.003, 0.001));
        h
    }

    #[test]
    fn normal_form_is_free_of_the_fast_angle() {
        let h = sample_hamiltonian();
        let nf = normalize(&h, 6, 1e-10).unwrap();
        assert_eq!(nf.normal.angle_average(1).unwrap(), nf.normal);
        // {J₂, 𝒵} = 0 symbolically: every bracket term carries k₂ = 0
        let j2 = SqrtSeries::action(1, CAP);
        assert!(j2.bracket(&nf.normal).unwrap().is_empty());
        for rec in &nf.ledger {
            assert!(rec.residual < 1e-13 * h.norm());
        }
        assert!(nf.hamiltonian().reality_defect() < 1e-14);
    }

    /// Exchange theorem, numerically: ℋ^(r̃) evaluated at a normalized point
    /// equals ℋ^(0) at the forward-mapped point, to the truncation order.
    #[test]
    fn two_path_evaluation_agrees() {
        let h = sample_hamiltonian();
        let nf = normalize(&h, 6, 1e-10).unwrap();
        let transformed = nf.hamiltonian();
        for (i, pt) in [
            [0.03, -0.02, 0.01, 0.04],
            [-0.02, 0.03, -0.03, -0.01],
            [0.04, 0.01, 0.02, -0.03],
        ]
        .iter()
        .enumerate()
        {
            let (jn, tn) = yx_to_action_angle(*pt);
            let old_pt = nf.chain.forward(*pt).unwrap();
            let (jo, to) = yx_to_action_angle(old_pt);
            let lhs = transformed.evaluate(jn, tn).unwrap();
            let rhs = h.evaluate(jo, to).unwrap();
            // ‖J‖ ~ 1e−3; the class-8 truncation of the coordinate series
            // leaves a few-times-1e−12 mismatch
            assert!((lhs - rhs).abs() < 1e-10, "case {i}: {lhs:e} vs {rhs:e}");
        }
    }

    #[test]
    fn chain_round_trips_and_empty_chain_is_identity() {
        let h = sample_hamiltonian();
        let nf = normalize(&h, 6, 1e-10).unwrap();
        let empty = TransformChain::default();
        for pt in [[0.03, -0.02, 0.01, 0.04], [-0.05, 0.02, 0.03, -0.04]] {
            assert_eq!(empty.forward(pt).unwrap(), pt);
            let there = nf.chain.forward(pt).unwrap();
            let back = nf.chain.backward(there).unwrap();
            for i in 0..4 {
                assert!((back[i] - pt[i]).abs() < 1e-10, "{back:?} vs {pt:?}");
            }
        }
    }
}
