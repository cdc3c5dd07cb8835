use nalgebra::Matrix4;
use num_complex::Complex64;

use super::resonant::{ResonantChart, ResonantSeries};
use crate::error::{Error, Result};
use crate::pseries::CartPoly;

/// Poisson matrix Ω for the ordering `(y₁, y₂, x₁, x₂)`: ż = Ω ∇H.
const OMEGA: [[f64; 4]; 4] = [
    [0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
];

/// The averaged resonant model translated to its elliptic equilibrium and
/// brought to harmonic-oscillator form: H = Σ_j (ω_j/2)(Y_j² + X_j²) + h₃ + …
#[derive(Clone, Debug)]
pub struct DiagonalizedModel {
    /// Oscillator frequencies, ordered |ω₁| < |ω₂|; both negative for the
    /// librational equilibrium of the planetary model.
    pub omega: [f64; 2],
    /// Columns of the linear map `(y, x) = C · (Y, X)` in the order
    /// (Y₁, Y₂, X₁, X₂); symplectic with respect to Ω.
    pub c_matrix: [[f64; 4]; 4],
    /// Equilibrium (p_δ*, p_σ*) the origin was translated to.
    pub p_star: [f64; 2],
    /// Energy of the averaged model at the equilibrium (the dropped constant
    /// term of the translated series).
    pub energy: f64,
    /// Full polynomial Hamiltonian in (Y₁, Y₂, X₁, X₂), constant and linear
    /// parts removed.
    pub hamiltonian: CartPoly,
    /// Σ|c| over the linear terms left by the translation — the Newton
    /// residual of the equilibrium, carried as a diagnostic.
    pub linear_residual: f64,
}

impl DiagonalizedModel {
    /// Homogeneous remainder of degree ℓ+2 (ℓ = 0 is the quadratic part).
    pub fn h_part(&self, ell: u32) -> CartPoly {
        self.hamiltonian.degree_part(ell + 2)
    }

    /// Largest entry of CᵀΩC − Ω; zero for an exactly symplectic map.
    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.c_matrix)
    }
}

fn symplectic_defect(c: &[[f64; 4]; 4]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    acc += c[a][i] * OMEGA[a][b] * c[b][j];
                }
            }
            worst = worst.max((acc - OMEGA[i][j]).abs());
        }
    }
    worst
}

/// Extracts the two invariant oscillation planes of the linear flow
/// `ż = ΩS z` and returns `(ν_j, a_j, b_j)` with `ΩS a = −ν b`, `ΩS b = ν a`
/// and ν > 0, sorted by ν ascending. Errors unless both eigenvalue pairs are
/// purely imaginary.
fn oscillation_planes(s: &[[f64; 4]; 4]) -> Result<Vec<(f64, [f64; 4], [f64; 4])>> {
    let m = Matrix4::from_fn(|i, j| {
        (0..4).map(|k| OMEGA[i][k] * s[k][j]).sum::<f64>()
    });
    let scale = m.amax().max(1e-300);
    let schur = m.try_schur(1e-14, 10_000).ok_or_else(|| {
        Error::NoConvergence("Schur decomposition of the linearized flow".into())
    })?;
    let (q, t) = schur.unpack();
    let mut planes = Vec::new();
    let mut i = 0;
    while i < 4 {
        if i + 1 >= 4 || t[(i + 1, i)].abs() <= 1e-12 * scale {
            return Err(Error::NonElliptic(format!(
                "real eigenvalue {:.3e} in the linearized flow",
                t[(i, i)]
            )));
        }
        let (b00, b01, b10, b11) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let mu = (b00 + b11) / 2.0;
        let disc = ((b00 - b11) / 2.0).powi(2) + b01 * b10;
        if disc >= 0.0 || mu.abs() > 1e-10 * scale {
            return Err(Error::NonElliptic(format!(
                "eigenvalue {mu:.3e} ± √({disc:.3e}) has a real part"
            )));
        }
        let nu = (-disc).sqrt();
        let lam = Complex64::new(0.0, nu);
        // eigenvector of the 2×2 block for +iν: rows give w = (b01, iν − b00)
        // or (iν − b11, b10); the block is genuinely complex so b01, b10 ≠ 0
        let mut w = [Complex64::new(0.0, 0.0); 4];
        if b01.abs() >= b10.abs() {
            w[i] = Complex64::new(b01, 0.0);
            w[i + 1] = lam - b00;
        } else {
            w[i] = lam - b11;
            w[i + 1] = Complex64::new(b10, 0.0);
        }
        // T is only quasi-triangular: components above the block come from
        // back-substitution, (T_block_above − iν) u = −(coupling) w
        if i == 2 {
            let rhs0 = -(t[(0, 2)] * w[2] + t[(0, 3)] * w[3]);
            let rhs1 = -(t[(1, 2)] * w[2] + t[(1, 3)] * w[3]);
            let (a00, a01) = (t[(0, 0)] - lam, Complex64::new(t[(0, 1)], 0.0));
            let (a10, a11) = (Complex64::new(t[(1, 0)], 0.0), t[(1, 1)] - lam);
            let det = a00 * a11 - a01 * a10;
            if det.norm() < 1e-13 * scale * scale {
                return Err(Error::Singular("repeated frequency in the linearized flow".into()));
            }
            w[0] = (rhs0 * a11 - a01 * rhs1) / det;
            w[1] = (a00 * rhs1 - rhs0 * a10) / det;
        }
        let mut a = [0.0f64; 4];
        let mut b = [0.0f64; 4];
        for r in 0..4 {
            for k in 0..4 {
                a[r] += q[(r, k)] * w[k].re;
                b[r] += q[(r, k)] * w[k].im;
            }
        }
        planes.push((nu, a, b));
        i += 2;
    }
    planes.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(planes)
}

/// Translates the θ-averaged Hamiltonian to its equilibrium and conjugates
/// the quadratic part to a pair of harmonic oscillators
/// `(ω₁/2)(Y₁²+X₁²) + (ω₂/2)(Y₂²+X₂²)` with |ω₁| < |ω₂|, transforming the
/// full series through the same symplectic map.
pub fn diagonalize(
    series: &ResonantSeries,
    chart: &ResonantChart,
    p_star: [f64; 2],
    degree_cap: u32,
) -> Result<DiagonalizedModel> {
    let translated = series.to_cart(chart, p_star, degree_cap)?;
    let s = translated.quadratic_matrix();
    let planes = oscillation_planes(&s)?;

    let mut omega = [0.0f64; 2];
    let mut c = [[0.0f64; 4]; 4];
    for (j, &(nu, a, mut b)) in planes.iter().enumerate() {
        // symplectic area of the plane fixes the sign of the frequency:
        // ω = −ν when aᵀΩb < 0, and flipping b realizes the ω = +ν case
        let mut sigma: f64 =
            (0..4).map(|r| (0..4).map(|t| a[r] * OMEGA[r][t] * b[t]).sum::<f64>()).sum();
        if sigma.abs() < 1e-14 * (nu.max(1e-300)) {
            return Err(Error::Singular("degenerate oscillation plane".into()));
        }
        if sigma > 0.0 {
            omega[j] = nu;
            for x in &mut b {
                *x = -*x;
            }
            sigma = -sigma;
        } else {
            omega[j] = -nu;
        }
        let alpha = (-sigma).sqrt().recip();
        for r in 0..4 {
            c[r][j] = alpha * a[r]; // Y_j column
            c[r][j + 2] = alpha * b[r]; // X_j column
        }
    }

    let mut transformed = translated.substitute_linear(&c);
    let energy = transformed.coefficient(&[0, 0, 0, 0]);
    let mut linear_residual = 0.0;
    let mut hamiltonian = CartPoly::new(degree_cap);
    for (m, &coeff) in transformed.terms() {
        match m.iter().map(|&e| e as u32).sum::<u32>() {
            0 => {}
            1 => linear_residual += coeff.abs(),
            _ => hamiltonian.insert(*m, coeff),
        }
    }
    transformed = hamiltonian;

    Ok(DiagonalizedModel {
        omega,
        c_matrix: c,
        p_star,
        energy,
        hamiltonian: transformed,
        linear_residual,
    })
}
