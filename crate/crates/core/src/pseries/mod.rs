//! Truncated Taylor–Fourier series algebra.
//!
//! Two sparse series representations cover the whole normalization pipeline:
//!
//! * [`SqrtSeries`] — terms `c (√J₁)^ℓ₁ (√J₂)^ℓ₂ e^{i(k₁ϑ₁+k₂ϑ₂)}` with the
//!   parity constraint `k_j ∈ {−ℓ_j, −ℓ_j+2, …, ℓ_j}`, used by the resonant
//!   Birkhoff stage (homogeneous classes 𝒫_s graded by total √J degree s).
//! * [`ActionSeries`] — terms `c p₁^{j₁} p₂^{j₂} e^{i(k₁q₁+k₂q₂)}` with caps on
//!   the action degree and the trigonometric degree, used by the Kolmogorov
//!   stage (classes 𝔓_{ℓ,sK} graded by action degree ℓ and trig degree sK).
//!
//! Both carry complex coefficients in the exponential basis; real series
//! satisfy the reality pairing `c_{·,−k} = conj(c_{·,k})`, which every
//! operation preserves. Coefficients that come out exactly zero are pruned;
//! nothing else ever is, unless a caller explicitly asks for it.

mod action;
mod cart;
mod io;
mod lie;
mod sqrt;

pub use action::{ActionKey, ActionSeries};
pub use cart::CartPoly;
pub use io::{read_series, write_series, SeriesFile};
pub use lie::{lie_exp, lie_triangle, SeriesOps};
pub use sqrt::{SqrtKey, SqrtSeries};

pub type C64 = num_complex::Complex64;

/// A pair of fundamental frequencies, the small-divisor source of every
/// homological equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyVector(pub [f64; 2]);

impl FrequencyVector {
    pub fn dot(&self, k: [i32; 2]) -> f64 {
        k[0] as f64 * self.0[0] + k[1] as f64 * self.0[1]
    }

    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }

    pub fn is_usable(&self) -> bool {
        self.0.iter().all(|w| w.is_finite() && *w != 0.0)
    }
}

/// Factorials up to 20!, enough for any Lie-triangle depth reachable under the
/// pipeline's truncation caps.
pub(crate) fn factorial(n: usize) -> f64 {
    const TABLE: [f64; 21] = [
        1.0,
        1.0,
        2.0,
        6.0,
        24.0,
        120.0,
        720.0,
        5040.0,
        40320.0,
        362880.0,
        3628800.0,
        39916800.0,
        479001600.0,
        6227020800.0,
        87178291200.0,
        1307674368000.0,
        20922789888000.0,
        355687428096000.0,
        6402373705728000.0,
        121645100408832000.0,
        2432902008176640000.0,
    ];
    if n < TABLE.len() {
        TABLE[n]
    } else {
        (TABLE.len()..=n).fold(TABLE[TABLE.len() - 1], |acc, m| acc * m as f64)
    }
}
