//! Exact statevector engine for single qubits and two-register pairs.
//!
//! A [`PairState`] holds the joint state of Alice's auxiliary register
//! (`|x>`/`|y>` basis) and a polarization qubit (0°/90° computational basis).
//! States are immutable values: every measurement returns the outcome and a
//! freshly collapsed state.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex probability amplitude.
pub type Amplitude = Complex64;

/// Tolerance used by [`PairState::is_product`] when callers have no better value.
pub const DEFAULT_PRODUCT_TOL: f64 = 1e-9;

const ZERO: Amplitude = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("non-finite amplitude")]
    NonFinite,
}

/// Normalized qubit `a0|0> + a1|1>` in some declared orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    a0: Amplitude,
    a1: Amplitude,
}

impl QubitState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(a0: Amplitude, a1: Amplitude) -> Result<Self, QStateError> {
        if !(a0.is_finite() && a1.is_finite()) {
            return Err(QStateError::NonFinite);
        }
        let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        if norm < 1e-300 {
            return Err(QStateError::ZeroNorm);
        }
        Ok(Self { a0: a0 / norm, a1: a1 / norm })
    }

    pub fn from_real(a0: f64, a1: f64) -> Result<Self, QStateError> {
        Self::new(Complex64::new(a0, 0.0), Complex64::new(a1, 0.0))
    }

    /// Real state at angle `phi` from `|0>`: `cos(phi)|0> + sin(phi)|1>`.
    pub fn at_angle(phi: f64) -> Self {
        Self {
            a0: Complex64::new(phi.cos(), 0.0),
            a1: Complex64::new(phi.sin(), 0.0),
        }
    }

    pub fn zero() -> Self {
        Self { a0: Complex64::new(1.0, 0.0), a1: ZERO }
    }

    pub fn one() -> Self {
        Self { a0: ZERO, a1: Complex64::new(1.0, 0.0) }
    }

    pub fn amplitudes(&self) -> [Amplitude; 2] {
        [self.a0, self.a1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    /// The unique (up to phase) state orthogonal to `self`.
    pub fn orthogonal(&self) -> Self {
        Self { a0: -self.a1.conj(), a1: self.a0.conj() }
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        overlap(self, other).norm_sqr()
    }

    /// True when the two states agree up to a global phase.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        (1.0 - self.fidelity(other)).abs() <= tol
    }
}

/// Register of the auxiliary system: `|x>` (index 0) and `|y>` (index 1).
pub fn ket_x() -> QubitState {
    QubitState::zero()
}

pub fn ket_y() -> QubitState {
    QubitState::one()
}

/// Polarization ket `|p,q>` in the 0°/90° computational basis.
///
/// `p` selects the basis (0 rectilinear, 1 diagonal) and `q` the value. The
/// 135° state carries the sign `(-1, 1)/sqrt2`.
pub fn pol_ket(p: u8, q: u8) -> QubitState {
    let c = |re: f64| Complex64::new(re, 0.0);
    match (p & 1, q & 1) {
        (0, 0) => QubitState { a0: c(1.0), a1: ZERO },
        (0, _) => QubitState { a0: ZERO, a1: c(1.0) },
        (_, 0) => QubitState { a0: c(FRAC_1_SQRT_2), a1: c(FRAC_1_SQRT_2) },
        (_, _) => QubitState { a0: c(-FRAC_1_SQRT_2), a1: c(FRAC_1_SQRT_2) },
    }
}

/// Complex inner product `<a|b>`.
pub fn overlap(a: &QubitState, b: &QubitState) -> Amplitude {
    a.a0.conj() * b.a0 + a.a1.conj() * b.a1
}

/// Samples a Born-rule outcome: 0 when `qubit` is found along `basis_vec`,
/// 1 for the orthogonal complement.
pub fn measure_in_basis<R: Rng + ?Sized>(
    qubit: &QubitState,
    basis_vec: &QubitState,
    rng: &mut R,
) -> u8 {
    let p0 = basis_vec.fidelity(qubit);
    sample_bit(p0, rng)
}

/// Returns 0 with probability `p0`, else 1.
pub(crate) fn sample_bit<R: Rng + ?Sized>(p0: f64, rng: &mut R) -> u8 {
    // snap rounding residue so certain outcomes stay certain
    let p0 = if p0 > 1.0 - 1e-13 {
        1.0
    } else if p0 < 1e-13 {
        0.0
    } else {
        p0
    };
    let u: f64 = rng.random();
    if u < p0 {
        0
    } else {
        1
    }
}

/// Joint state of an auxiliary register and a photon.
///
/// Amplitudes are stored in the order `(x,0°), (y,0°), (x,90°), (y,90°)`,
/// i.e. `index = alpha + 2 * photon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    amp: [Amplitude; 4],
}

impl PairState {
    pub fn from_amplitudes(amp: [Amplitude; 4]) -> Result<Self, QStateError> {
        if amp.iter().any(|a| !a.is_finite()) {
            return Err(QStateError::NonFinite);
        }
        let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QStateError::ZeroNorm);
        }
        Ok(Self { amp: amp.map(|a| a / norm) })
    }

    pub fn product(alpha: &QubitState, photon: &QubitState) -> Self {
        let a = alpha.amplitudes();
        let b = photon.amplitudes();
        Self {
            amp: [a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]],
        }
    }

    pub fn amplitudes(&self) -> [Amplitude; 4] {
        self.amp
    }

    /// Amplitude of `|alpha> ⊗ |photon>` for computational indices.
    pub fn amp(&self, alpha: usize, photon: usize) -> Amplitude {
        self.amp[alpha + 2 * photon]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Flattened `[re, im]` pairs, the transcript wire form.
    pub fn to_reals(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (i, a) in self.amp.iter().enumerate() {
            out[2 * i] = a.re;
            out[2 * i + 1] = a.im;
        }
        out
    }

    pub fn from_reals(r: &[f64; 8]) -> Result<Self, QStateError> {
        let amp = [0, 1, 2, 3].map(|i| Complex64::new(r[2 * i], r[2 * i + 1]));
        Self::from_amplitudes(amp)
    }

    /// Unnormalized alpha vector `(<photon| ⊗ 1)|self>`.
    fn alpha_component(&self, photon: &QubitState) -> [Amplitude; 2] {
        let ph = photon.amplitudes();
        [
            self.amp(0, 0) * ph[0].conj() + self.amp(0, 1) * ph[1].conj(),
            self.amp(1, 0) * ph[0].conj() + self.amp(1, 1) * ph[1].conj(),
        ]
    }

    /// Unnormalized photon vector `(<alpha| ⊗ 1)|self>`.
    fn photon_component(&self, alpha: &QubitState) -> [Amplitude; 2] {
        let al = alpha.amplitudes();
        [
            self.amp(0, 0) * al[0].conj() + self.amp(1, 0) * al[1].conj(),
            self.amp(0, 1) * al[0].conj() + self.amp(1, 1) * al[1].conj(),
        ]
    }

    /// Probability of finding the photon along `photon` and the conditional
    /// alpha state (absent when the probability vanishes).
    pub fn alpha_given_photon(&self, photon: &QubitState) -> (f64, Option<QubitState>) {
        let [a0, a1] = self.alpha_component(photon);
        let p = a0.norm_sqr() + a1.norm_sqr();
        (p, QubitState::new(a0, a1).ok().filter(|_| p > 1e-300))
    }

    /// Probability of finding alpha along `alpha` and the conditional photon state.
    pub fn photon_given_alpha(&self, alpha: &QubitState) -> (f64, Option<QubitState>) {
        let [b0, b1] = self.photon_component(alpha);
        let p = b0.norm_sqr() + b1.norm_sqr();
        (p, QubitState::new(b0, b1).ok().filter(|_| p > 1e-300))
    }

    /// Measures the photon along `vec` vs. its complement; outcome 0 means `vec`.
    pub fn measure_photon_along<R: Rng + ?Sized>(
        &self,
        vec: &QubitState,
        rng: &mut R,
    ) -> (u8, PairState) {
        let (p0, cond0) = self.alpha_given_photon(vec);
        let outcome = sample_bit(p0, rng);
        let (photon, cond) = if outcome == 0 {
            (*vec, cond0)
        } else {
            let perp = vec.orthogonal();
            (perp, self.alpha_given_photon(&perp).1)
        };
        let alpha = cond.expect("sampled outcome has positive probability");
        (outcome, PairState::product(&alpha, &photon))
    }

    /// Measures alpha along `vec` vs. its complement; outcome 0 means `vec`.
    pub fn measure_alpha_along<R: Rng + ?Sized>(
        &self,
        vec: &QubitState,
        rng: &mut R,
    ) -> (u8, PairState) {
        let (p0, cond0) = self.photon_given_alpha(vec);
        let outcome = sample_bit(p0, rng);
        let (alpha, cond) = if outcome == 0 {
            (*vec, cond0)
        } else {
            let perp = vec.orthogonal();
            (perp, self.photon_given_alpha(&perp).1)
        };
        let photon = cond.expect("sampled outcome has positive probability");
        (outcome, PairState::product(&alpha, &photon))
    }

    /// Projective test onto `target`: returns `true` (pass) with probability
    /// `|<target|self>|^2` together with the post-measurement state.
    pub fn project_onto<R: Rng + ?Sized>(&self, target: &PairState, rng: &mut R) -> (bool, PairState) {
        let ov = self.inner(target);
        let p = ov.norm_sqr();
        if sample_bit(p, rng) == 0 {
            return (true, *target);
        }
        let mut rest = self.amp;
        for (r, t) in rest.iter_mut().zip(target.amp.iter()) {
            *r -= ov * t;
        }
        let collapsed = PairState::from_amplitudes(rest).unwrap_or(*self);
        (false, collapsed)
    }

    /// `<other|self>`.
    pub fn inner(&self, other: &PairState) -> Amplitude {
        other
            .amp
            .iter()
            .zip(self.amp.iter())
            .map(|(o, s)| o.conj() * s)
            .sum()
    }

    /// Descending Schmidt coefficients (singular values of the 2×2 amplitude matrix).
    pub fn schmidt_coefficients(&self) -> (f64, f64) {
        let tr = self.norm_sqr();
        let det = (self.amp(0, 0) * self.amp(1, 1) - self.amp(0, 1) * self.amp(1, 0)).norm();
        // eigenvalues of M M^dagger are tr/2 ± sqrt(tr^2/4 - |det M|^2)
        let disc = (tr * tr / 4.0 - det * det).max(0.0).sqrt();
        let l1 = (tr / 2.0 + disc).sqrt();
        let l2 = if l1 > 0.0 { det / l1 } else { 0.0 };
        (l1, l2)
    }

    pub fn is_product(&self, tol: f64) -> bool {
        self.schmidt_coefficients().1 < tol
    }

    /// Factors a product state into `(alpha, photon)`.
    pub fn factorize(&self, tol: f64) -> Option<(QubitState, QubitState)> {
        if !self.is_product(tol) {
            return None;
        }
        // pick the computational photon column with the larger weight
        let w0 = self.amp(0, 0).norm_sqr() + self.amp(1, 0).norm_sqr();
        let w1 = self.amp(0, 1).norm_sqr() + self.amp(1, 1).norm_sqr();
        let col = if w0 >= w1 { 0 } else { 1 };
        let alpha = QubitState::new(self.amp(0, col), self.amp(1, col)).ok()?;
        let (_, photon) = self.photon_given_alpha(&alpha);
        Some((alpha, photon?))
    }

    /// Replaces the alpha register of a product state with `alpha`.
    pub fn with_alpha(&self, alpha: &QubitState, tol: f64) -> Option<PairState> {
        let (_, photon) = self.factorize(tol)?;
        Some(PairState::product(alpha, &photon))
    }

    /// Marginal probability of finding alpha in `|x>` (index 0) or `|y>` (index 1).
    pub fn alpha_marginal(&self, outcome: u8) -> f64 {
        let a = outcome as usize & 1;
        self.amp(a, 0).norm_sqr() + self.amp(a, 1).norm_sqr()
    }
}

/// `cos(theta)|x> ⊗ |0,q> + sin(theta)|y> ⊗ |1,q>`, the honest commitment pair.
pub fn prepare_pair(theta: f64, q: u8) -> Result<PairState, QStateError> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(QStateError::InvalidParameter(format!(
            "theta must lie in (0, pi/2), got {theta}"
        )));
    }
    Ok(prepare_general(theta, (0, q), (1, q)))
}

/// `cos(theta)|x> ⊗ |p0,q0> + sin(theta)|y> ⊗ |p1,q1>` for arbitrary photon kets.
pub fn prepare_general(theta: f64, first: (u8, u8), second: (u8, u8)) -> PairState {
    let a = PairState::product(&ket_x(), &pol_ket(first.0, first.1));
    let b = PairState::product(&ket_y(), &pol_ket(second.0, second.1));
    let (s, c) = theta.sin_cos();
    let amp = [0, 1, 2, 3].map(|i| a.amp[i] * c + b.amp[i] * s);
    PairState::from_amplitudes(amp).expect("kets are normalized")
}

/// Measures the photon in polarization basis `basis`; returns `q'` and the collapsed pair.
pub fn measure_photon<R: Rng + ?Sized>(state: &PairState, basis: u8, rng: &mut R) -> (u8, PairState) {
    state.measure_photon_along(&pol_ket(basis, 0), rng)
}

/// Measures alpha in the `(|x>, |y>)` basis; returns `p` (0 for `|x>`) and the collapsed pair.
pub fn measure_alpha<R: Rng + ?Sized>(state: &PairState, rng: &mut R) -> (u8, PairState) {
    state.measure_alpha_along(&ket_x(), rng)
}

pub fn schmidt_coefficients(state: &PairState) -> (f64, f64) {
    state.schmidt_coefficients()
}

pub fn is_product(state: &PairState, tol: f64) -> bool {
    state.is_product(tol)
}

/// Probability that a photon measurement in `basis` yields `outcome`.
pub fn photon_outcome_prob(state: &PairState, basis: u8, outcome: u8) -> f64 {
    state.alpha_given_photon(&pol_ket(basis, outcome)).0
}

/// Conditional alpha state after the photon was found as `|basis, outcome>`.
pub fn conditional_alpha(state: &PairState, basis: u8, outcome: u8) -> Option<QubitState> {
    state.alpha_given_photon(&pol_ket(basis, outcome)).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_8};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Independent oracle: largest Schmidt coefficient of a real pair state is
    /// `max |<a ⊗ b|psi>|` over real unit vectors; scanned on a fine grid.
    fn max_product_overlap(state: &PairState) -> f64 {
        let steps = 4000;
        let mut best = 0.0f64;
        for i in 0..steps {
            let a = QubitState::at_angle(std::f64::consts::PI * i as f64 / steps as f64);
            let (p, _) = state.photon_given_alpha(&a);
            best = best.max(p.sqrt());
        }
        best
    }

    #[test]
    fn pol_kets() {
        assert_eq!(pol_ket(0, 0).amplitudes()[0].re, 1.0);
        assert_eq!(pol_ket(0, 1).amplitudes()[1].re, 1.0);
        let d = pol_ket(1, 0).amplitudes();
        assert!(close(d[0].re, FRAC_1_SQRT_2, 1e-15) && close(d[1].re, FRAC_1_SQRT_2, 1e-15));
        let a = pol_ket(1, 1).amplitudes();
        assert!(close(a[0].re, -FRAC_1_SQRT_2, 1e-15) && close(a[1].re, FRAC_1_SQRT_2, 1e-15));
        // inner-product oracle for the 135° convention
        assert!(overlap(&pol_ket(1, 0), &pol_ket(1, 1)).norm() < 1e-15);
        assert!(close(overlap(&pol_ket(1, 1), &pol_ket(0, 0)).re, -FRAC_1_SQRT_2, 1e-15));
    }

    #[test]
    fn overlaps() {
        let s = QubitState::at_angle(0.3);
        assert!(close(overlap(&s, &s).re, 1.0, 1e-15));
        assert!(close(overlap(&pol_ket(0, 0), &pol_ket(1, 0)).re, FRAC_1_SQRT_2, 1e-15));
        assert!(overlap(&pol_ket(1, 0), &pol_ket(1, 1)).norm() < 1e-15);
    }

    #[test]
    fn prepare_pair_amplitudes() {
        let st = prepare_pair(FRAC_PI_4, 0).unwrap();
        let expect = [FRAC_1_SQRT_2, 0.5, 0.0, 0.5];
        for (a, e) in st.amplitudes().iter().zip(expect) {
            assert!(close(a.re, e, 1e-15) && a.im == 0.0);
        }
        assert!(close(prepare_pair(FRAC_PI_3, 1).unwrap().norm_sqr(), 1.0, 1e-12));
        assert!(prepare_pair(0.0, 0).is_err());
        assert!(prepare_pair(FRAC_PI_2, 1).is_err());
        assert!(prepare_pair(-0.1, 1).is_err());
    }

    #[test]
    fn photon_measurement_probabilities() {
        let st = prepare_pair(FRAC_PI_4, 0).unwrap();
        assert!(close(photon_outcome_prob(&st, 0, 0), 0.75, 1e-15));
        assert!(close(photon_outcome_prob(&st, 0, 1), 0.25, 1e-15));
        let y = conditional_alpha(&st, 0, 1).unwrap();
        assert!(y.same_ray(&ket_y(), 1e-15));
        let e = conditional_alpha(&st, 0, 0).unwrap();
        let want = QubitState::from_real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap();
        assert!(e.same_ray(&want, 1e-14));
    }

    #[test]
    fn alpha_measurement() {
        let st = prepare_pair(FRAC_PI_4, 0).unwrap();
        assert!(close(st.alpha_marginal(0), 0.5, 1e-15));
        let (_, ph0) = st.photon_given_alpha(&ket_x());
        assert!(ph0.unwrap().same_ray(&pol_ket(0, 0), 1e-15));
        let (_, ph1) = st.photon_given_alpha(&ket_y());
        assert!(ph1.unwrap().same_ray(&pol_ket(1, 0), 1e-15));
        let st = prepare_pair(FRAC_PI_3, 1).unwrap();
        assert!(close(st.alpha_marginal(1), 0.75, 1e-15));
    }

    #[test]
    fn basis_measurement_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = QubitState::at_angle(0.7);
        for _ in 0..1000 {
            assert_eq!(measure_in_basis(&e, &e, &mut rng), 0);
            assert_eq!(measure_in_basis(&e.orthogonal(), &e, &mut rng), 1);
        }
        let target = QubitState::from_real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap();
        assert!(close(1.0 - target.fidelity(&ket_x()), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn schmidt_matches_grid_oracle() {
        let st = prepare_pair(FRAC_PI_4, 0).unwrap();
        let (l1, l2) = st.schmidt_coefficients();
        // frozen from the grid oracle: cos(pi/8), sin(pi/8)
        assert!(close(l1, FRAC_PI_8.cos(), 1e-12));
        assert!(close(l2, FRAC_PI_8.sin(), 1e-12));
        assert!(close(max_product_overlap(&st), l1, 1e-6));
        assert!(close(l1 * l1 + l2 * l2, 1.0, 1e-12));
        for theta in [0.1, 0.5, 1.2] {
            for q in 0..2 {
                let st = prepare_pair(theta, q).unwrap();
                assert!(close(max_product_overlap(&st), st.schmidt_coefficients().0, 1e-6));
            }
        }
        assert!(!st.is_product(1e-6));
        let tiny = prepare_pair(1e-9, 0).unwrap();
        assert!(tiny.schmidt_coefficients().1 < 1e-8);
    }

    #[test]
    fn products_have_unit_schmidt() {
        let p = PairState::product(&QubitState::at_angle(0.4), &QubitState::at_angle(-1.1));
        let (l1, l2) = p.schmidt_coefficients();
        assert!(close(l1, 1.0, 1e-12) && l2 < 1e-12);
        assert!(p.is_product(DEFAULT_PRODUCT_TOL));
        let (a, b) = p.factorize(1e-9).unwrap();
        assert!(a.same_ray(&QubitState::at_angle(0.4), 1e-12));
        assert!(b.same_ray(&QubitState::at_angle(-1.1), 1e-12));
    }

    #[test]
    fn collapse_produces_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let st = prepare_pair(0.3 + rng.random::<f64>(), rng.random_range(0..2)).unwrap();
            let (_, c) = measure_photon(&st, rng.random_range(0..2), &mut rng);
            assert!(c.schmidt_coefficients().1 < 1e-10);
            assert!(close(c.norm_sqr(), 1.0, 1e-12));
            let (_, c) = measure_alpha(&st, &mut rng);
            assert!(c.schmidt_coefficients().1 < 1e-10);
        }
    }

    #[test]
    fn projective_test_passes_on_exact_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let st = prepare_pair(0.9, 1).unwrap();
        for _ in 0..500 {
            assert!(st.project_onto(&st, &mut rng).0);
        }
    }

    #[test]
    fn reals_roundtrip() {
        let st = prepare_pair(0.9, 1).unwrap();
        let back = PairState::from_reals(&st.to_reals()).unwrap();
        assert!((back.inner(&st).norm() - 1.0).abs() < 1e-15);
    }
}
