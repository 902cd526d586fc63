//! Jones/Stokes polarization algebra and the four BB84 states.
//!
//! States are pure and global phase is never observable: compare states with
//! [`JonesVector::fidelity`], not component by component. Stokes components
//! follow the (s1: H/V, s2: D/A, s3: R/L) convention.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|a_h|^2 + |a_v|^2 - 1` accepted by projection operations.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub a_h: Complex64,
    pub a_v: Complex64,
}

impl JonesVector {
    pub const H: JonesVector = JonesVector {
        a_h: Complex64::new(1.0, 0.0),
        a_v: Complex64::new(0.0, 0.0),
    };
    pub const V: JonesVector = JonesVector {
        a_h: Complex64::new(0.0, 0.0),
        a_v: Complex64::new(1.0, 0.0),
    };

    pub fn new(a_h: Complex64, a_v: Complex64) -> Self {
        JonesVector { a_h, a_v }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a_h.norm_sqr() + self.a_v.norm_sqr()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("cannot normalize a zero or non-finite Jones vector"));
        }
        Ok(JonesVector::new(self.a_h / n, self.a_v / n))
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.a_h.conj() * other.a_h + self.a_v.conj() * other.a_v
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn fidelity(&self, other: &JonesVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StokesVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn new(s1: f64, s2: f64, s3: f64) -> Self {
        StokesVector { s1, s2, s3 }
    }

    pub fn dot(&self, other: &StokesVector) -> f64 {
        self.s1 * other.s1 + self.s2 * other.s2 + self.s3 * other.s3
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        StokesVector::new(self.s1 * k, self.s2 * k, self.s3 * k)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }
}

impl std::ops::Add for StokesVector {
    type Output = StokesVector;

    fn add(self, rhs: StokesVector) -> StokesVector {
        StokesVector::new(self.s1 + rhs.s1, self.s2 + rhs.s2, self.s3 + rhs.s3)
    }
}

impl std::ops::Sub for StokesVector {
    type Output = StokesVector;

    fn sub(self, rhs: StokesVector) -> StokesVector {
        StokesVector::new(self.s1 - rhs.s1, self.s2 - rhs.s2, self.s3 - rhs.s3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    /// The two analyzer outputs of this basis, "0" outcome first.
    pub fn symbols(self) -> [Bb84Symbol; 2] {
        match self {
            Basis::X => [Bb84Symbol::D, Bb84Symbol::A],
            Basis::Y => [Bb84Symbol::R, Bb84Symbol::L],
        }
    }
}

/// One of the four BB84 states, encoded as a relative H/V phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bb84Symbol {
    D,
    A,
    R,
    L,
}

impl Bb84Symbol {
    /// Channel order used in every count array: D, A, R, L.
    pub const ALL: [Bb84Symbol; 4] = [Bb84Symbol::D, Bb84Symbol::A, Bb84Symbol::R, Bb84Symbol::L];

    pub fn phase(self) -> f64 {
        match self {
            Bb84Symbol::D => 0.0,
            Bb84Symbol::R => FRAC_PI_2,
            Bb84Symbol::A => PI,
            Bb84Symbol::L => -FRAC_PI_2,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Bb84Symbol::D | Bb84Symbol::A => Basis::X,
            Bb84Symbol::R | Bb84Symbol::L => Basis::Y,
        }
    }

    pub fn orthogonal(self) -> Bb84Symbol {
        match self {
            Bb84Symbol::D => Bb84Symbol::A,
            Bb84Symbol::A => Bb84Symbol::D,
            Bb84Symbol::R => Bb84Symbol::L,
            Bb84Symbol::L => Bb84Symbol::R,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Bb84Symbol::D => 'D',
            Bb84Symbol::A => 'A',
            Bb84Symbol::R => 'R',
            Bb84Symbol::L => 'L',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'D' => Some(Bb84Symbol::D),
            'A' => Some(Bb84Symbol::A),
            'R' => Some(Bb84Symbol::R),
            'L' => Some(Bb84Symbol::L),
            _ => None,
        }
    }

    pub fn state(self) -> JonesVector {
        ideal_state(self.phase())
    }
}

impl fmt::Display for Bb84Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Bb84Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Bb84Symbol::from_letter(c)
                .ok_or_else(|| Error::invalid(format!("unknown BB84 symbol `{s}`"))),
            _ => Err(Error::invalid(format!("unknown BB84 symbol `{s}`"))),
        }
    }
}

fn ideal_state(phi: f64) -> JonesVector {
    JonesVector::new(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::from_polar(FRAC_1_SQRT_2, phi),
    )
}

/// `(|H> + e^{i phi}|V>)/sqrt(2)`.
pub fn state_from_phase(phi: f64) -> Result<JonesVector> {
    if !phi.is_finite() {
        return Err(Error::invalid(format!("phase must be finite, got {phi}")));
    }
    Ok(ideal_state(phi))
}

/// Born-rule probability of passing the `analyzer` output port.
pub fn projection_prob(state: &JonesVector, analyzer: Bb84Symbol) -> Result<f64> {
    if !state.is_normalized() {
        return Err(Error::invalid(format!(
            "state is not normalized (|psi|^2 = {})",
            state.norm_sqr()
        )));
    }
    Ok(analyzer.state().fidelity(state).clamp(0.0, 1.0))
}

pub fn jones_to_stokes(state: &JonesVector) -> StokesVector {
    let cross = state.a_h.conj() * state.a_v;
    StokesVector::new(
        state.a_h.norm_sqr() - state.a_v.norm_sqr(),
        2.0 * cross.re,
        2.0 * cross.im,
    )
}

/// Multiplies the V amplitude by `e^{i phi}`.
pub fn apply_relative_phase(state: &JonesVector, phi: f64) -> JonesVector {
    JonesVector::new(state.a_h, state.a_v * Complex64::from_polar(1.0, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < EPS
    }

    #[test]
    fn phase_zero_is_diagonal() {
        let d = state_from_phase(0.0).unwrap();
        assert!(close(d.a_h, Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(d.a_v, Complex64::new(FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn phase_pi_flips_v() {
        let a = state_from_phase(PI).unwrap();
        assert!(close(a.a_v, Complex64::new(-FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn phase_half_pi_is_right_circular() {
        let r = state_from_phase(FRAC_PI_2).unwrap();
        assert!(close(r.a_v, Complex64::new(0.0, FRAC_1_SQRT_2)));
    }

    #[test]
    fn non_finite_phase_rejected() {
        assert!(matches!(state_from_phase(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(state_from_phase(f64::INFINITY).is_err());
    }

    #[test]
    fn projection_examples() {
        let d = Bb84Symbol::D.state();
        assert!((projection_prob(&d, Bb84Symbol::D).unwrap() - 1.0).abs() < EPS);
        assert!(projection_prob(&d, Bb84Symbol::A).unwrap().abs() < EPS);
        assert!((projection_prob(&d, Bb84Symbol::R).unwrap() - 0.5).abs() < EPS);
    }

    #[test]
    fn projection_rejects_unnormalized() {
        let s = JonesVector::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        assert!(matches!(projection_prob(&s, Bb84Symbol::D), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stokes_of_basis_states() {
        let h = jones_to_stokes(&JonesVector::H);
        assert_eq!((h.s1, h.s2, h.s3), (1.0, 0.0, 0.0));
        let d = jones_to_stokes(&Bb84Symbol::D.state());
        assert!((d.s2 - 1.0).abs() < EPS && d.s1.abs() < EPS && d.s3.abs() < EPS);
        let r = jones_to_stokes(&Bb84Symbol::R.state());
        assert!((r.s3 - 1.0).abs() < EPS && r.s1.abs() < EPS && r.s2.abs() < EPS);
    }

    #[test]
    fn relative_phase_examples() {
        let d = Bb84Symbol::D.state();
        let a = apply_relative_phase(&d, PI);
        assert!((a.fidelity(&Bb84Symbol::A.state()) - 1.0).abs() < EPS);
        assert_eq!(apply_relative_phase(&d, 0.0), d);
        let twice = apply_relative_phase(&apply_relative_phase(&d, FRAC_PI_2), FRAC_PI_2);
        assert!((twice.fidelity(&Bb84Symbol::A.state()) - 1.0).abs() < EPS);
    }

    #[test]
    fn symbol_table() {
        for s in Bb84Symbol::ALL {
            assert_eq!(s.orthogonal().basis(), s.basis());
            assert_eq!(s.orthogonal().orthogonal(), s);
            assert_eq!(Bb84Symbol::from_letter(s.letter()), Some(s));
        }
        assert_eq!(Bb84Symbol::L.phase(), -FRAC_PI_2);
        assert!("Q".parse::<Bb84Symbol>().is_err());
    }

    #[test]
    fn mutually_unbiased_table() {
        for s in Bb84Symbol::ALL {
            for a in Bb84Symbol::ALL {
                let p = projection_prob(&s.state(), a).unwrap();
                let expected = if a == s {
                    1.0
                } else if a == s.orthogonal() {
                    0.0
                } else {
                    0.5
                };
                assert!((p - expected).abs() < EPS, "{s} on {a}: {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn phase_additivity(
            h in (-1.0..1.0f64, -1.0..1.0f64),
            v in (-1.0..1.0f64, -1.0..1.0f64),
            a in -10.0..10.0f64,
            b in -10.0..10.0f64,
        ) {
            let raw = JonesVector::new(Complex64::new(h.0, h.1), Complex64::new(v.0, v.1));
            prop_assume!(raw.norm_sqr() > 1e-6);
            let s = raw.normalized().unwrap();
            let lhs = apply_relative_phase(&apply_relative_phase(&s, a), b);
            let rhs = apply_relative_phase(&s, a + b);
            prop_assert!((lhs.a_h - rhs.a_h).norm() < EPS);
            prop_assert!((lhs.a_v - rhs.a_v).norm() < EPS);
            prop_assert!((lhs.norm_sqr() - s.norm_sqr()).abs() < EPS);
        }

        #[test]
        fn phase_states_trace_equator(phi in -20.0..20.0f64) {
            let s = jones_to_stokes(&state_from_phase(phi).unwrap());
            prop_assert!(s.s1.abs() < EPS);
            prop_assert!((s.s2 - phi.cos()).abs() < EPS);
            prop_assert!((s.s3 - phi.sin()).abs() < EPS);
        }

        #[test]
        fn analyzer_pair_sums_to_one(phi in -10.0..10.0f64) {
            let s = state_from_phase(phi).unwrap();
            for basis in [Basis::X, Basis::Y] {
                let [a, b] = basis.symbols();
                let total = projection_prob(&s, a).unwrap() + projection_prob(&s, b).unwrap();
                prop_assert!((total - 1.0).abs() < EPS);
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < EPS);
        }
    }
}
