//! Single-qubit linear algebra.
//!
//! Everything here works on 2×2 complex matrices. Hermitian operators are
//! handled through their Pauli decomposition `a·I + b·σ`, which gives the
//! eigen-decomposition in closed form: eigenvalues `a ± |b|` with spectral
//! projectors `(I ± b̂·σ)/2`. No iterative methods are used anywhere.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entrywise tolerance for the Hermitian / trace / positivity invariants.
pub const STATE_TOL: f64 = 1e-12;

/// Eigenvalues at or below this are treated as zero when inverting a mixture.
pub const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("cone deviation defined for pure states only")]
    NotPure,
    #[error("singular ensemble mixture")]
    SingularMixture,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("polar angle {0} outside [0, pi]")]
    PolarOutOfRange(f64),
    #[error("prior {0} outside [0, 1]")]
    InvalidPrior(f64),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A general complex 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    /// `a·I + bx·σx + by·σy + bz·σz`.
    pub fn from_pauli(a: f64, b: [f64; 3]) -> Self {
        let [bx, by, bz] = b;
        Mat2([
            [Complex64::new(a + bz, 0.0), Complex64::new(bx, -by)],
            [Complex64::new(bx, by), Complex64::new(a - bz, 0.0)],
        ])
    }

    /// Pauli coefficients `(a, [bx, by, bz])` of the Hermitian part.
    pub fn pauli_coefficients(&self) -> (f64, [f64; 3]) {
        let m = &self.0;
        let a = 0.5 * (m[0][0].re + m[1][1].re);
        let bz = 0.5 * (m[0][0].re - m[1][1].re);
        let off = 0.5 * (m[1][0] + m[0][1].conj());
        (a, [off.re, off.im, bz])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues `(low, high)` of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let (a, b) = self.pauli_coefficients();
        let r = norm3(b);
        (a - r, a + r)
    }

    /// Applies `f` to the spectrum of the Hermitian part.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Mat2 {
        let (a, b) = self.pauli_coefficients();
        let r = norm3(b);
        if r == 0.0 {
            return Mat2::IDENTITY.scale(f(a));
        }
        let hi = f(a + r);
        let lo = f(a - r);
        let n = [b[0] / r, b[1] / r, b[2] / r];
        // hi·(I + n·σ)/2 + lo·(I − n·σ)/2
        Mat2::from_pauli(0.5 * (hi + lo), scale3(n, 0.5 * (hi - lo)))
    }

    /// Projector onto the top eigenvector of the Hermitian part. For a
    /// degenerate spectrum the |0⟩ projector is returned.
    pub fn top_eigenprojector(&self) -> Mat2 {
        let (_, b) = self.pauli_coefficients();
        let r = norm3(b);
        let n = if r == 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            scale3(b, 1.0 / r)
        };
        Mat2::from_pauli(0.5, scale3(n, 0.5))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Bloch-sphere coordinates of a qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QuantumError> {
        let v = BlochVector { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(QuantumError::InvalidState("non-finite Bloch vector".into()));
        }
        if v.norm() > 1.0 + STATE_TOL {
            return Err(QuantumError::InvalidState(format!(
                "Bloch vector norm {} exceeds 1",
                v.norm()
            )));
        }
        Ok(v)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn from_array(v: [f64; 3]) -> Self {
        BlochVector {
            x: v[0],
            y: v[1],
            z: v[2],
        }
    }

    pub fn norm(&self) -> f64 {
        norm3(self.as_array())
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        dot3(self.as_array(), other.as_array())
    }

    /// Angle between the two vectors' directions, in radians.
    pub fn angle_to(&self, other: &BlochVector) -> f64 {
        let (a, b) = (self.as_array(), other.as_array());
        norm3(cross3(a, b)).atan2(dot3(a, b))
    }
}

/// A 2×2 density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix2 {
    m: Mat2,
}

impl DensityMatrix2 {
    pub fn new(m: Mat2) -> Result<Self, QuantumError> {
        if !m.is_hermitian(STATE_TOL) {
            return Err(QuantumError::InvalidState("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QuantumError::InvalidState(format!("trace {tr} != 1")));
        }
        let (lo, _) = m.hermitian_eigenvalues();
        if lo < -STATE_TOL {
            return Err(QuantumError::InvalidState(format!(
                "negative eigenvalue {lo}"
            )));
        }
        Ok(DensityMatrix2 { m })
    }

    pub fn from_bloch(v: BlochVector) -> Result<Self, QuantumError> {
        let v = BlochVector::new(v.x, v.y, v.z)?;
        Ok(DensityMatrix2 {
            m: Mat2::from_pauli(0.5, scale3(v.as_array(), 0.5)),
        })
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix2 {
            m: Mat2::IDENTITY.scale(0.5),
        }
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, DensityMatrix2)]) -> Result<Self, QuantumError> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(QuantumError::InvalidState(format!(
                "mixture weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        let m = parts
            .iter()
            .fold(Mat2::ZERO, |acc, (w, s)| acc + s.m.scale(*w));
        DensityMatrix2::new(m)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn bloch(&self) -> BlochVector {
        let (_, b) = self.m.pauli_coefficients();
        BlochVector::from_array(scale3(b, 2.0))
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        self.m.hermitian_eigenvalues()
    }

    pub fn is_pure(&self) -> bool {
        (self.bloch().norm() - 1.0).abs() <= STATE_TOL
    }

    /// `Tr[O ρ]` for a Hermitian observable `O`.
    pub fn expectation(&self, observable: &Mat2) -> f64 {
        (*observable * self.m).trace().re
    }
}

impl fmt::Display for DensityMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.bloch();
        write!(f, "ρ(bloch = [{:.6}, {:.6}, {:.6}])", b.x, b.y, b.z)
    }
}

/// A BB84 preparation label: encoded bit `t` in basis `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bb84Label {
    pub t: bool,
    pub u: bool,
}

impl Bb84Label {
    pub const fn new(t: bool, u: bool) -> Self {
        Bb84Label { t, u }
    }

    /// Position in the ordering (0,0), (0,1), (1,0), (1,1).
    pub fn index(&self) -> usize {
        2 * self.t as usize + self.u as usize
    }

    pub fn from_index(i: usize) -> Self {
        Bb84Label {
            t: i & 2 != 0,
            u: i & 1 != 0,
        }
    }

    pub fn all() -> [Bb84Label; 4] {
        [0, 1, 2, 3].map(Bb84Label::from_index)
    }

    /// Ideal Bloch vector: |0⟩ = +z, |1⟩ = −z, |+⟩ = +x, |−⟩ = −x.
    pub fn bloch(&self) -> BlochVector {
        let s = if self.t { -1.0 } else { 1.0 };
        if self.u {
            BlochVector {
                x: s,
                y: 0.0,
                z: 0.0,
            }
        } else {
            BlochVector {
                x: 0.0,
                y: 0.0,
                z: s,
            }
        }
    }
}

pub fn bb84_state(label: Bb84Label) -> DensityMatrix2 {
    DensityMatrix2 {
        m: Mat2::from_pauli(0.5, scale3(label.bloch().as_array(), 0.5)),
    }
}

/// Tangent frame `(e1, e2)` at a unit Bloch vector. `e1` points along the
/// great circle towards +z; on the ±z poles it falls back to +x.
fn tangent_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let z = [0.0, 0.0, 1.0];
    let toward_z = [z[0] - n[2] * n[0], z[1] - n[2] * n[1], z[2] - n[2] * n[2]];
    let len = norm3(toward_z);
    let e1 = if len < 1e-9 {
        [1.0, 0.0, 0.0]
    } else {
        scale3(toward_z, 1.0 / len)
    };
    let e2 = cross3(n, e1);
    (e1, e2)
}

/// Rotates a pure state by `polar` radians on the Bloch sphere. The azimuth is
/// measured around the state's Bloch vector starting from the great circle
/// through +z (towards +z); for states at the poles the reference is +x.
pub fn deviate_on_cone(
    state: &DensityMatrix2,
    polar: f64,
    azimuth: f64,
) -> Result<DensityMatrix2, QuantumError> {
    if !state.is_pure() {
        return Err(QuantumError::NotPure);
    }
    if !(0.0..=PI).contains(&polar) {
        return Err(QuantumError::PolarOutOfRange(polar));
    }
    let b = state.bloch().as_array();
    let n = scale3(b, 1.0 / norm3(b));
    let (e1, e2) = tangent_frame(n);
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    let mut v = [0.0; 3];
    for k in 0..3 {
        v[k] = cp * n[k] + sp * (ca * e1[k] + sa * e2[k]);
    }
    let v = scale3(v, 1.0 / norm3(v));
    Ok(DensityMatrix2 {
        m: Mat2::from_pauli(0.5, scale3(v, 0.5)),
    })
}

/// Born-rule probability of `outcome` when measuring `state` in BB84 basis `basis`.
pub fn measure_prob(state: &DensityMatrix2, basis: bool, outcome: bool) -> f64 {
    let proj = bb84_state(Bb84Label::new(outcome, basis));
    state.expectation(proj.matrix()).clamp(0.0, 1.0)
}

/// Result of a maximum-confidence optimisation.
#[derive(Clone, Copy, Debug)]
pub struct MaxConfidence {
    pub value: f64,
    /// A rank-one positive operator attaining the maximum (up to scaling).
    pub operator: Mat2,
}

/// `max_{Q ≥ 0} prior·Tr[Qχ] / Tr[Qρ]`, evaluated as
/// `prior · λ_max(ρ^{-1/2} χ ρ^{-1/2})`.
pub fn max_confidence(
    prior: f64,
    target: &DensityMatrix2,
    mixture: &DensityMatrix2,
) -> Result<MaxConfidence, QuantumError> {
    if !(0.0..=1.0).contains(&prior) {
        return Err(QuantumError::InvalidPrior(prior));
    }
    let (lo, _) = mixture.eigenvalues();
    if lo <= RANK_TOL {
        return Err(QuantumError::SingularMixture);
    }
    let inv_sqrt = mixture.matrix().hermitian_map(|x| 1.0 / x.sqrt());
    let whitened = inv_sqrt * *target.matrix() * inv_sqrt;
    let (_, top) = whitened.hermitian_eigenvalues();
    let operator = inv_sqrt * whitened.top_eigenprojector() * inv_sqrt;
    Ok(MaxConfidence {
        value: prior * top,
        operator,
    })
}

pub fn max_confidence_value(
    prior: f64,
    target: &DensityMatrix2,
    mixture: &DensityMatrix2,
) -> Result<f64, QuantumError> {
    max_confidence(prior, target, mixture).map(|mc| mc.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pure(rng: &mut impl Rng) -> DensityMatrix2 {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        DensityMatrix2::from_bloch(BlochVector::new(s * phi.cos(), s * phi.sin(), z).unwrap())
            .unwrap()
    }

    #[test]
    fn bb84_projectors() {
        let zero = bb84_state(Bb84Label::new(false, false));
        assert!(
            zero.matrix()
                .max_abs_diff(&Mat2::from_pauli(0.5, [0.0, 0.0, 0.5]))
                < 1e-15
        );
        assert_eq!(zero.matrix().0[0][0].re, 1.0);
        assert_eq!(zero.matrix().0[1][1].re, 0.0);
        let plus = bb84_state(Bb84Label::new(false, true));
        for row in plus.matrix().0 {
            for e in row {
                assert!((e - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            }
        }
        for l in Bb84Label::all() {
            let s = bb84_state(l);
            assert!((s.matrix().trace().re - 1.0).abs() < 1e-15);
            assert!(s.is_pure());
            assert_eq!(Bb84Label::from_index(l.index()), l);
        }
    }

    #[test]
    fn constructor_rejects_bad_matrices() {
        let not_herm = Mat2([[ONE, ONE], [ZERO, ZERO]]);
        assert!(DensityMatrix2::new(not_herm).is_err());
        assert!(DensityMatrix2::new(Mat2::IDENTITY).is_err());
        assert!(DensityMatrix2::new(Mat2::from_pauli(0.5, [0.0, 0.0, 0.6])).is_err());
        assert!(BlochVector::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cone_deviation_edge_cases() {
        let zero = bb84_state(Bb84Label::new(false, false));
        let one = bb84_state(Bb84Label::new(true, false));
        let same = deviate_on_cone(&zero, 0.0, 1.234).unwrap();
        assert!(same.matrix().max_abs_diff(zero.matrix()) < 1e-15);
        let flipped = deviate_on_cone(&zero, PI, 0.3).unwrap();
        assert!(flipped.matrix().max_abs_diff(one.matrix()) < 1e-15);
        let mixed = DensityMatrix2::maximally_mixed();
        assert_eq!(
            deviate_on_cone(&mixed, 0.1, 0.0),
            Err(QuantumError::NotPure)
        );
        assert!(deviate_on_cone(&zero, 4.0, 0.0).is_err());
    }

    #[test]
    fn cone_deviation_preserves_requested_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = random_pure(&mut rng);
            let polar = rng.random_range(0.0..PI);
            let az = rng.random_range(0.0..2.0 * PI);
            let out = deviate_on_cone(&s, polar, az).unwrap();
            assert!(out.is_pure());
            assert!((s.bloch().angle_to(&out.bloch()) - polar).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuth_zero_moves_towards_plus_z() {
        let plus = bb84_state(Bb84Label::new(false, true));
        let out = deviate_on_cone(&plus, 0.1, 0.0).unwrap();
        assert!(out.bloch().z > 0.0 && out.bloch().y.abs() < 1e-15);
    }

    #[test]
    fn born_rule_values() {
        let zero = bb84_state(Bb84Label::new(false, false));
        assert_eq!(measure_prob(&zero, false, false), 1.0);
        assert!((measure_prob(&zero, true, false) - 0.5).abs() < 1e-15);
        for k in 0..=20 {
            let alpha = PI * k as f64 / 20.0;
            let s = deviate_on_cone(&zero, alpha, 0.7).unwrap();
            let expect = (alpha / 2.0).cos().powi(2);
            assert!((measure_prob(&s, false, false) - expect).abs() < 1e-12);
        }
        let side = deviate_on_cone(&zero, PI / 2.0, 0.0).unwrap();
        assert!((measure_prob(&side, false, false) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = random_pure(&mut rng);
            let w: f64 = rng.random_range(0.0..1.0);
            let mixed =
                DensityMatrix2::mixture(&[(w, s), (1.0 - w, DensityMatrix2::maximally_mixed())])
                    .unwrap();
            let back = DensityMatrix2::from_bloch(mixed.bloch()).unwrap();
            assert!(back.matrix().max_abs_diff(mixed.matrix()) < 1e-12);
        }
    }

    #[test]
    fn max_confidence_closed_forms() {
        let half = DensityMatrix2::maximally_mixed();
        assert!((max_confidence_value(0.5, &half, &half).unwrap() - 0.5).abs() < 1e-15);

        let zero = bb84_state(Bb84Label::new(false, false));
        let plus = bb84_state(Bb84Label::new(false, true));
        let chi = DensityMatrix2::mixture(&[(0.5, zero), (0.5, plus)]).unwrap();
        let v = max_confidence_value(0.25, &chi, &half).unwrap();
        let expect = 0.5 * (1.0 + 1.0 / 2f64.sqrt()) / 2.0;
        assert!((v - expect).abs() < 1e-15);
        assert!((v - (PI / 8.0).cos().powi(2) / 2.0).abs() < 1e-15);
        assert!((v - 0.426777).abs() < 1e-6);
    }

    #[test]
    fn singular_mixture_is_rejected() {
        let zero = bb84_state(Bb84Label::new(false, false));
        assert_eq!(
            max_confidence_value(0.5, &zero, &zero).unwrap_err(),
            QuantumError::SingularMixture
        );
    }

    /// Brute force over rank-one Q on a Fibonacci lattice of Bloch directions,
    /// with an arbitrary positive scale on Q.
    #[test]
    fn projector_grid_never_beats_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_pure(&mut rng);
            let b = random_pure(&mut rng);
            let w: f64 = rng.random_range(0.1..0.9);
            let target = DensityMatrix2::mixture(&[(w, a), (1.0 - w, b)]).unwrap();
            let noise = random_pure(&mut rng);
            let mix = DensityMatrix2::mixture(&[
                (0.3, target),
                (0.3, noise),
                (0.4, DensityMatrix2::maximally_mixed()),
            ])
            .unwrap();
            let prior = 0.3;
            let closed = max_confidence_value(prior, &target, &mix).unwrap();
            let mut best: f64 = 0.0;
            let n = 10_000;
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * k as f64;
                let scale = 0.1 + 10.0 * rng.random::<f64>();
                let q = Mat2::from_pauli(0.5, [0.5 * r * phi.cos(), 0.5 * r * phi.sin(), 0.5 * z])
                    .scale(scale);
                let ratio = prior * target.expectation(&q) / mix.expectation(&q);
                best = best.max(ratio);
            }
            assert!(best <= closed + 1e-9, "grid {best} > closed {closed}");
            assert!(best > closed - 1e-3, "grid should approach the optimum");
        }
    }

    #[test]
    fn optimal_operator_attains_value_under_scaling() {
        let zero = bb84_state(Bb84Label::new(false, false));
        let plus = bb84_state(Bb84Label::new(false, true));
        let chi = DensityMatrix2::mixture(&[(0.5, zero), (0.5, plus)]).unwrap();
        let mix = DensityMatrix2::maximally_mixed();
        let mc = max_confidence(0.25, &chi, &mix).unwrap();
        for s in [1e-3, 1.0, 250.0] {
            let q = mc.operator.scale(s);
            let ratio = 0.25 * chi.expectation(&q) / mix.expectation(&q);
            assert!((ratio - mc.value).abs() < 1e-12);
        }
    }
}
