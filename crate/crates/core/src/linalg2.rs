//! Exact 2x2 linear algebra for trace-zero matrices with purely imaginary
//! eigenvalues: closed-form exponentials, rotation normal forms, and the
//! trace criterion that separates proportional from non-proportional pairs.
//!
//! A trace-zero matrix `[[a, b], [c, -a]]` has imaginary spectrum exactly
//! when `a^2 + bc < 0`, i.e. when its determinant `-(a^2 + bc)` is positive.
//! Its orbits are ellipses; `omega = sqrt(-(a^2 + bc))` is the angular
//! frequency and `e^{tA} = cos(omega t) I + sin(omega t)/omega A`.

use core::fmt;

use num_traits::Float;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use crate::error::LinalgError;

/// Scale-invariant tolerance used by [`is_proportional`] when none is given.
pub const DEFAULT_PROPORTIONALITY_TOL: f64 = 1e-9;

/// Relative margin on `phi^2 > 4` in [`trace_criterion`]. Proportional pairs
/// land on 4 up to a few ulps; anything farther than this margin is a genuine
/// separation of the eigenvalue moduli.
const TRACE_CRITERION_MARGIN: f64 = 1e-12;

/// Plain 2x2 real matrix, row major. Used for exponentials and change-of-basis
/// matrices, which are generally not trace-zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

/// Trace-zero 2x2 matrix `[[a, b], [c, -a]]`. The bottom-right entry is
/// stored implicitly, so the trace is zero by construction. Entries are
/// rates (1/time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceZeroMatrix2 {
    a: f64,
    b: f64,
    c: f64,
}

impl TraceZeroMatrix2 {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub const fn a(&self) -> f64 {
        self.a
    }

    pub const fn b(&self) -> f64 {
        self.b
    }

    pub const fn c(&self) -> f64 {
        self.c
    }

    /// Determinant `-(a^2 + bc)`; positive exactly when the spectrum is
    /// purely imaginary.
    pub fn det(&self) -> f64 {
        -(self.a * self.a + self.b * self.c)
    }

    pub fn has_imaginary_spectrum(&self) -> bool {
        self.det() > 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.c == 0.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn to_mat2(&self) -> Mat2 {
        Mat2([[self.a, self.b], [self.c, -self.a]])
    }

    /// Rebuild from a full matrix whose trace is zero up to roundoff, by
    /// splitting the diagonal symmetrically. Used after similarity
    /// transforms, which preserve the trace exactly only in exact arithmetic.
    pub fn from_mat2_symmetrized(m: &Mat2) -> Self {
        Self::new(0.5 * (m.0[0][0] - m.0[1][1]), m.0[0][1], m.0[1][0])
    }
}

/// Matrices serialize as row-major `[a, b, c, -a]`; on input the trace must
/// vanish to within `1e-14` of the Frobenius norm.
impl Serialize for TraceZeroMatrix2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.a, self.b, self.c, -self.a].serialize(s)
    }
}

impl<'de> Deserialize<'de> for TraceZeroMatrix2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = <[f64; 4]>::deserialize(d)?;
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3]).sqrt();
        let trace = m[0] + m[3];
        if trace.abs() > 1e-14 * norm {
            return Err(D::Error::custom(
                "matrix trace must vanish (expected row-major [a, b, c, -a])",
            ));
        }
        Ok(Self::new(0.5 * (m[0] - m[3]), m[1], m[2]))
    }
}

/// Angular frequency `omega = sqrt(-(a^2 + bc))`, radians per unit time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Frequency(f64);

impl Frequency {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Coefficients `(q11, q12, q22)` of the conserved quadratic form
/// `Q(y) = q11 y1^2 + 2 q12 y1 y2 + q22 y2^2` of a trace-zero flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticInvariant {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl QuadraticInvariant {
    pub fn eval(&self, y: [f64; 2]) -> f64 {
        self.q11 * y[0] * y[0] + 2.0 * self.q12 * y[0] * y[1] + self.q22 * y[1] * y[1]
    }
}

/// `omega = sqrt(-(a^2 + bc))`. Errors if `a^2 + bc >= 0` (real eigenvalue;
/// the degenerate boundary case is rejected, not clamped).
pub fn omega(m: &TraceZeroMatrix2) -> Result<Frequency, LinalgError> {
    let d = m.det();
    if d <= 0.0 {
        return Err(LinalgError::SpectralCondition);
    }
    Ok(Frequency(d.sqrt()))
}

/// Closed-form exponential `e^{tA} = cos(omega t) I + sin(omega t)/omega A`.
/// Valid for any real `t`; the result has unit determinant in exact
/// arithmetic.
pub fn expm(m: &TraceZeroMatrix2, t: f64) -> Result<Mat2, LinalgError> {
    let w = omega(m)?;
    Ok(expm_with_omega(m, w.value(), t))
}

/// Exponential with a precomputed frequency, for use in segment loops.
pub(crate) fn expm_with_omega(m: &TraceZeroMatrix2, w: f64, t: f64) -> Mat2 {
    let (s, c) = (w * t).sin_cos();
    let k = s / w;
    Mat2([[c + k * m.a, k * m.b], [k * m.c, c - k * m.a]])
}

/// True iff `A1 = gamma A0` for some real `gamma != 0`, up to `tol` in a
/// scale-invariant metric: both matrices are normalized to unit Frobenius
/// norm and compared up to sign.
pub fn is_proportional(
    a0: &TraceZeroMatrix2,
    a1: &TraceZeroMatrix2,
    tol: f64,
) -> Result<bool, LinalgError> {
    let n0 = a0.frobenius_norm();
    let n1 = a1.frobenius_norm();
    if n0 == 0.0 || n1 == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let u = a0.scale(1.0 / n0);
    let v = a1.scale(1.0 / n1);
    let dist = |sign: f64| -> f64 {
        let da = u.a - sign * v.a;
        let db = u.b - sign * v.b;
        let dc = u.c - sign * v.c;
        (2.0 * da * da + db * db + dc * dc).sqrt()
    };
    Ok(dist(1.0).min(dist(-1.0)) <= tol)
}

/// Result of the trace criterion: the extremal squared trace of
/// `e^{s A0} e^{t A1}` and whether it exceeds 4, i.e. whether some product of
/// the two flows has eigenvalues of distinct moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCriterion {
    pub phi_star_sq: f64,
    pub distinct_moduli: bool,
}

/// Extremal squared trace `phi(s*, t*)^2 = Tr(A0 A1)^2 / (omega0^2 omega1^2)`,
/// evaluated after conjugating the pair so that `A0` is the rotation
/// generator (the coordinates in which the extremal formula is derived; the
/// value itself is a similarity invariant). `distinct_moduli` is equivalent
/// to the pair being non-proportional.
pub fn trace_criterion(
    a0: &TraceZeroMatrix2,
    a1: &TraceZeroMatrix2,
) -> Result<TraceCriterion, LinalgError> {
    let w0 = omega(a0)?.value();
    let w1 = omega(a1)?.value();
    let (g, b0) = normal_form(a0)?;
    let g_inv = g.inverse().ok_or(LinalgError::SpectralCondition)?;
    let b1 = TraceZeroMatrix2::from_mat2_symmetrized(&g.mul(&a1.to_mat2()).mul(&g_inv));
    let tr = trace_product(&b0, &b1);
    let phi_star_sq = (tr * tr) / (w0 * w0 * w1 * w1);
    Ok(TraceCriterion {
        phi_star_sq,
        distinct_moduli: phi_star_sq > 4.0 * (1.0 + TRACE_CRITERION_MARGIN),
    })
}

/// `Tr(XY)` for two trace-zero matrices.
fn trace_product(x: &TraceZeroMatrix2, y: &TraceZeroMatrix2) -> f64 {
    2.0 * x.a * y.a + x.b * y.c + x.c * y.b
}

/// Conjugates `A` into the rotation generator: returns `(G, B)` with
/// `B = G A G^{-1} = [[0, -omega], [omega, 0]]` and `|det G| = 1`.
///
/// `G` is built from the real and imaginary parts of the complex eigenvector
/// `(b, -a + i omega)` for the eigenvalue `i omega` (well defined because
/// `bc < 0` forces `b != 0`), then normalized to unit determinant magnitude.
/// A matrix already in rotation form maps to itself with `G = I`.
pub fn normal_form(m: &TraceZeroMatrix2) -> Result<(Mat2, TraceZeroMatrix2), LinalgError> {
    let w = omega(m)?.value();
    if m.a == 0.0 && m.c > 0.0 && m.b == -m.c {
        return Ok((Mat2::IDENTITY, *m));
    }
    // P = [Im v | Re v] satisfies A P = P R, so G = P^{-1}.
    let p = Mat2([[0.0, m.b], [w, -m.a]]);
    let s = p.det().abs().sqrt();
    let g = p
        .scale(1.0 / s)
        .inverse()
        .ok_or(LinalgError::SpectralCondition)?;
    Ok((g, TraceZeroMatrix2::new(0.0, -w, w)))
}

/// First integral of the flow `dy/dt = Ay`: returns `(c, -a, -b)`, which is
/// positive- or negative-definite exactly when the spectrum is imaginary.
pub fn quadratic_invariant(m: &TraceZeroMatrix2) -> QuadraticInvariant {
    QuadraticInvariant {
        q11: m.c,
        q12: -m.a,
        q22: -m.b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(w: f64) -> TraceZeroMatrix2 {
        TraceZeroMatrix2::new(0.0, -w, w)
    }

    #[test]
    fn omega_of_reference_matrices() {
        assert_eq!(omega(&rotation(1.0)).unwrap().value(), 1.0);
        assert_eq!(omega(&TraceZeroMatrix2::new(0.0, -4.0, 1.0)).unwrap().value(), 2.0);
        assert_eq!(omega(&TraceZeroMatrix2::new(1.0, -2.0, 1.0)).unwrap().value(), 1.0);
    }

    #[test]
    fn omega_rejects_real_spectrum_and_boundary() {
        // Real eigenvalues.
        assert_eq!(
            omega(&TraceZeroMatrix2::new(1.0, 0.0, 0.0)),
            Err(LinalgError::SpectralCondition)
        );
        // Degenerate a^2 + bc = 0 exactly.
        assert_eq!(
            omega(&TraceZeroMatrix2::new(1.0, -1.0, 1.0)),
            Err(LinalgError::SpectralCondition)
        );
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let m = TraceZeroMatrix2::new(1.0, -2.0, 1.0);
        assert_eq!(expm(&m, 0.0).unwrap(), Mat2::IDENTITY);
    }

    #[test]
    fn expm_quarter_rotation() {
        let r = rotation(1.0);
        let e = expm(&r, core::f64::consts::FRAC_PI_2).unwrap();
        assert!(e.max_abs_diff(&r.to_mat2()) < 1e-15);
    }

    #[test]
    fn proportional_detects_scalings() {
        let a = TraceZeroMatrix2::new(1.0, -2.0, 1.0);
        assert!(is_proportional(&a, &a.scale(2.0), DEFAULT_PROPORTIONALITY_TOL).unwrap());
        assert!(is_proportional(&a, &a.scale(-0.3), DEFAULT_PROPORTIONALITY_TOL).unwrap());
        assert!(!is_proportional(&rotation(1.0), &a, DEFAULT_PROPORTIONALITY_TOL).unwrap());
    }

    #[test]
    fn proportional_rejects_zero_matrix() {
        let z = TraceZeroMatrix2::new(0.0, 0.0, 0.0);
        assert_eq!(
            is_proportional(&z, &rotation(1.0), DEFAULT_PROPORTIONALITY_TOL),
            Err(LinalgError::ZeroMatrix)
        );
    }

    #[test]
    fn lv_jacobian_pair_proportional_iff_cross_products_match() {
        // [[0, -b p], [d q, 0]] pairs: proportional exactly when b1 d0 = b0 d1.
        let j = |b: f64, d: f64| TraceZeroMatrix2::new(0.0, -b, d);
        assert!(is_proportional(&j(1.0, 1.0), &j(2.0, 2.0), 1e-9).unwrap());
        assert!(!is_proportional(&j(1.0, 1.0), &j(2.0, 1.0), 1e-9).unwrap());
    }

    #[test]
    fn normal_form_fixes_rotations() {
        let r = rotation(2.0);
        let (g, b) = normal_form(&r).unwrap();
        assert_eq!(g, Mat2::IDENTITY);
        assert_eq!(b, r);
    }

    #[test]
    fn normal_form_of_reference_matrix() {
        let a = TraceZeroMatrix2::new(1.0, -2.0, 1.0);
        let (g, b) = normal_form(&a).unwrap();
        assert_eq!(b, rotation(1.0));
        let g_inv = g.inverse().unwrap();
        let conj = g.mul(&a.to_mat2()).mul(&g_inv);
        assert!(conj.max_abs_diff(&b.to_mat2()) < 1e-12);
        assert!((g.det().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_form_halves_omega_four() {
        let a = TraceZeroMatrix2::new(0.0, -4.0, 1.0);
        let (_, b) = normal_form(&a).unwrap();
        assert_eq!(b, rotation(2.0));
    }

    #[test]
    fn trace_criterion_boundary_and_separation() {
        let r = rotation(1.0);
        let on_boundary = trace_criterion(&r, &r).unwrap();
        assert!((on_boundary.phi_star_sq - 4.0).abs() < 1e-12);
        assert!(!on_boundary.distinct_moduli);

        // Tr(R A) = -3 with omega0 = omega1 = 1, so phi*^2 = 9.
        let a = TraceZeroMatrix2::new(1.0, -2.0, 1.0);
        let sep = trace_criterion(&r, &a).unwrap();
        assert!((sep.phi_star_sq - 9.0).abs() < 1e-12);
        assert!(sep.distinct_moduli);

        let scaled = trace_criterion(&a, &a.scale(3.5)).unwrap();
        assert!(!scaled.distinct_moduli);
    }

    #[test]
    fn quadratic_invariant_coefficients() {
        let q = quadratic_invariant(&rotation(1.0));
        assert_eq!((q.q11, q.q12, q.q22), (1.0, 0.0, 1.0));
        let q = quadratic_invariant(&TraceZeroMatrix2::new(1.0, -2.0, 1.0));
        assert_eq!((q.q11, q.q12, q.q22), (1.0, -1.0, 2.0));
    }

    #[test]
    fn serde_round_trip_and_trace_validation() {
        let a = TraceZeroMatrix2::new(1.5, -2.0, 1.0);
        let json = serde_json_str(&a);
        assert_eq!(json, "[1.5,-2.0,1.0,-1.5]");
        let back: TraceZeroMatrix2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<TraceZeroMatrix2>("[1.0,2.0,3.0,4.0]").is_err());
    }

    fn serde_json_str(a: &TraceZeroMatrix2) -> alloc::string::String {
        serde_json::to_string(a).unwrap()
    }
}
