//! Numerical kernel for `PSL(2,R)` acting on the upper half-plane.
//!
//! A [`GroupElement`] is a determinant-one real 2x2 matrix taken modulo `±I`.
//! The same matrix doubles as a unit tangent vector: `g` is the image of the
//! upward-pointing vector at `i` under the Möbius map of `g`. Right
//! multiplication by [`GroupElement::translation`] is the geodesic flow and
//! right multiplication by [`GroupElement::rotation`] turns the vector about
//! its base point.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|det - 1|` accepted by [`GroupElement::new`].
pub const DET_TOL: f64 = 1e-10;
/// Tolerance on `||tr| - 2|` used by [`GroupElement::classify`].
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypError {
    #[error("determinant {0} is not 1 within tolerance")]
    Determinant(f64),
    #[error("non-positive determinant {0}")]
    Singular(f64),
    #[error("point has non-positive imaginary part {0}")]
    NotInHalfPlane(f64),
    #[error("degenerate Möbius image (imaginary part {0})")]
    DegenerateImage(f64),
}

/// An element of `PSL(2,R)` stored with the canonical sign.
///
/// The stored representative has `c > 0`, or `c == 0 && a > 0`, or
/// `c == a == 0 && b > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds an element from row-major entries, checking the determinant.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, HypError> {
        let det = a * d - b * c;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs()).max(1.0);
        if (det - 1.0).abs() > DET_TOL * scale * scale {
            return Err(HypError::Determinant(det));
        }
        Ok(Self::raw(a, b, c, d).renormalized())
    }

    /// Builds an element from any matrix with positive determinant by scaling.
    pub fn from_positive_det(a: f64, b: f64, c: f64, d: f64) -> Result<Self, HypError> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(HypError::Singular(det));
        }
        Ok(Self::raw(a, b, c, d).renormalized())
    }

    pub(crate) fn raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }.canonical()
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// The geodesic-flow element `diag(e^{t/2}, e^{-t/2})`.
    pub fn translation(t: f64) -> Self {
        let h = (0.5 * t).exp();
        Self::raw(h, 0.0, 0.0, 1.0 / h)
    }

    /// Rotation by `theta` about `i`: `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        Self::raw(c, -s, s, c)
    }

    /// Upper unipotent `[[1, u], [0, 1]]`.
    pub fn unipotent(u: f64) -> Self {
        Self::raw(1.0, u, 0.0, 1.0)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Determinant; for large entries Kahan's fused multiply-add scheme keeps
    /// it accurate to a few ulps when `ad` and `bc` nearly cancel.
    pub fn det(&self) -> f64 {
        let (ad, bc) = (self.a * self.d, self.b * self.c);
        if ad.abs() + bc.abs() < 64.0 {
            // cancellation costs at most a few ulps of 64 here
            return ad - bc;
        }
        let w = bc;
        let err = (-self.b).mul_add(self.c, w);
        self.a.mul_add(self.d, -w) + err
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn max_norm(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    fn canonical(self) -> Self {
        let flip = if self.c != 0.0 {
            self.c < 0.0
        } else if self.a != 0.0 {
            self.a < 0.0
        } else {
            self.b < 0.0
        };
        if flip {
            Self {
                a: -self.a,
                b: -self.b,
                c: -self.c,
                d: -self.d,
            }
        } else {
            self
        }
    }

    /// Rescales so that the determinant is exactly one up to rounding.
    pub fn renormalized(self) -> Self {
        let det = self.det();
        if det > 0.0 && det != 1.0 {
            let s = det.sqrt().recip();
            Self {
                a: self.a * s,
                b: self.b * s,
                c: self.c * s,
                d: self.d * s,
            }
        } else {
            self
        }
    }

    /// Smallest (Frobenius) correction putting the determinant back at one:
    /// a step along its gradient `(d, -c, -b, a)`. Unlike uniform scaling
    /// this leaves large, ill-conditioned products essentially untouched,
    /// since their determinant error is rounding noise of size `eps |g|^2`.
    fn projected(self) -> Self {
        let det = self.det();
        if det == 1.0 {
            return self;
        }
        let norm2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let l = (1.0 - det) / norm2;
        Self {
            a: self.a + l * self.d,
            b: self.b - l * self.c,
            c: self.c - l * self.b,
            d: self.d + l * self.a,
        }
    }

    /// Matrix product followed by determinant correction and sign
    /// canonicalization.
    pub fn compose(&self, other: &Self) -> Self {
        let p = Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        };
        p.projected().canonical()
    }

    pub fn inverse(&self) -> Self {
        Self::raw(self.d, -self.b, -self.c, self.a)
    }

    /// Max-norm distance in `PSL(2,R)`, i.e. minimized over the sign.
    pub fn psl_distance(&self, other: &Self) -> f64 {
        let p = (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs());
        let m = (self.a + other.a)
            .abs()
            .max((self.b + other.b).abs())
            .max((self.c + other.c).abs())
            .max((self.d + other.d).abs());
        p.min(m)
    }

    /// `psl_distance` divided by `max(1, |self|_max)`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        self.psl_distance(other) / self.max_norm().max(1.0)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.psl_distance(&Self::IDENTITY) <= tol
    }

    /// Möbius action `(az + b) / (cz + d)`.
    pub fn mobius(&self, z: PointH) -> Result<PointH, HypError> {
        let (x, y) = (z.x, z.y);
        let re = self.c * x + self.d;
        let im = self.c * y;
        let den = re * re + im * im;
        let nx = ((self.a * x + self.b) * re + self.a * y * im) / den;
        let ny = y / den;
        if !(ny > 0.0) || !ny.is_finite() || !nx.is_finite() {
            return Err(HypError::DegenerateImage(ny));
        }
        Ok(PointH { x: nx, y: ny })
    }

    /// Action on the boundary `R ∪ {∞}`.
    pub fn mobius_boundary(&self, p: BoundaryPoint) -> BoundaryPoint {
        match p {
            BoundaryPoint::Infinity => {
                if self.c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Real(self.a / self.c)
                }
            }
            BoundaryPoint::Real(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Real((self.a * x + self.b) / den)
                }
            }
        }
    }

    /// Image of `i`, i.e. the base point of the tangent vector `self`.
    pub fn base_point(&self) -> PointH {
        let den = self.c * self.c + self.d * self.d;
        PointH {
            x: (self.a * self.c + self.b * self.d) / den,
            y: 1.0 / den,
        }
    }

    pub fn classify(&self) -> Classification {
        let tr = self.trace().abs();
        if (tr - 2.0).abs() <= TRACE_TOL {
            let kind = if self.is_identity(TRACE_TOL.sqrt()) {
                Kind::Identity
            } else {
                Kind::Parabolic
            };
            Classification {
                kind,
                translation_length: 0.0,
            }
        } else if tr < 2.0 {
            Classification {
                kind: Kind::Elliptic,
                translation_length: 0.0,
            }
        } else {
            Classification {
                kind: Kind::Hyperbolic,
                translation_length: 2.0 * (0.5 * tr).acosh(),
            }
        }
    }

    /// Fixed points on the boundary (one for parabolic, two for hyperbolic).
    pub fn fixed_points(&self) -> Vec<BoundaryPoint> {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        if c.abs() < 1e-300 {
            let mut out = vec![BoundaryPoint::Infinity];
            if (a - d).abs() > 1e-15 {
                out.push(BoundaryPoint::Real(b / (d - a)));
            }
            return out;
        }
        // c z^2 + (d - a) z - b = 0
        let disc = (d - a) * (d - a) + 4.0 * b * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        if sq == 0.0 {
            return vec![BoundaryPoint::Real((a - d) / (2.0 * c))];
        }
        vec![
            BoundaryPoint::Real((a - d + sq) / (2.0 * c)),
            BoundaryPoint::Real((a - d - sq) / (2.0 * c)),
        ]
    }

    /// Decomposition `self = n(u) a_t R_θ`.
    pub fn iwasawa(&self) -> IwasawaCoords {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let r2 = c * c + d * d;
        IwasawaCoords {
            u: (a * c + b * d) / r2,
            t: -r2.ln(),
            theta: canonical_angle(2.0 * c.atan2(d)),
        }
    }

    /// Decomposition `self = R_{θ1} a_t R_{θ2}` with `t >= 0`, via the
    /// closed-form 2x2 singular value decomposition.
    pub fn cartan(&self) -> CartanCoords {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let e = 0.5 * (a + d);
        let f = 0.5 * (a - d);
        let g = 0.5 * (c + b);
        let h = 0.5 * (c - b);
        let q = e.hypot(h);
        let r = f.hypot(g);
        let alpha = g.atan2(f);
        let beta = h.atan2(e);
        CartanCoords {
            theta1: canonical_angle(beta + alpha),
            t: 2.0 * (q + r).ln(),
            theta2: canonical_angle(beta - alpha),
        }
    }

    /// Twice the log of the largest singular value.
    pub fn cartan_t(&self) -> f64 {
        let e = 0.5 * (self.a + self.d);
        let f = 0.5 * (self.a - self.d);
        let g = 0.5 * (self.c + self.b);
        let h = 0.5 * (self.c - self.b);
        2.0 * (e.hypot(h) + f.hypot(g)).ln()
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: Self) -> GroupElement {
        self.compose(rhs)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: Kind,
    pub translation_length: f64,
}

/// A point `x + iy` of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointH {
    x: f64,
    y: f64,
}

impl PointH {
    pub const I: PointH = PointH { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Result<Self, HypError> {
        if !(y > 0.0) || !y.is_finite() || !x.is_finite() {
            return Err(HypError::NotInHalfPlane(y));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Hyperbolic distance, computed as `2 asinh(|z - w| / (2 sqrt(y y')))`.
    pub fn distance(&self, other: &PointH) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let e = dx.hypot(dy);
        2.0 * (0.5 * e / (self.y * other.y).sqrt()).asinh()
    }

    /// Point on the hyperboloid `X0^2 - X1^2 - X2^2 = 1` (with `i ↦ (1,0,0)`).
    pub fn hyperboloid(&self) -> [f64; 3] {
        let r2 = self.x * self.x + self.y * self.y;
        let inv = 0.5 / self.y;
        [(1.0 + r2) * inv, self.x / self.y, (r2 - 1.0) * inv]
    }

    /// Element `n(x) a_{ln y}` carrying `i` to this point.
    pub fn lift(&self) -> GroupElement {
        let s = self.y.sqrt();
        GroupElement::raw(s, self.x / s, 0.0, 1.0 / s)
    }
}

/// Minkowski form `X0 Y0 - X1 Y1 - X2 Y2`; `cosh d(z, w) = B(X(z), X(w))`.
pub fn minkowski(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    x[0] * y[0] - x[1] * y[1] - x[2] * y[2]
}

/// Inverse of [`PointH::hyperboloid`].
pub fn from_hyperboloid(x: &[f64; 3]) -> Result<PointH, HypError> {
    let y = 1.0 / (x[0] - x[2]);
    PointH::new(x[1] * y, y)
}

/// A point of `R ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Real(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Position on the circle, `2 atan(x)` in `(-π, π]`, with `∞ ↦ π`.
    pub fn circle_angle(&self) -> f64 {
        match *self {
            BoundaryPoint::Infinity => PI,
            BoundaryPoint::Real(x) => 2.0 * x.atan(),
        }
    }

    /// Angular separation on the boundary circle.
    pub fn separation(&self, other: &BoundaryPoint) -> f64 {
        let d = (self.circle_angle() - other.circle_angle()).rem_euclid(TAU);
        d.min(TAU - d)
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPoint::Infinity => write!(f, "∞"),
            BoundaryPoint::Real(x) => write!(f, "{x}"),
        }
    }
}

/// A unit tangent vector of the hyperbolic plane, identified with `PSL(2,R)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent(pub GroupElement);

impl UnitTangent {
    /// The upward vector at `i`.
    pub fn upright() -> Self {
        UnitTangent(GroupElement::IDENTITY)
    }

    /// Vector at `z` making angle `theta` with the upward direction.
    pub fn at(z: PointH, theta: f64) -> Self {
        UnitTangent(z.lift().compose(&GroupElement::rotation(theta)))
    }

    pub fn rep(&self) -> &GroupElement {
        &self.0
    }

    pub fn base_point(&self) -> PointH {
        self.0.base_point()
    }

    pub fn geodesic_flow(&self, t: f64) -> Self {
        UnitTangent(self.0.compose(&GroupElement::translation(t)))
    }

    pub fn rotate(&self, theta: f64) -> Self {
        UnitTangent(self.0.compose(&GroupElement::rotation(theta)))
    }

    /// Left action of a group element (deck transformation).
    pub fn left(&self, g: &GroupElement) -> Self {
        UnitTangent(g.compose(&self.0))
    }

    /// Right action of a group element (walk step).
    pub fn right(&self, g: &GroupElement) -> Self {
        UnitTangent(self.0.compose(g))
    }
}

/// Coordinates of `g = n(u) a_t R_θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwasawaCoords {
    pub u: f64,
    pub t: f64,
    pub theta: f64,
}

impl IwasawaCoords {
    pub fn reconstruct(&self) -> GroupElement {
        GroupElement::unipotent(self.u)
            .compose(&GroupElement::translation(self.t))
            .compose(&GroupElement::rotation(self.theta))
    }
}

/// Coordinates of `g = R_{θ1} a_t R_{θ2}` with `t >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartanCoords {
    pub theta1: f64,
    pub t: f64,
    pub theta2: f64,
}

impl CartanCoords {
    pub fn reconstruct(&self) -> GroupElement {
        GroupElement::rotation(self.theta1)
            .compose(&GroupElement::translation(self.t))
            .compose(&GroupElement::rotation(self.theta2))
    }
}

/// Running product of many elements whose entries would overflow `f64`.
///
/// The product is held as `e^{log_scale} * m`; `m` is rescaled to unit
/// max-norm every [`RunningProduct::RESCALE_EVERY`] multiplications, which
/// also absorbs determinant drift.
#[derive(Clone, Debug)]
pub struct RunningProduct {
    m: [f64; 4],
    log_scale: f64,
    pending: u32,
}

impl Default for RunningProduct {
    fn default() -> Self {
        Self::new()
    }
}

impl RunningProduct {
    pub const RESCALE_EVERY: u32 = 64;

    pub fn new() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 1.0],
            log_scale: 0.0,
            pending: 0,
        }
    }

    pub fn push(&mut self, g: &GroupElement) {
        let [a, b, c, d] = self.m;
        self.m = [
            a * g.a + b * g.c,
            a * g.b + b * g.d,
            c * g.a + d * g.c,
            c * g.b + d * g.d,
        ];
        self.pending += 1;
        if self.pending >= Self::RESCALE_EVERY {
            self.rescale();
        }
    }

    fn rescale(&mut self) {
        let s = self.m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if s > 0.0 && s.is_finite() {
            for v in &mut self.m {
                *v /= s;
            }
            self.log_scale += s.ln();
        }
        self.pending = 0;
    }

    /// Cartan projection `2 ln s_max` of the accumulated product.
    pub fn cartan_t(&self) -> f64 {
        let [a, b, c, d] = self.m;
        let e = 0.5 * (a + d);
        let f = 0.5 * (a - d);
        let g = 0.5 * (c + b);
        let h = 0.5 * (c - b);
        2.0 * (self.log_scale + (e.hypot(h) + f.hypot(g)).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(g: &GroupElement, h: &GroupElement, tol: f64) -> bool {
        g.psl_distance(h) <= tol
    }

    fn random_element(rng: &mut ChaCha8Rng, bound: f64) -> GroupElement {
        loop {
            let a: f64 = rng.random_range(-bound..bound);
            let b: f64 = rng.random_range(-bound..bound);
            let c: f64 = rng.random_range(-bound..bound);
            let d: f64 = rng.random_range(-bound..bound);
            if let Ok(g) = GroupElement::from_positive_det(a, b, c, d) {
                if g.max_norm() <= bound * 10.0 {
                    return g;
                }
            }
        }
    }

    #[test]
    fn compose_identity_and_one_parameter_subgroup() {
        let g = GroupElement::new(2.0, 3.0, 1.0, 2.0).unwrap();
        assert!(close(&(GroupElement::identity() * g), &g, 1e-15));
        let st = GroupElement::translation(0.7) * GroupElement::translation(1.1);
        assert!(close(&st, &GroupElement::translation(1.8), 1e-14));
    }

    #[test]
    fn conjugated_translation_matches_hand_product() {
        let l = 1.3_f64;
        let g = GroupElement::rotation(-PI / 2.0)
            * (GroupElement::translation(l) * GroupElement::rotation(PI / 2.0));
        let (ch, sh) = ((l / 2.0).cosh(), (l / 2.0).sinh());
        let expected = GroupElement::new(ch, -sh, -sh, ch).unwrap();
        assert!(close(&g, &expected, 1e-14));
    }

    #[test]
    fn inverse_cases() {
        assert!(close(&GroupElement::identity().inverse(), &GroupElement::identity(), 0.0));
        assert!(close(
            &GroupElement::translation(0.4).inverse(),
            &GroupElement::translation(-0.4),
            1e-15
        ));
        let u = GroupElement::new(1.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(u.inverse().entries(), [1.0, -2.0, 0.0, 1.0]);
        assert!((u * u.inverse()).is_identity(1e-15));
    }

    #[test]
    fn translation_and_rotation_constructors() {
        assert!(GroupElement::translation(0.0).is_identity(0.0));
        assert!(GroupElement::rotation(TAU).is_identity(1e-15));
        let t = 2.0 * (1.0 + 2f64.sqrt()).ln();
        let g = GroupElement::translation(t);
        let [a, _, _, d] = g.entries();
        assert_abs_diff_eq!(a, 1.0 + 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(d, 2f64.sqrt() - 1.0, epsilon = 1e-14);
        // 2 asinh(1) is the same number
        assert_abs_diff_eq!(t, 2.0 * 1f64.asinh(), epsilon = 1e-15);
    }

    #[test]
    fn mobius_cases() {
        let z = PointH::new(0.3, 2.0).unwrap();
        assert_eq!(GroupElement::identity().mobius(z).unwrap(), z);
        let w = GroupElement::translation(1.5).mobius(PointH::I).unwrap();
        assert_abs_diff_eq!(w.x(), 0.0);
        assert_abs_diff_eq!(w.y(), 1.5f64.exp(), epsilon = 1e-14);
        let w = GroupElement::new(1.0, 2.0, 0.0, 1.0).unwrap().mobius(PointH::I).unwrap();
        assert_eq!((w.x(), w.y()), (2.0, 1.0));
        assert!(PointH::new(0.0, 0.0).is_err());
        assert!(PointH::new(0.0, -1.0).is_err());
    }

    #[test]
    fn distance_cases() {
        let z = PointH::new(-0.4, 0.7).unwrap();
        assert_eq!(z.distance(&z), 0.0);
        let w = PointH::new(0.0, 3.2f64.exp()).unwrap();
        assert_abs_diff_eq!(PointH::I.distance(&w), 3.2, epsilon = 1e-13);
        // hyperboloid form agrees
        let c = minkowski(&z.hyperboloid(), &w.hyperboloid());
        assert_abs_diff_eq!(c.acosh(), z.distance(&w), epsilon = 1e-12);
    }

    #[test]
    fn isometry_invariance_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let g = random_element(&mut rng, 3.0);
            let z = PointH::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0)).unwrap();
            let w = PointH::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0)).unwrap();
            let d0 = z.distance(&w);
            let d1 = g.mobius(z).unwrap().distance(&g.mobius(w).unwrap());
            assert!((d0 - d1).abs() <= 1e-10, "{d0} vs {d1}");
        }
    }

    #[test]
    fn iwasawa_cases() {
        let c = GroupElement::identity().iwasawa();
        assert_eq!((c.u, c.t, c.theta), (0.0, 0.0, 0.0));
        let g = GroupElement::unipotent(0.8) * GroupElement::translation(-1.2);
        let c = g.iwasawa();
        assert_abs_diff_eq!(c.u, 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(c.t, -1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(c.theta, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cartan_cases() {
        assert_abs_diff_eq!(GroupElement::identity().cartan().t, 0.0);
        assert_abs_diff_eq!(GroupElement::translation(2.5).cartan().t, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(GroupElement::translation(-2.5).cartan().t, 2.5, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (al, be, l) = (
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
                rng.random_range(0.01..8.0),
            );
            let g = GroupElement::rotation(al) * GroupElement::translation(l) * GroupElement::rotation(be);
            assert!((g.cartan().t - l).abs() < 1e-12 * l.max(1.0));
        }
    }

    #[test]
    fn classify_cases() {
        let c = GroupElement::translation(1.7).classify();
        assert_eq!(c.kind, Kind::Hyperbolic);
        assert_abs_diff_eq!(c.translation_length, 1.7, epsilon = 1e-9);
        assert_eq!(GroupElement::unipotent(2.0).classify().kind, Kind::Parabolic);
        assert_eq!(GroupElement::rotation(1.0).classify().kind, Kind::Elliptic);
        assert_eq!(GroupElement::identity().classify().kind, Kind::Identity);
    }

    #[test]
    fn geodesic_flow_cases() {
        let x = UnitTangent::at(PointH::new(0.3, 1.4).unwrap(), 0.9);
        assert!(close(x.geodesic_flow(0.0).rep(), x.rep(), 1e-15));
        let a = x.geodesic_flow(0.4).geodesic_flow(1.1);
        let b = x.geodesic_flow(1.5);
        assert!(close(a.rep(), b.rep(), 1e-13));
        let p = UnitTangent::upright().geodesic_flow(2.0).base_point();
        assert_abs_diff_eq!(p.y(), 2f64.exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(p.x(), 0.0);
        // unit speed
        let d = x.base_point().distance(&x.geodesic_flow(0.37).base_point());
        assert_abs_diff_eq!(d, 0.37, epsilon = 1e-12);
    }

    #[test]
    fn rotation_fixes_base_point() {
        let x = UnitTangent::at(PointH::new(-1.0, 0.5).unwrap(), 0.2);
        let y = x.rotate(1.3);
        assert_abs_diff_eq!(x.base_point().distance(&y.base_point()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn large_products_keep_relative_accuracy() {
        // ad and bc agree to about 12 digits here
        for t in [10.0, 20.0, 27.0, 30.0] {
            let g = GroupElement::rotation(0.9) * GroupElement::translation(t) * GroupElement::rotation(2.1);
            let [a, b, c, d] = g.entries();
            let noise = 8.0 * f64::EPSILON * ((a * d).abs() + (b * c).abs());
            assert!((g.det() - 1.0).abs() <= noise, "t = {t}: det {}", g.det());
            assert!(g.cartan().reconstruct().relative_distance(&g) <= 1e-12);
            assert!(g.iwasawa().reconstruct().relative_distance(&g) <= 1e-12);
            assert!((g.cartan().t - t).abs() <= 1e-9 * t);
        }
    }

    #[test]
    fn determinant_drift_after_many_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gens: Vec<_> = (0..8).map(|_| random_element(&mut rng, 2.0)).collect();
        let invs: Vec<_> = gens.iter().map(|g| g.inverse()).collect();
        let mut g = GroupElement::rotation(0.3);
        let mut worst = 0.0f64;
        for k in 0..500_000usize {
            let j = k % 8;
            g = g * gens[j];
            g = g * invs[j];
            worst = worst.max((g.det() - 1.0).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        assert!(g.psl_distance(&GroupElement::rotation(0.3)) < 1e-6);
    }

    #[test]
    fn running_product_tracks_cartan() {
        let mut p = RunningProduct::new();
        for _ in 0..10_000 {
            p.push(&GroupElement::translation(1.0));
        }
        assert_abs_diff_eq!(p.cartan_t(), 10_000.0, epsilon = 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = RunningProduct::new();
        let mut g = GroupElement::identity();
        for _ in 0..20 {
            let h = random_element(&mut rng, 1.5);
            p.push(&h);
            g = g * h;
        }
        assert_abs_diff_eq!(p.cartan_t(), g.cartan_t(), epsilon = 1e-9);
    }

    #[test]
    fn fixed_points_of_parabolic_and_hyperbolic() {
        let p = GroupElement::new(-3.0, 2.0, -2.0, 1.0).unwrap();
        let f = p.fixed_points();
        assert_eq!(f.len(), 1);
        assert!(matches!(f[0], BoundaryPoint::Real(x) if (x - 1.0).abs() < 1e-12));
        let h = GroupElement::translation(1.0).fixed_points();
        assert_eq!(h.len(), 2);
    }

    fn arb_element(bound: f64) -> impl Strategy<Value = GroupElement> {
        (-bound..bound, -bound..bound, -bound..bound, -bound..bound).prop_filter_map(
            "positive determinant",
            |(a, b, c, d)| GroupElement::from_positive_det(a, b, c, d).ok(),
        )
    }

    proptest! {
        #[test]
        fn group_laws(g in arb_element(100.0), h in arb_element(100.0), k in arb_element(100.0)) {
            let lhs = (g * h) * k;
            let rhs = g * (h * k);
            prop_assert!(lhs.relative_distance(&rhs) <= 1e-10);
            prop_assert!((g * g.inverse()).is_identity(1e-10));
        }

        #[test]
        fn iwasawa_round_trip(g in arb_element(1e6)) {
            prop_assert!(g.iwasawa().reconstruct().relative_distance(&g) <= 1e-12);
        }

        #[test]
        fn cartan_round_trip(g in arb_element(1e6)) {
            let c = g.cartan();
            prop_assert!(c.t >= 0.0);
            prop_assert!(c.reconstruct().relative_distance(&g) <= 1e-12);
            let s = g.cartan_t() / 2.0;
            prop_assert!((s.exp() - singular_max(&g)).abs() <= 1e-9 * singular_max(&g));
        }

        #[test]
        fn cartan_subadditive(g in arb_element(10.0), h in arb_element(10.0)) {
            prop_assert!((g * h).cartan_t() <= g.cartan_t() + h.cartan_t() + 1e-9);
        }

        #[test]
        fn canonical_sign(g in arb_element(10.0)) {
            let [a, b, c, _] = g.entries();
            prop_assert!(c > 0.0 || (c == 0.0 && (a > 0.0 || (a == 0.0 && b > 0.0))));
        }
    }

    // independent oracle: largest eigenvalue of g^T g
    fn singular_max(g: &GroupElement) -> f64 {
        let [a, b, c, d] = g.entries();
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let tr = p + r;
        let det = p * r - q * q;
        (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt()
    }
}
