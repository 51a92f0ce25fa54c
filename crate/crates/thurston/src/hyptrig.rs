//! Upper half-plane primitives: geodesics by boundary endpoints, common
//! perpendiculars, holonomy representations, and the horizontal/vertical
//! decomposition of a curve against a crossing geodesic.
//!
//! All length measurements normalize to the imaginary axis first, which
//! keeps nearly-asymptotic configurations well conditioned.

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::farey::{basis_through, Slope};
use crate::torus::TorusPoint;

/// Near-parabolic absorption: |trace| below 2 + this counts as parabolic.
pub const PARABOLIC_TOL: f64 = 1e-14;
/// |trace| below 2 − this is genuinely elliptic and rejected.
const ELLIPTIC_TOL: f64 = 1e-9;
/// Relative tolerance when deduplicating crossing lifts.
const LIFT_DEDUP_TOL: f64 = 1e-9;
/// Letter cap for curve words (heights beyond this are not usable anyway).
const MAX_WORD_LETTERS: usize = 100_000;

/// A complete geodesic, recorded by its two boundary endpoints
/// (extended reals; `f64::INFINITY` is the point at infinity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geodesic {
    pub e1: f64,
    pub e2: f64,
}

impl Geodesic {
    pub fn new(e1: f64, e2: f64) -> Result<Geodesic> {
        if e1.is_nan() || e2.is_nan() {
            return Err(Error::Range("geodesic endpoint is NaN".into()));
        }
        if e1 == e2 {
            return Err(Error::Range("geodesic endpoints must be distinct".into()));
        }
        Ok(Geodesic { e1, e2 })
    }
}

/// A point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint {
    pub re: f64,
    pub im: f64,
}

/// Hyperbolic distance between interior points.
pub fn dist_h(p: &HPoint, q: &HPoint) -> f64 {
    let dx = p.re - q.re;
    let dy = p.im - q.im;
    (1.0 + (dx * dx + dy * dy) / (2.0 * p.im * q.im)).acosh()
}

/// A real 2×2 matrix acting on the half-plane by Möbius transformation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub fn identity() -> Mat2 {
        Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Mat2 {
        let det = self.det();
        Mat2 { a: self.d / det, b: -self.b / det, c: -self.c / det, d: self.a / det }
    }

    /// Boundary action; respects the point at infinity.
    pub fn apply_boundary(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return if self.c != 0.0 { self.a / self.c } else { f64::INFINITY };
        }
        let den = self.c * x + self.d;
        if den == 0.0 {
            f64::INFINITY
        } else {
            (self.a * x + self.b) / den
        }
    }

    /// Interior action (complex Möbius map).
    pub fn apply_point(&self, z: &HPoint) -> HPoint {
        // (az+b)(conj(cz+d)) / |cz+d|²
        let (zr, zi) = (z.re, z.im);
        let (nr, ni) = (self.a * zr + self.b, self.a * zi);
        let (dr, di) = (self.c * zr + self.d, self.c * zi);
        let den = dr * dr + di * di;
        HPoint {
            re: (nr * dr + ni * di) / den,
            im: (ni * dr - nr * di) / den,
        }
    }

    /// Fixed-point geodesic of a hyperbolic matrix.
    pub fn axis(&self) -> Result<Geodesic> {
        let det = self.det();
        let disc = self.trace() * self.trace() - 4.0 * det;
        if disc <= 0.0 {
            return Err(Error::Range("matrix has no axis (not hyperbolic)".into()));
        }
        if self.c.abs() < 1e-300 {
            // Upper triangular: one fixed point at infinity.
            if self.a == self.d {
                return Err(Error::Range("parabolic matrix has no axis".into()));
            }
            return Geodesic::new(self.b / (self.d - self.a), f64::INFINITY);
        }
        let r = disc.sqrt();
        Geodesic::new(
            (self.a - self.d + r) / (2.0 * self.c),
            (self.a - self.d - r) / (2.0 * self.c),
        )
    }
}

/// Translation length 2·arccosh(|tr|/2) of a hyperbolic matrix, normalized
/// to determinant one. Near-parabolic traces are absorbed to the floor
/// 2 + [`PARABOLIC_TOL`]; clearly elliptic traces are an error.
pub fn translation_length(m: &Mat2) -> Result<f64> {
    let det = m.det();
    if !(det > 0.0) {
        return Err(Error::Range("matrix must have positive determinant".into()));
    }
    let t = m.trace().abs() / det.sqrt();
    if t < 2.0 - ELLIPTIC_TOL {
        return Err(Error::Range(format!("elliptic matrix (|trace| = {t})")));
    }
    let t = t.max(2.0 + PARABOLIC_TOL);
    Ok(2.0 * (t * 0.5).acosh())
}

/// Möbius map sending g to the imaginary axis (e1 → 0, e2 → ∞),
/// preserving the upper half-plane.
fn to_imaginary_axis(g: &Geodesic) -> Mat2 {
    let m = if g.e1.is_infinite() {
        Mat2 { a: 0.0, b: -1.0, c: 1.0, d: -g.e2 }
    } else if g.e2.is_infinite() {
        Mat2 { a: 1.0, b: -g.e1, c: 0.0, d: 1.0 }
    } else {
        Mat2 { a: 1.0, b: -g.e1, c: 1.0, d: -g.e2 }
    };
    if m.det() > 0.0 {
        m
    } else {
        Mat2 { a: -m.a, b: -m.b, c: m.c, d: m.d }
    }
}

/// Circle position of a boundary point, for interleaving tests.
fn circle_angle(x: f64) -> f64 {
    if x.is_infinite() {
        std::f64::consts::PI
    } else {
        2.0 * x.atan()
    }
}

fn in_ccw_arc(x: f64, s: f64, e: f64) -> bool {
    let tau = 2.0 * std::f64::consts::PI;
    ((x - s).rem_euclid(tau)) < ((e - s).rem_euclid(tau))
}

/// Whether two geodesics with distinct endpoints cross (endpoints interleave).
pub fn geodesics_cross(g1: &Geodesic, g2: &Geodesic) -> bool {
    let (a1, a2) = (circle_angle(g1.e1), circle_angle(g1.e2));
    let (b1, b2) = (circle_angle(g2.e1), circle_angle(g2.e2));
    in_ccw_arc(b1, a1, a2) != in_ccw_arc(b2, a1, a2)
}

/// Feet and length of the unique common perpendicular of two disjoint
/// geodesics. Errors: `Crossing` if they intersect, `SharedEndpoint` if
/// they are asymptotic.
pub fn common_perpendicular(g1: &Geodesic, g2: &Geodesic) -> Result<(HPoint, HPoint, f64)> {
    if g1.e1 == g2.e1 || g1.e1 == g2.e2 || g1.e2 == g2.e1 || g1.e2 == g2.e2 {
        return Err(Error::SharedEndpoint);
    }
    if geodesics_cross(g1, g2) {
        return Err(Error::Crossing);
    }
    let s = to_imaginary_axis(g1);
    let u = s.apply_boundary(g2.e1);
    let v = s.apply_boundary(g2.e2);
    debug_assert!(u * v > 0.0, "disjoint geodesics map to one side");
    let (foot1, foot2, d) = perpendicular_to_axis(u, v);
    let si = s.inverse();
    Ok((si.apply_point(&foot1), si.apply_point(&foot2), d))
}

/// Perpendicular data between the imaginary axis and the geodesic (u, v)
/// with u·v > 0: feet (in-frame) and distance.
fn perpendicular_to_axis(u: f64, v: f64) -> (HPoint, HPoint, f64) {
    let d = ((u + v).abs() / (v - u).abs()).max(1.0).acosh();
    let r = (u * v).sqrt();
    let foot1 = HPoint { re: 0.0, im: r };
    let px = 2.0 * u * v / (u + v);
    let foot2 = HPoint { re: px, im: (u * v - px * px).max(0.0).sqrt() };
    (foot1, foot2, d)
}

/// Holonomy matrices (A, B) of the base slopes 1/0, 0/1 at X, in the
/// standard upper/lower triangular normalization (axis of A through ∞,
/// axis of B through 0). Traces are x, y, and trace(AB) = z.
pub fn holonomy_basis(x: &TorusPoint) -> (Mat2, Mat2) {
    let lam = 0.5 * (x.x + (x.x * x.x - 4.0).sqrt());
    let mu = 0.5 * (x.y + (x.y * x.y - 4.0).sqrt());
    let nu = x.z - lam * mu - 1.0 / (lam * mu);
    let a = Mat2 { a: lam, b: 1.0, c: 0.0, d: 1.0 / lam };
    let b = Mat2 { a: mu, b: 0.0, c: nu, d: 1.0 / mu };
    (a, b)
}

/// Generator word of the curve of slope `a`, as letters over
/// {1: A, −1: A⁻¹, 2: B, −2: B⁻¹}, in matrix-product order.
/// Built by mediant descent; a negative slope is first pushed into [0, ∞]
/// by twisting about 1/0, then each B-letter picks up the inverse prefix.
pub(crate) fn word_letters(a: &Slope) -> Result<Vec<i8>> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let p = a.numer().clone();
    let q = a.denom().clone();
    if q == BigInt::from(0) {
        return Ok(vec![1]);
    }
    let (shift, p) = if p < BigInt::from(0) {
        let k = (-&p).div_ceil(&q);
        (k.to_i64().ok_or_else(|| Error::Range("slope too large for a word".into()))?, &p + &k * &q)
    } else {
        (0, p)
    };
    let word = if p == BigInt::from(0) {
        vec![2]
    } else {
        // Mediant descent from (0/1, 1/0) toward p/q > 0.
        let mut lo: (BigInt, BigInt, Vec<i8>) = (BigInt::from(0), BigInt::from(1), vec![2]);
        let mut hi: (BigInt, BigInt, Vec<i8>) = (BigInt::from(1), BigInt::from(0), vec![1]);
        loop {
            let mp = &lo.0 + &hi.0;
            let mq = &lo.1 + &hi.1;
            let mut w = hi.2.clone();
            w.extend_from_slice(&lo.2);
            if w.len() > MAX_WORD_LETTERS {
                return Err(Error::Range("curve word exceeds the letter cap".into()));
            }
            // Compare p/q with mp/mq.
            let cmp = (&p * &mq - &mp * &q).sign();
            match cmp {
                num_bigint::Sign::NoSign => break w,
                num_bigint::Sign::Minus => hi = (mp, mq, w),
                num_bigint::Sign::Plus => lo = (mp, mq, w),
            }
        }
    };
    if shift == 0 {
        return Ok(word);
    }
    // Undo the twist: substitute B ↦ A^{−shift}·B throughout.
    let mut out = Vec::with_capacity(word.len() * (shift as usize + 1));
    for letter in word {
        if letter == 2 {
            for _ in 0..shift {
                out.push(-1);
            }
        }
        out.push(letter);
    }
    Ok(out)
}

fn letters_to_matrix(letters: &[i8], a: &Mat2, b: &Mat2) -> Mat2 {
    let ai = a.inverse();
    let bi = b.inverse();
    let mut m = Mat2::identity();
    for &l in letters {
        let g = match l {
            1 => a,
            -1 => &ai,
            2 => b,
            _ => &bi,
        };
        m = m.mul(g);
    }
    m
}

/// Holonomy matrix of the curve of slope `a` in the group generated by
/// (gen_a, gen_b); its trace matches the flip-recursion trace at `a`.
pub fn word_matrix(a: &Slope, gen_a: &Mat2, gen_b: &Mat2) -> Result<Mat2> {
    Ok(letters_to_matrix(&word_letters(a)?, gen_a, gen_b))
}

/// Horizontal/vertical lengths of a curve against a crossing geodesic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HVDecomposition {
    pub h: f64,
    pub v: f64,
}

/// One crossing of α by a lift of ω, in the frame where α lifts to the
/// imaginary axis and its holonomy is z ↦ e^ℓ z.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CrossingLift {
    /// Lift endpoints, u < 0 < v.
    pub u: f64,
    pub v: f64,
}

impl CrossingLift {
    /// sin of the crossing angle with the imaginary axis.
    pub fn angle_sin(&self) -> f64 {
        2.0 * (-self.u * self.v).sqrt() / (self.v - self.u)
    }

    /// Signed cos of the crossing angle (positive when the lift leans in
    /// the direction of increasing boundary coordinate).
    pub fn angle_cos(&self) -> f64 {
        (self.u + self.v) / (self.v - self.u)
    }

    /// Vertical and horizontal lengths for this crossing: v is the distance
    /// to the e^ℓ-translate of the lift, h the translation length left over
    /// along the lift after removing the perpendicular jump.
    pub fn vh(&self, ell: f64) -> Result<(f64, f64)> {
        let s = to_imaginary_axis(&Geodesic { e1: self.u, e2: self.v });
        let el = ell.exp();
        let u2 = s.apply_boundary(self.u * el);
        let v2 = s.apply_boundary(self.v * el);
        debug_assert!(u2 * v2 > 0.0);
        let (_, _, d) = perpendicular_to_axis(u2, v2);
        let r = (u2 * v2).sqrt();
        // Translation by d along the perpendicular (−r, r), oriented so the
        // imaginary axis moves onto (u2, v2).
        let q = Mat2 { a: -1.0, b: -r, c: 1.0, d: -r };
        let qi = q.inverse();
        let mut psi_n = qi
            .mul(&Mat2 { a: (d * 0.5).exp(), b: 0.0, c: 0.0, d: (-d * 0.5).exp() })
            .mul(&q);
        let image = psi_n.apply_boundary(0.0);
        if !close_boundary(image, u2.min(v2)) && !close_boundary(image, u2.max(v2)) {
            psi_n = qi
                .mul(&Mat2 { a: (-d * 0.5).exp(), b: 0.0, c: 0.0, d: (d * 0.5).exp() })
                .mul(&q);
        }
        let si = s.inverse();
        let psi = si.mul(&psi_n).mul(&s);
        let phi = Mat2 { a: (ell * 0.5).exp(), b: 0.0, c: 0.0, d: (-ell * 0.5).exp() };
        let h = translation_length(&psi.inverse().mul(&phi))?;
        Ok((d, h))
    }
}

fn close_boundary(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

/// All crossings of α̃ (the imaginary axis) by lifts of ω, one per orbit of
/// the α-holonomy, found from cyclic rotations of ω's word. Also returns
/// ℓ_α at X.
pub(crate) fn crossing_lifts(
    x: &TorusPoint,
    omega: &Slope,
    a: &Slope,
) -> Result<(f64, Vec<CrossingLift>)> {
    let g = basis_through(a);
    let y = x.relabel(&g.inverse())?;
    let (ma, mb) = holonomy_basis(&y);
    let lam = ma.a;
    let ell = 2.0 * lam.ln();
    // Diagonalize A: translate its finite fixed point to 0.
    let t = Mat2 { a: 1.0, b: lam / (lam * lam - 1.0), c: 0.0, d: 1.0 };
    let ti = t.inverse();
    let a0 = t.mul(&ma).mul(&ti);
    let b0 = t.mul(&mb).mul(&ti);
    let w = g.inverse().apply(omega);
    let letters = word_letters(&w)?;
    let mut lifts: Vec<CrossingLift> = Vec::new();
    for rot in 0..letters.len() {
        let mut rotated = letters[rot..].to_vec();
        rotated.extend_from_slice(&letters[..rot]);
        let m = letters_to_matrix(&rotated, &a0, &b0);
        let axis = match m.axis() {
            Ok(g) => g,
            Err(_) => continue,
        };
        let (u, v) = (axis.e1.min(axis.e2), axis.e1.max(axis.e2));
        if !(u < 0.0 && v > 0.0) || u.is_infinite() || v.is_infinite() {
            continue;
        }
        let lift = CrossingLift { u, v };
        // Dedupe modulo the α-translation: the ratio v/|u| is invariant and
        // log(−uv) is defined modulo 2ℓ.
        let ratio = v / -u;
        let height = (-u * v).ln();
        let dup = lifts.iter().any(|l| {
            let r2 = l.v / -l.u;
            if (ratio - r2).abs() > LIFT_DEDUP_TOL * (1.0 + ratio.abs()) {
                return false;
            }
            let dh = (height - (-l.u * l.v).ln()) / (2.0 * ell);
            (dh - dh.round()).abs() < LIFT_DEDUP_TOL
        });
        if !dup {
            lifts.push(lift);
        }
    }
    if lifts.is_empty() {
        return Err(Error::Range("no crossing lift found for the curve word".into()));
    }
    Ok((ell, lifts))
}

/// Horizontal and vertical component lengths of α against the geodesic of
/// slope ω at X (shortest vertical jump among the crossings). When ω = α
/// the decomposition is h = ℓ_α, v = 0 by convention.
pub fn hv_decomposition(x: &TorusPoint, omega: &Slope, a: &Slope) -> Result<HVDecomposition> {
    if omega == a {
        return Ok(HVDecomposition { h: x.length_of(a)?, v: 0.0 });
    }
    if !omega.intersects(a) {
        return Err(Error::Disjoint);
    }
    let (ell, lifts) = crossing_lifts(x, omega, a)?;
    let mut best: Option<(f64, f64)> = None;
    for l in &lifts {
        let (v, h) = l.vh(ell)?;
        if best.map_or(true, |(bv, _)| v < bv) {
            best = Some((v, h));
        }
    }
    let (v, h) = best.unwrap();
    Ok(HVDecomposition { h, v })
}

/// Geometric twisting estimate of the curve λ around α at X:
/// L/ℓ_α with L = 2·arccosh(sinh(ℓ_α/2)/sinh(v/2)), v the vertical length.
/// Approximates the twisting number up to a uniform additive error.
pub fn collar_twist(x: &TorusPoint, lam: &Slope, a: &Slope) -> Result<f64> {
    if !lam.intersects(a) {
        return Err(Error::Disjoint);
    }
    let hv = hv_decomposition(x, lam, a)?;
    let ell = x.length_of(a)?;
    let ratio = ((ell * 0.5).sinh() / (hv.v * 0.5).sinh()).max(1.0);
    Ok(2.0 * ratio.acosh() / ell)
}

/// Signed cosines of the crossing angles of α (normalized to the imaginary
/// axis) with the lifts of ω, one per crossing.
pub fn crossing_cosines(x: &TorusPoint, omega: &Slope, a: &Slope) -> Result<Vec<f64>> {
    if !omega.intersects(a) {
        return Err(Error::Disjoint);
    }
    let (_, lifts) = crossing_lifts(x, omega, a)?;
    Ok(lifts.iter().map(|l| l.angle_cos()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    fn random_isometry(rng: &mut ChaCha8Rng) -> Mat2 {
        let th: f64 = rng.gen_range(-1.5..1.5);
        let sc: f64 = rng.gen_range(-1.0..1.0);
        let tr: f64 = rng.gen_range(-2.0..2.0);
        let rot = Mat2 { a: th.cos(), b: th.sin(), c: -th.sin(), d: th.cos() };
        let dil = Mat2 { a: (sc * 0.5).exp(), b: 0.0, c: 0.0, d: (-sc * 0.5).exp() };
        let tra = Mat2 { a: 1.0, b: tr, c: 0.0, d: 1.0 };
        rot.mul(&dil).mul(&tra)
    }

    #[test]
    fn concentric_perpendicular() {
        for d in [0.3f64, 1.0, 2.5] {
            let g1 = Geodesic::new(-1.0, 1.0).unwrap();
            let g2 = Geodesic::new(-d.exp(), d.exp()).unwrap();
            let (f1, f2, dist) = common_perpendicular(&g1, &g2).unwrap();
            assert!((dist - d).abs() < 1e-12);
            // Feet on the imaginary axis.
            assert!(f1.re.abs() < 1e-12 && (f1.im - 1.0).abs() < 1e-12);
            assert!(f2.re.abs() < 1e-12 && (f2.im - d.exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn perpendicular_errors() {
        let g1 = Geodesic::new(-1.0, 1.0).unwrap();
        assert!(matches!(
            common_perpendicular(&g1, &Geodesic::new(0.0, 2.0).unwrap()),
            Err(Error::Crossing)
        ));
        assert!(matches!(
            common_perpendicular(&g1, &Geodesic::new(1.0, 3.0).unwrap()),
            Err(Error::SharedEndpoint)
        ));
        // Vertical line vs half circle beside it.
        let v = Geodesic::new(5.0, f64::INFINITY).unwrap();
        let (_, _, d) = common_perpendicular(&g1, &v).unwrap();
        assert!(d > 0.0);
    }

    #[test]
    fn perpendicular_isometry_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d: f64 = rng.gen_range(0.05..3.0);
            let g1 = Geodesic::new(-1.0, 1.0).unwrap();
            let g2 = Geodesic::new(-d.exp(), d.exp()).unwrap();
            let m = random_isometry(&mut rng);
            let h1 = Geodesic::new(m.apply_boundary(g1.e1), m.apply_boundary(g1.e2)).unwrap();
            let h2 = Geodesic::new(m.apply_boundary(g2.e1), m.apply_boundary(g2.e2)).unwrap();
            let (_, _, dist) = common_perpendicular(&h1, &h2).unwrap();
            assert!((dist - d).abs() < 1e-9, "d={d} dist={dist}");
        }
    }

    /// Saccheri and Lambert quadrilateral identities on concentric frames.
    #[test]
    fn quadrilateral_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let d: f64 = rng.gen_range(0.05..2.5);
            let r: f64 = rng.gen_range(-2.5..2.5);
            // ω = unit half-circle, ω′ = concentric at distance d; feet p, p′
            // on the imaginary axis; x, x′ at arc distance r on the same side.
            let theta = 2.0 * (r.exp().atan());
            let x = HPoint { re: theta.cos(), im: theta.sin() };
            let xp = HPoint { re: d.exp() * theta.cos(), im: d.exp() * theta.sin() };
            let p = HPoint { re: 0.0, im: 1.0 };
            let dxx = dist_h(&x, &xp);
            let lhs = (d * 0.5).sinh() * dist_h(&x, &p).cosh();
            assert!((lhs - (dxx * 0.5).sinh()).abs() < 1e-9 * (1.0 + lhs.abs()));
            // Quad2 and Quad3 against an arbitrary y ∈ ω′.
            let ry: f64 = rng.gen_range(-2.5..2.5);
            let ty = 2.0 * (ry.exp().atan());
            let y = HPoint { re: d.exp() * ty.cos(), im: d.exp() * ty.sin() };
            let q2 = d.sinh() * dist_h(&x, &p).cosh();
            assert!(q2 <= dist_h(&x, &y).sinh() + 1e-9);
            assert!(dist_h(&xp, &y) <= dist_h(&x, &y) + 1e-9);
        }
    }

    #[test]
    fn elementary_estimates() {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!(x <= x.sinh() && x.sinh() <= 1.0f64.sinh() * x + 1e-15);
        }
        for i in 1..=50 {
            let x = 1.0 + i as f64 / 10.0;
            assert!(x.exp() / 4.0 <= x.sinh() && x.sinh() <= x.exp());
            assert!(x.exp() / 4.0 <= x.cosh() && x.cosh() <= x.exp());
            assert!((x.asinh() - x.ln()).abs() <= 0.9);
            assert!((x.acosh() - x.ln()).abs() <= 0.9);
        }
    }

    #[test]
    fn holonomy_traces_and_commutator() {
        for x in [
            TorusPoint::modular(),
            TorusPoint::new(3.0, 3.0, 6.0).unwrap(),
            TorusPoint::new(3.1, 4.2, 10.399742922096525).unwrap(),
        ] {
            let (a, b) = holonomy_basis(&x);
            assert!((a.trace() - x.x).abs() < 1e-12);
            assert!((b.trace() - x.y).abs() < 1e-12);
            assert!((a.mul(&b).trace() - x.z).abs() < 1e-9);
            let comm = a.mul(&b).mul(&a.inverse()).mul(&b.inverse());
            assert!((comm.trace() + 2.0).abs() < 1e-9, "commutator {}", comm.trace());
            assert!((a.det() - 1.0).abs() < 1e-12 && (b.det() - 1.0).abs() < 1e-12);
        }
    }

    /// Independent length oracle: translation lengths of word matrices must
    /// match lengths from the trace recursion.
    #[test]
    fn word_lengths_match_trace_recursion() {
        let x = TorusPoint::new(3.1, 4.2, 10.399742922096525).unwrap();
        let (a, b) = holonomy_basis(&x);
        for slope in [
            s(1, 1),
            s(2, 1),
            s(1, 2),
            s(3, 2),
            s(5, 3),
            s(-1, 1),
            s(-3, 2),
            s(7, 5),
            s(-5, 7),
        ] {
            let w = word_matrix(&slope, &a, &b).unwrap();
            let lw = translation_length(&w).unwrap();
            let lt = x.length_of(&slope).unwrap();
            assert!((lw - lt).abs() < 1e-6 * lt, "{slope}: word {lw} vs trace {lt}");
        }
    }

    #[test]
    fn word_letter_examples() {
        assert_eq!(word_letters(&Slope::infinity()).unwrap(), vec![1]);
        assert_eq!(word_letters(&Slope::zero()).unwrap(), vec![2]);
        assert_eq!(word_letters(&Slope::one()).unwrap(), vec![1, 2]);
        assert_eq!(word_letters(&s(2, 1)).unwrap(), vec![1, 1, 2]);
        assert_eq!(word_letters(&s(1, 2)).unwrap(), vec![1, 2, 2]);
        assert_eq!(word_letters(&s(-1, 1)).unwrap(), vec![-1, 2]);
    }

    #[test]
    fn hv_same_slope_convention() {
        let x = TorusPoint::modular();
        let hv = hv_decomposition(&x, &Slope::one(), &Slope::one()).unwrap();
        assert_eq!(hv.v, 0.0);
        assert!((hv.h - x.length_of(&Slope::one()).unwrap()).abs() < 1e-12);
    }

    /// The crossing-angle identity sin B · sinh(ℓ/2) = sinh(v/2), checked
    /// per crossing lift.
    #[test]
    fn angle_identity() {
        for (x, omega, a) in [
            (TorusPoint::modular(), s(0, 1), Slope::infinity()),
            (TorusPoint::new(3.0, 3.0, 6.0).unwrap(), s(1, 1), Slope::infinity()),
            (TorusPoint::new(3.1, 4.2, 10.399742922096525).unwrap(), s(1, 2), s(1, 1)),
            (TorusPoint::new(3.1, 4.2, 10.399742922096525).unwrap(), s(3, 1), s(0, 1)),
        ] {
            let (ell, lifts) = crossing_lifts(&x, &omega, &a).unwrap();
            assert!(!lifts.is_empty());
            for l in &lifts {
                let (v, _) = l.vh(ell).unwrap();
                let lhs = l.angle_sin() * (ell * 0.5).sinh();
                let rhs = (v * 0.5).sinh();
                assert!(
                    (lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()),
                    "ω={omega} α={a}: {lhs} vs {rhs}"
                );
            }
        }
    }

    /// v ≤ ℓ_α ≤ h + v for crossing pairs.
    #[test]
    fn hv_length_sandwich() {
        let pts = [
            TorusPoint::modular(),
            TorusPoint::new(3.0, 3.0, 6.0).unwrap(),
            TorusPoint::new(3.1, 4.2, 10.399742922096525).unwrap(),
        ];
        let slopes = [Slope::infinity(), Slope::zero(), Slope::one(), s(2, 1), s(1, 2), s(-1, 2)];
        for x in &pts {
            for omega in &slopes {
                for a in &slopes {
                    if !omega.intersects(a) {
                        continue;
                    }
                    let hv = hv_decomposition(x, omega, a).unwrap();
                    let ell = x.length_of(a).unwrap();
                    assert!(
                        hv.v <= ell + 1e-9 && ell <= hv.h + hv.v + 1e-9,
                        "X={x:?} ω={omega} α={a}: v={} ℓ={} h={}",
                        hv.v,
                        ell,
                        hv.h
                    );
                }
            }
        }
    }

    /// Twisting estimate grows affinely with the twisting number, slope 1.
    /// The twisting curve is kept short so the vertical jump stays above
    /// the f64 resolution floor (v ~ e^{−n·ℓ/2} must exceed ~1e−7).
    #[test]
    fn collar_twist_tracks_dehn_twists() {
        let a = Slope::infinity();
        let lam = Slope::zero();
        let x = crate::torus::from_fn(&crate::torus::FnCoords {
            alpha: a.clone(),
            length: 0.35,
            twist: 0.1,
        })
        .unwrap();
        let mut pts = Vec::new();
        for n in (10..=40).step_by(5) {
            let xn = x.twisted(&a, n).unwrap();
            let est = collar_twist(&xn, &lam, &a).unwrap();
            pts.push((n as f64, est));
        }
        // Least-squares slope.
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope - 1.0).abs() < 0.2, "regression slope {slope}");
    }

    /// Orthogonal crossing: maximal vertical jump, twisting estimate small.
    #[test]
    fn collar_twist_orthogonal_crossing() {
        let r = 8.0f64.sqrt();
        let x = TorusPoint::new(r, r, 4.0).unwrap();
        let est = collar_twist(&x, &Slope::zero(), &Slope::infinity()).unwrap();
        assert!(est < 1.5, "orthogonal estimate {est}");
    }

    #[test]
    fn translation_length_clamps() {
        let id = Mat2::identity();
        assert!(translation_length(&id).unwrap() < 1e-6);
        let rot = Mat2 { a: 0.9, b: 0.1, c: -0.1, d: 0.9 };
        assert!(translation_length(&rot).is_err());
        let hyp = Mat2 { a: 2.0, b: 0.0, c: 0.0, d: 0.5 };
        assert!((translation_length(&hyp).unwrap() - 2.0 * 2.0f64.ln()).abs() < 1e-12);
    }
}
