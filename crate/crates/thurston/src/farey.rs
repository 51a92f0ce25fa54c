//! Exact slope arithmetic and the Farey (curve) graph of the punctured torus.
//!
//! Slopes are reduced rationals p/q (with 1/0 allowed) held as big integers,
//! so deep Dehn twists never overflow. Simple closed curves on the
//! once-punctured torus correspond bijectively to slopes; two curves
//! intersect |ps − rq| times, and the Farey graph (edges at intersection 1)
//! is the curve graph. Triangles of the Farey tessellation are walked by
//! `separating_edge`, which picks the unique triangle edge separating the
//! current triangle from a target slope in the disk.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A reduced rational slope p/q with q ≥ 0, gcd(p,q) = 1; 1/0 is ∞.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slope {
    p: BigInt,
    q: BigInt,
}

impl Slope {
    /// Build a slope from integers, reducing and normalizing signs.
    pub fn new<P: Into<BigInt>, Q: Into<BigInt>>(p: P, q: Q) -> Result<Slope> {
        Self::from_bigints(p.into(), q.into())
    }

    pub fn from_bigints(mut p: BigInt, mut q: BigInt) -> Result<Slope> {
        if p.is_zero() && q.is_zero() {
            return Err(Error::InvalidSlope("0/0".into()));
        }
        let g = p.gcd(&q);
        p /= &g;
        q /= &g;
        if q.is_negative() || (q.is_zero() && p.is_negative()) {
            p = -p;
            q = -q;
        }
        Ok(Slope { p, q })
    }

    /// The slope 1/0 (the vertical curve, ∞ in the Farey disk).
    pub fn infinity() -> Slope {
        Slope { p: BigInt::from(1), q: BigInt::from(0) }
    }

    /// The slope 0/1.
    pub fn zero() -> Slope {
        Slope { p: BigInt::from(0), q: BigInt::from(1) }
    }

    /// The slope 1/1.
    pub fn one() -> Slope {
        Slope { p: BigInt::from(1), q: BigInt::from(1) }
    }

    pub fn numer(&self) -> &BigInt {
        &self.p
    }

    pub fn denom(&self) -> &BigInt {
        &self.q
    }

    /// max(|p|, q): the tie-break height used for deterministic choices.
    pub fn height(&self) -> BigInt {
        self.p.abs().max(self.q.clone())
    }

    /// Signed determinant p·s − q·r of the representative pair.
    pub fn det(&self, other: &Slope) -> BigInt {
        &self.p * &other.q - &self.q * &other.p
    }

    /// Geometric intersection number of the two curves: |p·s − q·r|.
    /// Whether the two curves cross (distinct slopes always do on the torus).
    pub fn intersects(&self, other: &Slope) -> bool {
        self != other
    }

    pub fn intersection(&self, other: &Slope) -> BigInt {
        self.det(other).abs()
    }

    /// Farey mediant (p+r)/(q+s), the third vertex of a triangle on edge
    /// {self, other} (the one on the `+` side of the representatives).
    pub fn mediant(&self, other: &Slope) -> Slope {
        // A mediant of an edge is automatically reduced and has q ≥ 0.
        Slope { p: &self.p + &other.p, q: &self.q + &other.q }
    }

    /// n-fold Dehn twist about `about`: v ↦ v − n·det(v, about)·about.
    ///
    /// One positive twist about 1/0 maps 0/1 to 1/1.
    pub fn dehn_twist(&self, about: &Slope, n: i64) -> Slope {
        let d = self.det(about) * BigInt::from(n);
        let p = &self.p - &d * &about.p;
        let q = &self.q - &d * &about.q;
        // The twist is in SL(2,Z), so the image is primitive; only the sign
        // normalization can be needed.
        Slope::from_bigints(p, q).expect("twist of a valid slope is valid")
    }

    /// The Farey neighbor of smallest height (ties: smallest numerator then
    /// denominator). Used as the canonical transversal for twist coordinates.
    pub fn canonical_neighbor(&self) -> Slope {
        // Solve p·s − q·r = 1, then minimize over the family (r+kp, s+kq).
        let e = self.p.extended_gcd(&self.q);
        debug_assert!(e.gcd == BigInt::from(1));
        let r0 = -e.y.clone();
        let s0 = e.x.clone();
        let pf = self.p.to_f64().unwrap_or(f64::MAX);
        let qf = self.q.to_f64().unwrap_or(f64::MAX);
        let rf = r0.to_f64().unwrap_or(0.0);
        let sf = s0.to_f64().unwrap_or(0.0);
        let k0 = (-(rf * pf + sf * qf) / (pf * pf + qf * qf)).round();
        let k0 = BigInt::from(k0 as i64);
        let mut best: Option<Slope> = None;
        for dk in -2i64..=2 {
            let k = &k0 + BigInt::from(dk);
            let cand = Slope::from_bigints(&r0 + &k * &self.p, &s0 + &k * &self.q)
                .expect("neighbor family is primitive");
            if best.as_ref().map_or(true, |b| cand.cmp(b) == Ordering::Less) {
                best = Some(cand);
            }
        }
        best.unwrap()
    }
}

/// Total order used only for deterministic tie-breaking: by height, then
/// |numerator|, then signed numerator, then denominator. (Not the circular
/// order of the Farey disk.)
impl Ord for Slope {
    fn cmp(&self, other: &Slope) -> Ordering {
        self.height()
            .cmp(&other.height())
            .then_with(|| self.p.abs().cmp(&other.p.abs()))
            .then_with(|| self.p.cmp(&other.p))
            .then_with(|| self.q.cmp(&other.q))
    }
}

impl PartialOrd for Slope {
    fn partial_cmp(&self, other: &Slope) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for Slope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Slope> {
        let bad = || Error::InvalidSlope(s.to_string());
        let (ps, qs) = match s.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), "1"),
        };
        let p = BigInt::from_str(ps).map_err(|_| bad())?;
        let q = BigInt::from_str(qs).map_err(|_| bad())?;
        Slope::from_bigints(p, q).map_err(|_| bad())
    }
}

impl Serialize for Slope {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Slope {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Slope, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Sign of the circular orientation of three distinct slopes on the Farey
/// disk boundary: +1 for counterclockwise, −1 for clockwise.
///
/// The product of the three pairwise determinants is independent of the
/// choice of representative signs, so canonical representatives suffice.
pub fn orient(u: &Slope, v: &Slope, w: &Slope) -> i32 {
    let s = u.det(v).signum() * v.det(w).signum() * w.det(u).signum();
    s.to_i32().unwrap_or(0)
}

/// Given a Farey triangle and a target slope not among its vertices, return
/// the index of the vertex opposite the unique edge separating the triangle
/// from the target; `None` when the target is a vertex.
pub(crate) fn separating_edge(tri: &[Slope; 3], target: &Slope) -> Option<usize> {
    for w in 0..3 {
        let u = &tri[(w + 1) % 3];
        let v = &tri[(w + 2) % 3];
        if target == u || target == v {
            continue;
        }
        if orient(u, target, v) * orient(u, &tri[w], v) < 0 {
            return Some(w);
        }
    }
    None
}

/// Like [`separating_edge`] but for an edge target {c, d}: the chosen edge
/// must separate (or contain) both endpoints. `None` when both are vertices.
pub(crate) fn separating_edge_pair(tri: &[Slope; 3], c: &Slope, d: &Slope) -> Option<usize> {
    for w in 0..3 {
        let u = &tri[(w + 1) % 3];
        let v = &tri[(w + 2) % 3];
        let ok = |x: &Slope| x == u || x == v || orient(u, x, v) * orient(u, &tri[w], v) < 0;
        let strict = |x: &Slope| x != u && x != v && orient(u, x, v) * orient(u, &tri[w], v) < 0;
        if ok(c) && ok(d) && (strict(c) || strict(d)) {
            return Some(w);
        }
    }
    None
}

/// Replace the vertex at `w` by the reflection across the opposite edge:
/// the other triangle on that edge has third vertex u + v − w (component-wise
/// on any representatives that satisfy w = u + v, i.e. the non-mediant side).
pub(crate) fn flip_vertex(tri: &[Slope; 3], w: usize) -> Slope {
    let u = &tri[(w + 1) % 3];
    let v = &tri[(w + 2) % 3];
    let m = u.mediant(v);
    if m == tri[w] {
        // Other side: difference of representatives.
        Slope::from_bigints(u.numer() - v.numer(), u.denom() - v.denom())
            .expect("edge difference is a valid slope")
    } else {
        m
    }
}

/// A marking: an unordered pair of slopes intersecting exactly once
/// (an edge of the Farey graph). Stored with the tie-break-smaller slope
/// first so equal markings compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Marking {
    pub a: Slope,
    pub b: Slope,
}

impl Marking {
    pub fn new(a: Slope, b: Slope) -> Result<Marking> {
        if a.intersection(&b) != BigInt::from(1) {
            return Err(Error::InvalidSlope(format!(
                "{a} and {b} do not form a marking (intersection ≠ 1)"
            )));
        }
        Ok(if b < a { Marking { a: b, b: a } } else { Marking { a, b } })
    }

    pub fn contains(&self, s: &Slope) -> bool {
        &self.a == s || &self.b == s
    }

    /// The slope shared with another marking, if any.
    pub fn common(&self, other: &Marking) -> Option<Slope> {
        if other.contains(&self.a) {
            Some(self.a.clone())
        } else if other.contains(&self.b) {
            Some(self.b.clone())
        } else {
            None
        }
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.a, self.b)
    }
}

const MAX_WALK_STEPS: usize = 200_000;

/// The geodesic in the marking graph between two markings: the sequence of
/// Farey edges crossed by the dual-tree walk, including both endpoints.
/// Consecutive markings differ by one elementary move (they share a slope).
pub fn marking_geodesic(m1: &Marking, m2: &Marking) -> Result<Vec<Marking>> {
    if m1 == m2 {
        return Ok(vec![m1.clone()]);
    }
    let mut tri = [m1.a.clone(), m1.b.clone(), m1.a.mediant(&m1.b)];
    let mut path = vec![m1.clone()];
    let mut steps = 0usize;
    while !(tri.contains(&m2.a) && tri.contains(&m2.b)) {
        let w = separating_edge_pair(&tri, &m2.a, &m2.b).ok_or_else(|| {
            Error::InvalidSlope(format!("no separating edge toward {m2} — invalid marking?"))
        })?;
        let u = tri[(w + 1) % 3].clone();
        let v = tri[(w + 2) % 3].clone();
        let nw = flip_vertex(&tri, w);
        tri[w] = nw;
        let edge = Marking::new(u, v)?;
        if path.last() != Some(&edge) {
            path.push(edge);
        }
        steps += 1;
        if steps > MAX_WALK_STEPS {
            return Err(Error::Range("marking walk exceeded step cap".into()));
        }
    }
    if path.last() != Some(m2) {
        path.push(m2.clone());
    }
    Ok(path)
}

/// A pivot of a marking-graph geodesic: a slope contained in at least two
/// consecutive edges of the path; its coefficient counts those edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pivot {
    pub slope: Slope,
    /// Number of path edges containing the slope.
    pub coefficient: u64,
}

/// Pivot sequence of the marking geodesic from `m1` to `m2`, in path order.
pub fn pivots(m1: &Marking, m2: &Marking) -> Result<Vec<Pivot>> {
    let path = marking_geodesic(m1, m2)?;
    let mut out: Vec<Pivot> = Vec::new();
    for win in path.windows(2) {
        let s = win[0]
            .common(&win[1])
            .expect("consecutive markings of a geodesic share a slope");
        match out.last_mut() {
            Some(last) if last.slope == s => last.coefficient += 1,
            _ => out.push(Pivot { slope: s, coefficient: 2 }),
        }
    }
    Ok(out)
}

/// A 2×2 integer matrix acting on slopes (mapping classes / marking changes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    /// Row-major entries [[a, b], [c, d]].
    pub m: [[BigInt; 2]; 2],
}

impl IntMatrix {
    pub fn identity() -> IntMatrix {
        IntMatrix {
            m: [
                [BigInt::from(1), BigInt::from(0)],
                [BigInt::from(0), BigInt::from(1)],
            ],
        }
    }

    pub fn det(&self) -> BigInt {
        &self.m[0][0] * &self.m[1][1] - &self.m[0][1] * &self.m[1][0]
    }

    pub fn apply(&self, s: &Slope) -> Slope {
        Slope::from_bigints(
            &self.m[0][0] * s.numer() + &self.m[0][1] * s.denom(),
            &self.m[1][0] * s.numer() + &self.m[1][1] * s.denom(),
        )
        .expect("unimodular image of a slope is a slope")
    }

    /// Inverse of a ±1-determinant matrix.
    pub fn inverse(&self) -> IntMatrix {
        let d = self.det();
        assert!(d.abs() == BigInt::from(1), "only unimodular matrices invert exactly");
        let s = if d == BigInt::from(1) { 1 } else { -1 };
        let sg = BigInt::from(s);
        IntMatrix {
            m: [
                [&self.m[1][1] * &sg, -&self.m[0][1] * &sg],
                [-&self.m[1][0] * &sg, &self.m[0][0] * &sg],
            ],
        }
    }
}

/// Complete a slope to a determinant-+1 matrix whose first column is the
/// slope's representative; the second column is its canonical neighbor (sign
/// adjusted). The inverse therefore maps `a` to 1/0.
pub fn basis_through(a: &Slope) -> IntMatrix {
    let n = a.canonical_neighbor();
    // det [[p, r],[q, s]] = p·s − q·r = det(a, n) = ±1; flip n's sign if −1.
    let d = a.det(&n);
    let (r, s) = if d == BigInt::from(1) {
        (n.numer().clone(), n.denom().clone())
    } else {
        (-n.numer(), -n.denom())
    };
    IntMatrix {
        m: [[a.numer().clone(), r], [a.denom().clone(), s]],
    }
}

/// Complete the marking {a, b} to a determinant-+1 matrix with columns a, ±b.
/// The inverse maps a ↦ 1/0 and b ↦ 0/1.
pub fn basis_of_marking(mk: &Marking) -> IntMatrix {
    let d = mk.a.det(&mk.b);
    let (r, s) = if d == BigInt::from(1) {
        (mk.b.numer().clone(), mk.b.denom().clone())
    } else {
        (-mk.b.numer(), -mk.b.denom())
    };
    IntMatrix {
        m: [[mk.a.numer().clone(), r], [mk.a.denom().clone(), s]],
    }
}
