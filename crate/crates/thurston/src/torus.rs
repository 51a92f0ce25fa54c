//! Hyperbolic structures on the once-punctured torus as Markov trace triples.
//!
//! A complete cusped hyperbolic structure is recorded by the traces
//! (x, y, z) of the holonomies of the three base slopes (1/0, 0/1, 1/1);
//! completeness is the Markov identity x² + y² + z² = xyz (commutator trace
//! −2). Traces at every other slope follow from the flip recursion
//! t′ = t_u·t_v − t_w along the Farey dual tree, and lengths from
//! ℓ = 2·arccosh(trace/2). The walk branches only on exact slope
//! arithmetic, so the same code path propagates plain values, dual numbers
//! (for derivatives), and paired traces (for distance ratios).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farey::{flip_vertex, separating_edge, IntMatrix, Marking, Slope};
use crate::scalar::{Dual, Flip, Real, TRACE_CAP};

/// Relative tolerance for the Markov identity on validated inputs.
pub const MARKOV_TOL: f64 = 1e-9;
/// Traces within this of each other are tied (systole/second-systole ties).
pub const TIE_TOL: f64 = 1e-9;
/// Relative tolerance for tangency of a TangentVector to the Markov variety.
pub const TANGENCY_TOL: f64 = 1e-7;
/// Largest rounding amplification [`from_fn`] accepts for its descent:
/// beyond this the rebuilt traces could miss the Markov identity at the
/// validation tolerance (amplification × machine epsilon ≈ [`MARKOV_TOL`]).
const DESCENT_AMP_CAP: f64 = MARKOV_TOL / f64::EPSILON;
/// Largest rounding amplification accepted for a direct trace walk; beyond
/// it measurements re-derive the trace through the chart of the shortest
/// base slope, whose fan has closed-form traces.
const MEASURE_AMP_CAP: f64 = 1e4;

const MAX_WALK_STEPS: usize = 200_000;

/// A marked hyperbolic structure: traces at slopes 1/0, 0/1, 1/1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TorusPoint {
    /// Validate and build a point: traces > 2, Markov identity within
    /// relative tolerance [`MARKOV_TOL`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<TorusPoint> {
        let p = TorusPoint { x, y, z };
        p.validate()?;
        Ok(p)
    }

    /// The most symmetric point, traces (3, 3, 3) — the hexagonal torus.
    pub fn modular() -> TorusPoint {
        TorusPoint { x: 3.0, y: 3.0, z: 3.0 }
    }

    /// Markov defect |x²+y²+z² − xyz| relative to x²+y²+z².
    pub fn markov_defect(&self) -> f64 {
        let s = self.x * self.x + self.y * self.y + self.z * self.z;
        (s - self.x * self.y * self.z).abs() / s
    }

    pub fn validate(&self) -> Result<()> {
        for t in [self.x, self.y, self.z] {
            if !t.is_finite() || t >= TRACE_CAP {
                return Err(Error::Range(format!("trace {t} out of range")));
            }
            if t <= 2.0 {
                return Err(Error::InvalidPoint(format!(
                    "trace {t} ≤ 2: not a closed geodesic on a complete structure"
                )));
            }
        }
        if self.markov_defect() > MARKOV_TOL {
            return Err(Error::InvalidPoint(format!(
                "Markov identity violated: relative defect {:.3e}",
                self.markov_defect()
            )));
        }
        Ok(())
    }

    pub fn traces(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Displace the traces by `d` and project back onto the Markov variety:
    /// x, y move linearly, z is re-solved from its quadratic, choosing the
    /// root nearest the linear prediction. Both roots are formed
    /// cancellation-free (the small one via the root product), and the
    /// discriminant is scaled to survive traces near the representable cap.
    pub fn offset(&self, d: [f64; 3]) -> Result<TorusPoint> {
        let x = self.x + d[0];
        let y = self.y + d[1];
        let zp = self.z + d[2];
        // z² − xyz + (x² + y²) = 0, real roots iff q = 4(x⁻² + y⁻²) ≤ 1.
        let q = 4.0 * (1.0 / (x * x) + 1.0 / (y * y));
        if !(q <= 1.0) {
            return Err(Error::Range("projection step left the trace variety".into()));
        }
        let big = 0.5 * x * y * (1.0 + (1.0 - q).sqrt());
        let small = x * (x / big) + y * (y / big);
        let z = if (big - zp).abs() <= (small - zp).abs() { big } else { small };
        TorusPoint::new(x, y, z)
    }

    /// Hyperbolic length of the curve of slope `a`.
    pub fn length_of(&self, a: &Slope) -> Result<f64> {
        Ok(length_from_trace(self.trace_at(a)?))
    }

    /// Trace of the holonomy of slope `a`, via the Farey walk.
    ///
    /// A walk crossing a thin collar runs the flip recursion in its
    /// decaying direction and amplifies rounding exponentially; when the
    /// cursor reports such amplification the trace is re-derived through
    /// the chart of the shortest base slope instead.
    pub fn trace_at(&self, a: &Slope) -> Result<f64> {
        let mut cur = Cursor::from_point(self);
        match cur.walk_toward(a) {
            Ok(i) if cur.amp <= MEASURE_AMP_CAP => Ok(cur.t[i]),
            _ => chart_trace_at(self, a),
        }
    }

    /// Change of marking by g ∈ GL(2,Z): the new point's trace at slope s is
    /// this point's trace at g⁻¹·s, so lengths satisfy
    /// ℓ_s(g·X) = ℓ_{g⁻¹s}(X).
    pub fn relabel(&self, g: &IntMatrix) -> Result<TorusPoint> {
        let gi = g.inverse();
        let mut cur = Cursor::from_point(self);
        let mut t = [
            cur.trace_at(&gi.apply(&Slope::infinity()))?,
            cur.trace_at(&gi.apply(&Slope::zero()))?,
            cur.trace_at(&gi.apply(&Slope::one()))?,
        ];
        // The image triple is a Farey triangle's trace triple, so it
        // satisfies the Markov identity exactly in exact arithmetic. The
        // walk's rounding grows with the depth of g; prefer the raw triple
        // (its errors are coherent with later walks from this point), and
        // only when validation rejects it re-solve the largest coordinate
        // from the other two — a projection within the triple's own error.
        if let Ok(p) = TorusPoint::new(t[0], t[1], t[2]) {
            return Ok(p);
        }
        let t = project_markov(t);
        TorusPoint::new(t[0], t[1], t[2])
    }

    /// The point moved by n positive Dehn twists about `a`.
    ///
    /// Shallow twists relabel the trace coordinates directly; deep twists
    /// go through the length/twist chart, where a twist is exactly
    /// τ ↦ τ + n·ℓ and the trace triple comes from closed-form cosh's
    /// whose rounding does not grow with n. The two routes are pinned
    /// against each other where they overlap.
    pub fn twisted(&self, about: &Slope, n: i64) -> Result<TorusPoint> {
        if n.abs() <= 8 {
            return self.relabel(&twist_matrix(about, n));
        }
        let c = self.fn_coords(about)?;
        from_fn(&FnCoords {
            alpha: about.clone(),
            length: c.length,
            twist: c.twist + n as f64 * c.length,
        })
    }

    /// Markov reduction: repeatedly flip the largest trace while that
    /// strictly decreases it; returns the reduced triangle sorted by trace.
    ///
    /// When the descending walk crosses a thin collar its flip recursion
    /// amplifies rounding exponentially; the reduction then restarts from
    /// a closed-form fan triangle near the chart minimum of the shortest
    /// base slope, where every remaining step is well-conditioned.
    pub fn systole_triple(&self) -> Result<SystoleTriple> {
        let mut cur = Cursor::from_point(self);
        match reduce_cursor(&mut cur) {
            Ok(st) if cur.amp <= MEASURE_AMP_CAP => Ok(st),
            _ => {
                let ch = BaseChart::of(self)?;
                let jstar = (ch.twist / ch.length).round();
                if !jstar.is_finite() || jstar.abs() >= 9.0e18 {
                    return Err(Error::Range(
                        "fan index out of range in Markov reduction".into(),
                    ));
                }
                let mut cur = ch.seed(jstar as i64)?;
                reduce_cursor(&mut cur)
            }
        }
    }

    /// All short markings: pairs from the systoles, extended by the
    /// second-shortest curves when the systole is unique. Returns 1 or 3
    /// markings (3 exactly when the top-two trace levels cover all three
    /// reduced slopes).
    pub fn short_marking(&self) -> Result<Vec<Marking>> {
        let st = self.systole_triple()?;
        let t = &st.traces;
        let mut active = vec![0usize];
        for i in 1..3 {
            if t[i] <= t[0] + TIE_TOL {
                active.push(i);
            }
        }
        if active.len() == 1 {
            // Unique systole: adjoin the second-shortest level (with ties).
            active.push(1);
            if t[2] <= t[1] + TIE_TOL {
                active.push(2);
            }
        }
        let mut out = Vec::new();
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                out.push(Marking::new(
                    st.slopes[active[i]].clone(),
                    st.slopes[active[j]].clone(),
                )?);
            }
        }
        Ok(out)
    }

    /// Fenchel–Nielsen coordinates (length, twist) relative to `a`, with the
    /// zero-twist section at the symmetric position trace(ab) = trace(ab⁻¹)
    /// for b the canonical (smallest) Farey neighbor of a.
    pub fn fn_coords(&self, a: &Slope) -> Result<FnCoords> {
        let b = a.canonical_neighbor();
        let m = a.mediant(&b);
        let d = det_sign(a, &b);
        let mut cur = Cursor::from_point(self);
        cur.walk_toward(a)?;
        cur.walk_toward(&b)?;
        debug_assert!(cur.index_of(a).is_some(), "walk within the fan keeps a");
        cur.set_third(&m, a, &b)?;
        let ta = cur.t[cur.index_of(a).unwrap()];
        let tb = cur.t[cur.index_of(&b).unwrap()];
        let tm = cur.t[cur.index_of(&m).unwrap()];
        let ch = (ta * 0.5).max(1.0);
        let length = 2.0 * ch.acosh();
        let coth = ch / (ch * ch - 1.0).sqrt();
        let tau_abs = 2.0 * (tb / (2.0 * coth)).max(1.0).acosh();
        // The third trace disambiguates the twist sign.
        let pred = |tau: f64| 2.0 * coth * ((tau - d * length) * 0.5).cosh();
        let twist = if (pred(tau_abs) - tm).abs() <= (pred(-tau_abs) - tm).abs() {
            tau_abs
        } else {
            -tau_abs
        };
        Ok(FnCoords { alpha: a.clone(), length, twist })
    }
}

/// Fenchel–Nielsen pair relative to a slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnCoords {
    pub alpha: Slope,
    pub length: f64,
    pub twist: f64,
}

/// Rebuild the point with given Fenchel–Nielsen coordinates.
///
/// Fails with [`Error::Range`] when the descent from the coordinate
/// triangle to the base is too ill-conditioned for plain doubles: small
/// base traces then arise as near-cancelling differences of huge trace
/// products, and the result would be noise dressed up as a point. Callers
/// that must cross such regimes (long geodesics into the thin part)
/// integrate the stretch field instead.
pub fn from_fn(c: &FnCoords) -> Result<TorusPoint> {
    if !(c.length > 0.0) {
        return Err(Error::InvalidPoint(format!(
            "length must be positive, got {}",
            c.length
        )));
    }
    let cur = fn_cursor::<f64>(&c.alpha, c.length, c.twist)?;
    if cur.amp > DESCENT_AMP_CAP {
        return Err(Error::Range(format!(
            "Fenchel–Nielsen descent is ill-conditioned here (error amplification {:.1e})",
            cur.amp
        )));
    }
    let t = base_traces_of(&cur);
    if let Ok(p) = TorusPoint::new(t[0], t[1], t[2]) {
        return Ok(p);
    }
    // Deep slopes: the descending walk from the coordinate triangle to the
    // base accumulates rounding beyond the validation tolerance.
    let t = project_markov(t);
    TorusPoint::new(t[0], t[1], t[2])
}

/// Re-solve the largest coordinate of a near-Markov triple from the other
/// two, picking the quadratic root nearest the input — a projection onto
/// the variety within the triple's own error. Written scale-safely: valid
/// traces reach 1e300, where squaring a product overflows.
fn project_markov(mut t: [f64; 3]) -> [f64; 3] {
    let w = argmax(&t);
    let (u, v) = (t[(w + 1) % 3], t[(w + 2) % 3]);
    // Roots of z² − uv·z + (u² + v²); q ≤ 1 exactly when they are real.
    let q = 4.0 * (1.0 / (u * u) + 1.0 / (v * v));
    if q <= 1.0 {
        let big = 0.5 * u * v * (1.0 + (1.0 - q).sqrt());
        let small = u * (u / big) + v * (v / big);
        t[w] = if (big - t[w]).abs() <= (small - t[w]).abs() {
            big
        } else {
            small
        };
    }
    t
}

/// Generic core of [`from_fn`]: base-triangle traces for the structure with
/// length `len` and twist `twist` about `a`, any scalar type.
///
/// Derivation (validated by the Dehn-twist equivariance postcondition and
/// the square-torus fixed point): with P = coth(len/2) and b the canonical
/// neighbor, the trace at b is 2P·cosh(twist/2) and the trace at the mediant
/// m = a ⊕ b is 2P·cosh((twist − det(a,b)·len)/2); the trace at a is
/// 2·cosh(len/2). These satisfy the Markov identity exactly and place the
/// symmetric position trace(ab) = trace(ab⁻¹) at twist = 0.
pub(crate) fn from_fn_traces<T: Real>(a: &Slope, len: T, twist: T) -> Result<[T; 3]> {
    Ok(base_traces_of(&fn_cursor(a, len, twist)?))
}

/// The walk behind [`from_fn_traces`], returning the whole cursor so callers
/// can inspect the conditioning of the descent.
fn fn_cursor<T: Real>(a: &Slope, len: T, twist: T) -> Result<Cursor<T>> {
    let mut cur = fn_seed_cursor(a, len, twist)?;
    cur.walk_toward(&Slope::infinity())?;
    cur.walk_toward(&Slope::zero())?;
    cur.set_third(&Slope::one(), &Slope::infinity(), &Slope::zero())?;
    Ok(cur)
}

/// The coordinate triangle of the structure with the given length and twist
/// about `a`, traces seeded from the closed forms. Measurements that would
/// be ill-conditioned from the base triangle can walk from here instead.
pub(crate) fn fn_seed_cursor<T: Real>(a: &Slope, len: T, twist: T) -> Result<Cursor<T>> {
    let b = a.canonical_neighbor();
    let m = a.mediant(&b);
    let d = det_sign(a, &b);
    let half = len * T::c(0.5);
    let ch = half.cosh();
    let sh = half.sinh();
    let coth = ch / sh;
    let x = ch * T::c(2.0);
    let tb = coth * (twist * T::c(0.5)).cosh() * T::c(2.0);
    let tm = coth * ((twist - T::c(d) * len) * T::c(0.5)).cosh() * T::c(2.0);
    for t in [x, tb, tm] {
        if !t.magnitude().is_finite() || t.magnitude() > TRACE_CAP {
            return Err(Error::Range(
                "Fenchel–Nielsen data produces traces out of range".into(),
            ));
        }
    }
    Ok(Cursor::new([a.clone(), b, m], [x, tb, tm]))
}

fn base_traces_of<T: Flip>(cur: &Cursor<T>) -> [T; 3] {
    [
        cur.t[cur.index_of(&Slope::infinity()).unwrap()],
        cur.t[cur.index_of(&Slope::zero()).unwrap()],
        cur.t[cur.index_of(&Slope::one()).unwrap()],
    ]
}

/// The Markov reduction loop on an arbitrary cursor: flip the largest trace
/// while that strictly decreases it, then report the reduced triangle.
fn reduce_cursor(cur: &mut Cursor<f64>) -> Result<SystoleTriple> {
    for _ in 0..MAX_WALK_STEPS {
        let w = argmax(&cur.t);
        let u = cur.t[(w + 1) % 3];
        let v = cur.t[(w + 2) % 3];
        let flipped = cur.t[w].flip_from(u, v);
        if flipped < cur.t[w] {
            cur.flip_at(w)?;
        } else {
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&i, &j| cur.t[i].total_cmp(&cur.t[j]));
            let traces = [cur.t[idx[0]], cur.t[idx[1]], cur.t[idx[2]]];
            let slopes = [cur.s[idx[0]].clone(), cur.s[idx[1]].clone(), cur.s[idx[2]].clone()];
            let mut systoles = vec![slopes[0].clone()];
            for i in 1..3 {
                if traces[i] <= traces[0] + TIE_TOL {
                    systoles.push(slopes[i].clone());
                }
            }
            return Ok(SystoleTriple { slopes, traces, systoles });
        }
    }
    Err(Error::Range("Markov reduction exceeded step cap".into()))
}

/// Length/twist chart of the shortest base slope σ of a point.
///
/// The fan neighbors gʲ(b) of σ (g the Dehn twist about σ, b its canonical
/// neighbor) have the closed-form traces 2·coth(ℓ/2)·cosh((τ − jℓ)/2).
/// Deriving fan traces this way instead of by the flip recursion is what
/// keeps measurements accurate across σ's collar: the recursion runs in its
/// decaying direction there and amplifies rounding exponentially, while the
/// closed form is direct.
struct BaseChart {
    sigma: Slope,
    b: Slope,
    length: f64,
    twist: f64,
    coth: f64,
}

impl BaseChart {
    fn of(x: &TorusPoint) -> Result<BaseChart> {
        let t = x.traces();
        let base = base_slopes();
        let mut i0 = 0;
        for i in 1..3 {
            if t[i] < t[i0] {
                i0 = i;
            }
        }
        let sigma = base[i0].clone();
        let c = x.fn_coords(&sigma)?;
        if c.length <= 0.0 {
            return Err(Error::Range("chart curve is degenerate".into()));
        }
        let b = sigma.canonical_neighbor();
        let coth = 1.0 / (0.5 * c.length).tanh();
        Ok(BaseChart { sigma, b, length: c.length, twist: c.twist, coth })
    }

    fn sigma_trace(&self) -> f64 {
        2.0 * (0.5 * self.length).cosh()
    }

    fn fan_trace(&self, j: f64) -> Result<f64> {
        let v = 2.0 * self.coth * (0.5 * (self.twist - j * self.length)).cosh();
        if !v.is_finite() || v > TRACE_CAP {
            return Err(Error::Range(
                "trace overflow in the fan of the chart curve".into(),
            ));
        }
        Ok(v)
    }

    /// Cursor seeded at the fan triangle (σ, gʲb, gʲ⁺¹b).
    fn seed(&self, j: i64) -> Result<Cursor<f64>> {
        let s = [
            self.sigma.clone(),
            twist_matrix(&self.sigma, j).apply(&self.b),
            twist_matrix(&self.sigma, j + 1).apply(&self.b),
        ];
        let t = [self.sigma_trace(), self.fan_trace(j as f64)?, self.fan_trace(j as f64 + 1.0)?];
        Ok(Cursor::new(s, t))
    }
}

/// Trace at `a` re-derived through the chart of the shortest base slope:
/// walk the fan with closed-form traces, and hand off to the flip
/// recursion only once the walk leaves the fan, where every remaining
/// flip grows the trace and stays well-conditioned.
fn chart_trace_at(x: &TorusPoint, a: &Slope) -> Result<f64> {
    let ch = BaseChart::of(x)?;
    let mut s = [ch.sigma.clone(), ch.b.clone(), twist_matrix(&ch.sigma, 1).apply(&ch.b)];
    let mut fan_j: [Option<i64>; 3] = [None, Some(0), Some(1)];
    for _ in 0..MAX_WALK_STEPS {
        if let Some(i) = s.iter().position(|q| q == a) {
            return match fan_j[i] {
                None => Ok(ch.sigma_trace()),
                Some(j) => ch.fan_trace(j as f64),
            };
        }
        let w = separating_edge(&s, a)
            .expect("a distinct slope lies on one side of the triangle");
        match fan_j[w] {
            None => {
                // Flipping σ away leaves the fan.
                let mut t = [0.0; 3];
                for i in 0..3 {
                    t[i] = match fan_j[i] {
                        None => ch.sigma_trace(),
                        Some(j) => ch.fan_trace(j as f64)?,
                    };
                }
                let mut cur = Cursor::new(s, t);
                let i = cur.walk_toward(a)?;
                return Ok(cur.t[i]);
            }
            Some(j_this) => {
                let other = (0..3).find(|&i| i != w && fan_j[i].is_some()).unwrap();
                let j_new = 2 * fan_j[other].unwrap() - j_this;
                ch.fan_trace(j_new as f64)?;
                s[w] = flip_vertex(&s, w);
                fan_j[w] = Some(j_new);
            }
        }
    }
    Err(Error::Range("Farey walk exceeded step cap".into()))
}

/// A tangent vector to the Markov variety at a base point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: TorusPoint,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl TangentVector {
    /// Validate tangency: d/dt of the Markov identity must vanish.
    pub fn new(base: TorusPoint, dx: f64, dy: f64, dz: f64) -> Result<TangentVector> {
        let v = TangentVector { base, dx, dy, dz };
        let (lhs, rhs) = v.tangency_sides();
        // Scale by the terms entering each side, not the sides themselves:
        // a vector can be tangent to the coordinate sphere too, making both
        // sides vanish by cancellation much below their term sizes.
        let TorusPoint { x, y, z } = base;
        let scale = [
            2.0 * x * dx,
            2.0 * y * dy,
            2.0 * z * dz,
            dx * y * z,
            x * dy * z,
            x * y * dz,
        ]
        .iter()
        .fold(1e-9 * x * y * z, |m, t| m.max(t.abs()));
        if (lhs - rhs).abs() > TANGENCY_TOL * scale {
            return Err(Error::InvalidPoint(format!(
                "vector not tangent to the trace variety: {lhs} vs {rhs}"
            )));
        }
        Ok(v)
    }

    /// Both sides of the differentiated Markov identity.
    pub fn tangency_sides(&self) -> (f64, f64) {
        let TorusPoint { x, y, z } = self.base;
        let lhs = 2.0 * (x * self.dx + y * self.dy + z * self.dz);
        let rhs = self.dx * y * z + x * self.dy * z + x * y * self.dz;
        (lhs, rhs)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn scale(&self, c: f64) -> TangentVector {
        TangentVector { base: self.base, dx: c * self.dx, dy: c * self.dy, dz: c * self.dz }
    }

    /// Difference of two vectors at the same base point.
    pub fn sub(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            base: self.base,
            dx: self.dx - other.dx,
            dy: self.dy - other.dy,
            dz: self.dz - other.dz,
        }
    }

    /// Euclidean size of the coordinate derivative (parametrization-level,
    /// used only for degeneracy guards).
    pub fn coord_norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + self.dz * self.dz).sqrt()
    }

    /// Step along the vector and project back onto the Markov variety:
    /// x, y move linearly, z is re-solved from its quadratic (choosing the
    /// root nearest the linear prediction). O(h²) accurate.
    pub fn step(&self, h: f64) -> Result<TorusPoint> {
        self.base
            .offset([h * self.dx, h * self.dy, h * self.dz])
    }
}

/// Directional derivative of ℓ_a at the vector's base point, by dual-number
/// propagation through the flip recursion.
pub fn dlength(a: &Slope, v: &TangentVector) -> Result<f64> {
    let x = v.base;
    let mut cur = Cursor::new(
        base_slopes(),
        [
            Dual::new(x.x, v.dx),
            Dual::new(x.y, v.dy),
            Dual::new(x.z, v.dz),
        ],
    );
    let i = cur.walk_toward(a)?;
    Ok(dual_length(cur.t[i]).de)
}

/// Fenchel–Nielsen coordinates of `a` together with their directional
/// derivatives along `v`, by dual-number propagation through the same
/// ascending walk as [`TorusPoint::fn_coords`]. The ascending direction
/// keeps relative error at rounding level for arbitrarily deep slopes,
/// unlike differentiating the reconstruction (which descends from large
/// traces and amplifies cancellation exponentially).
pub(crate) fn fn_coords_dual(v: &TangentVector, a: &Slope) -> Result<(Dual, Dual)> {
    let x = v.base;
    let b = a.canonical_neighbor();
    let m = a.mediant(&b);
    let d = det_sign(a, &b);
    let mut cur = Cursor::new(
        base_slopes(),
        [
            Dual::new(x.x, v.dx),
            Dual::new(x.y, v.dy),
            Dual::new(x.z, v.dz),
        ],
    );
    cur.walk_toward(a)?;
    cur.walk_toward(&b)?;
    cur.set_third(&m, a, &b)?;
    let ta = cur.t[cur.index_of(a).unwrap()];
    let tb = cur.t[cur.index_of(&b).unwrap()];
    let tm = cur.t[cur.index_of(&m).unwrap()];
    let ch = (ta * Dual::c(0.5)).clamp_min(1.0);
    let length = ch.acosh() * Dual::c(2.0);
    let coth = ch / (ch * ch - Dual::c(1.0)).sqrt();
    let tau_abs = (tb / (coth * Dual::c(2.0))).clamp_min(1.0).acosh() * Dual::c(2.0);
    let pred = |tau: Dual| coth * ((tau - Dual::c(d) * length) * Dual::c(0.5)).cosh() * Dual::c(2.0);
    let twist = if (pred(tau_abs).re - tm.re).abs() <= (pred(tau_abs * Dual::c(-1.0)).re - tm.re).abs()
    {
        tau_abs
    } else {
        tau_abs * Dual::c(-1.0)
    };
    Ok((length, twist))
}

/// ℓ = 2·arccosh(t/2) for any scalar type (argument clamped at 1).
pub(crate) fn generic_length<T: Real>(t: T) -> T {
    (t * T::c(0.5)).clamp_min(1.0).acosh() * T::c(2.0)
}

fn dual_length(t: Dual) -> Dual {
    generic_length(t)
}

fn length_from_trace(t: f64) -> f64 {
    generic_length(t)
}

/// Markov flip of a trace triple at a vertex (validates the input identity).
pub fn flip_triple(t: [f64; 3], w: usize) -> Result<[f64; 3]> {
    let s = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
    if (s - t[0] * t[1] * t[2]).abs() > MARKOV_TOL * s {
        return Err(Error::InvalidPoint(
            "flip input violates the Markov identity".into(),
        ));
    }
    let mut out = t;
    out[w] = t[(w + 1) % 3] * t[(w + 2) % 3] - t[w];
    Ok(out)
}

/// Reduced (sorted) triangle reached by Markov reduction.
#[derive(Clone, Debug)]
pub struct SystoleTriple {
    /// Slopes of the reduced triangle, sorted by increasing trace.
    pub slopes: [Slope; 3],
    /// Traces in the same order.
    pub traces: [f64; 3],
    /// Slopes achieving the minimal trace (with ties within [`TIE_TOL`]).
    pub systoles: Vec<Slope>,
}

impl SystoleTriple {
    /// Length of the systole.
    pub fn systole_length(&self) -> f64 {
        length_from_trace(self.traces[0])
    }
}

/// The matrix of n positive Dehn twists about `a`, acting on slopes.
pub fn twist_matrix(a: &Slope, n: i64) -> IntMatrix {
    use num_bigint::BigInt;
    let p = a.numer();
    let q = a.denom();
    let n = BigInt::from(n);
    IntMatrix {
        m: [
            [BigInt::from(1) - &n * p * q, &n * p * p],
            [-(&n * q * q), BigInt::from(1) + &n * p * q],
        ],
    }
}

pub(crate) fn base_slopes() -> [Slope; 3] {
    [Slope::infinity(), Slope::zero(), Slope::one()]
}

fn det_sign(a: &Slope, b: &Slope) -> f64 {
    use num_traits::ToPrimitive;
    a.det(b).to_f64().unwrap_or(0.0).signum()
}

fn argmax(t: &[f64; 3]) -> usize {
    let mut w = 0;
    for i in 1..3 {
        if t[i] > t[w] {
            w = i;
        }
    }
    w
}

/// A position in the Farey dual tree: a triangle with slopes and traces.
/// Generic over the trace scalar so plain values, dual numbers, and trace
/// pairs share one walk implementation (branching is exact, on slopes only).
#[derive(Clone, Debug)]
pub(crate) struct Cursor<T> {
    pub s: [Slope; 3],
    pub t: [T; 3],
    /// Running bound on relative-error amplification: each flip computes
    /// t″ = t_u·t_v − t_w, and when the product nearly cancels against the
    /// subtrahend the common leading digits are lost. Multiplying the
    /// per-flip ratios bounds the compounded loss along the walk.
    pub amp: f64,
}

impl<T: Flip> Cursor<T> {
    pub fn new(s: [Slope; 3], t: [T; 3]) -> Cursor<T> {
        Cursor { s, t, amp: 1.0 }
    }

    pub fn index_of(&self, a: &Slope) -> Option<usize> {
        self.s.iter().position(|s| s == a)
    }

    /// Cross the edge opposite vertex `w`.
    pub fn flip_at(&mut self, w: usize) -> Result<()> {
        let (u, v) = (self.t[(w + 1) % 3], self.t[(w + 2) % 3]);
        let nt = self.t[w].flip_from(u, v);
        if !nt.magnitude().is_finite() || nt.magnitude() > TRACE_CAP {
            return Err(Error::Range(
                "trace overflow during Farey walk (length beyond representable range)".into(),
            ));
        }
        let ratio =
            (u.magnitude() * v.magnitude() + self.t[w].magnitude()) / nt.magnitude();
        self.amp *= ratio.max(1.0);
        self.s[w] = flip_vertex(&self.s, w);
        self.t[w] = nt;
        Ok(())
    }

    /// Walk until `a` is a vertex; returns its index.
    pub fn walk_toward(&mut self, a: &Slope) -> Result<usize> {
        for _ in 0..MAX_WALK_STEPS {
            match self.index_of(a) {
                Some(i) => return Ok(i),
                None => {
                    let w = separating_edge(&self.s, a).expect(
                        "a non-vertex slope lies beyond exactly one triangle edge",
                    );
                    self.flip_at(w)?;
                }
            }
        }
        Err(Error::Range("Farey walk exceeded step cap".into()))
    }

    /// With {a, b} already vertices, make the third vertex equal `third`
    /// (one of the two triangles on that edge) by at most one flip.
    pub fn set_third(&mut self, third: &Slope, a: &Slope, b: &Slope) -> Result<()> {
        if self.index_of(third).is_some() {
            return Ok(());
        }
        let w = (0..3)
            .find(|&i| &self.s[i] != a && &self.s[i] != b)
            .expect("edge vertices present");
        self.flip_at(w)?;
        debug_assert!(self.index_of(third).is_some(), "two triangles share an edge");
        Ok(())
    }

    /// Trace at an arbitrary slope, walking from the current position.
    pub fn trace_at(&mut self, a: &Slope) -> Result<T>
    where
        T: Copy,
    {
        let i = self.walk_toward(a)?;
        Ok(self.t[i])
    }
}

impl Cursor<f64> {
    pub fn from_point(x: &TorusPoint) -> Cursor<f64> {
        Cursor::new(base_slopes(), [x.x, x.y, x.z])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farey::basis_through;

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    /// Point on the trace variety with given x, y (larger root for z).
    fn point(x: f64, y: f64) -> TorusPoint {
        let z = (x * y + (x * x * y * y - 4.0 * (x * x + y * y)).sqrt()) * 0.5;
        TorusPoint::new(x, y, z).unwrap()
    }

    /// The square torus: traces (2√2, 2√2, 4); the unique point where the
    /// two base curves cross orthogonally, hence twist 0 about 1/0.
    fn square_point() -> TorusPoint {
        let r = 8.0f64.sqrt();
        TorusPoint::new(r, r, 4.0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(TorusPoint::new(3.0, 3.0, 3.0).is_ok());
        assert!(TorusPoint::new(3.0, 3.0, 6.0).is_ok());
        assert!(TorusPoint::new(3.0, 3.0, 5.9).is_err());
        assert!(TorusPoint::new(2.0, 3.0, 3.0).is_err());
        assert!(TorusPoint::new(f64::NAN, 3.0, 3.0).is_err());
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip_triple([3.0, 3.0, 3.0], 2).unwrap(), [3.0, 3.0, 6.0]);
        assert_eq!(flip_triple([3.0, 3.0, 6.0], 2).unwrap(), [3.0, 3.0, 3.0]);
        let t = flip_triple([3.0, 3.0, 6.0], 1).unwrap();
        assert_eq!(t, [3.0, 15.0, 6.0]);
        let u = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
        assert_eq!(u, t[0] * t[1] * t[2]);
        assert!(flip_triple([3.0, 3.0, 7.0], 0).is_err());
    }

    #[test]
    fn modular_lengths() {
        let x = TorusPoint::modular();
        let expect = 2.0 * 1.5f64.acosh();
        assert!((expect - 1.9248473002384139).abs() < 1e-12);
        for a in [Slope::infinity(), Slope::zero(), Slope::one()] {
            assert!((x.length_of(&a).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_walk_reaches_deep_slopes() {
        let x = TorusPoint::new(3.0, 3.0, 6.0).unwrap();
        assert!((x.length_of(&Slope::one()).unwrap() - 2.0 * 3.0f64.acosh()).abs() < 1e-12);
        // Neighbor fan of 1/0: traces satisfy t_{n+1} = x·t_n − t_{n−1}.
        let (mut a, mut b) = (3.0, 6.0); // 0/1, 1/1
        for n in 2..12 {
            let t = x.trace_at(&s(n, 1)).unwrap();
            let expect = 3.0 * b - a;
            assert!((t - expect).abs() < 1e-9 * expect.abs());
            a = b;
            b = expect;
        }
    }

    #[test]
    fn markov_drift_random_flips() {
        // Pseudo-random flip walk; drift must stay tiny.
        let mut cur = Cursor::from_point(&TorusPoint::modular());
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut max_defect: f64 = 0.0;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let w = (state >> 33) as usize % 3;
            // Avoid running off to huge traces: flip back if it would exceed.
            let nt = cur.t[w].flip_from(cur.t[(w + 1) % 3], cur.t[(w + 2) % 3]);
            if nt > 1e12 {
                continue;
            }
            cur.flip_at(w).unwrap();
            let p = TorusPoint { x: cur.t[0], y: cur.t[1], z: cur.t[2] };
            max_defect = max_defect.max(p.markov_defect());
        }
        assert!(max_defect < 1e-9, "markov drift {max_defect}");
    }

    #[test]
    fn systole_examples() {
        let st = TorusPoint::modular().systole_triple().unwrap();
        assert_eq!(st.traces, [3.0, 3.0, 3.0]);
        assert_eq!(st.systoles.len(), 3);
        let st6 = TorusPoint::new(3.0, 3.0, 6.0).unwrap().systole_triple().unwrap();
        assert_eq!(st6.traces, [3.0, 3.0, 3.0]);
        assert_eq!(st6.systoles.len(), 3);
        // Twisting is a relabeling; reduction undoes it.
        let tw = TorusPoint::modular().twisted(&Slope::one(), 20).unwrap();
        let str = tw.systole_triple().unwrap();
        assert!((str.traces[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn short_markings() {
        let mks = TorusPoint::modular().short_marking().unwrap();
        assert_eq!(mks.len(), 3);
        // The three markings form the base Farey triangle.
        let tri = [Slope::infinity(), Slope::zero(), Slope::one()];
        for mk in &mks {
            assert!(tri.contains(&mk.a) && tri.contains(&mk.b));
        }
        // Perturbed point: unique marking.
        let x = from_fn(&FnCoords { alpha: Slope::infinity(), length: 2.1, twist: 0.13 }).unwrap();
        let mks = x.short_marking().unwrap();
        assert_eq!(mks.len(), 1);
        // Twisting is a relabeling: the short marking moves with the twist.
        let a = Slope::one();
        let tw = x.twisted(&a, 5).unwrap();
        let mks0 = x.short_marking().unwrap();
        let expect: Vec<Marking> = mks0
            .iter()
            .map(|m| Marking::new(m.a.dehn_twist(&a, 5), m.b.dehn_twist(&a, 5)).unwrap())
            .collect();
        assert_eq!(tw.short_marking().unwrap(), expect);
    }

    #[test]
    fn square_point_has_zero_twist() {
        let c = square_point().fn_coords(&Slope::infinity()).unwrap();
        assert!((c.length - 2.0 * 2.0f64.sqrt().acosh()).abs() < 1e-12);
        assert!(c.twist.abs() < 1e-7, "twist {}", c.twist);
    }

    #[test]
    fn fn_roundtrip() {
        for (x, a) in [
            (TorusPoint::modular(), Slope::infinity()),
            (TorusPoint::new(3.0, 3.0, 6.0).unwrap(), Slope::infinity()),
            (TorusPoint::new(3.0, 3.0, 6.0).unwrap(), s(2, 1)),
            (point(3.1, 4.2), s(1, 2)),
        ] {
            let c = x.fn_coords(&a).unwrap();
            let back = from_fn(&c).unwrap();
            for (u, v) in x.traces().iter().zip(back.traces()) {
                assert!((u - v).abs() < 1e-9 * u.abs().max(1.0), "{x:?} vs {back:?} at {a}");
            }
            // Round-trip length agreement.
            assert!((x.length_of(&a).unwrap() - c.length).abs() < 1e-9);
        }
    }

    #[test]
    fn twist_equivariance_under_dehn_twist() {
        // Covers both determinant signs of (a, canonical neighbor).
        for a in [Slope::infinity(), Slope::zero(), s(-1, 1), s(5, 2), s(2, 1)] {
            let x = from_fn(&FnCoords { alpha: a.clone(), length: 1.3, twist: 0.37 }).unwrap();
            let c0 = x.fn_coords(&a).unwrap();
            assert!((c0.length - 1.3).abs() < 1e-9 && (c0.twist - 0.37).abs() < 1e-9, "a={a}: {c0:?}");
            for n in [1i64, -1, 3] {
                let tw = x.twisted(&a, n).unwrap();
                let c1 = tw.fn_coords(&a).unwrap();
                assert!(
                    (c1.twist - c0.twist - n as f64 * c0.length).abs() < 1e-6,
                    "a={a} n={n}: {} vs {} + {n}·{}",
                    c1.twist,
                    c0.twist,
                    c0.length
                );
                assert!((c1.length - c0.length).abs() < 1e-6);
                // from_fn at the shifted twist equals the twisted point.
                let built = from_fn(&FnCoords {
                    alpha: a.clone(),
                    length: c0.length,
                    twist: c0.twist + n as f64 * c0.length,
                })
                .unwrap();
                for (u, v) in tw.traces().iter().zip(built.traces()) {
                    assert!((u - v).abs() < 1e-8 * u.abs().max(1.0));
                }
            }
            // Across the twisted() route switchover the relabel walk and
            // the chart shift must keep agreeing.
            for n in [7i64, 8, 9, 12] {
                let walked = x.relabel(&twist_matrix(&a, n)).unwrap();
                let shifted = from_fn(&FnCoords {
                    alpha: a.clone(),
                    length: c0.length,
                    twist: c0.twist + n as f64 * c0.length,
                })
                .unwrap();
                for (u, v) in walked.traces().iter().zip(shifted.traces()) {
                    assert!(
                        (u - v).abs() < 1e-7 * u.abs().max(1.0),
                        "a={a} n={n}: {u} vs {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn dlength_matches_central_differences() {
        let x = point(3.1, 4.2);
        // A tangent direction: perturb x, y and solve dz from tangency.
        let v = tangent_at(&x, 0.31, -0.2);
        for a in [Slope::infinity(), Slope::one(), s(3, 2), s(-2, 3)] {
            let d = dlength(&a, &v).unwrap();
            let h = 1e-5;
            let xp = v.step(h).unwrap();
            let xm = v.step(-h).unwrap();
            let fd = (xp.length_of(&a).unwrap() - xm.length_of(&a).unwrap()) / (2.0 * h);
            let denom = d.abs().max(1e-6);
            assert!((d - fd).abs() / denom < 1e-5, "a={a}: dual {d} vs fd {fd}");
        }
        // Zero vector → zero derivative.
        let z = TangentVector::new(x, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(dlength(&Slope::one(), &z).unwrap(), 0.0);
    }

    /// Solve for dz making (dx, dy, dz) tangent at x.
    fn tangent_at(x: &TorusPoint, dx: f64, dy: f64) -> TangentVector {
        let TorusPoint { x: a, y: b, z: c } = *x;
        // 2a·dx + 2b·dy + 2c·dz = dx·bc + a·dy·c + ab·dz
        let dz = (dx * b * c + a * dy * c - 2.0 * a * dx - 2.0 * b * dy) / (2.0 * c - a * b);
        TangentVector::new(*x, dx, dy, dz).unwrap()
    }

    #[test]
    fn tangency_validation() {
        let x = TorusPoint::modular();
        assert!(TangentVector::new(x, 1.0, 0.0, 0.0).is_err());
        assert!(tangent_at(&x, 1.0, -1.0).coord_norm() > 0.0);
    }

    #[test]
    fn step_projects_back_to_variety() {
        let x = point(3.1, 4.2);
        let v = tangent_at(&x, 0.31, -0.2);
        let y = v.step(1e-4).unwrap();
        assert!(y.markov_defect() < 1e-12);
    }

    #[test]
    fn relabel_is_equivariant() {
        // Relative tolerance 1e-7: descending from traces ~1e5 costs ~1e-16·T²
        // absolute in the flip recursion.
        for x in [TorusPoint::modular(), point(3.1, 4.2)] {
            for a in [s(3, 5), s(-2, 1), Slope::one()] {
                let g = basis_through(&a);
                let y = x.relabel(&g).unwrap();
                for t in [Slope::infinity(), Slope::zero(), s(2, 3)] {
                    let lhs = y.length_of(&g.apply(&t)).unwrap();
                    let rhs = x.length_of(&t).unwrap();
                    assert!((lhs - rhs).abs() < 1e-7 * rhs.max(1.0), "a={a} t={t}");
                }
            }
        }
    }

    #[test]
    fn serde_roundtrip() {
        let x = TorusPoint::new(3.0, 3.0, 6.0).unwrap();
        let j = serde_json::to_string(&x).unwrap();
        assert_eq!(j, r#"{"x":3.0,"y":3.0,"z":6.0}"#);
        let back: TorusPoint = serde_json::from_str(&j).unwrap();
        assert_eq!(x, back);
        let c = FnCoords { alpha: s(5, 2), length: 1.25, twist: -0.5 };
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(j, r#"{"alpha":"5/2","length":1.25,"twist":-0.5}"#);
    }
}
