//! The infinitesimal form of the metric: a norm on tangent vectors, its
//! unit sphere, the flat segments of that sphere, earthquake tangents, and
//! the reconstruction of curve lengths from flat-segment sizes alone.
//!
//! The norm of a tangent vector is the supremum over curves of the
//! logarithmic length derivative dℓ_a(v)/ℓ_a. It is computed by the same
//! best-first Farey search as the distance, with dual numbers carrying the
//! directional derivative through the flip recursion.

use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::farey::{separating_edge, Slope};
use crate::metric::{SearchBudget, STALL_TOL};
use crate::scalar::Dual;
use crate::stretch::{log_coth_half, transversality_gap_from_length};
use crate::torus::{
    base_slopes, fn_coords_dual, from_fn_traces, generic_length, Cursor, TangentVector, TorusPoint,
};

/// Ratio ties within this prefer the shorter witness (see the distance
/// search for the rationale).
const TIE_TOL: f64 = 1e-9;
/// Convexity slack for the sampled unit sphere's cross-product test.
const CONVEXITY_TOL: f64 = 1e-7;
/// Flat-segment sizes below this are reported as underflow.
const FLAT_FLOOR: f64 = 1e-300;

/// One sampled direction of the unit sphere.
#[derive(Clone, Debug, Serialize)]
pub struct SphereSample {
    /// Direction angle in the tangent-plane chart.
    pub theta: f64,
    /// 1/‖v(θ)‖: distance to the sphere along this direction.
    pub radius: f64,
    /// The curve achieving the norm supremum.
    pub argmax: Slope,
}

/// A maximal run of consecutive samples sharing one argmax curve.
#[derive(Clone, Debug, Serialize)]
pub struct SphereArc {
    pub alpha: Slope,
    pub theta_start: f64,
    pub theta_end: f64,
    /// Number of samples in the run.
    pub count: usize,
}

/// Sampled unit sphere of the norm at a point.
#[derive(Clone, Debug, Serialize)]
pub struct NormSphere {
    pub base: TorusPoint,
    pub samples: Vec<SphereSample>,
    pub flat_segments: Vec<SphereArc>,
}

/// The flat segment of the unit sphere contributed by one curve: its two
/// endpoints are the unit tangents of the two stretch paths along the curve.
#[derive(Clone, Debug, Serialize)]
pub struct FlatSegment {
    pub alpha: Slope,
    pub v_plus: TangentVector,
    pub v_minus: TangentVector,
    /// ‖v⁺ − v⁻‖, the size of the flat segment.
    pub length: f64,
}

struct HeapNode {
    prio: f64,
    seq: usize,
    cur: Cursor<Dual>,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.prio == other.prio && self.seq == other.seq
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.prio
            .total_cmp(&other.prio)
            .then(other.seq.cmp(&self.seq))
    }
}

fn triangle_key(s: &[Slope; 3]) -> [Slope; 3] {
    let mut k = s.clone();
    k.sort();
    k
}

/// Logarithmic length derivative at one vertex.
fn vertex_rate(t: Dual) -> f64 {
    let g = generic_length(t);
    g.de / g.re
}

struct Incumbent {
    value: f64,
    witness: Slope,
    trace: f64,
}

impl Incumbent {
    fn offer(&mut self, r: f64, slope: &Slope, trace: f64) {
        let better = if r > self.value + TIE_TOL {
            true
        } else if (r - self.value).abs() <= TIE_TOL {
            if trace < self.trace - TIE_TOL {
                true
            } else {
                (trace - self.trace).abs() <= TIE_TOL && *slope < self.witness
            }
        } else {
            false
        };
        if better {
            self.value = r;
            self.witness = slope.clone();
            self.trace = trace;
        }
    }
}

fn seed_cursors(v: &TangentVector, hints: &[Slope]) -> Result<Vec<Cursor<Dual>>> {
    let x = v.base;
    let base = Cursor::new(
        base_slopes(),
        [
            Dual::new(x.x, v.dx),
            Dual::new(x.y, v.dy),
            Dual::new(x.z, v.dz),
        ],
    );
    let mut out = vec![base.clone()];
    let mut targets: Vec<Slope> = Vec::new();
    for mk in x.short_marking()? {
        targets.push(mk.a);
        targets.push(mk.b);
    }
    targets.extend(hints.iter().cloned());
    for target in &targets {
        let mut cur = base.clone();
        while cur.index_of(target).is_none() {
            let Some(w) = separating_edge(&cur.s, target) else {
                break;
            };
            if cur.flip_at(w).is_err() {
                break;
            }
            out.push(cur.clone());
        }
    }
    Ok(out)
}

/// Best-first search for the norm; `hints` seed extra walk targets when the
/// caller knows which region of the Farey tree the supremum lives in.
fn norm_search(v: &TangentVector, hints: &[Slope], budget: &SearchBudget) -> Result<(f64, Slope)> {
    if v.coord_norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut heap: BinaryHeap<HeapNode> = BinaryHeap::new();
    let mut visited: HashSet<[Slope; 3]> = HashSet::new();
    let mut inc = Incumbent {
        value: f64::NEG_INFINITY,
        witness: Slope::infinity(),
        trace: f64::INFINITY,
    };
    let mut seq = 0usize;

    let mut push = |cur: Cursor<Dual>,
                    heap: &mut BinaryHeap<HeapNode>,
                    visited: &mut HashSet<[Slope; 3]>,
                    inc: &mut Incumbent| {
        if !visited.insert(triangle_key(&cur.s)) {
            return;
        }
        let mut prio = f64::NEG_INFINITY;
        for i in 0..3 {
            let r = vertex_rate(cur.t[i]);
            prio = prio.max(r);
            inc.offer(r, &cur.s[i], cur.t[i].re);
        }
        heap.push(HeapNode { prio, seq, cur });
        seq += 1;
    };

    for s in seed_cursors(v, hints)? {
        push(s, &mut heap, &mut visited, &mut inc);
    }

    let mut nodes = 0usize;
    let mut stalled = 0usize;
    while let Some(node) = heap.pop() {
        if nodes >= budget.max_nodes {
            break;
        }
        nodes += 1;
        if node.prio <= inc.value - STALL_TOL {
            stalled += 1;
            if stalled >= budget.patience {
                break;
            }
        } else {
            stalled = 0;
        }
        for w in 0..3 {
            let mut child = node.cur.clone();
            if child.flip_at(w).is_err() {
                continue;
            }
            push(child, &mut heap, &mut visited, &mut inc);
        }
    }
    Ok((inc.value, inc.witness))
}

/// Norm of a tangent vector: sup over curves of dℓ_a(v)/ℓ_a(X), with the
/// maximizing curve as witness.
pub fn thurston_norm(v: &TangentVector, budget: &SearchBudget) -> Result<(f64, Slope)> {
    norm_search(v, &[], budget)
}

/// Curves longer than this get their tangents from the ascending-walk
/// derivative chart instead of the differentiated reconstruction, whose
/// descending flip walk amplifies cancellation roughly like e^{ℓ/2}·ε.
const DEEP_LENGTH: f64 = 16.0;

/// The tangent vector with prescribed derivatives of the length/twist pair
/// of `a` (`fc` must be the coordinates of `x` relative to `a`).
fn vector_with_fn_derivatives(
    x: &TorusPoint,
    a: &Slope,
    fc: &crate::torus::FnCoords,
    dlen: f64,
    dtau: f64,
) -> Result<TangentVector> {
    if fc.length <= DEEP_LENGTH {
        tangent_by_reconstruction(x, a, fc, dlen, dtau)
    } else {
        tangent_by_chart(x, a, dlen, dtau)
    }
}

/// Differentiate the reconstruction directly. Exact for shallow slopes, and
/// free of the arccosh sensitivity that the coordinate recovery has at
/// twist ≈ 0.
fn tangent_by_reconstruction(
    x: &TorusPoint,
    a: &Slope,
    fc: &crate::torus::FnCoords,
    dlen: f64,
    dtau: f64,
) -> Result<TangentVector> {
    let t = from_fn_traces::<Dual>(
        a,
        Dual::new(fc.length, dlen),
        Dual::new(fc.twist, dtau),
    )?;
    TangentVector::new(*x, t[0].de, t[1].de, t[2].de)
}

/// Express the derivative pair in a tangent frame via the ascending walk
/// and solve the 2×2 chart system.
fn tangent_by_chart(x: &TorusPoint, a: &Slope, dlen: f64, dtau: f64) -> Result<TangentVector> {
    let (e1, e2) = tangent_frame(x)?;
    let (l1, t1) = fn_coords_dual(&e1, a)?;
    let (l2, t2) = fn_coords_dual(&e2, a)?;
    let det = l1.de * t2.de - l2.de * t1.de;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Range(
            "degenerate coordinate chart in tangent solve".into(),
        ));
    }
    let c1 = (dlen * t2.de - l2.de * dtau) / det;
    let c2 = (l1.de * dtau - dlen * t1.de) / det;
    TangentVector::new(
        *x,
        c1 * e1.dx + c2 * e2.dx,
        c1 * e1.dy + c2 * e2.dy,
        c1 * e1.dz + c2 * e2.dz,
    )
}

/// The (unnormalized) velocity of the stretch path along `a` with the given
/// completion at t = 0. Unit for the norm by construction.
pub fn stretch_tangent(x: &TorusPoint, a: &Slope, plus: bool) -> Result<TangentVector> {
    let fc = x.fn_coords(a)?;
    let ell = fc.length;
    let half_gap = 2.0 * (log_coth_half(ell) + ell / ell.sinh());
    let sign = if plus { 1.0 } else { -1.0 };
    vector_with_fn_derivatives(x, a, &fc, ell, fc.twist + sign * half_gap)
}

/// Tangent of the twist flow about `a` (unit twist speed, length of `a`
/// held fixed).
pub fn earthquake_tangent(x: &TorusPoint, a: &Slope) -> Result<TangentVector> {
    let fc = x.fn_coords(a)?;
    vector_with_fn_derivatives(x, a, &fc, 0.0, 1.0)
}

/// Flat segment of the unit sphere belonging to `a`.
///
/// The segment size is computed through the exact identity
/// v⁺ − v⁻ = (4 log coth(ℓ/2) + 4ℓ/sinh ℓ) · ∂/∂τ_a,
/// which stays accurate when the two unit tangents agree to within
/// cancellation (long curves); the stored endpoints are renormalized to
/// guard roundoff.
pub fn flat_segment(x: &TorusPoint, a: &Slope, budget: &SearchBudget) -> Result<FlatSegment> {
    let ell = x.fn_coords(a)?.length;
    let hints = [a.clone()];
    let vp = stretch_tangent(x, a, true)?;
    let vm = stretch_tangent(x, a, false)?;
    let (np, _) = norm_search(&vp, &hints, budget)?;
    let (nm, _) = norm_search(&vm, &hints, budget)?;
    let eq = earthquake_tangent(x, a)?;
    let (eq_norm, _) = norm_search(&eq, &hints, budget)?;
    Ok(FlatSegment {
        alpha: a.clone(),
        v_plus: vp.scale(1.0 / np),
        v_minus: vm.scale(1.0 / nm),
        length: transversality_gap_from_length(ell) * eq_norm,
    })
}

/// Orthonormal frame of the tangent plane at `x` (in the ambient coordinate
/// metric). A parametrization device only: directions v(θ) = cos θ·e₁ +
/// sin θ·e₂ sweep the full circle once.
pub fn tangent_frame(x: &TorusPoint) -> Result<(TangentVector, TangentVector)> {
    let g = [
        2.0 * x.x - x.y * x.z,
        2.0 * x.y - x.x * x.z,
        2.0 * x.z - x.x * x.y,
    ];
    let gn = {
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        [g[0] / n, g[1] / n, g[2] / n]
    };
    // Coordinate axis least aligned with the gradient.
    let k = (0..3).min_by(|&i, &j| gn[i].abs().total_cmp(&gn[j].abs())).unwrap();
    let mut e1 = [0.0f64; 3];
    e1[k] = 1.0;
    for i in 0..3 {
        e1[i] -= gn[i] * gn[k];
    }
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for v in &mut e1 {
        *v /= n1;
    }
    let e2 = [
        gn[1] * e1[2] - gn[2] * e1[1],
        gn[2] * e1[0] - gn[0] * e1[2],
        gn[0] * e1[1] - gn[1] * e1[0],
    ];
    Ok((
        TangentVector::new(*x, e1[0], e1[1], e1[2])?,
        TangentVector::new(*x, e2[0], e2[1], e2[2])?,
    ))
}

/// Group consecutive samples with equal argmax into arcs (circularly).
fn flat_runs(samples: &[SphereSample]) -> Vec<SphereArc> {
    let n = samples.len();
    let all_equal = samples.iter().all(|s| s.argmax == samples[0].argmax);
    if all_equal {
        return vec![SphereArc {
            alpha: samples[0].argmax.clone(),
            theta_start: samples[0].theta,
            theta_end: samples[n - 1].theta,
            count: n,
        }];
    }
    // Rotate so a run boundary lies at index 0.
    let start = (0..n)
        .find(|&k| samples[k].argmax != samples[(k + n - 1) % n].argmax)
        .unwrap();
    let mut arcs = Vec::new();
    let mut run: Vec<&SphereSample> = Vec::new();
    for i in 0..=n {
        let s = &samples[(start + i) % n];
        if i == n || (!run.is_empty() && s.argmax != run[0].argmax) {
            if run.len() >= 2 {
                arcs.push(SphereArc {
                    alpha: run[0].argmax.clone(),
                    theta_start: run[0].theta,
                    theta_end: run[run.len() - 1].theta,
                    count: run.len(),
                });
            }
            run.clear();
        }
        if i < n {
            run.push(s);
        }
    }
    arcs
}

/// Sample the unit sphere of the norm at `x` with `n` directions.
pub fn unit_sphere(x: &TorusPoint, n: usize, budget: &SearchBudget) -> Result<NormSphere> {
    if n < 16 {
        return Err(Error::InvalidPoint(format!(
            "sphere needs at least 16 samples, got {n}"
        )));
    }
    let (e1, e2) = tangent_frame(x)?;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let theta = std::f64::consts::TAU * (k as f64) / (n as f64);
        let (c, s) = (theta.cos(), theta.sin());
        let v = TangentVector::new(
            *x,
            c * e1.dx + s * e2.dx,
            c * e1.dy + s * e2.dy,
            c * e1.dz + s * e2.dz,
        )?;
        let (value, argmax) = thurston_norm(&v, budget)?;
        if !(value > 0.0) {
            return Err(Error::Range(format!(
                "norm not positive at direction {theta}: {value}"
            )));
        }
        samples.push(SphereSample {
            theta,
            radius: 1.0 / value,
            argmax,
        });
    }
    let flat_segments = flat_runs(&samples);
    Ok(NormSphere {
        base: *x,
        samples,
        flat_segments,
    })
}

impl NormSphere {
    /// Chart coordinates of sample `k` on the polyline.
    pub fn chart_point(&self, k: usize) -> (f64, f64) {
        let s = &self.samples[k];
        (s.radius * s.theta.cos(), s.radius * s.theta.sin())
    }

    /// True when the sampled polyline is convex within tolerance.
    pub fn is_convex(&self) -> bool {
        let n = self.samples.len();
        for k in 0..n {
            let p0 = self.chart_point(k);
            let p1 = self.chart_point((k + 1) % n);
            let p2 = self.chart_point((k + 2) % n);
            let u = (p1.0 - p0.0, p1.1 - p0.1);
            let w = (p2.0 - p1.0, p2.1 - p1.1);
            let cross = u.0 * w.1 - u.1 * w.0;
            let scale = (u.0 * u.0 + u.1 * u.1).sqrt() * (w.0 * w.0 + w.1 * w.1).sqrt();
            if cross < -CONVEXITY_TOL * scale.max(1e-12) {
                return false;
            }
        }
        true
    }
}

/// Estimate ℓ_a(x) from flat-segment sizes alone: the segments of the
/// twisted neighbors β_n = D_a^n(β₀) shrink like e^{−ℓ_{β_n}} with
/// ℓ_{β_n} growing by ℓ_a per twist, so |log|F|| is asymptotically affine
/// in n with slope ℓ_a. Fits |log|F|| = ℓ·n + c·log n + d over the top
/// half of the twist range (the log term absorbs the polynomial prefactor)
/// and returns ℓ. Negative `n_max` runs the construction with negative
/// twists.
pub fn length_from_sphere(
    x: &TorusPoint,
    a: &Slope,
    n_max: i64,
    budget: &SearchBudget,
) -> Result<f64> {
    let ell = x.length_of(a)?;
    if ell < 3.0 {
        return Err(Error::InvalidPoint(format!(
            "reconstruction needs ℓ_a ≥ 3, got {ell}"
        )));
    }
    if n_max == 0 {
        return Err(Error::InvalidPoint("twist range must be nonzero".into()));
    }
    let (sgn, kmax) = (n_max.signum(), n_max.unsigned_abs() as usize);
    if kmax < 4 {
        return Err(Error::InvalidPoint(
            "twist range too small for the fit".into(),
        ));
    }
    let b0 = a.canonical_neighbor();
    let mut ys = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let bn = crate::torus::twist_matrix(a, sgn * k as i64).apply(&b0);
        let f = flat_segment(x, &bn, budget)?.length;
        if !(f > FLAT_FLOOR) {
            return Err(Error::Range(format!(
                "flat segment underflow at twist {k}; reduce the twist range"
            )));
        }
        ys.push((k as f64, f.ln().abs()));
    }
    let lo = kmax / 2;
    fit_affine_log(&ys[lo.saturating_sub(1)..])
}

/// Least squares for y = ℓ·n + c·log n + d; returns ℓ.
fn fit_affine_log(pts: &[(f64, f64)]) -> Result<f64> {
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(n, y) in pts {
        let phi = [n, n.ln(), 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            rhs[i] += phi[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        rhs.swap(col, piv);
        if m[col][col].abs() < 1e-12 {
            return Err(Error::Range("degenerate fit for length reconstruction".into()));
        }
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= f * m[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut sol = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..3 {
            acc -= m[i][j] * sol[j];
        }
        sol[i] = acc / m[i][i];
    }
    Ok(sol[0])
}
