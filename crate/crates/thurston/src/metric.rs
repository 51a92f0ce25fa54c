//! The asymmetric log-ratio metric: distance as a supremum of length
//! ratios over simple closed curves, found by best-first search over the
//! Farey triangle tree.
//!
//! Every curve certifies a lower bound, so the search result is always a
//! certified lower bound; `saturated` reports whether the node budget ran
//! out before the frontier decayed below the incumbent.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::Serialize;

use crate::error::Result;
use crate::farey::{basis_through, separating_edge, Slope};
use crate::scalar::TracePair;
use crate::torus::{base_slopes, generic_length, Cursor, TorusPoint};

/// Frontier priorities this far below the incumbent count as stalled.
pub const STALL_TOL: f64 = 1e-6;
/// Ratio ties within this prefer the shorter witness. Sits above the noise
/// floor of length ratios for deep curves (~1e−12 relative), so a twisting
/// fan converging to the supremum cannot steal the witness by roundoff.
const TIE_TOL: f64 = 1e-9;

/// Node-expansion and termination parameters for the distance search.
#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    /// Maximum number of triangle expansions.
    pub max_nodes: usize,
    /// Consecutive stalled expansions before the search stops.
    pub patience: usize,
    /// Ratio gap under which a competitor disputes the witness's isolation.
    pub gap_tol: f64,
}

impl Default for SearchBudget {
    fn default() -> SearchBudget {
        SearchBudget { max_nodes: 20_000, patience: 8, gap_tol: 1e-4 }
    }
}

/// Outcome of the distance search.
#[derive(Clone, Debug, Serialize)]
pub struct DistResult {
    /// Best log length ratio found (a lower bound for the distance).
    pub value: f64,
    /// Curve achieving it.
    pub witness: Slope,
    /// Always true: any curve's ratio bounds the supremum from below.
    pub certified_lower: bool,
    /// Triangles expanded.
    pub search_nodes: usize,
    /// True when the node budget stopped the search (rather than stalling).
    pub saturated: bool,
    /// Incumbent minus the best frontier priority at termination.
    pub gap: f64,
}

/// log(ℓ_a(Y)) − log(ℓ_a(X)).
pub fn ratio(x: &TorusPoint, y: &TorusPoint, a: &Slope) -> Result<f64> {
    Ok((y.length_of(a)? / x.length_of(a)?).ln())
}

fn vertex_ratio(t: TracePair) -> f64 {
    (generic_length(t.b) / generic_length(t.a)).ln()
}

struct HeapNode {
    prio: f64,
    seq: usize,
    cur: Cursor<TracePair>,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.prio == other.prio && self.seq == other.seq
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on priority; FIFO among exact ties for determinism.
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

/// Incumbent candidate: ties on ratio prefer the shorter curve at X, then
/// the smaller slope, so the self-distance witness is a systole.
struct Incumbent {
    value: f64,
    witness: Slope,
    trace_x: f64,
}

impl Incumbent {
    fn offer(&mut self, r: f64, slope: &Slope, trace_x: f64) {
        let better = if r > self.value + TIE_TOL {
            true
        } else if (r - self.value).abs() <= TIE_TOL {
            if trace_x < self.trace_x - TIE_TOL {
                true
            } else {
                (trace_x - self.trace_x).abs() <= TIE_TOL && *slope < self.witness
            }
        } else {
            false
        };
        if better {
            self.value = r;
            self.witness = slope.clone();
            self.trace_x = trace_x;
        }
    }
}

struct Search {
    result: DistResult,
    /// Best ratio seen per slope, for isolation analysis.
    evaluated: HashMap<Slope, f64>,
}

fn pair_cursor(x: &TorusPoint, y: &TorusPoint) -> Cursor<TracePair> {
    Cursor::new(
        base_slopes(),
        [
            TracePair { a: x.x, b: y.x },
            TracePair { a: x.y, b: y.y },
            TracePair { a: x.z, b: y.z },
        ],
    )
}

/// Seed triangles: the base triangle, both points' short-marking triangles,
/// and every triangle along the walks connecting them to the base (the walk
/// is free to enumerate since the cursor crosses them anyway).
fn seed_cursors(x: &TorusPoint, y: &TorusPoint) -> Result<Vec<Cursor<TracePair>>> {
    let base = pair_cursor(x, y);
    let mut out = vec![base.clone()];
    let mut markings = x.short_marking()?;
    markings.extend(y.short_marking()?);
    for mk in markings {
        let mut cur = base.clone();
        for target in [&mk.a, &mk.b] {
            while cur.index_of(target).is_none() {
                let w = separating_edge(&cur.s, target)
                    .expect("non-vertex slope lies beyond one edge");
                if cur.flip_at(w).is_err() {
                    break;
                }
                out.push(cur.clone());
            }
        }
        let m = mk.a.mediant(&mk.b);
        if cur.index_of(&m).is_none()
            && cur.index_of(&mk.a).is_some()
            && cur.index_of(&mk.b).is_some()
        {
            if cur.set_third(&m, &mk.a, &mk.b).is_ok() {
                out.push(cur.clone());
            }
        }
    }
    Ok(out)
}

fn run_search(x: &TorusPoint, y: &TorusPoint, budget: &SearchBudget) -> Result<Search> {
    if x == y {
        let st = x.systole_triple()?;
        return Ok(Search {
            result: DistResult {
                value: 0.0,
                witness: st.systoles[0].clone(),
                certified_lower: true,
                search_nodes: 0,
                saturated: false,
                gap: 0.0,
            },
            evaluated: HashMap::new(),
        });
    }
    let mut heap: BinaryHeap<HeapNode> = BinaryHeap::new();
    let mut visited: HashSet<[Slope; 3]> = HashSet::new();
    let mut evaluated: HashMap<Slope, f64> = HashMap::new();
    let mut inc = Incumbent { value: f64::NEG_INFINITY, witness: Slope::infinity(), trace_x: f64::INFINITY };
    let mut seq = 0usize;

    let mut push = |cur: Cursor<TracePair>,
                    heap: &mut BinaryHeap<HeapNode>,
                    visited: &mut HashSet<[Slope; 3]>,
                    evaluated: &mut HashMap<Slope, f64>,
                    inc: &mut Incumbent| {
        if !visited.insert(triangle_key(&cur.s)) {
            return;
        }
        let mut prio = f64::NEG_INFINITY;
        for i in 0..3 {
            let r = vertex_ratio(cur.t[i]);
            prio = prio.max(r);
            inc.offer(r, &cur.s[i], cur.t[i].a);
            evaluated
                .entry(cur.s[i].clone())
                .and_modify(|e| *e = e.max(r))
                .or_insert(r);
        }
        heap.push(HeapNode { prio, seq, cur });
        seq += 1;
    };

    for s in seed_cursors(x, y)? {
        push(s, &mut heap, &mut visited, &mut evaluated, &mut inc);
    }

    let mut nodes = 0usize;
    let mut stalled = 0usize;
    let mut saturated = false;
    while let Some(node) = heap.pop() {
        if nodes >= budget.max_nodes {
            saturated = true;
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
            push(child, &mut heap, &mut visited, &mut evaluated, &mut inc);
        }
    }
    let gap = inc.value - heap.peek().map_or(f64::NEG_INFINITY, |n| n.prio);
    Ok(Search {
        result: DistResult {
            value: inc.value,
            witness: inc.witness,
            certified_lower: true,
            search_nodes: nodes,
            saturated,
            gap,
        },
        evaluated,
    })
}

/// Distance search from X to Y (asymmetric).
pub fn thurston_dist(x: &TorusPoint, y: &TorusPoint, budget: &SearchBudget) -> Result<DistResult> {
    Ok(run_search(x, y, budget)?.result)
}

/// The witness curve of the distance, plus a heuristic isolation flag:
/// true when every competitor within `gap_tol` of the incumbent lies in the
/// witness's own twisting fan (so the maximally stretched object is this
/// curve rather than a larger lamination).
pub fn max_stretch_curve(
    x: &TorusPoint,
    y: &TorusPoint,
    budget: &SearchBudget,
) -> Result<(Slope, bool)> {
    let search = run_search(x, y, budget)?;
    let witness = search.result.witness.clone();
    let to_base = basis_through(&witness).inverse();
    let mut isolated = true;
    for (slope, r) in &search.evaluated {
        if *slope == witness || *r < search.result.value - budget.gap_tol {
            continue;
        }
        // Competitor close to the top: harmless only if it clusters around
        // the witness (image slope p/q with |p| ≥ 2q after moving the
        // witness to 1/0).
        let img = to_base.apply(slope);
        let clustered = img.numer().magnitude() >= &(img.denom().magnitude() * 2u32);
        if !clustered {
            isolated = false;
            break;
        }
    }
    Ok((witness, isolated))
}

/// max(d(X→Y), d(Y→X)), a symmetric upper envelope used for diagnostics.
pub fn sym_dist(x: &TorusPoint, y: &TorusPoint, budget: &SearchBudget) -> Result<f64> {
    Ok(thurston_dist(x, y, budget)?
        .value
        .max(thurston_dist(y, x, budget)?.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{from_fn, FnCoords};

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!((got - want).abs() <= tol, "got {got}, want {want} ± {tol}");
    }

    fn point(x: f64, y: f64) -> TorusPoint {
        let z = (x * y + (x * x * y * y - 4.0 * (x * x + y * y)).sqrt()) * 0.5;
        TorusPoint::new(x, y, z).unwrap()
    }

    #[test]
    fn ratio_basics() {
        let x = TorusPoint::modular();
        let y = point(3.1, 4.2);
        for a in [Slope::infinity(), s(2, 3), s(-5, 1)] {
            assert_eq!(ratio(&x, &x, &a).unwrap(), 0.0);
            let r = ratio(&x, &y, &a).unwrap();
            let back = ratio(&y, &x, &a).unwrap();
            assert!((r + back).abs() < 1e-12);
        }
    }

    #[test]
    fn self_distance_is_zero_with_systole_witness() {
        let x = point(3.1, 4.2);
        let d = thurston_dist(&x, &x, &SearchBudget::default()).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.witness, x.systole_triple().unwrap().systoles[0]);
        assert!(!d.saturated);
    }

    #[test]
    fn twisted_pair_witness_crosses_twisting_curve() {
        let x = point(3.1, 4.2);
        let a = Slope::one();
        for n in [4i64, 8] {
            let y = x.twisted(&a, n).unwrap();
            let d = thurston_dist(&x, &y, &SearchBudget::default()).unwrap();
            assert!(d.value > 0.0);
            assert!(d.witness.intersects(&a), "n={n}: witness {}", d.witness);
        }
    }

    #[test]
    fn larger_budget_never_decreases_value() {
        let x = TorusPoint::modular();
        let y = point(3.4, 3.9);
        let small = SearchBudget { max_nodes: 40, patience: 2, gap_tol: 1e-4 };
        let d1 = thurston_dist(&x, &y, &small).unwrap();
        let d2 = thurston_dist(&x, &y, &SearchBudget::default()).unwrap();
        assert!(d2.value >= d1.value - 1e-15);
    }

    #[test]
    fn positivity_and_asymmetry() {
        // A short systole stretched long: the two directions differ markedly.
        let x = from_fn(&FnCoords { alpha: Slope::infinity(), length: 0.4, twist: 0.0 }).unwrap();
        let y = from_fn(&FnCoords { alpha: Slope::infinity(), length: 2.4, twist: 0.0 }).unwrap();
        let b = SearchBudget::default();
        let dxy = thurston_dist(&x, &y, &b).unwrap().value;
        let dyx = thurston_dist(&y, &x, &b).unwrap().value;
        assert!(dxy > 0.0 && dyx > 0.0);
        assert!((dxy - dyx).abs() > 0.01, "asymmetry {dxy} vs {dyx}");
    }

    #[test]
    fn deterministic_results() {
        let x = point(3.2, 3.8);
        let y = point(4.1, 3.3);
        let b = SearchBudget::default();
        let d1 = thurston_dist(&x, &y, &b).unwrap();
        let d2 = thurston_dist(&x, &y, &b).unwrap();
        assert_eq!(d1.value, d2.value);
        assert_eq!(d1.witness, d2.witness);
        assert_eq!(d1.search_nodes, d2.search_nodes);
    }

    #[test]
    fn symmetric_near_tie_is_not_isolated() {
        // Both points have x == y, so every ratio is invariant under p/q ↦ q/p.
        // The winning direction -1/1 leads the swap-tied pair (-2/1, -1/2) by
        // less than gap_tol, and those competitors are not twists of the
        // winner, so the witness must come back flagged as not isolated.
        let sym = |t: f64| {
            let z = (t * t - t * (t * t - 8.0).sqrt()) * 0.5;
            TorusPoint::new(t, t, z).unwrap()
        };
        let x = sym(6.0);
        let y = sym(6.2);
        let r_runner = ratio(&x, &y, &s(-2, 1)).unwrap();
        assert_close(r_runner, ratio(&x, &y, &s(-1, 2)).unwrap(), 1e-15);
        let (w, isolated) = max_stretch_curve(&x, &y, &SearchBudget::default()).unwrap();
        assert_eq!(w, s(-1, 1));
        let r_top = ratio(&x, &y, &w).unwrap();
        assert!(r_top - r_runner < SearchBudget::default().gap_tol);
        assert!(!isolated);
    }
}
