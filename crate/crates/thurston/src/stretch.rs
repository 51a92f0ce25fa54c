//! Shearing coordinates, stretch paths, and geodesic envelopes.
//!
//! A curve `a` admits two horocyclic completions of its complement, labelled
//! + and −. Each gives a shearing chart (ℓ_a, s_a) in which stretching is
//! literally scalar multiplication: both entries scale by e^t. The twist
//! along a stretch path therefore has a closed form, and the envelope of
//! geodesics from X to Y (when the maximally stretched curve is isolated)
//! is a quadrilateral whose corners solve one monotone scalar equation each.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farey::Slope;
use crate::metric::{max_stretch_curve, SearchBudget};
use crate::torus::{from_fn, FnCoords, TorusPoint};

/// Absolute twist tolerance for classifying a point as lying on a stretch ray.
const BOUNDARY_TOL: f64 = 1e-9;
/// Bisection tolerance for the corner-length solve.
const CORNER_TOL: f64 = 1e-12;
/// Bracket for the corner-length solve; the corner equation is strictly
/// monotone from +∞ (length → 0) down to 2 (length → ∞).
const CORNER_BRACKET: (f64, f64) = (1e-8, 1e3);

/// Which of the two transverse completions (foliation directions) is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// The other completion.
    pub fn other(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Sign> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(Error::InvalidPoint(format!(
                "sign must be + or -, got `{other}`"
            ))),
        }
    }
}

/// log coth(ℓ/2), computed as log1p(±e^{−ℓ}) differences so it stays
/// accurate both for short curves (where it ~ −log(ℓ/2)) and long ones
/// (where it ~ 2e^{−ℓ}).
pub(crate) fn log_coth_half(ell: f64) -> f64 {
    let q = (-ell).exp();
    q.ln_1p() - (-q).ln_1p()
}

/// One shearing coordinate pair (ℓ_a, s_a) of a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearCoords {
    pub alpha: Slope,
    pub sign: Sign,
    pub length: f64,
    pub shear: f64,
}

/// Shearing coordinates of `x` in the chart of `a` with the chosen
/// completion: s± = τ ± (ℓ + 2 log coth(ℓ/2)).
pub fn shear_coords(x: &TorusPoint, a: &Slope, sign: Sign) -> Result<ShearCoords> {
    let fc = x.fn_coords(a)?;
    let shear = fc.twist + sign.factor() * (fc.length + 2.0 * log_coth_half(fc.length));
    Ok(ShearCoords {
        alpha: a.clone(),
        sign,
        length: fc.length,
        shear,
    })
}

/// The point reached by stretching `x` along `a` (with the chosen
/// completion) for time `t`. Negative `t` follows the backward ray of the
/// same bi-infinite line.
///
/// The length scales as ℓ₀e^t and the twist follows the closed form
/// τ(t) = e^t τ₀ ± (2 e^t log coth(ℓ₀/2) − 2 log coth(ℓ₀e^t/2)),
/// equivalent to linear scaling of both shear entries.
pub fn stretch_point(x: &TorusPoint, a: &Slope, sign: Sign, t: f64) -> Result<TorusPoint> {
    if !t.is_finite() {
        return Err(Error::Range(format!("stretch time {t} is not finite")));
    }
    let fc = x.fn_coords(a)?;
    let scale = t.exp();
    let ell = fc.length * scale;
    if !ell.is_finite() || ell <= 0.0 {
        return Err(Error::Range(format!(
            "stretched length {ell} left the representable range"
        )));
    }
    let tau = scale * fc.twist
        + sign.factor() * 2.0 * (scale * log_coth_half(fc.length) - log_coth_half(ell));
    from_fn(&FnCoords {
        alpha: a.clone(),
        length: ell,
        twist: tau,
    })
}

/// d/dt (τ⁺(t) − τ⁻(t)) at t = 0 for a curve of length `ell`: the speed at
/// which the two stretch rays separate in the twist direction. Strictly
/// positive and decaying to 0 as the curve gets long.
pub fn transversality_gap_from_length(ell: f64) -> f64 {
    4.0 * log_coth_half(ell) + 4.0 * ell / ell.sinh()
}

/// Transversality gap of the two stretch rays along `a` at `x`.
pub fn transversality_gap(x: &TorusPoint, a: &Slope) -> Result<f64> {
    Ok(transversality_gap_from_length(x.fn_coords(a)?.length))
}

/// Where a point sits relative to the forward cone of stretch lines along
/// `a` out of a basepoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutClass {
    Interior,
    BoundaryPlus,
    BoundaryMinus,
    Outside,
}

/// Classify `y` against the cone Out(x, a) bounded by the two stretch rays
/// along a± from `x`.
pub fn out_contains(x: &TorusPoint, a: &Slope, y: &TorusPoint) -> Result<OutClass> {
    let fx = x.fn_coords(a)?;
    let fy = y.fn_coords(a)?;
    let scale = fy.length / fx.length;
    if scale <= 1.0 {
        return Ok(OutClass::Outside);
    }
    // Twist of the two rays at the level set ℓ = ℓ_y.
    let spread = 2.0 * (scale * log_coth_half(fx.length) - log_coth_half(fy.length));
    let center = scale * fx.twist;
    let (lo, hi) = (center - spread, center + spread);
    if (fy.twist - hi).abs() <= BOUNDARY_TOL {
        Ok(OutClass::BoundaryPlus)
    } else if (fy.twist - lo).abs() <= BOUNDARY_TOL {
        Ok(OutClass::BoundaryMinus)
    } else if fy.twist > lo && fy.twist < hi {
        Ok(OutClass::Interior)
    } else {
        Ok(OutClass::Outside)
    }
}

/// The envelope of geodesics from `x` to `y`: a quadrilateral with two
/// interior corners, each joined to the endpoints by stretch segments.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeQuad {
    pub x: TorusPoint,
    pub y: TorusPoint,
    pub alpha: Slope,
    pub corner_plus: TorusPoint,
    pub corner_minus: TorusPoint,
    /// Stretch durations of the four edges: x →(+) corner_plus →(−) y and
    /// x →(−) corner_minus →(+) y.
    pub x_to_plus: f64,
    pub plus_to_y: f64,
    pub x_to_minus: f64,
    pub minus_to_y: f64,
    /// True when the quadrilateral collapses to a segment or point.
    pub degenerate: bool,
}

/// Solve 2 + 4·log coth(ℓ/2)/ℓ = gap for ℓ. The left side strictly
/// decreases from +∞ to 2, so any gap > 2 has a unique root.
fn solve_corner_length(gap: f64) -> Result<f64> {
    if !(gap > 2.0) {
        return Err(Error::NotInOut);
    }
    let f = |ell: f64| 2.0 + 4.0 * log_coth_half(ell) / ell - gap;
    let (mut lo, mut hi) = CORNER_BRACKET;
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(Error::Range(format!(
            "corner equation gap {gap} out of bracket"
        )));
    }
    while hi - lo > CORNER_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Corner on the `lead` side: the point whose `lead` shear ratio matches
/// `x` and whose opposite shear ratio matches `y`.
fn corner(x: &TorusPoint, y: &TorusPoint, a: &Slope, lead: Sign) -> Result<TorusPoint> {
    let cx = shear_coords(x, a, lead)?;
    let cy = shear_coords(y, a, lead.other())?;
    let (r_lead, r_other) = (cx.shear / cx.length, cy.shear / cy.length);
    let gap = match lead {
        Sign::Plus => r_lead - r_other,
        Sign::Minus => r_other - r_lead,
    };
    let ell = solve_corner_length(gap)?;
    // Recover the twist from the lead-leaf equation s_lead(C) = r_lead·ℓ_C.
    let tau = r_lead * ell - lead.factor() * (ell + 2.0 * log_coth_half(ell));
    from_fn(&FnCoords {
        alpha: a.clone(),
        length: ell,
        twist: tau,
    })
}

/// Envelope of geodesics from `x` to `y`.
///
/// Requires the maximally stretched curve of the pair to be an isolated
/// simple curve; if the witness is not isolated the envelope is only
/// computable when `y` lies on one of the boundary rays (then it is the
/// stretch segment itself, returned with `degenerate` set). A point pair
/// x = y yields a point envelope at the systole witness.
pub fn envelope(x: &TorusPoint, y: &TorusPoint, budget: &SearchBudget) -> Result<EnvelopeQuad> {
    let (alpha, isolated) = max_stretch_curve(x, y, budget)?;
    if x == y {
        return Ok(EnvelopeQuad {
            x: *x,
            y: *y,
            alpha,
            corner_plus: *x,
            corner_minus: *x,
            x_to_plus: 0.0,
            plus_to_y: 0.0,
            x_to_minus: 0.0,
            minus_to_y: 0.0,
            degenerate: true,
        });
    }
    let class = out_contains(x, &alpha, y)?;
    if class == OutClass::Outside {
        return Err(Error::NotInOut);
    }
    if !isolated && class == OutClass::Interior {
        return Err(Error::NotSimpleCurve);
    }
    let corner_plus = corner(x, y, &alpha, Sign::Plus)?;
    let corner_minus = corner(x, y, &alpha, Sign::Minus)?;
    let ell_x = x.fn_coords(&alpha)?.length;
    let ell_y = y.fn_coords(&alpha)?.length;
    let ell_p = corner_plus.fn_coords(&alpha)?.length;
    let ell_m = corner_minus.fn_coords(&alpha)?.length;
    Ok(EnvelopeQuad {
        x: *x,
        y: *y,
        alpha,
        corner_plus,
        corner_minus,
        x_to_plus: (ell_p / ell_x).ln(),
        plus_to_y: (ell_y / ell_p).ln(),
        x_to_minus: (ell_m / ell_x).ln(),
        minus_to_y: (ell_y / ell_m).ln(),
        degenerate: class != OutClass::Interior,
    })
}
