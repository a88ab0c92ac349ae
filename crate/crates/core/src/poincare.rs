//! First-return maps to transversal circles and crossing maps of flow boxes.

use serde::{Deserialize, Serialize};

use crate::circle_map::CircleMapSpec;
use crate::error::{Error, Result};
use crate::field::{FlowBox, VectorField, VectorFieldSpec, SUSPENSION_WINDOW};
use crate::geometry::TorusPoint;
use crate::integrate::{run, Direction, IntegrationParams, Rhs, Step, Termination};

/// Samples used to check transversality at construction.
const TRANSVERSAL_SAMPLES: usize = 2048;
/// Accuracy of the refined crossing in the section coordinate.
const CROSSING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// The circle `y = offset`.
    Horizontal,
    /// The circle `x = offset`.
    Vertical,
}

/// Closed curve `x = offset` or `y = offset` crossed by the flow in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalCircle {
    pub axis: Axis,
    pub offset: f64,
    /// Sign of the normal field component along the circle.
    pub orientation: f64,
}

impl TransversalCircle {
    /// Check transversality of `field` at evenly spaced points of the circle.
    pub fn new(field: &VectorField, axis: Axis, offset: f64) -> Result<TransversalCircle> {
        if !offset.is_finite() {
            return Err(Error::InvalidArgument("circle offset must be finite".into()));
        }
        let offset = offset.rem_euclid(1.0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..TRANSVERSAL_SAMPLES {
            let s = i as f64 / TRANSVERSAL_SAMPLES as f64;
            let (x, y) = match axis {
                Axis::Horizontal => (s, offset),
                Axis::Vertical => (offset, s),
            };
            let (u, v) = field.eval_raw(x, y);
            let nrm = if axis == Axis::Horizontal { v } else { u };
            lo = lo.min(nrm);
            hi = hi.max(nrm);
        }
        let orientation = if lo > 1e-9 {
            1.0
        } else if hi < -1e-9 {
            -1.0
        } else {
            return Err(Error::InvalidArgument(format!("field is not transverse to the {axis:?} circle at {offset}")));
        };
        Ok(TransversalCircle { axis, offset, orientation })
    }

    /// Position along the circle of a point on it.
    pub fn coordinate(&self, p: TorusPoint) -> f64 {
        match self.axis {
            Axis::Horizontal => p.x(),
            Axis::Vertical => p.y(),
        }
    }

    pub fn point(&self, s: f64) -> TorusPoint {
        match self.axis {
            Axis::Horizontal => TorusPoint::wrap_finite(s, self.offset),
            Axis::Vertical => TorusPoint::wrap_finite(self.offset, s),
        }
    }

    fn normal(&self, x: f64, y: f64) -> f64 {
        match self.axis {
            Axis::Horizontal => y,
            Axis::Vertical => x,
        }
    }
}

/// Where and when a trajectory first crossed a level set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Crossing {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Integrate until `g` changes from negative to non-negative; refine the
/// crossing inside the accepted step by the Illinois variant of regula falsi.
pub(crate) fn first_crossing(
    field: &VectorField,
    x: f64,
    y: f64,
    sign: f64,
    horizon: f64,
    params: &IntegrationParams,
    g: impl Fn(f64, f64) -> f64,
) -> std::result::Result<Crossing, Termination> {
    let mut hit: Option<Step> = None;
    let mut obs = |s: &Step| {
        if g(s.x0, s.y0) < 0.0 && g(s.x1, s.y1) >= 0.0 {
            hit = Some(*s);
            return false;
        }
        true
    };
    let out = run(field, x, y, sign, horizon, params, &mut obs);
    match hit {
        Some(s) => Ok(refine_crossing(field, sign, &s, g)),
        None => Err(out.terminated),
    }
}

/// Locate the zero of `g` inside an accepted step where it turns non-negative,
/// re-integrating single substeps from the step start.
pub(crate) fn refine_crossing(field: &VectorField, sign: f64, s: &Step, g: impl Fn(f64, f64) -> f64) -> Crossing {
    let rhs = Rhs { field, sign };
    refine_with(s, g, |c| rhs.substep(s.x0, s.y0, c))
}

/// Regula falsi on `g` along the step, with `at(c)` the point at offset `c`.
pub(crate) fn refine_with(s: &Step, g: impl Fn(f64, f64) -> f64, at: impl Fn(f64) -> (f64, f64)) -> Crossing {
    let h = s.t1 - s.t0;
    let (mut a, mut ga) = (0.0, g(s.x0, s.y0));
    let (mut b, mut gb) = (h, g(s.x1, s.y1));
    let (mut bx, mut by) = (s.x1, s.y1);
    let mut side = 0i8;
    for _ in 0..200 {
        if gb.abs() <= CROSSING_TOL || b - a <= 1e-16 * s.t1.max(1.0) {
            break;
        }
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let (cx, cy) = at(c);
        let gc = g(cx, cy);
        if gc >= 0.0 {
            (b, gb, bx, by) = (c, gc, cx, cy);
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            (a, ga) = (c, gc);
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    Crossing { t: s.t0 + b, x: bx, y: by }
}

/// First return of the orbit of `p` (a point of `circle`) to `circle`.
pub fn poincare_return_field(
    field: &VectorField,
    circle: &TransversalCircle,
    p: TorusPoint,
    direction: Direction,
    params: &IntegrationParams,
) -> Result<(TorusPoint, f64)> {
    params.validate()?;
    let s = direction.sign() * circle.orientation;
    let (x0, y0) = match circle.axis {
        Axis::Horizontal => (p.x(), circle.offset),
        Axis::Vertical => (circle.offset, p.y()),
    };
    let n0 = circle.normal(x0, y0);
    let c = first_crossing(field, x0, y0, direction.sign(), params.t_return, params, |x, y| {
        s * (circle.normal(x, y) - n0) - 1.0
    });
    match c {
        Ok(c) => Ok((
            circle.point(match circle.axis {
                Axis::Horizontal => c.x,
                Axis::Vertical => c.y,
            }),
            c.t,
        )),
        Err(Termination::StepUnderflow) => Err(Error::StepUnderflow { time: f64::NAN, x: x0, y: y0 }),
        Err(_) => Err(Error::NoReturn(params.t_return)),
    }
}

/// First return of `p` to `circle` under the flow of `field`.
pub fn poincare_return(
    field: &VectorFieldSpec,
    circle: &TransversalCircle,
    p: TorusPoint,
    direction: Direction,
    params: &IntegrationParams,
) -> Result<(TorusPoint, f64)> {
    poincare_return_field(&field.compile()?, circle, p, direction, params)
}

/// Transverse coordinate at which the orbit entering `flow_box` at `eta`
/// leaves it through the exit face.
pub fn box_crossing(field: &VectorField, flow_box: &FlowBox, eta: f64, params: &IntegrationParams) -> Result<f64> {
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("box coordinate {eta} outside [-1, 1]")));
    }
    let p = flow_box.point(-1.0, eta);
    let c = first_crossing(field, p.x(), p.y(), 1.0, params.t_return, params, |x, y| flow_box.coords(x, y).0 - 1.0)
        .map_err(|_| Error::NoReturn(params.t_return))?;
    Ok(flow_box.coords(c.x, c.y).1)
}

/// Suspension flow of a circle map: unit vertical speed, return map to `y = 0` equal to `map`.
pub fn suspend(map: &CircleMapSpec) -> Result<VectorFieldSpec> {
    let spec = VectorFieldSpec::Suspension { map: map.clone(), window: SUSPENSION_WINDOW };
    spec.compile()?;
    Ok(spec)
}
