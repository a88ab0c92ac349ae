//! Vector field descriptions and their compiled evaluators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circle_map::{CircleMap, CircleMapSpec};
use crate::construct::BlowUpSchedule;
use crate::error::{Error, Result};
use crate::geometry::{floor, signed_offset, CellSet, TorusPoint, TorusVector};

const TAU: f64 = 2.0 * PI;

/// Default window height of the suspension isotopy, inside one cell row at n <= 128.
pub const SUSPENSION_WINDOW: f64 = 0.005;
/// Flat margin at each end of the flow box profile, in box coordinates.
const BOX_MARGIN: f64 = 0.1;

/// Closed description of a flow on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum VectorFieldSpec {
    /// Constant field `(a, b)`.
    Linear { a: f64, b: f64 },
    /// `(2 pi sin(2 pi y), 0)`: circles of zeros at `y = 0` and `y = 1/2`.
    HamiltonianBand,
    /// `(1, -lambda sin(2 pi (y - phase)) / (2 pi))`: attracting circle at
    /// `y = phase`, repelling circle at `y = phase + 1/2`.
    LimitCycleBand {
        lambda: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear field damped by the bump product of the schedule.
    BlownUp { a: f64, b: f64, schedule: BlowUpSchedule },
    /// Unit vertical speed, return map to `y = 0` equal to `map`.
    Suspension {
        map: CircleMapSpec,
        #[serde(default = "default_window")]
        window: f64,
    },
    /// `base` altered inside `flow_box` so the crossing map is `x -> x^exponent`.
    HolonomyModified { base: Box<VectorFieldSpec>, flow_box: FlowBox, exponent: u32 },
}

fn default_window() -> f64 {
    SUSPENSION_WINDOW
}

impl VectorFieldSpec {
    pub fn linear(a: f64, b: f64) -> Self {
        VectorFieldSpec::Linear { a, b }
    }

    pub fn compile(&self) -> Result<VectorField> {
        VectorField::new(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: VectorFieldSpec = serde_json::from_str(text)?;
        spec.compile()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field spec serialises")
    }
}

/// Rectangle adapted to the flow: `frame[0]` along the flow, `frame[1]` across.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowBox {
    pub center: TorusPoint,
    pub half_length: f64,
    pub half_width: f64,
    pub frame: [TorusVector; 2],
}

impl FlowBox {
    /// Box coordinates `(xi, eta)` of a raw point; `|xi|, |eta| <= 1` inside.
    pub fn coords(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = signed_offset(x - self.center.x());
        let dy = signed_offset(y - self.center.y());
        let [e1, e2] = self.frame;
        ((dx * e1.dx + dy * e1.dy) / self.half_length, (dx * e2.dx + dy * e2.dy) / self.half_width)
    }

    /// Raw point with box coordinates `(xi, eta)`.
    pub fn point(&self, xi: f64, eta: f64) -> TorusPoint {
        let [e1, e2] = self.frame;
        let (a, b) = (xi * self.half_length, eta * self.half_width);
        self.center.shifted(a * e1.dx + b * e2.dx, a * e1.dy + b * e2.dy)
    }
}

/// `exp(-1/t)` for `t > 0`, else 0.
#[inline]
fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C-infinity step from 0 (t <= 0) to 1 (t >= 1), with derivative.
#[inline]
pub(crate) fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let a = psi(t);
    let b = psi(1.0 - t);
    let s = a + b;
    let da = a / (t * t);
    let db = b / ((1.0 - t) * (1.0 - t));
    (a / s, (da * b + a * db) / (s * s))
}

/// Centre of the suspension window: the middle of a cell row at n = 128.
const WINDOW_CENTRE: f64 = 129.0 / 256.0;
/// Chords per passage through the suspension window in the closed-form flow.
const WINDOW_CHORDS: usize = 8;
/// Longest chord of the closed-form flow outside the window.
const FREE_CHORD: f64 = 0.25;

/// Standard bump `exp(1 - 1/(1 - s^2))`, equal to 1 at `s = 0` and flat at `|s| = 1`.
#[inline]
pub(crate) fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

#[derive(Debug, Clone)]
struct Ball {
    x: f64,
    y: f64,
    r: f64,
    // offset from p0
    dx: f64,
    dy: f64,
}

#[derive(Debug, Clone)]
struct Blown {
    a: f64,
    b: f64,
    p0: (f64, f64),
    reach: f64,
    balls: Vec<Ball>,
}

impl Blown {
    /// Offset of a point from a ball centre, given both offsets from `p0`.
    #[inline]
    fn offset(dx: f64, dy: f64, b: &Ball) -> (f64, f64) {
        let half = |e: f64| {
            if e > 0.5 {
                e - 1.0
            } else if e < -0.5 {
                e + 1.0
            } else {
                e
            }
        };
        (half(dx - b.dx), half(dy - b.dy))
    }

    #[inline]
    fn damping(&self, x: f64, y: f64) -> f64 {
        let dx = signed_offset(x - self.p0.0);
        let dy = signed_offset(y - self.p0.1);
        if dx * dx + dy * dy >= self.reach * self.reach {
            return 1.0;
        }
        let mut phi = 1.0;
        for b in &self.balls {
            let (ex, ey) = Self::offset(dx, dy, b);
            let d2 = ex * ex + ey * ey;
            let r2 = b.r * b.r;
            if d2 < r2 {
                phi *= 1.0 - bump(d2 / r2);
            }
        }
        phi
    }

    /// Distance to the disc around `p0` that holds every ball; zero inside it.
    #[inline]
    fn room(&self, x: f64, y: f64) -> f64 {
        let dx = signed_offset(x - self.p0.0);
        let dy = signed_offset(y - self.p0.1);
        ((dx * dx + dy * dy).sqrt() - self.reach).max(0.0)
    }

    fn feature(&self, x: f64, y: f64) -> f64 {
        let dx = signed_offset(x - self.p0.0);
        let dy = signed_offset(y - self.p0.1);
        let d0 = (dx * dx + dy * dy).sqrt();
        if d0 >= 2.0 * self.reach {
            return d0 - self.reach;
        }
        let mut len = f64::INFINITY;
        for b in &self.balls {
            let (ex, ey) = Self::offset(dx, dy, b);
            let d = (ex * ex + ey * ey).sqrt();
            len = len.min((d - b.r).max(0.5 * b.r));
        }
        len
    }
}

/// Suspension of a circle map `F`. A point starting at `(x0, 0)` sits at
/// `x0 + v c + s(v) d(x0)` at height `v` in [0, 1], where `c` is a constant
/// drift, `d(x0) = F(x0) - x0 - c` (less an integer) and `s` steps from 0 to 1
/// across a window centred at `v = 1/2`.
#[derive(Debug, Clone)]
pub(crate) struct Suspended {
    map: CircleMap,
    shift: f64,
    drift: f64,
    lo: f64,
    hi: f64,
    window: f64,
    rigid: Option<f64>,
}

impl Suspended {
    fn new(spec: &CircleMapSpec, window: f64) -> Result<Suspended> {
        if !(window > 0.0 && window <= 1.0) {
            return Err(Error::InvalidArgument(format!("suspension window {window} outside (0,1]")));
        }
        let map = spec.compile()?;
        if let CircleMap::Rotation(r) = map {
            return Ok(Suspended { map, shift: 0.0, drift: r, lo: 0.0, hi: 0.0, window, rigid: Some(r) });
        }
        // rigorous bounds of F(x) - x from monotonicity between samples
        let m = 4096;
        let h = 1.0 / m as f64;
        let vals: Vec<f64> = (0..=m).map(|i| map.lift(i as f64 * h)).collect();
        let mean = (0..m).map(|i| vals[i] - i as f64 * h).sum::<f64>() / m as f64;
        let shift = mean.round();
        let drift = mean - shift;
        let lo = (0..m).map(|i| vals[i] - (i + 1) as f64 * h).fold(f64::INFINITY, f64::min) - mean;
        let hi = (0..m).map(|i| vals[i + 1] - i as f64 * h).fold(f64::NEG_INFINITY, f64::max) - mean;
        Ok(Suspended { map, shift, drift, lo, hi, window, rigid: None })
    }

    /// Ramp `s(v)` and `s'(v)` on one period, `v` in [0, 1].
    #[inline]
    pub(crate) fn ramp(&self, v: f64) -> (f64, f64) {
        let (s, ds) = smooth_step((v - self.window_start()) / self.window);
        (s, ds / self.window)
    }

    fn window_start(&self) -> f64 {
        WINDOW_CENTRE - 0.5 * self.window
    }

    pub(crate) fn drift(&self) -> f64 {
        self.drift
    }

    /// Levels in [0, 1] between which the closed-form flow is drawn as chords.
    /// Off the window the flow is a straight line.
    pub(crate) fn chord_marks(&self) -> Vec<f64> {
        let (a, w) = (self.window_start(), self.window);
        let free = ((a / FREE_CHORD).ceil() as usize).max(1);
        let mut marks: Vec<f64> = (0..free).map(|i| a * i as f64 / free as f64).collect();
        marks.extend((0..WINDOW_CHORDS).map(|i| a + w * i as f64 / WINDOW_CHORDS as f64));
        marks.extend((0..free).map(|i| a + w + a * i as f64 / free as f64));
        marks.push(1.0);
        marks.dedup();
        marks
    }

    /// `d(x0)` and its derivative.
    #[inline]
    pub(crate) fn disp(&self, x0: f64) -> (f64, f64) {
        let (f, df) = self.map.lift_d(x0);
        (f - x0 - self.shift - self.drift, df - 1.0)
    }

    /// Solve `x0 + s d(x0) = x` by safeguarded Newton iteration; returns `x0` and `d(x0)`.
    pub(crate) fn invert(&self, x: f64, s: f64) -> (f64, f64) {
        let mut a = x - s * self.hi;
        let mut b = x - s * self.lo;
        if b - a < 1e-15 {
            let x0 = 0.5 * (a + b);
            return (x0, self.disp(x0).0);
        }
        let mut x0 = (x - s * self.disp(x).0).clamp(a, b);
        let mut d = 0.0;
        for _ in 0..200 {
            let (dv, ddv) = self.disp(x0);
            d = dv;
            let f = x0 + s * dv - x;
            if f.abs() < 1e-15 {
                break;
            }
            if f < 0.0 {
                a = x0;
            } else {
                b = x0;
            }
            let slope = 1.0 + s * ddv;
            let newton = x0 - f / slope;
            x0 = if slope > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-15 {
                d = self.disp(x0).0;
                break;
            }
        }
        (x0, d)
    }

    #[inline]
    fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        if let Some(r) = self.rigid {
            return (r, 1.0);
        }
        let v = y - floor(y);
        let (s, ds) = self.ramp(v);
        if ds == 0.0 {
            return (self.drift, 1.0);
        }
        let (_, d) = self.invert(x - v * self.drift, s);
        (self.drift + ds * d, 1.0)
    }
}

#[derive(Debug, Clone)]
struct Holonomy {
    base: Box<VectorField>,
    flow_box: FlowBox,
    exponent: i32,
}

impl Holonomy {
    /// Solve `(1 - r) e + r e^p = eta` on [-1, 1].
    fn solve(&self, eta: f64, r: f64) -> f64 {
        let p = self.exponent;
        let (mut a, mut b) = (-1.0f64, 1.0f64);
        let mut e = eta;
        for _ in 0..200 {
            let f = (1.0 - r) * e + r * e.powi(p) - eta;
            if f.abs() < 1e-16 {
                break;
            }
            if f < 0.0 {
                a = e;
            } else {
                b = e;
            }
            let slope = (1.0 - r) + r * p as f64 * e.powi(p - 1);
            let newton = e - f / slope;
            e = if slope > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-16 {
                break;
            }
        }
        e
    }

    #[inline]
    fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let v = self.base.eval_raw(x, y);
        let (xi, eta) = self.flow_box.coords(x, y);
        if xi.abs() >= 1.0 || eta.abs() >= 1.0 {
            return v;
        }
        let fb = &self.flow_box;
        let [e1, e2] = fb.frame;
        let along = v.0 * e1.dx + v.1 * e1.dy;
        let (r, dr) = smooth_step((xi + 1.0 - BOX_MARGIN) / (2.0 - 2.0 * BOX_MARGIN));
        if dr == 0.0 {
            return v;
        }
        let dr = dr / (2.0 - 2.0 * BOX_MARGIN);
        let e0 = self.solve(eta, r);
        let deta = along / fb.half_length * dr * (e0.powi(self.exponent) - e0);
        (v.0 + deta * fb.half_width * e2.dx, v.1 + deta * fb.half_width * e2.dy)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Linear(f64, f64),
    Hamiltonian,
    LimitCycle { lambda: f64, phase: f64 },
    Blown(Blown),
    Suspension(Box<Suspended>),
    Holonomy(Holonomy),
}

/// Compiled, immutable, thread-safe field evaluator.
#[derive(Debug, Clone)]
pub struct VectorField {
    kind: Kind,
    sign: f64,
    spec: VectorFieldSpec,
}

impl VectorField {
    pub fn new(spec: &VectorFieldSpec) -> Result<VectorField> {
        let kind = match spec {
            VectorFieldSpec::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidArgument("linear field must be finite".into()));
                }
                Kind::Linear(*a, *b)
            }
            VectorFieldSpec::HamiltonianBand => Kind::Hamiltonian,
            VectorFieldSpec::LimitCycleBand { lambda, phase } => {
                if !(*lambda > 0.0) || !lambda.is_finite() || !phase.is_finite() {
                    return Err(Error::InvalidArgument("limit cycle band needs lambda > 0".into()));
                }
                Kind::LimitCycle { lambda: *lambda, phase: *phase }
            }
            VectorFieldSpec::BlownUp { a, b, schedule } => {
                schedule.validate()?;
                let p0 = (schedule.p0.x(), schedule.p0.y());
                let balls: Vec<Ball> = schedule
                    .points
                    .iter()
                    .zip(&schedule.radii)
                    .map(|(p, &r)| Ball {
                        x: p.x(),
                        y: p.y(),
                        r,
                        dx: signed_offset(p.x() - p0.0),
                        dy: signed_offset(p.y() - p0.1),
                    })
                    .collect();
                let reach = balls
                    .iter()
                    .map(|b| signed_offset(b.x - p0.0).hypot(signed_offset(b.y - p0.1)) + b.r)
                    .fold(0.0, f64::max);
                Kind::Blown(Blown { a: *a, b: *b, p0, reach, balls })
            }
            VectorFieldSpec::Suspension { map, window } => Kind::Suspension(Box::new(Suspended::new(map, *window)?)),
            VectorFieldSpec::HolonomyModified { base, flow_box, exponent } => {
                if *exponent < 3 || exponent % 2 == 0 {
                    return Err(Error::InvalidArgument(format!("holonomy exponent {exponent} must be odd and >= 3")));
                }
                let base = Box::new(VectorField::new(base)?);
                validate_box(&base, flow_box)?;
                Kind::Holonomy(Holonomy { base, flow_box: flow_box.clone(), exponent: *exponent as i32 })
            }
        };
        Ok(VectorField { kind, sign: 1.0, spec: spec.clone() })
    }

    pub fn spec(&self) -> &VectorFieldSpec {
        &self.spec
    }

    /// The same field with time reversed.
    pub fn reversed(&self) -> VectorField {
        VectorField { kind: self.kind.clone(), sign: -self.sign, spec: self.spec.clone() }
    }

    pub fn is_reversed(&self) -> bool {
        self.sign < 0.0
    }

    /// Field at an arbitrary raw point (periodic in both coordinates).
    #[inline]
    pub fn eval_raw(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = match &self.kind {
            Kind::Linear(a, b) => (*a, *b),
            Kind::Hamiltonian => (TAU * (TAU * y).sin(), 0.0),
            Kind::LimitCycle { lambda, phase } => (1.0, -lambda * (TAU * (y - phase)).sin() / TAU),
            Kind::Blown(bl) => {
                let phi = bl.damping(x, y);
                (bl.a * phi, bl.b * phi)
            }
            Kind::Suspension(s) => s.eval(x, y),
            Kind::Holonomy(h) => h.eval(x, y),
        };
        (self.sign * u, self.sign * v)
    }

    pub fn evaluate(&self, p: TorusPoint) -> TorusVector {
        let (u, v) = self.eval_raw(p.x(), p.y());
        TorusVector::new(u, v)
    }

    /// Local length scale of the field's fine structure; infinite when none.
    #[inline]
    pub fn feature_length(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            Kind::Blown(bl) => bl.feature(x, y),
            Kind::Holonomy(h) => h.base.feature_length(x, y),
            _ => f64::INFINITY,
        }
    }

    /// Distance from `(x, y)` within which the field is constant.
    #[inline]
    pub(crate) fn free_room(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            Kind::Linear(..) => f64::INFINITY,
            Kind::Blown(bl) => bl.room(x, y),
            _ => 0.0,
        }
    }

    /// The suspension data and time sign when the field is a suspension of a
    /// non-rigid map, whose flow is known in closed form.
    pub(crate) fn closed_form(&self) -> Option<(&Suspended, f64)> {
        match &self.kind {
            Kind::Suspension(s) if s.rigid.is_none() => Some((s, self.sign)),
            _ => None,
        }
    }

    /// Designed zeros of the field that are isolated points.
    pub fn singular_points(&self) -> Vec<TorusPoint> {
        match &self.kind {
            Kind::Blown(bl) => bl.balls.iter().map(|b| TorusPoint::wrap_finite(b.x, b.y)).collect(),
            Kind::Holonomy(h) => h.base.singular_points(),
            _ => Vec::new(),
        }
    }

    /// Closed grid cells that contain a designed zero of the field.
    pub fn singular_cells(&self, n: usize) -> CellSet {
        let mut s = CellSet::new(n);
        let base = match &self.kind {
            Kind::Holonomy(h) => &h.base.kind,
            k => k,
        };
        match base {
            Kind::Hamiltonian => {
                for i in 0..n {
                    for y in [0.0, 0.5] {
                        for k in closed_cells(TorusPoint::wrap_finite((i as f64 + 0.5) / n as f64, y), n) {
                            s.insert(k);
                        }
                    }
                }
            }
            Kind::Blown(_) => {
                for p in self.singular_points() {
                    for k in closed_cells(p, n) {
                        s.insert(k);
                    }
                }
            }
            _ => {}
        }
        s
    }

    /// Points on designed measure-zero orbits: zeros, blown orbit segments,
    /// limit cycles and invariant-set points. Injected as extra seeds.
    pub fn designed_seeds(&self, n: usize) -> Vec<TorusPoint> {
        let nf = n as f64;
        match &self.kind {
            Kind::Linear(..) => Vec::new(),
            Kind::Hamiltonian => {
                let mut v = Vec::with_capacity(2 * n);
                for y in [0.0, 0.5] {
                    for i in 0..n {
                        v.push(TorusPoint::wrap_finite((i as f64 + 0.5) / nf, y));
                    }
                }
                v
            }
            Kind::LimitCycle { phase, .. } => {
                vec![TorusPoint::wrap_finite(0.0, *phase), TorusPoint::wrap_finite(0.0, phase + 0.5)]
            }
            Kind::Blown(_) => {
                let VectorFieldSpec::BlownUp { a, b, schedule } = &self.spec else { unreachable!() };
                let mut v = self.singular_points();
                for w in schedule.times.windows(2) {
                    let t = 0.5 * (w[0] + w[1]);
                    v.push(schedule.p0.shifted(t * a, t * b));
                }
                v
            }
            Kind::Suspension(s) => match &s.map {
                CircleMap::Denjoy(d) => [0.1, 0.35, 0.6, 0.85]
                    .iter()
                    .map(|&x| {
                        let u = d.phi(x);
                        TorusPoint::wrap_finite(u, 0.0)
                    })
                    .collect(),
                _ => Vec::new(),
            },
            Kind::Holonomy(h) => {
                let mut v = h.base.designed_seeds(n);
                for eta in [-1.0, 0.0, 1.0] {
                    v.push(h.flow_box.point(0.0, eta));
                }
                v
            }
        }
    }
}

/// Cells whose closure contains `p`.
pub fn closed_cells(p: TorusPoint, n: usize) -> Vec<usize> {
    let nf = n as f64;
    let axis = |v: f64| {
        let f = v * nf;
        let j = (f.floor() as usize).min(n - 1);
        if (f - f.round()).abs() < 1e-9 {
            let r = (f.round() as usize) % n;
            vec![r, (r + n - 1) % n]
        } else {
            vec![j]
        }
    };
    let mut out = Vec::with_capacity(4);
    for j in axis(p.y()) {
        for i in axis(p.x()) {
            out.push(j * n + i);
        }
    }
    out
}

fn validate_box(base: &VectorField, fb: &FlowBox) -> Result<()> {
    let [e1, e2] = fb.frame;
    let ortho = (e1.norm() - 1.0).abs() < 1e-9 && (e2.norm() - 1.0).abs() < 1e-9 && e1.dot(&e2).abs() < 1e-9;
    if !ortho {
        return Err(Error::InvalidBox("frame is not orthonormal".into()));
    }
    if !(fb.half_length > 0.0 && fb.half_width > 0.0) {
        return Err(Error::InvalidBox("box half sizes must be positive".into()));
    }
    let ext_x = fb.half_length * e1.dx.abs() + fb.half_width * e2.dx.abs();
    let ext_y = fb.half_length * e1.dy.abs() + fb.half_width * e2.dy.abs();
    if ext_x >= 0.5 || ext_y >= 0.5 {
        return Err(Error::InvalidBox("box does not embed in the torus".into()));
    }
    let k = 20;
    for i in 0..=k {
        for j in 0..=k {
            let xi = -1.0 + 2.0 * i as f64 / k as f64;
            let eta = -1.0 + 2.0 * j as f64 / k as f64;
            let p = fb.point(xi, eta);
            let v = base.evaluate(p);
            let along = v.dot(&e1);
            let across = v.dot(&e2);
            if !(along > 1e-9) {
                return Err(Error::InvalidBox(format!("field not transverse to the faces at ({xi}, {eta})")));
            }
            if across.abs() > 1e-12 * v.norm() {
                return Err(Error::InvalidBox("base flow is not straight inside the box".into()));
            }
        }
    }
    Ok(())
}

/// Convenience: evaluate a spec at a point.
pub fn evaluate(field: &VectorFieldSpec, p: TorusPoint) -> Result<TorusVector> {
    Ok(field.compile()?.evaluate(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap;

    const PHI: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn linear_and_hamiltonian_values() {
        let f = VectorFieldSpec::linear(1.0, PHI).compile().unwrap();
        let v = f.evaluate(wrap(0.3, 0.9).unwrap());
        assert_eq!((v.dx, v.dy), (1.0, PHI));
        let h = VectorFieldSpec::HamiltonianBand.compile().unwrap();
        let v = h.evaluate(wrap(0.3, 0.0).unwrap());
        assert_eq!((v.dx, v.dy), (0.0, 0.0));
        let v = h.evaluate(wrap(0.7, 0.25).unwrap());
        assert!((v.dx - TAU).abs() < 1e-12);
    }

    #[test]
    fn limit_cycle_zeros() {
        let f = VectorFieldSpec::LimitCycleBand { lambda: 1.0, phase: 0.1 }.compile().unwrap();
        assert!(f.eval_raw(0.3, 0.1).1.abs() < 1e-15);
        assert!(f.eval_raw(0.3, 0.6).1.abs() < 1e-15);
        // attracting at the phase, repelling half a turn away
        assert!(f.eval_raw(0.0, 0.11).1 < 0.0 && f.eval_raw(0.0, 0.09).1 > 0.0);
        assert!(f.eval_raw(0.0, 0.61).1 > 0.0 && f.eval_raw(0.0, 0.59).1 < 0.0);
    }

    #[test]
    fn smooth_step_is_monotone_and_flat() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let (s, ds) = smooth_step(i as f64 / 1000.0);
            assert!(s >= prev && ds >= 0.0);
            prev = s;
        }

        assert_eq!(smooth_step(0.0), (0.0, 0.0));
        assert_eq!(smooth_step(1.0), (1.0, 0.0));
        let (s, _) = smooth_step(0.5);
        assert!((s - 0.5).abs() < 1e-15);
        // derivative agrees with a difference quotient
        let h = 1e-6;
        for t in [0.2, 0.5, 0.77] {
            let fd = (smooth_step(t + h).0 - smooth_step(t - h).0) / (2.0 * h);
            assert!((fd - smooth_step(t).1).abs() < 1e-6);
        }
    }

    #[test]
    fn periodicity_on_raw_points() {
        let specs = [
            VectorFieldSpec::linear(1.0, PHI),
            VectorFieldSpec::HamiltonianBand,
            VectorFieldSpec::LimitCycleBand { lambda: 1.0, phase: 0.0 },
            VectorFieldSpec::Suspension { map: CircleMapSpec::Rotation { rho: 0.3 }, window: 0.25 },
        ];
        for spec in specs {
            let f = spec.compile().unwrap();
            for i in 0..200 {
                let x = (i as f64 * 0.7548776662) % 1.0;
                let y = (i as f64 * 0.5698402910) % 1.0;
                let a = f.eval_raw(x, y);
                let b = f.eval_raw(x + 3.0, y - 2.0);
                assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spec_json_schema() {
        let js = VectorFieldSpec::linear(1.0, 2.0).to_json();
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        assert_eq!(v["variant"], "linear");
        assert_eq!(v["params"]["b"], 2.0);
        let h: VectorFieldSpec = serde_json::from_str(r#"{"variant":"hamiltonian_band"}"#).unwrap();
        assert_eq!(h, VectorFieldSpec::HamiltonianBand);
        assert!(VectorFieldSpec::from_json(r#"{"variant":"limit_cycle_band","params":{"lambda":-1}}"#).is_err());
        assert!(VectorFieldSpec::from_json(r#"{"variant":"spiral"}"#).is_err());
    }

    #[test]
    fn reversed_field_negates() {
        let f = VectorFieldSpec::linear(1.0, PHI).compile().unwrap().reversed();
        assert_eq!(f.eval_raw(0.1, 0.2), (-1.0, -PHI));
    }
}
