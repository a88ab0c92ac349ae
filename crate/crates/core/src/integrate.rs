//! Adaptive Runge-Kutta-Fehlberg 4(5) integration on the torus.
//!
//! The 4th order solution is propagated; the embedded 5th order solution only
//! estimates the local error. Integration runs in unwrapped (lifted)
//! coordinates; points are reduced to the torus on output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Suspended, VectorField, VectorFieldSpec};
use crate::geometry::{floor, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationParams {
    pub tol_local: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub v_trap: f64,
    pub t_trap: f64,
    pub c_slow: f64,
    /// Flow time after which a Poincare return is declared missing.
    pub t_return: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        IntegrationParams {
            tol_local: 1e-9,
            max_step: 1e-2,
            min_step: 1e-12,
            v_trap: 1e-7,
            t_trap: 50.0,
            c_slow: 0.1,
            t_return: 1e3,
        }
    }
}

impl IntegrationParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tol_local, self.max_step, self.min_step, self.v_trap, self.t_trap, self.c_slow, self.t_return];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.min_step > self.max_step {
            return Err(Error::InvalidArgument("integration parameters must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    SingularityTrap,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: TorusPoint,
    pub direction: Direction,
    pub times: Vec<f64>,
    pub points: Vec<TorusPoint>,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn end(&self) -> TorusPoint {
        *self.points.last().expect("trajectory holds the seed")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory holds the seed")
    }
}

/// One accepted step in lifted coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub t0: f64,
    pub x0: f64,
    pub y0: f64,
    pub t1: f64,
    pub x1: f64,
    pub y1: f64,
    /// Speed at the end point.
    pub speed: f64,
}

/// Receives accepted steps; returning `false` stops the integration.
pub(crate) trait Observer {
    fn step(&mut self, s: &Step) -> bool;
}

impl<F: FnMut(&Step) -> bool> Observer for F {
    fn step(&mut self, s: &Step) -> bool {
        self(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub x: f64,
    pub y: f64,
    pub terminated: Termination,
}

const A21: f64 = 1.0 / 4.0;
const A31: f64 = 3.0 / 32.0;
const A32: f64 = 9.0 / 32.0;
const A41: f64 = 1932.0 / 2197.0;
const A42: f64 = -7200.0 / 2197.0;
const A43: f64 = 7296.0 / 2197.0;
const A51: f64 = 439.0 / 216.0;
const A52: f64 = -8.0;
const A53: f64 = 3680.0 / 513.0;
const A54: f64 = -845.0 / 4104.0;
const A61: f64 = -8.0 / 27.0;
const A62: f64 = 2.0;
const A63: f64 = -3544.0 / 2565.0;
const A64: f64 = 1859.0 / 4104.0;
const A65: f64 = -11.0 / 40.0;
const B1: f64 = 25.0 / 216.0;
const B3: f64 = 1408.0 / 2565.0;
const B4: f64 = 2197.0 / 4104.0;
const B5: f64 = -1.0 / 5.0;
const E1: f64 = 1.0 / 360.0;
const E3: f64 = -128.0 / 4275.0;
const E4: f64 = -2197.0 / 75240.0;
const E5: f64 = 1.0 / 50.0;
const E6: f64 = 2.0 / 55.0;

/// The autonomous ODE `z' = sign * v(z)`, times are irrelevant.
pub(crate) struct Rhs<'a> {
    pub field: &'a VectorField,
    pub sign: f64,
}

impl Rhs<'_> {
    #[inline]
    fn f(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.field.eval_raw(x, y);
        (self.sign * u, self.sign * v)
    }

    /// One Fehlberg step from `(x, y)` with first stage `k1` already known.
    /// Returns the 4th order end point and the error estimate.
    #[inline]
    pub fn rkf45(&self, x: f64, y: f64, k1: (f64, f64), h: f64) -> (f64, f64, f64) {
        let k2 = self.f(x + h * A21 * k1.0, y + h * A21 * k1.1);
        let k3 = self.f(x + h * (A31 * k1.0 + A32 * k2.0), y + h * (A31 * k1.1 + A32 * k2.1));
        let k4 = self.f(x + h * (A41 * k1.0 + A42 * k2.0 + A43 * k3.0), y + h * (A41 * k1.1 + A42 * k2.1 + A43 * k3.1));
        let k5 = self.f(
            x + h * (A51 * k1.0 + A52 * k2.0 + A53 * k3.0 + A54 * k4.0),
            y + h * (A51 * k1.1 + A52 * k2.1 + A53 * k3.1 + A54 * k4.1),
        );
        let k6 = self.f(
            x + h * (A61 * k1.0 + A62 * k2.0 + A63 * k3.0 + A64 * k4.0 + A65 * k5.0),
            y + h * (A61 * k1.1 + A62 * k2.1 + A63 * k3.1 + A64 * k4.1 + A65 * k5.1),
        );
        let nx = x + h * (B1 * k1.0 + B3 * k3.0 + B4 * k4.0 + B5 * k5.0);
        let ny = y + h * (B1 * k1.1 + B3 * k3.1 + B4 * k4.1 + B5 * k5.1);
        let ex = h * (E1 * k1.0 + E3 * k3.0 + E4 * k4.0 + E5 * k5.0 + E6 * k6.0);
        let ey = h * (E1 * k1.1 + E3 * k3.1 + E4 * k4.1 + E5 * k5.1 + E6 * k6.1);
        (nx, ny, ex.abs().max(ey.abs()))
    }

    /// A single step of size `h` (no error control); used to refine crossings
    /// inside an already accepted step.
    pub fn substep(&self, x: f64, y: f64, h: f64) -> (f64, f64) {
        let k1 = self.f(x, y);
        let (nx, ny, _) = self.rkf45(x, y, k1, h);
        (nx, ny)
    }
}

/// Smallest free step, as a fraction of the step cap, taken without error control.
const FREE_FRACTION: f64 = 0.25;

/// Drive the adaptive integrator from `(x, y)` for flow time `horizon`.
pub(crate) fn run<O: Observer>(
    field: &VectorField,
    x: f64,
    y: f64,
    sign: f64,
    horizon: f64,
    p: &IntegrationParams,
    obs: &mut O,
) -> Outcome {
    let rhs = Rhs { field, sign };
    let (mut x, mut y, mut t) = (x, y, 0.0f64);
    let mut k1 = rhs.f(x, y);
    let mut speed = (k1.0 * k1.0 + k1.1 * k1.1).sqrt();
    let mut slow_since = if speed < p.v_trap { Some(0.0) } else { None };
    let mut h = p.max_step;
    loop {
        if t >= horizon {
            return Outcome { x, y, terminated: Termination::Horizon };
        }
        let mut cap = p.max_step.min(horizon - t);
        if speed > 0.0 {
            // chord length at most c_slow, and short enough not to jump a feature
            cap = cap.min(p.c_slow.min(field.feature_length(x, y)) / speed);
        }
        let room = field.free_room(x, y);
        if speed > 0.0 && room >= FREE_FRACTION * cap * speed {
            // constant field up to distance `room`: exact straight step, no error control needed
            let hf = cap.min(room / speed);
            let (t1, nx, ny) = if horizon - t <= hf {
                (horizon, x + (horizon - t) * k1.0, y + (horizon - t) * k1.1)
            } else {
                (t + hf, x + hf * k1.0, y + hf * k1.1)
            };
            let step = Step { t0: t, x0: x, y0: y, t1, x1: nx, y1: ny, speed };
            t = t1;
            x = nx;
            y = ny;
            if !obs.step(&step) {
                return Outcome { x, y, terminated: Termination::Horizon };
            }
            if hf < cap {
                // left the free region: the next step is adaptive again
                k1 = rhs.f(x, y);
                speed = (k1.0 * k1.0 + k1.1 * k1.1).sqrt();
                h = h.max(hf);
            }
            continue;
        }
        h = h.min(cap);
        let last = horizon - t <= h;
        if last {
            h = horizon - t;
        }
        let (nx, ny, err) = rhs.rkf45(x, y, k1, h);
        if err > p.tol_local || !nx.is_finite() || !ny.is_finite() {
            let fac = if err.is_finite() { (0.9 * (p.tol_local / err).powf(0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            if h < p.min_step {
                return Outcome { x, y, terminated: Termination::StepUnderflow };
            }
            continue;
        }
        let t1 = if last { horizon } else { t + h };
        let k1n = rhs.f(nx, ny);
        let sp = (k1n.0 * k1n.0 + k1n.1 * k1n.1).sqrt();
        let step = Step { t0: t, x0: x, y0: y, t1, x1: nx, y1: ny, speed: sp };
        t = t1;
        x = nx;
        y = ny;
        k1 = k1n;
        speed = sp;
        if !obs.step(&step) {
            return Outcome { x, y, terminated: Termination::Horizon };
        }
        if speed < p.v_trap {
            let since = *slow_since.get_or_insert(t);
            if t - since >= p.t_trap {
                return Outcome { x, y, terminated: Termination::SingularityTrap };
            }
        } else {
            slow_since = None;
        }
        let grow = if err == 0.0 { 5.0 } else { (0.9 * (p.tol_local / err).powf(0.2)).clamp(0.2, 5.0) };
        h = (h * grow).max(p.min_step);
    }
}

/// Like [`run`], but follows suspensions of non-rigid maps in closed form.
pub(crate) fn drive<O: Observer>(
    field: &VectorField,
    x: f64,
    y: f64,
    sign: f64,
    horizon: f64,
    p: &IntegrationParams,
    obs: &mut O,
) -> Outcome {
    match field.closed_form() {
        Some((susp, s)) => run_suspension(susp, x, y, sign * s, horizon, obs),
        None => run(field, x, y, sign, horizon, p, obs),
    }
}

/// At height `v` of a period `x = x0 + v c + s(v) d(x0)`, with `x0` the
/// abscissa at the start of the period. Time equals the vertical distance travelled.
fn run_suspension<O: Observer>(susp: &Suspended, x: f64, y: f64, sign: f64, horizon: f64, obs: &mut O) -> Outcome {
    let marks = susp.chord_marks();
    let mut k = floor(y);
    let mut v = y - k;
    let c = susp.drift();
    let (mut base, mut d) = susp.invert(x - v * c, susp.ramp(v).0);
    let (mut x, mut t) = (x, 0.0f64);
    loop {
        if t >= horizon {
            return Outcome { x, y: k + v, terminated: Termination::Horizon };
        }
        if sign > 0.0 && v >= 1.0 {
            k += 1.0;
            v = 0.0;
            base = x;
            d = susp.disp(base).0;
        } else if sign < 0.0 && v <= 0.0 {
            k -= 1.0;
            v = 1.0;
            (base, d) = susp.invert(x - c, 1.0);
        }
        let target = if sign > 0.0 {
            marks.iter().copied().find(|&m| m > v).unwrap_or(1.0)
        } else {
            marks.iter().rev().copied().find(|&m| m < v).unwrap_or(0.0)
        };
        let (mut dt, mut v1) = ((target - v).abs(), target);
        let t1 = if t + dt >= horizon {
            dt = horizon - t;
            v1 = v + sign * dt;
            horizon
        } else {
            t + dt
        };
        let (s1, ds1) = susp.ramp(v1);
        let x1 = base + v1 * c + s1 * d;
        let step = Step { t0: t, x0: x, y0: k + v, t1, x1, y1: k + v1, speed: ((c + ds1 * d).powi(2) + 1.0).sqrt() };
        t = t1;
        x = x1;
        v = v1;
        if !obs.step(&step) {
            return Outcome { x, y: k + v, terminated: Termination::Horizon };
        }
    }
}

/// Point reached a flow time `c` after the start of a step produced by [`drive`].
pub(crate) fn point_in_step(field: &VectorField, sign: f64, s: &Step, c: f64) -> (f64, f64) {
    match field.closed_form() {
        Some((susp, fs)) => {
            let sg = sign * fs;
            let k = floor(s.y0 + sg * 0.5 * (s.t1 - s.t0));
            let (v0, drift) = (s.y0 - k, susp.drift());
            let (base, d) = susp.invert(s.x0 - v0 * drift, susp.ramp(v0).0);
            let v = v0 + sg * c;
            (base + v * drift + susp.ramp(v).0 * d, k + v)
        }
        None => Rhs { field, sign }.substep(s.x0, s.y0, c),
    }
}

/// Integrate a compiled field and record every accepted step.
pub fn integrate_field(
    field: &VectorField,
    seed: TorusPoint,
    direction: Direction,
    horizon: f64,
    params: &IntegrationParams,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    params.validate()?;
    let mut times = vec![0.0];
    let mut points = vec![seed];
    let mut rec = |s: &Step| {
        times.push(s.t1);
        points.push(TorusPoint::wrap_finite(s.x1, s.y1));
        true
    };
    let out = run(field, seed.x(), seed.y(), direction.sign(), horizon, params, &mut rec);
    Ok(Trajectory { seed, direction, times, points, terminated_by: out.terminated })
}

/// Integrate a field spec from `seed` for flow time `horizon`.
pub fn integrate(
    field: &VectorFieldSpec,
    seed: TorusPoint,
    direction: Direction,
    horizon: f64,
    params: &IntegrationParams,
) -> Result<Trajectory> {
    integrate_field(&field.compile()?, seed, direction, horizon, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{torus_distance, wrap};
    use std::f64::consts::PI;

    const PHI: f64 = 0.618_033_988_749_894_8;

    fn p(x: f64, y: f64) -> TorusPoint {
        wrap(x, y).unwrap()
    }

    #[test]
    fn linear_examples() {
        let prm = IntegrationParams::default();
        let tr = integrate(&VectorFieldSpec::linear(1.0, 0.0), p(0.0, 0.0), Direction::Forward, 1.0, &prm).unwrap();
        assert!(torus_distance(tr.end(), p(0.0, 0.0)) < 1e-12);
        assert_eq!(tr.terminated_by, Termination::Horizon);
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(tr.times.len(), tr.points.len());
        let tr = integrate(&VectorFieldSpec::linear(1.0, PHI), p(0.0, 0.0), Direction::Forward, 1.0, &prm).unwrap();
        assert!(torus_distance(tr.end(), p(0.0, PHI)) < 1e-9);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hamiltonian_closed_form() {
        let prm = IntegrationParams::default();
        let tr = integrate(&VectorFieldSpec::HamiltonianBand, p(0.0, 0.25), Direction::Forward, 1.0, &prm).unwrap();
        assert!(torus_distance(tr.end(), p(2.0 * PI, 0.25)) < 1e-8);
    }

    #[test]
    fn trap_on_zero_field() {
        let prm = IntegrationParams::default();
        let tr = integrate(&VectorFieldSpec::HamiltonianBand, p(0.3, 0.5), Direction::Forward, 200.0, &prm).unwrap();
        assert_eq!(tr.terminated_by, Termination::SingularityTrap);
        assert!((tr.duration() - prm.t_trap).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_horizon() {
        let prm = IntegrationParams::default();
        assert!(integrate(&VectorFieldSpec::linear(1.0, 0.0), p(0.0, 0.0), Direction::Forward, 0.0, &prm).is_err());
    }

    #[test]
    fn limit_cycle_stays_between_cycles() {
        let prm = IntegrationParams::default();
        let spec = VectorFieldSpec::LimitCycleBand { lambda: 1.0, phase: 0.0 };
        let tr = integrate(&spec, p(0.0, 0.3), Direction::Forward, 30.0, &prm).unwrap();
        let y = tr.end().y();
        assert!(y < 1e-6 || y > 1.0 - 1e-6, "did not converge to the attracting circle: {y}");
    }

    fn end_of<F: Fn(&VectorField, &mut dyn FnMut(&Step) -> bool) -> Outcome>(
        f: &VectorField,
        go: F,
    ) -> (f64, f64, usize) {
        let mut steps = 0;
        let out = go(f, &mut |_: &Step| {
            steps += 1;
            true
        });
        (out.x, out.y, steps)
    }

    #[test]
    fn closed_form_suspension_matches_runge_kutta() {
        let map = crate::circle_map::CircleMapSpec::Denjoy {
            rho: PHI,
            weights: crate::circle_map::DenjoyWeights::InverseSquare { scale: 0.05, offset: 4.0 },
            truncation: 64,
        };
        let f = VectorFieldSpec::Suspension { map, window: 0.25 }.compile().unwrap();
        assert!(f.closed_form().is_some());
        let prm = IntegrationParams { tol_local: 1e-12, ..Default::default() };
        for (sign, x, y) in [(1.0, 0.3, 0.2), (-1.0, 0.3, 0.2), (1.0, 0.71, 0.55), (-1.0, 0.05, 0.9)] {
            let (ax, ay, _) = end_of(&f, |f, mut o| drive(f, x, y, sign, 7.3, &prm, &mut o));
            let (bx, by, _) = end_of(&f, |f, mut o| run(f, x, y, sign, 7.3, &prm, &mut o));
            assert!((ax - bx).abs() < 1e-7 && (ay - by).abs() < 1e-9, "{ax} {ay} vs {bx} {by}");
        }
    }

    #[test]
    fn point_in_step_lies_on_the_orbit() {
        let f = crate::presets::flow_preset("denjoy-suspension").unwrap().compile().unwrap();
        let prm = IntegrationParams::default();
        let mut steps = Vec::new();
        drive(&f, 0.4, 0.1, 1.0, 3.0, &prm, &mut |s: &Step| {
            steps.push(*s);
            true
        });
        for s in &steps {
            let (x, y) = point_in_step(&f, 1.0, s, s.t1 - s.t0);
            assert!((x - s.x1).abs() < 1e-10 && (y - s.y1).abs() < 1e-12);
        }
    }

    #[test]
    fn free_steps_are_exact_on_constant_fields() {
        let f = VectorFieldSpec::linear(1.0, PHI).compile().unwrap();
        let prm = IntegrationParams { max_step: 0.1, ..Default::default() };
        let (x, y, steps) = end_of(&f, |f, mut o| run(f, 0.1, 0.2, 1.0, 10.0, &prm, &mut o));
        assert!((x - 10.1).abs() < 1e-12 && (y - (0.2 + 10.0 * PHI)).abs() < 1e-12);
        let speed = (1.0 + PHI * PHI).sqrt();
        assert_eq!(steps, (10.0 * speed / prm.c_slow).ceil() as usize);
    }
}
