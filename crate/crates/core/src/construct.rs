//! Example flows and maps: the blow-up of a linear orbit, Denjoy maps, the
//! x^3 flow box surgery and the empirical conjugacy to a rotation.

use serde::{Deserialize, Serialize};

use crate::circle_map::{rotation_number_compiled, CircleMap, CircleMapSpec, DenjoyWeights};
use crate::error::{Error, Result};
use crate::field::{bump, FlowBox, VectorFieldSpec};
use crate::geometry::{circle_distance, signed_offset, torus_distance, TorusPoint};

/// Continued fraction convergents `(p, q)` of `alpha`, with `q <= qmax`.
pub fn convergents(alpha: f64, qmax: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = alpha;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > qmax {
            break;
        }
        out.push((p2, q2));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - x.floor();
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    out
}

/// True when `alpha` is within `1e-9 / q` of a fraction with denominator up to `10^6`.
pub fn looks_rational(alpha: f64) -> bool {
    let a = alpha - alpha.floor();
    convergents(a, 1_000_000).iter().any(|&(p, q)| (q as f64 * a - p as f64).abs() < 1e-9)
}

/// Finite stand-in for the blown-up orbit: zeros `p_i` at return times `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpSchedule {
    pub p0: TorusPoint,
    pub slope: (f64, f64),
    /// Increasing times `t_{-N} .. t_N`.
    pub times: Vec<f64>,
    pub points: Vec<TorusPoint>,
    pub radii: Vec<f64>,
    /// Truncation order `N`.
    pub order: usize,
}

impl BlowUpSchedule {
    /// Index `i` in `-N..=N` of the k-th entry.
    pub fn label(&self, k: usize) -> i64 {
        k as i64 - self.order as i64
    }

    pub fn point(&self, i: i64) -> TorusPoint {
        self.points[(i + self.order as i64) as usize]
    }

    pub fn time(&self, i: i64) -> f64 {
        self.times[(i + self.order as i64) as usize]
    }

    pub fn validate(&self) -> Result<()> {
        let m = 2 * self.order + 1;
        if self.times.len() != m || self.points.len() != m || self.radii.len() != m {
            return Err(Error::InvalidArgument("schedule arrays must have length 2N+1".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("schedule times must increase".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && *r < 0.25)) {
            return Err(Error::InvalidArgument("schedule radii must lie in (0, 1/4)".into()));
        }
        for (t, p) in self.times.iter().zip(&self.points) {
            let q = self.p0.shifted(t * self.slope.0, t * self.slope.1);
            if torus_distance(*p, q) > 1e-9 {
                return Err(Error::InvalidArgument("schedule point is off the base orbit".into()));
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                if torus_distance(self.points[i], self.points[j]) <= self.radii[i] + self.radii[j] {
                    return Err(Error::Construction(format!("balls {} and {} overlap", self.label(i), self.label(j))));
                }
            }
        }
        Ok(())
    }
}

/// Return times of the linear flow to `p0` with geometric accuracy.
///
/// `t_i` for `i > 0` is the first continued fraction denominator `q` of the
/// slope ratio (divided by the x speed) with `||q alpha|| <= 2^{-i} r_margin`;
/// `t_{-i} = -t_i`.
pub fn make_schedule(slope: (f64, f64), p0: TorusPoint, order: usize, r_margin: f64) -> Result<BlowUpSchedule> {
    let (a, b) = slope;
    if order < 3 {
        return Err(Error::Construction(format!("truncation order {order} below 3")));
    }
    if !(r_margin > 0.0 && r_margin < 0.5) {
        return Err(Error::Construction(format!("r_margin {r_margin} outside (0, 1/2)")));
    }
    if !(a.is_finite() && b.is_finite()) || a == 0.0 {
        return Err(Error::Construction("slope needs a nonzero finite x component".into()));
    }
    let alpha = b / a;
    if looks_rational(alpha) {
        return Err(Error::Construction(format!("slope ratio {alpha} is rational")));
    }
    let frac = alpha - alpha.floor();
    let conv = convergents(frac, 1 << 40);
    let mut pos = Vec::with_capacity(order);
    let mut next = 0usize;
    for i in 1..=order {
        let bound = r_margin * 0.5f64.powi(i as i32);
        loop {
            let Some(&(_, q)) = conv.get(next) else {
                return Err(Error::Construction(format!("no return time within {bound:e} at order {i}")));
            };
            next += 1;
            let t = q as f64 / a.abs();
            let p = p0.shifted(t * a, t * b);
            if q > 0 && torus_distance(p, p0) <= bound {
                pos.push(t);
                break;
            }
        }
    }
    let mut times: Vec<f64> = pos.iter().rev().map(|t| -t).collect();
    times.push(0.0);
    times.extend(pos.iter().copied());
    let points: Vec<TorusPoint> = times.iter().map(|t| p0.shifted(t * a, t * b)).collect();
    let m = points.len();
    let mut radii = Vec::with_capacity(m);
    for k in 0..m {
        let i = k as i64 - order as i64;
        let gap =
            (0..m).filter(|&j| j != k).map(|j| torus_distance(points[k], points[j])).fold(f64::INFINITY, f64::min);
        radii.push(gap.min(r_margin * 0.5f64.powi(i.unsigned_abs() as i32)) / 4.0);
    }
    let s = BlowUpSchedule { p0, slope, times, points, radii, order };
    s.validate()?;
    Ok(s)
}

/// `prod_i (1 - beta_i(p))`: zero exactly at the `p_i`, one off all balls.
pub fn damping_factor(schedule: &BlowUpSchedule, p: TorusPoint) -> f64 {
    let mut phi = 1.0;
    for (c, &r) in schedule.points.iter().zip(&schedule.radii) {
        let dx = signed_offset(p.x() - c.x());
        let dy = signed_offset(p.y() - c.y());
        let s2 = (dx * dx + dy * dy) / (r * r);
        if s2 < 1.0 {
            phi *= 1.0 - bump(s2);
        }
    }
    phi
}

/// Linear flow of slope `(a, b)` with the orbit of `p0` blown up.
pub fn build_blowup(slope: (f64, f64), p0: TorusPoint, order: usize, r_margin: f64) -> Result<VectorFieldSpec> {
    let schedule = make_schedule(slope, p0, order, r_margin)?;
    Ok(VectorFieldSpec::BlownUp { a: slope.0, b: slope.1, schedule })
}

/// Denjoy map with inserted lengths `weight_scale / (k^2 + 4)` for `|k| <= N`.
pub fn build_denjoy(rho: f64, order: usize, weight_scale: f64) -> Result<CircleMapSpec> {
    if order < 50 {
        return Err(Error::InvalidArgument(format!("Denjoy truncation {order} below 50")));
    }
    if !(0.0..1.0).contains(&rho) || looks_rational(rho) {
        return Err(Error::InvalidArgument(format!("Denjoy rotation {rho} must be irrational in [0,1)")));
    }
    let spec = CircleMapSpec::Denjoy {
        rho,
        weights: DenjoyWeights::InverseSquare { scale: weight_scale, offset: 4.0 },
        truncation: order,
    };
    spec.compile()?;
    Ok(spec)
}

/// Fraction of `m` uniform circle cells that meet the invariant set of a Denjoy map.
pub fn invariant_coverage(map: &CircleMapSpec, m: usize) -> Result<f64> {
    let CircleMap::Denjoy(d) = map.compile()? else {
        return Ok(1.0);
    };
    let mf = m as f64;
    let mut empty = vec![false; m];
    for (_, left, len) in d.intervals() {
        // cells [c/m, (c+1)/m] strictly inside (left, left + len)
        let first = (left * mf).floor() as i64 + 1;
        let last = ((left + len) * mf).ceil() as i64 - 2;
        for c in first..=last {
            empty[c.rem_euclid(m as i64) as usize] = true;
        }
    }
    Ok(empty.iter().filter(|e| !**e).count() as f64 / mf)
}

/// Replace the trivial crossing map of `flow_box` by `x -> x^3`.
pub fn apply_x3_holonomy(base: &VectorFieldSpec, flow_box: &FlowBox) -> Result<VectorFieldSpec> {
    let spec =
        VectorFieldSpec::HolonomyModified { base: Box::new(base.clone()), flow_box: flow_box.clone(), exponent: 3 };
    spec.compile()?;
    Ok(spec)
}

/// Empirical conjugacy of a circle map to the rotation by its rotation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyEstimate {
    pub rho: f64,
    /// `(p, q)` when a periodic orbit of rotation number `p/q` was found.
    pub rational: Option<(u64, u64)>,
    /// `h(j/m)` for `j < m`.
    pub table: Vec<f64>,
    pub residual: f64,
    /// Fraction of grid intervals on which `h` is flat (no orbit point inside).
    pub injectivity_defect: f64,
}

/// Build `h` from orbit statistics and measure `|h(F x) - h(x) - rho|` on the grid.
pub fn conjugate_to_rotation(map: &CircleMapSpec, iterates: u64, m: usize) -> Result<ConjugacyEstimate> {
    if m < 2 {
        return Err(Error::InvalidArgument("conjugacy grid needs at least 2 points".into()));
    }
    let f = map.compile()?;
    let est = rotation_number_compiled(&f, iterates)?;
    let rho = est.rho;
    let grid: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();

    // periodic orbit test for nearby fractions
    let mut z = 0.0;
    for _ in 0..iterates.min(10_000) {
        z = f.apply(z);
    }
    let mut rational = None;
    for (p, q) in convergents(rho, 1000).into_iter().chain([(0, 1), (1, 1)]) {
        if (rho - p as f64 / q as f64).abs() > 2.0 / iterates as f64 && !(q == 1 && (rho < 1e-9 || rho > 1.0 - 1e-9)) {
            continue;
        }
        let mut w = z;
        for _ in 0..q {
            w = f.lift(w);
        }
        if (w - z - p as f64).abs() < 1e-9 {
            rational = Some((p % q, q));
            break;
        }
    }

    let (h, defect): (Box<dyn Fn(f64) -> f64>, f64) = match rational {
        Some((p, q)) => {
            // sorted periodic orbit, h(o_j) = j/q, linear in between
            let mut orbit = Vec::with_capacity(q as usize);
            let mut w = z;
            for _ in 0..q {
                orbit.push(w);
                w = f.apply(w);
            }
            orbit.sort_by(f64::total_cmp);
            let base = orbit[0];
            let rel: Vec<f64> = orbit.iter().map(|o| o - base).collect();
            let qf = q as f64;
            let _ = p;
            let h = move |x: f64| {
                let u = (x - base).rem_euclid(1.0);
                let j = rel.partition_point(|&r| r <= u) - 1;
                let lo = rel[j];
                let hi = if j + 1 < rel.len() { rel[j + 1] } else { 1.0 };
                let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
                ((j as f64 + frac) / qf + base).rem_euclid(1.0)
            };
            (Box::new(h), 0.0)
        }
        None => {
            let mut orbit = Vec::with_capacity(iterates as usize);
            let mut w = 0.0;
            for _ in 0..iterates {
                orbit.push(w);
                w = f.apply(w);
            }
            orbit.sort_by(f64::total_cmp);
            let kf = iterates as f64;
            let flat = (0..m)
                .filter(|&j| {
                    let a = orbit.partition_point(|&o| o < grid[j]);
                    let b = orbit.partition_point(|&o| o < grid[j] + 1.0 / m as f64);
                    a == b
                })
                .count();
            let h = move |x: f64| orbit.partition_point(|&o| o < x.rem_euclid(1.0)) as f64 / kf;
            (Box::new(h), flat as f64 / m as f64)
        }
    };
    let table: Vec<f64> = grid.iter().map(|&x| h(x)).collect();
    let rot = match rational {
        Some((p, q)) => p as f64 / q as f64,
        None => rho,
    };
    let residual =
        grid.iter().zip(&table).map(|(&x, &hx)| circle_distance(h(f.apply(x)), hx + rot)).fold(0.0, f64::max);
    Ok(ConjugacyEstimate { rho, rational, table, residual, injectivity_defect: defect })
}
