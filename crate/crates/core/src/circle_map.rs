//! Orientation preserving degree-one circle maps.
//!
//! A [`CircleMapSpec`] is the serialisable description; [`CircleMap`] is the
//! compiled form used for evaluation. All maps are handled through their lift
//! `F: R -> R` with `F(x + 1) = F(x) + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval lengths inserted along the rotation orbit of 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DenjoyWeights {
    /// `len_k = scale / (k^2 + offset)`.
    InverseSquare { scale: f64, offset: f64 },
    /// `len_0 = lead`, `len_k = scale * ratio^|k|` for `k != 0`.
    Geometric { lead: f64, scale: f64, ratio: f64 },
    /// `len_k = head` for `|k| < head_count`, then
    /// `len_k = scale * ratio^(|k| - head_count + 1)`.
    Clustered { head: f64, head_count: u64, scale: f64, ratio: f64 },
}

impl DenjoyWeights {
    pub fn length(&self, k: i64) -> f64 {
        match *self {
            DenjoyWeights::InverseSquare { scale, offset } => scale / ((k * k) as f64 + offset),
            DenjoyWeights::Geometric { lead, scale, ratio } => {
                if k == 0 {
                    lead
                } else {
                    scale * ratio.powi(k.unsigned_abs() as i32)
                }
            }
            DenjoyWeights::Clustered { head, head_count, scale, ratio } => {
                let a = k.unsigned_abs();
                if a < head_count {
                    head
                } else {
                    scale * ratio.powi((a + 1 - head_count) as i32)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CircleMapSpec {
    Rotation {
        rho: f64,
    },
    Denjoy {
        rho: f64,
        weights: DenjoyWeights,
        truncation: usize,
    },
    /// Lift values `F(i/M)` for `i < M`, interpolated by a periodic monotone
    /// cubic Hermite spline.
    Monotone {
        values: Vec<f64>,
    },
}

impl CircleMapSpec {
    /// Tabulate a lift on `m` uniform nodes.
    pub fn tabulate(m: usize, lift: impl Fn(f64) -> f64) -> CircleMapSpec {
        let values = (0..m).map(|i| lift(i as f64 / m as f64)).collect();
        CircleMapSpec::Monotone { values }
    }

    pub fn identity() -> CircleMapSpec {
        CircleMapSpec::Rotation { rho: 0.0 }
    }

    pub fn compile(&self) -> Result<CircleMap> {
        CircleMap::new(self)
    }
}

/// Compiled circle map.
#[derive(Debug, Clone)]
pub enum CircleMap {
    Rotation(f64),
    Denjoy(Box<DenjoyMap>),
    Monotone(MonotoneMap),
}

impl CircleMap {
    pub fn new(spec: &CircleMapSpec) -> Result<CircleMap> {
        match spec {
            CircleMapSpec::Rotation { rho } => {
                if !rho.is_finite() {
                    return Err(Error::InvalidArgument("rotation angle must be finite".into()));
                }
                Ok(CircleMap::Rotation(*rho))
            }
            CircleMapSpec::Denjoy { rho, weights, truncation } => {
                Ok(CircleMap::Denjoy(Box::new(DenjoyMap::new(*rho, weights, *truncation)?)))
            }
            CircleMapSpec::Monotone { values } => Ok(CircleMap::Monotone(MonotoneMap::new(values)?)),
        }
    }

    /// Lift value `F(x)`.
    pub fn lift(&self, x: f64) -> f64 {
        self.lift_d(x).0
    }

    /// Lift value and derivative.
    pub fn lift_d(&self, x: f64) -> (f64, f64) {
        match self {
            CircleMap::Rotation(r) => (x + r, 1.0),
            CircleMap::Denjoy(d) => d.lift_d(x),
            CircleMap::Monotone(m) => m.lift_d(x),
        }
    }

    /// Map on the circle, result in [0,1).
    pub fn apply(&self, x: f64) -> f64 {
        let y = self.lift(x);
        y - y.floor()
    }

    /// `F(x) - x` is constant for rigid rotations.
    pub fn is_rotation(&self) -> bool {
        matches!(self, CircleMap::Rotation(_))
    }
}

/// Rotation number estimate together with its error bound `1/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub rho: f64,
    pub error_bound: f64,
    pub iterates: u64,
}

/// `(F^K(0) - 0)/K mod 1`.
pub fn rotation_number(map: &CircleMapSpec, iterates: u64) -> Result<RotationEstimate> {
    let m = map.compile()?;
    rotation_number_compiled(&m, iterates)
}

pub fn rotation_number_compiled(map: &CircleMap, iterates: u64) -> Result<RotationEstimate> {
    if iterates < 100 {
        return Err(Error::InvalidArgument("rotation number needs at least 100 iterates".into()));
    }
    let mut x = 0.0f64;
    let mut turns = 0.0f64;
    for _ in 0..iterates {
        let y = map.lift(x);
        // keep the working value in [0,1) and count whole turns separately
        let f = y.floor();
        turns += f;
        x = y - f;
    }
    let r = (turns + x) / iterates as f64;
    let rho = r - r.floor();
    Ok(RotationEstimate { rho: if rho >= 1.0 { 0.0 } else { rho }, error_bound: 1.0 / iterates as f64, iterates })
}

/// Denjoy map assembled from a rigid rotation by inserting intervals.
///
/// Rotation coordinates `x` map to new coordinates by
/// `Phi(x) = (1 - S) x + sum of len_k over orbit positions a_k < x`.
/// Inside an interval the map `I_k -> I_{k+1}` is a C^1 monotone profile
/// with unit slope at both ends, so the map is C^1 across the invariant set.
#[derive(Debug, Clone)]
pub struct DenjoyMap {
    rho: f64,
    kmin: i64,
    kmax: i64,
    /// Rotation positions sorted increasingly.
    pos: Vec<f64>,
    /// Left endpoints in new coordinates, same order.
    left: Vec<f64>,
    len: Vec<f64>,
    /// Orbit index of each sorted slot.
    order: Vec<i64>,
    /// Sorted slot of orbit index `k`, offset by `-kmin`.
    slot: Vec<usize>,
    /// Interval mass strictly before each sorted slot; has one extra entry.
    mass_before: Vec<f64>,
    /// 1 when `a_k + rho` wraps past 1, by orbit index.
    wraps: Vec<f64>,
    /// Interval profile parameters by orbit index: (eps, exponent, ratio).
    profile: Vec<(f64, f64, f64)>,
    cantor: f64,
}

impl DenjoyMap {
    pub fn new(rho: f64, weights: &DenjoyWeights, truncation: usize) -> Result<DenjoyMap> {
        if !(0.0..1.0).contains(&rho) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("Denjoy rotation {rho} outside [0,1)")));
        }
        if truncation == 0 {
            return Err(Error::InvalidArgument("Denjoy truncation must be positive".into()));
        }
        let n = truncation as i64;
        // lengths for |k| <= N, then a halving tail so the orbit ends below
        // double precision instead of collapsing a visible interval
        let mut lens: Vec<(i64, f64)> = (-n..=n).map(|k| (k, weights.length(k))).collect();
        if lens.iter().any(|&(_, l)| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("Denjoy interval lengths must be positive".into()));
        }
        for side in [-1i64, 1] {
            let mut l = weights.length(side * n);
            let mut k = side * n;
            while l > 1e-18 {
                l *= 0.5;
                k += side;
                lens.push((k, l));
            }
        }
        lens.sort_by_key(|&(k, _)| k);
        let kmin = lens[0].0;
        let kmax = lens[lens.len() - 1].0;
        let total: f64 = lens.iter().map(|&(_, l)| l).sum();
        if total >= 1.0 {
            return Err(Error::InvalidArgument(format!("Denjoy intervals have total length {total} >= 1")));
        }
        let count = lens.len();
        // rotation positions built recursively so that a_{k+1} = a_k + rho - wrap exactly
        let mut apos = vec![0.0; count];
        let z = (-kmin) as usize;
        for i in z + 1..count {
            let v = apos[i - 1] + rho;
            apos[i] = if v >= 1.0 { v - 1.0 } else { v };
        }
        for i in (0..z).rev() {
            let v = apos[i + 1] - rho;
            apos[i] = if v < 0.0 { v + 1.0 } else { v };
        }
        let mut wraps = vec![0.0; count];
        for i in 0..count - 1 {
            wraps[i] = (apos[i] + rho - apos[i + 1]).round();
        }
        let mut idx: Vec<usize> = (0..count).collect();
        idx.sort_by(|&a, &b| apos[a].total_cmp(&apos[b]).then(a.cmp(&b)));
        for w in idx.windows(2) {
            if apos[w[0]] == apos[w[1]] {
                return Err(Error::InvalidArgument("Denjoy rotation is rational at this truncation".into()));
            }
        }
        let cantor = 1.0 - total;
        let mut pos = Vec::with_capacity(count);
        let mut left = Vec::with_capacity(count);
        let mut len = Vec::with_capacity(count);
        let mut order = Vec::with_capacity(count);
        let mut slot = vec![0usize; count];
        let mut mass_before = Vec::with_capacity(count + 1);
        let mut acc = 0.0;
        for (s, &i) in idx.iter().enumerate() {
            pos.push(apos[i]);
            left.push(cantor * apos[i] + acc);
            len.push(lens[i].1);
            order.push(lens[i].0);
            slot[i] = s;
            mass_before.push(acc);
            acc += lens[i].1;
        }
        mass_before.push(acc);
        let mut profile = vec![(1.0, 0.0, 1.0); count];
        for i in 0..count - 1 {
            let r = lens[i].1 / lens[i + 1].1;
            profile[i] = if r >= 1.0 { (0.5, 2.0 * r - 2.0, r) } else { (2.0 - r, 1.0, r) };
        }
        Ok(DenjoyMap { rho, kmin, kmax, pos, left, len, order, slot, mass_before, wraps, profile, cantor })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Sum of inserted lengths.
    pub fn gap_measure(&self) -> f64 {
        1.0 - self.cantor
    }

    /// Inserted interval of orbit index `k` in new coordinates, `[left, left + len)`.
    pub fn interval(&self, k: i64) -> Option<(f64, f64)> {
        if k < self.kmin || k > self.kmax {
            return None;
        }
        let s = self.slot[(k - self.kmin) as usize];
        Some((self.left[s], self.len[s]))
    }

    /// All inserted intervals as (orbit index, left, length), sorted by position.
    pub fn intervals(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        (0..self.pos.len()).map(move |s| (self.order[s], self.left[s], self.len[s]))
    }

    /// Semi-conjugacy `Phi` from rotation coordinates, x in [0,1).
    pub fn phi(&self, x: f64) -> f64 {
        let c = self.pos.partition_point(|&a| a < x);
        self.cantor * x + self.mass_before[c]
    }

    /// Collapse new coordinates back to rotation coordinates (inverse of `Phi`
    /// on the invariant set, constant on each inserted interval).
    pub fn collapse(&self, u: f64) -> f64 {
        let v = u - u.floor();
        let i = self.left.partition_point(|&l| l <= v);
        if i == 0 {
            return v / self.cantor;
        }
        let s = i - 1;
        if v < self.left[s] + self.len[s] {
            return self.pos[s];
        }
        ((v - self.mass_before[s + 1]) / self.cantor).clamp(0.0, 1.0)
    }

    /// Lift value and derivative.
    pub fn lift_d(&self, u: f64) -> (f64, f64) {
        let m = u.floor();
        let v = u - m;
        let i = self.left.partition_point(|&l| l <= v);
        if i > 0 {
            let s = i - 1;
            if v < self.left[s] + self.len[s] {
                let k = self.order[s];
                let kk = (k - self.kmin) as usize;
                let tau = (v - self.left[s]) / self.len[s];
                if k == self.kmax {
                    // end of the truncated orbit: interval collapses to a point
                    let y = self.pos[s] + self.rho;
                    let my = y.floor();
                    return (m + my + self.phi(y - my), 1.0);
                }
                let t = self.slot[kk + 1];
                let (eps, a, r) = self.profile[kk];
                let q = 1.0 - 2.0 * tau;
                let aq = q.abs();
                let g = eps * tau + (r - eps) * (1.0 - q.signum() * aq.powf(a + 1.0)) / (2.0 * (a + 1.0));
                let dg = eps + (r - eps) * aq.powf(a);
                let g = g.clamp(0.0, 1.0);
                return (m + self.wraps[kk] + self.left[t] + self.len[t] * g, self.len[t] / self.len[s] * dg);
            }
        }
        let x = ((v - self.mass_before[i]) / self.cantor).clamp(0.0, 1.0);
        if i > 0 && x <= self.pos[i - 1] {
            // right end of an interval goes to the right end of its image
            let y = self.pos[i - 1] + self.rho;
            let my = y.floor();
            let u = y - my;
            let c = self.pos.partition_point(|&a| a <= u);
            return (m + my + self.cantor * u + self.mass_before[c], 1.0);
        }
        let y = x + self.rho;
        let my = y.floor();
        (m + my + self.phi(y - my), 1.0)
    }
}

/// Periodic monotone cubic Hermite interpolant of tabulated lift values.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneMap {
    pub fn new(values: &[f64]) -> Result<MonotoneMap> {
        let m = values.len();
        if m < 4 {
            return Err(Error::InvalidArgument("monotone table needs at least 4 nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("monotone table has non-finite values".into()));
        }
        let h = 1.0 / m as f64;
        let next = |i: usize| {
            if i + 1 == m {
                values[0] + 1.0
            } else {
                values[i + 1]
            }
        };
        let secant: Vec<f64> = (0..m).map(|i| (next(i) - values[i]) / h).collect();
        if secant.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidArgument("monotone table is not strictly increasing with degree one".into()));
        }
        // harmonic mean of neighbouring secants keeps the spline monotone
        let slopes = (0..m).map(|i| 2.0 / (1.0 / secant[(i + m - 1) % m] + 1.0 / secant[i])).collect();
        Ok(MonotoneMap { values: values.to_vec(), slopes })
    }

    pub fn lift_d(&self, u: f64) -> (f64, f64) {
        let m = self.values.len();
        let mf = m as f64;
        let fl = u.floor();
        let s = (u - fl) * mf;
        let i = (s as usize).min(m - 1);
        let t = s - i as f64;
        let h = 1.0 / mf;
        let y0 = self.values[i];
        let y1 = if i + 1 == m { self.values[0] + 1.0 } else { self.values[i + 1] };
        let d0 = self.slopes[i];
        let d1 = self.slopes[(i + 1) % m];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dy = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (6.0 * t - 6.0 * t2) * y1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (fl + y, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = 0.618_033_988_749_894_8;

    fn denjoy_sq(n: usize) -> CircleMap {
        CircleMapSpec::Denjoy {
            rho: PHI,
            weights: DenjoyWeights::InverseSquare { scale: 0.5, offset: 4.0 },
            truncation: n,
        }
        .compile()
        .unwrap()
    }

    #[test]
    fn rotation_estimates() {
        let r = rotation_number(&CircleMapSpec::Rotation { rho: 0.382 }, 100_000).unwrap();
        assert!((r.rho - 0.382).abs() < 1e-5);
        assert_eq!(r.error_bound, 1e-5);
        assert_eq!(rotation_number(&CircleMapSpec::identity(), 1000).unwrap().rho, 0.0);
        assert!(rotation_number(&CircleMapSpec::identity(), 10).is_err());
    }

    #[test]
    fn denjoy_lift_is_increasing_and_periodic() {
        let m = denjoy_sq(60);
        let mut prev = m.lift(-1e-9);
        for i in 0..=20_000 {
            let u = i as f64 / 20_000.0;
            let y = m.lift(u);
            assert!(y >= prev - 1e-15, "lift decreases at {u}");
            prev = y;
            assert!((m.lift(u + 1.0) - y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn denjoy_maps_intervals_to_successors() {
        let d = match denjoy_sq(60) {
            CircleMap::Denjoy(d) => d,
            _ => unreachable!(),
        };
        for k in -10..10 {
            let (l, len) = d.interval(k).unwrap();
            let (l1, len1) = d.interval(k + 1).unwrap();
            let mid = d.lift_d(l + 0.5 * len).0;
            let img = mid - mid.floor();
            assert!(img > l1 && img < l1 + len1, "interval {k} not mapped into its successor");
            // unit slope at the interval ends
            let (_, d0) = d.lift_d(l + 1e-13 * len);
            assert!((d0 - 1.0).abs() < 1e-6, "slope {d0} at left end of {k}");
        }
    }

    #[test]
    fn denjoy_continuity_at_interval_ends() {
        let d = match denjoy_sq(60) {
            CircleMap::Denjoy(d) => d,
            _ => unreachable!(),
        };
        for k in -20..20 {
            let (l, len) = d.interval(k).unwrap();
            for e in [l, l + len] {
                let a = d.lift_d(e - 1e-12).0;
                let b = d.lift_d(e + 1e-12).0;
                assert!((a - b).abs() < 1e-9, "jump {} at end of interval {k}", b - a);
            }
        }
    }

    #[test]
    fn denjoy_rotation_number() {
        let r = rotation_number_compiled(&denjoy_sq(400), 100_000).unwrap();
        assert!((r.rho - PHI).abs() < 1e-3);
    }

    #[test]
    fn denjoy_rejects_overfull_weights() {
        let spec = CircleMapSpec::Denjoy {
            rho: PHI,
            weights: DenjoyWeights::InverseSquare { scale: 2.0, offset: 1.0 },
            truncation: 60,
        };
        assert!(spec.compile().is_err());
    }

    #[test]
    fn monotone_interpolates_nodes() {
        let f = |x: f64| x + 0.3 + 0.05 * (2.0 * std::f64::consts::PI * x).sin();
        let spec = CircleMapSpec::tabulate(64, f);
        let m = spec.compile().unwrap();
        for i in 0..64 {
            let x = i as f64 / 64.0;
            assert!((m.lift(x) - f(x)).abs() < 1e-12);
        }
        for i in 0..1000 {
            let x = i as f64 / 1000.0 + 0.0003;
            assert!((m.lift(x) - f(x)).abs() < 1e-4);
            let (_, d) = m.lift_d(x);
            assert!(d > 0.0);
        }
        assert!((m.lift(1.25) - m.lift(0.25) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_rejects_decreasing() {
        assert!(CircleMapSpec::Monotone { values: vec![0.0, 0.5, 0.4, 0.9] }.compile().is_err());
        assert!(CircleMapSpec::Monotone { values: vec![0.0, 0.5, 0.7, 1.2] }.compile().is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let specs = [
            CircleMapSpec::Rotation { rho: 0.25 },
            CircleMapSpec::Denjoy {
                rho: PHI,
                weights: DenjoyWeights::Geometric { lead: 0.9, scale: 1e-3, ratio: 0.5 },
                truncation: 60,
            },
            CircleMapSpec::Denjoy {
                rho: PHI,
                weights: DenjoyWeights::Clustered { head: 0.04, head_count: 5, scale: 1e-3, ratio: 0.5 },
                truncation: 60,
            },
            CircleMapSpec::Monotone { values: vec![0.1, 0.3, 0.6, 0.8] },
        ];
        for s in specs {
            let js = serde_json::to_string(&s).unwrap();
            let back: CircleMapSpec = serde_json::from_str(&js).unwrap();
            assert_eq!(back, s);
        }
    }
}
