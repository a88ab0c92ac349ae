//! Flat torus arithmetic, cell grids and connectivity of cell sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAP: f64 = 1e-12;

/// A point of R^2/Z^2 stored by its canonical representative in [0,1)^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    x: f64,
    y: f64,
}

impl TryFrom<RawPoint> for TorusPoint {
    type Error = Error;
    fn try_from(p: RawPoint) -> Result<Self> {
        wrap(p.x, p.y)
    }
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        wrap(x, y)
    }

    /// Origin of the torus.
    pub const ORIGIN: TorusPoint = TorusPoint { x: 0.0, y: 0.0 };

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Translate by `v` and reduce.
    pub fn shifted(&self, dx: f64, dy: f64) -> TorusPoint {
        TorusPoint { x: unit(self.x + dx), y: unit(self.y + dy) }
    }

    /// Reduce a finite raw point without error checking.
    pub(crate) fn wrap_finite(x: f64, y: f64) -> TorusPoint {
        TorusPoint { x: unit(x), y: unit(y) }
    }
}

/// Velocity at a point, in torus units per unit flow time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorusVector {
    pub dx: f64,
    pub dy: f64,
}

impl TorusVector {
    pub const ZERO: TorusVector = TorusVector { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        TorusVector { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn dot(&self, o: &TorusVector) -> f64 {
        self.dx * o.dx + self.dy * o.dy
    }

    pub fn scale(&self, s: f64) -> TorusVector {
        TorusVector { dx: self.dx * s, dy: self.dy * s }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

/// Genus and orientability of the ambient surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceDescriptor {
    pub genus: u32,
    pub orientable: bool,
}

impl SurfaceDescriptor {
    pub const TORUS: SurfaceDescriptor = SurfaceDescriptor { genus: 1, orientable: true };
}

#[inline]
fn unit(v: f64) -> f64 {
    let r = v - floor(v);
    if r >= 1.0 - SNAP {
        0.0
    } else {
        r
    }
}

/// Canonical representative of `(raw_x, raw_y)` modulo Z^2.
pub fn wrap(raw_x: f64, raw_y: f64) -> Result<TorusPoint> {
    if !raw_x.is_finite() || !raw_y.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite point ({raw_x}, {raw_y})")));
    }
    Ok(TorusPoint::wrap_finite(raw_x, raw_y))
}

/// Shortest signed representative of `d` modulo 1, in [-1/2, 1/2).
#[inline]
pub fn signed_offset(d: f64) -> f64 {
    d - floor(d + 0.5)
}

/// `x.floor()` by truncation, exact for |x| < 2^52 and much cheaper than the
/// library call on baseline x86-64.
#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    if x.abs() < 4.0e15 {
        let t = x as i64 as f64;
        if t > x {
            t - 1.0
        } else {
            t
        }
    } else {
        x.floor()
    }
}

/// Flat geodesic distance.
pub fn torus_distance(p: TorusPoint, q: TorusPoint) -> f64 {
    let dx = circle_distance(p.x, q.x);
    let dy = circle_distance(p.y, q.y);
    dx.hypot(dy)
}

/// Distance between two points of R/Z.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Row-major index of the grid cell containing `p`.
pub fn cell_index(p: TorusPoint, n: usize) -> usize {
    let nf = n as f64;
    let i = ((nf * p.x) as usize).min(n - 1);
    let j = ((nf * p.y) as usize).min(n - 1);
    j * n + i
}

/// Centre of cell `idx`.
pub fn cell_center(idx: usize, n: usize) -> TorusPoint {
    let nf = n as f64;
    TorusPoint { x: ((idx % n) as f64 + 0.5) / nf, y: ((idx / n) as f64 + 0.5) / nf }
}

/// The four edge neighbours of `idx` (right, left, up, down) with wraparound.
#[inline]
pub fn neighbours(idx: usize, n: usize) -> [usize; 4] {
    let (i, j) = (idx % n, idx / n);
    let r = j * n + (i + 1) % n;
    let l = j * n + (i + n - 1) % n;
    let u = ((j + 1) % n) * n + i;
    let d = ((j + n - 1) % n) * n + i;
    [r, l, u, d]
}

/// A subset of the cells of an n x n toroidal grid.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    n: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for CellSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CellSet").field("n", &self.n).field("len", &self.len()).finish()
    }
}

impl CellSet {
    pub fn new(n: usize) -> Self {
        CellSet { n, bits: vec![0; (n * n).div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut s = CellSet::new(n);
        for k in 0..n * n {
            s.insert(k);
        }
        s
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(n: usize, it: I) -> Self {
        let mut s = CellSet::new(n);
        for k in it {
            s.insert(k);
        }
        s
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn insert(&mut self, k: usize) {
        debug_assert!(k < self.n * self.n);
        self.bits[k >> 6] |= 1 << (k & 63);
    }

    #[inline]
    pub fn remove(&mut self, k: usize) {
        self.bits[k >> 6] &= !(1 << (k & 63));
    }

    #[inline]
    pub fn contains(&self, k: usize) -> bool {
        k < self.n * self.n && self.bits[k >> 6] & (1 << (k & 63)) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn clear(&mut self) {
        self.bits.iter_mut().for_each(|w| *w = 0);
    }

    /// Fraction of all grid cells in the set.
    pub fn coverage(&self) -> f64 {
        self.len() as f64 / self.cells() as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }

    fn check(&self, o: &CellSet) {
        assert_eq!(self.n, o.n, "cell sets of different resolution");
    }

    pub fn union_with(&mut self, o: &CellSet) {
        self.check(o);
        self.bits.iter_mut().zip(&o.bits).for_each(|(a, b)| *a |= b);
    }

    pub fn union(&self, o: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.union_with(o);
        s
    }

    pub fn intersection(&self, o: &CellSet) -> CellSet {
        self.check(o);
        let bits = self.bits.iter().zip(&o.bits).map(|(a, b)| a & b).collect();
        CellSet { n: self.n, bits }
    }

    pub fn difference(&self, o: &CellSet) -> CellSet {
        self.check(o);
        let bits = self.bits.iter().zip(&o.bits).map(|(a, b)| a & !b).collect();
        CellSet { n: self.n, bits }
    }

    pub fn complement(&self) -> CellSet {
        CellSet::full(self.n).difference(self)
    }

    pub fn is_subset(&self, o: &CellSet) -> bool {
        self.check(o);
        self.bits.iter().zip(&o.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, o: &CellSet) -> bool {
        self.check(o);
        self.bits.iter().zip(&o.bits).any(|(a, b)| a & b != 0)
    }

    pub fn symmetric_difference_len(&self, o: &CellSet) -> usize {
        self.check(o);
        self.bits.iter().zip(&o.bits).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Symmetric difference relative to the size of the union (0 when both are empty).
    pub fn mismatch(&self, o: &CellSet) -> f64 {
        let u = self.union(o).len();
        if u == 0 {
            0.0
        } else {
            self.symmetric_difference_len(o) as f64 / u as f64
        }
    }

    /// One-ring dilation: the set together with all its edge neighbours.
    pub fn dilate(&self) -> CellSet {
        let mut out = self.clone();
        for k in self.iter() {
            for m in neighbours(k, self.n) {
                out.insert(m);
            }
        }
        out
    }

    /// Cells of the set whose four neighbours all belong to the set.
    pub fn interior(&self) -> CellSet {
        let mut out = CellSet::new(self.n);
        for k in self.iter() {
            if neighbours(k, self.n).iter().all(|&m| self.contains(m)) {
                out.insert(k);
            }
        }
        out
    }

    pub fn has_interior(&self) -> bool {
        self.iter().any(|k| neighbours(k, self.n).iter().all(|&m| self.contains(m)))
    }

    /// Grid boundary: dilation minus interior.
    pub fn boundary(&self) -> CellSet {
        self.dilate().difference(&self.interior())
    }
}

impl Serialize for CellSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            resolution: usize,
            members: Vec<usize>,
        }
        Repr { resolution: self.n, members: self.iter().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CellSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            resolution: usize,
            members: Vec<usize>,
        }
        let r = Repr::deserialize(d)?;
        if r.resolution == 0 {
            return Err(serde::de::Error::custom("resolution must be positive"));
        }
        let cells = r.resolution * r.resolution;
        if let Some(bad) = r.members.iter().find(|&&k| k >= cells) {
            return Err(serde::de::Error::custom(format!("cell index {bad} out of range")));
        }
        Ok(CellSet::from_indices(r.resolution, r.members))
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(size: usize) -> Self {
        UnionFind { parent: (0..size as u32).collect() }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let g = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = g;
            a = g;
        }
        a
    }

    fn unite(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so roots are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Maximal 4-connected components, ordered by their smallest member.
pub fn connected_components(s: &CellSet) -> Vec<CellSet> {
    let n = s.resolution();
    let mut uf = UnionFind::new(n * n);
    for k in s.iter() {
        let [r, _, u, _] = neighbours(k, n);
        if s.contains(r) {
            uf.unite(k as u32, r as u32);
        }
        if s.contains(u) {
            uf.unite(k as u32, u as u32);
        }
    }
    let mut slot = vec![usize::MAX; n * n];
    let mut out: Vec<CellSet> = Vec::new();
    for k in s.iter() {
        let root = uf.find(k as u32) as usize;
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(CellSet::new(n));
        }
        out[slot[root]].insert(k);
    }
    out
}

/// True when the complement of `s` has at most one component.
pub fn is_coconnected(s: &CellSet) -> bool {
    connected_components(&s.complement()).len() <= 1
}
