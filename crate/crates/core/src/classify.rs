//! Orbit classification: limit-set estimates, recurrence, the five orbit
//! classes and the grid partition of the torus.
//!
//! Each seed is integrated once forward and once backward. The passes are
//! streamed through observers that rasterise every accepted step into grid
//! cells, so no trajectory is stored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{VectorField, VectorFieldSpec};
use crate::geometry::{cell_center, cell_index, floor, signed_offset, torus_distance, CellSet, TorusPoint};
use crate::integrate::{drive, point_in_step, run, IntegrationParams, Step, Termination};
use crate::poincare::refine_with;

/// Numeric scope of a classification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// Grid resolution `n`.
    pub resolution: usize,
    /// Flow time `T` of each pass.
    pub horizon: f64,
    /// Fraction of the pass treated as the tail.
    pub tau_tail: f64,
    pub tol_per: f64,
    pub tol_sing: f64,
    pub delta_closure: f64,
    pub integration: IntegrationParams,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            resolution: 64,
            horizon: 2000.0,
            tau_tail: 0.5,
            tol_per: 1e-6,
            tol_sing: 1e-8,
            delta_closure: 0.05,
            integration: IntegrationParams { max_step: CLASSIFY_MAX_STEP, ..IntegrationParams::default() },
        }
    }
}

/// Step ceiling used by the classifier. Accuracy is still governed by
/// `tol_local` and the feature-scale cap.
pub const CLASSIFY_MAX_STEP: f64 = 0.1;

/// Steps with both ends this close to the seed are checked for a return.
const SECTION_RADIUS: f64 = 0.25;
/// Direction cosine required for a periodic return.
const MIN_ALIGNMENT: f64 = 0.999;

impl ClassifierParams {
    pub fn with_resolution(n: usize) -> Self {
        ClassifierParams { resolution: n, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidArgument(format!("resolution {} below 2", self.resolution)));
        }
        let pos = [self.horizon, self.tol_per, self.tol_sing, self.delta_closure];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("horizon and tolerances must be positive".into()));
        }
        if !(self.tau_tail > 0.0 && self.tau_tail <= 1.0) {
            return Err(Error::InvalidArgument(format!("tail fraction {} outside (0, 1]", self.tau_tail)));
        }
        self.integration.validate()
    }
}

/// One of the five orbit classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum OrbitClassLabel {
    Sing,
    Per { period: f64 },
    P,
    LD,
    ExceptionalSuspect,
}

/// Integer label codes used in partition files and portraits.
pub mod codes {
    pub const SING: u8 = 0;
    pub const PER: u8 = 1;
    pub const P: u8 = 2;
    pub const LD: u8 = 3;
    pub const SUSPECT: u8 = 4;
}

impl OrbitClassLabel {
    /// Integer code used in partition files and portraits.
    pub fn code(&self) -> u8 {
        match self {
            OrbitClassLabel::Sing => codes::SING,
            OrbitClassLabel::Per { .. } => codes::PER,
            OrbitClassLabel::P => codes::P,
            OrbitClassLabel::LD => codes::LD,
            OrbitClassLabel::ExceptionalSuspect => codes::SUSPECT,
        }
    }

    pub fn name(&self) -> &'static str {
        code_name(self.code())
    }

    /// LD or exceptional: nontrivial weakly recurrent.
    pub fn is_nontrivial_recurrent(&self) -> bool {
        matches!(self, OrbitClassLabel::LD | OrbitClassLabel::ExceptionalSuspect)
    }
}

pub fn code_name(code: u8) -> &'static str {
    match code {
        codes::SING => "Sing",
        codes::PER => "Per",
        codes::P => "P",
        codes::LD => "LD",
        _ => "ExceptionalSuspect",
    }
}

/// Rank used when several injected seeds claim a cell; lower wins.
fn precedence(code: u8) -> u8 {
    match code {
        codes::SING => 0,
        codes::PER => 1,
        codes::P => 2,
        codes::SUSPECT => 3,
        _ => 4,
    }
}

/// Cell-level estimate of the limit sets of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSetEstimate {
    pub omega_cells: CellSet,
    pub alpha_cells: CellSet,
    pub omega_in_sing: bool,
    pub alpha_in_sing: bool,
}

/// Everything the classifier learned about one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: TorusPoint,
    pub injected: bool,
    pub label: OrbitClassLabel,
    pub limits: LimitSetEstimate,
    /// Visited cells, forward and backward.
    pub closure: CellSet,
    /// The horizon was doubled to settle a return close to `T`.
    pub extended: bool,
}

impl SeedRecord {
    pub fn cell(&self) -> usize {
        cell_index(self.seed, self.closure.resolution())
    }
}

/// Call `f` on every cell met by the segment between two lifted points.
fn raster(x0: f64, y0: f64, x1: f64, y1: f64, n: usize, mut f: impl FnMut(usize)) {
    let nf = n as f64;
    let (ax, ay, bx, by) = (x0 * nf, y0 * nf, x1 * nf, y1 * nf);
    let (i, j) = (floor(ax) as i64, floor(ay) as i64);
    let (ie, je) = (floor(bx) as i64, floor(by) as i64);
    let ni = n as i64;
    let (mut ci, mut cj) = (i.rem_euclid(ni) as usize, j.rem_euclid(ni) as usize);
    f(cj * n + ci);
    let steps = (ie - i).abs() + (je - j).abs();
    if steps == 0 {
        return;
    }
    let (dx, dy) = (bx - ax, by - ay);
    let (mut tx, ddx) = if dx != 0.0 {
        let edge = if dx > 0.0 { (i + 1) as f64 - ax } else { ax - i as f64 };
        (edge / dx.abs(), 1.0 / dx.abs())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let (mut ty, ddy) = if dy != 0.0 {
        let edge = if dy > 0.0 { (j + 1) as f64 - ay } else { ay - j as f64 };
        (edge / dy.abs(), 1.0 / dy.abs())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let step = |c: usize, up: bool| match (up, c) {
        (true, c) if c + 1 == n => 0,
        (true, c) => c + 1,
        (false, 0) => n - 1,
        (false, c) => c - 1,
    };
    for _ in 0..steps {
        if tx < ty {
            ci = step(ci, dx > 0.0);
            tx += ddx;
        } else {
            cj = step(cj, dy > 0.0);
            ty += ddy;
        }
        f(cj * n + ci);
    }
}

/// Cells gathered by one streamed pass.
struct Pass {
    visited: CellSet,
    tail: CellSet,
    trap: Vec<usize>,
    end_cell: usize,
    terminated: Termination,
    period: Option<f64>,
}

fn sweep(field: &VectorField, seed: TorusPoint, sign: f64, horizon: f64, prm: &ClassifierParams, detect: bool) -> Pass {
    let n = prm.resolution;
    let ip = &prm.integration;
    let tail_start = (1.0 - prm.tau_tail) * horizon;
    let (sx, sy) = (seed.x(), seed.y());
    let mut visited = CellSet::new(n);
    let mut tail = CellSet::new(n);
    let mut trap = Vec::new();
    let mut period = None;
    visited.insert(cell_index(seed, n));
    let (u, v) = field.eval_raw(sx, sy);
    let speed = u.hypot(v);
    let (ux, uy) = if speed > 0.0 { (sign * u / speed, sign * v / speed) } else { (0.0, 0.0) };
    let detect = detect && speed > 0.0;
    let section = |x: f64, y: f64| signed_offset(x - sx) * ux + signed_offset(y - sy) * uy;
    // section value at the end of the previous step, which starts the next one
    let mut last = section(sx, sy);
    let mut obs = |s: &Step| {
        let in_tail = s.t1 >= tail_start;
        raster(s.x0, s.y0, s.x1, s.y1, n, |k| {
            visited.insert(k);
            if in_tail {
                tail.insert(k);
            }
        });
        if s.speed < ip.v_trap {
            trap.push(cell_index(TorusPoint::wrap_finite(s.x1, s.y1), n));
        } else if !trap.is_empty() {
            trap.clear();
        }
        if detect {
            let near = |x: f64, y: f64| {
                let (a, b) = (signed_offset(x - sx), signed_offset(y - sy));
                a * a + b * b < SECTION_RADIUS * SECTION_RADIUS
            };
            let (g0, g1) = (last, section(s.x1, s.y1));
            last = g1;
            if g0 < 0.0 && g1 >= 0.0 && near(s.x0, s.y0) && near(s.x1, s.y1) {
                let c = refine_with(s, section, |c| point_in_step(field, sign, s, c));
                let d = signed_offset(c.x - sx).hypot(signed_offset(c.y - sy));
                if d < prm.tol_per {
                    let (a, b) = field.eval_raw(c.x, c.y);
                    let cos = (sign * a * ux + sign * b * uy) / a.hypot(b);
                    if cos > MIN_ALIGNMENT {
                        period = Some(c.t);
                        return false;
                    }
                }
            }
        }
        true
    };
    let out = drive(field, sx, sy, sign, horizon, ip, &mut obs);
    let end_cell = cell_index(TorusPoint::wrap_finite(out.x, out.y), n);
    if out.terminated == Termination::SingularityTrap {
        trap.push(end_cell);
    }
    Pass { visited, tail, trap, end_cell, terminated: out.terminated, period }
}

fn underflow(seed: TorusPoint) -> Error {
    Error::StepUnderflow { time: f64::NAN, x: seed.x(), y: seed.y() }
}

/// Limit set of one pass: the trap cells if trapped, else the tail.
fn limit_of(pass: &Pass, n: usize, sing_cells: &CellSet) -> (CellSet, bool) {
    if pass.terminated == Termination::SingularityTrap {
        return (CellSet::from_indices(n, pass.trap.iter().copied().chain([pass.end_cell])), true);
    }
    let in_sing = !pass.tail.is_empty() && pass.tail.is_subset(sing_cells);
    (pass.tail.clone(), in_sing)
}

/// Zero field at `p` that stays put for unit flow time.
pub fn detect_singular_field(field: &VectorField, p: TorusPoint, tol_sing: f64, params: &IntegrationParams) -> bool {
    if field.evaluate(p).norm() >= tol_sing {
        return false;
    }
    let out = run(field, p.x(), p.y(), 1.0, 1.0, params, &mut |_: &Step| true);
    out.terminated != Termination::StepUnderflow
        && torus_distance(TorusPoint::wrap_finite(out.x, out.y), p) < 10.0 * tol_sing
}

pub fn detect_singular(field: &VectorFieldSpec, p: TorusPoint, tol_sing: f64) -> Result<bool> {
    Ok(detect_singular_field(&field.compile()?, p, tol_sing, &IntegrationParams::default()))
}

/// Smallest return time to the seed within the horizon, doubling the horizon
/// once when the return sits at its end.
fn periodic_pass(field: &VectorField, seed: TorusPoint, prm: &ClassifierParams) -> Result<(Pass, bool)> {
    let pass = sweep(field, seed, 1.0, prm.horizon, prm, true);
    if let Some(t) = pass.period {
        if prm.horizon - t < prm.tol_per {
            return Ok((sweep(field, seed, 1.0, 2.0 * prm.horizon, prm, true), true));
        }
    }
    if pass.terminated == Termination::StepUnderflow {
        return Err(underflow(seed));
    }
    Ok((pass, false))
}

pub fn detect_periodic_field(field: &VectorField, seed: TorusPoint, params: &ClassifierParams) -> Result<Option<f64>> {
    params.validate()?;
    Ok(periodic_pass(field, seed, params)?.0.period)
}

/// Smallest period of the orbit of `seed` up to the horizon, if any.
pub fn detect_periodic(field: &VectorFieldSpec, seed: TorusPoint, params: &ClassifierParams) -> Result<Option<f64>> {
    detect_periodic_field(&field.compile()?, seed, params)
}

pub fn estimate_limit_sets_field(
    field: &VectorField,
    x: TorusPoint,
    params: &ClassifierParams,
) -> Result<LimitSetEstimate> {
    params.validate()?;
    let n = params.resolution;
    let sing = field.singular_cells(n);
    let f = sweep(field, x, 1.0, params.horizon, params, false);
    let b = sweep(field, x, -1.0, params.horizon, params, false);
    if f.terminated == Termination::StepUnderflow || b.terminated == Termination::StepUnderflow {
        return Err(underflow(x));
    }
    let (omega_cells, omega_in_sing) = limit_of(&f, n, &sing);
    let (alpha_cells, alpha_in_sing) = limit_of(&b, n, &sing);
    Ok(LimitSetEstimate { omega_cells, alpha_cells, omega_in_sing, alpha_in_sing })
}

/// Cells of the tail windows of the forward and backward passes from `x`.
pub fn estimate_limit_sets(
    field: &VectorFieldSpec,
    x: TorusPoint,
    params: &ClassifierParams,
) -> Result<LimitSetEstimate> {
    estimate_limit_sets_field(&field.compile()?, x, params)
}

/// Full classification of one seed against precomputed singular cells.
pub fn classify_seed(
    field: &VectorField,
    seed: TorusPoint,
    params: &ClassifierParams,
    sing_cells: &CellSet,
) -> Result<SeedRecord> {
    let n = params.resolution;
    let own = cell_index(seed, n);
    if detect_singular_field(field, seed, params.tol_sing, &params.integration) {
        let cell = CellSet::from_indices(n, [own]);
        let limits = LimitSetEstimate {
            omega_cells: cell.clone(),
            alpha_cells: cell.clone(),
            omega_in_sing: true,
            alpha_in_sing: true,
        };
        return Ok(SeedRecord {
            seed,
            injected: false,
            label: OrbitClassLabel::Sing,
            limits,
            closure: cell,
            extended: false,
        });
    }
    let (fwd, extended) = periodic_pass(field, seed, params)?;
    if let Some(period) = fwd.period {
        let limits = LimitSetEstimate {
            omega_cells: fwd.visited.clone(),
            alpha_cells: fwd.visited.clone(),
            omega_in_sing: false,
            alpha_in_sing: false,
        };
        let label = OrbitClassLabel::Per { period };
        return Ok(SeedRecord { seed, injected: false, label, limits, closure: fwd.visited, extended });
    }
    let bwd = sweep(field, seed, -1.0, params.horizon, params, false);
    if bwd.terminated == Termination::StepUnderflow {
        return Err(underflow(seed));
    }
    let (omega_cells, omega_in_sing) = limit_of(&fwd, n, sing_cells);
    let (alpha_cells, alpha_in_sing) = limit_of(&bwd, n, sing_cells);
    let closure = fwd.visited.union(&bwd.visited);
    let recurrent = omega_cells.contains(own) || alpha_cells.contains(own);
    let label = if !recurrent {
        OrbitClassLabel::P
    } else if closure.has_interior() {
        OrbitClassLabel::LD
    } else {
        OrbitClassLabel::ExceptionalSuspect
    };
    let limits = LimitSetEstimate { omega_cells, alpha_cells, omega_in_sing, alpha_in_sing };
    Ok(SeedRecord { seed, injected: false, label, limits, closure, extended })
}

/// Label of the orbit through `seed`.
pub fn classify_orbit(field: &VectorFieldSpec, seed: TorusPoint, params: &ClassifierParams) -> Result<OrbitClassLabel> {
    params.validate()?;
    let f = field.compile()?;
    let sing = f.singular_cells(params.resolution);
    Ok(classify_seed(&f, seed, params, &sing)?.label)
}

/// An injected seed and its label, as stored in partition files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedSeed {
    pub point: TorusPoint,
    pub label: u8,
}

/// Per-cell orbit classes on the n x n seed grid plus injected seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPartition {
    pub resolution: usize,
    pub horizon: f64,
    /// Resolved label code of every cell: 0 Sing, 1 Per, 2 P, 3 LD, 4 ExceptionalSuspect.
    pub labels: Vec<u8>,
    pub extra_seeds: Vec<InjectedSeed>,
    pub diagnostics: Vec<String>,
    pub params: ClassifierParams,
    /// Grid seeds in cell order followed by injected seeds.
    #[serde(skip)]
    pub records: Vec<SeedRecord>,
}

impl GridPartition {
    pub fn grid_records(&self) -> &[SeedRecord] {
        let m = self.resolution * self.resolution;
        &self.records[..m.min(self.records.len())]
    }

    pub fn injected_records(&self) -> &[SeedRecord] {
        let m = self.resolution * self.resolution;
        &self.records[m.min(self.records.len())..]
    }

    /// Cells whose resolved label is one of `codes`.
    pub fn cells_labelled(&self, codes: &[u8]) -> CellSet {
        CellSet::from_indices(
            self.resolution,
            self.labels.iter().enumerate().filter(|(_, c)| codes.contains(c)).map(|(k, _)| k),
        )
    }

    /// Number of cells per label code.
    pub fn counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    /// Seeds (grid and injected) carrying a given label code.
    pub fn seeds_labelled(&self, code: u8) -> impl Iterator<Item = &SeedRecord> {
        self.records.iter().filter(move |r| r.label.code() == code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serialises")
    }

    pub fn from_json(text: &str) -> Result<GridPartition> {
        let p: GridPartition = serde_json::from_str(text)?;
        if p.labels.len() != p.resolution * p.resolution || p.labels.iter().any(|&c| c > 4) {
            return Err(Error::InvalidArgument("partition labels do not match its resolution".into()));
        }
        Ok(p)
    }
}

/// Classify every cell centre and every designed seed of the field.
pub fn decompose_field(field: &VectorField, params: &ClassifierParams) -> Result<GridPartition> {
    params.validate()?;
    let n = params.resolution;
    if n < 16 {
        return Err(Error::InvalidArgument(format!("decomposition needs n >= 16, got {n}")));
    }
    let sing = field.singular_cells(n);
    let injected = field.designed_seeds(n);
    let seeds: Vec<(TorusPoint, bool)> =
        (0..n * n).map(|k| (cell_center(k, n), false)).chain(injected.iter().map(|&p| (p, true))).collect();
    let results: Vec<Result<SeedRecord>> = seeds
        .par_iter()
        .map(|&(p, inj)| {
            classify_seed(field, p, params, &sing).map(|mut r| {
                r.injected = inj;
                r
            })
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, (p, _)) in results.into_iter().zip(&seeds) {
        match r {
            Ok(r) => records.push(r),
            Err(e) => failures.push(format!("seed ({:.6}, {:.6}): {e}", p.x(), p.y())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Decomposition(failures));
    }
    let mut labels: Vec<u8> = records[..n * n].iter().map(|r| r.label.code()).collect();
    // injected seeds override the grid; a periodic injected seed claims its whole orbit
    let mut claim: Vec<Option<u8>> = vec![None; n * n];
    for r in &records[n * n..] {
        let code = r.label.code();
        let cells: Vec<usize> = if code == codes::PER { r.closure.iter().collect() } else { vec![r.cell()] };
        for k in cells {
            claim[k] = Some(match claim[k] {
                Some(c) if precedence(c) <= precedence(code) => c,
                _ => code,
            });
        }
    }
    for (l, c) in labels.iter_mut().zip(&claim) {
        if let Some(c) = c {
            *l = *c;
        }
    }
    let extra_seeds = records[n * n..].iter().map(|r| InjectedSeed { point: r.seed, label: r.label.code() }).collect();
    let mut diagnostics = vec![format!("injected seeds: {}", injected.len())];
    let extended = records.iter().filter(|r| r.extended).count();
    if extended > 0 {
        diagnostics.push(format!("horizon doubled for {extended} seeds with a return near T"));
    }
    Ok(GridPartition {
        resolution: n,
        horizon: params.horizon,
        labels,
        extra_seeds,
        diagnostics,
        params: *params,
        records,
    })
}

/// Grid partition of the flow of `field` at the scope of `params`.
pub fn decompose(field: &VectorFieldSpec, params: &ClassifierParams) -> Result<GridPartition> {
    decompose_field(&field.compile()?, params)
}

/// Grid estimate of the orbit class of a nontrivial recurrent orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClassEstimate {
    pub representative: TorusPoint,
    pub class_cells: CellSet,
    pub closure: CellSet,
    /// Fraction of the expected class (closure cells labelled LD or
    /// exceptional, minus Sing and P cells) missing from `class_cells`.
    pub containment_defect: f64,
    pub contained: bool,
}

fn find_record(partition: &GridPartition, x: TorusPoint) -> Option<&SeedRecord> {
    partition
        .injected_records()
        .iter()
        .find(|r| torus_distance(r.seed, x) < 1e-12)
        .or_else(|| partition.grid_records().get(cell_index(x, partition.resolution)))
}

/// Seeds whose closure estimate agrees with that of `x` up to `delta_closure`.
pub fn orbit_class(partition: &GridPartition, x: TorusPoint) -> Result<OrbitClassEstimate> {
    let rec =
        find_record(partition, x).ok_or_else(|| Error::InvalidArgument("partition carries no seed records".into()))?;
    if !rec.label.is_nontrivial_recurrent() {
        return Err(Error::WrongLabel(rec.label.name().into()));
    }
    let delta = partition.params.delta_closure;
    let recurrent = partition.cells_labelled(&[codes::LD, codes::SUSPECT]);
    let mut class_cells = CellSet::new(partition.resolution);
    // a cell painted Sing or P by an injected seed is not in the class even if its grid seed recurs
    for r in &partition.records {
        if r.label.is_nontrivial_recurrent()
            && recurrent.contains(r.cell())
            && r.closure.mismatch(&rec.closure) <= delta
        {
            class_cells.insert(r.cell());
        }
    }
    let trivial = partition.cells_labelled(&[codes::SING, codes::P]);
    let expected = rec.closure.intersection(&recurrent).difference(&trivial);
    let missing = expected.difference(&class_cells).len();
    let containment_defect = if expected.is_empty() { 0.0 } else { missing as f64 / expected.len() as f64 };
    Ok(OrbitClassEstimate {
        representative: rec.seed,
        class_cells,
        closure: rec.closure.clone(),
        containment_defect,
        contained: containment_defect <= delta,
    })
}

/// Closure of a nontrivial recurrent orbit, with the seed that witnessed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMinimalSet {
    pub closure: CellSet,
    pub witness: TorusPoint,
}

/// Distinct quasi-minimal sets among the LD and exceptional seeds.
///
/// A recurrent orbit's closure is its limit set, so witnesses are compared
/// through their dilated limit-set cells and the set is reported as
/// `omega_cells | alpha_cells`.
pub fn quasi_minimal_sets(partition: &GridPartition) -> Vec<QuasiMinimalSet> {
    let delta = partition.params.delta_closure;
    let mut keys: Vec<CellSet> = Vec::new();
    let mut out = Vec::new();
    for r in partition.records.iter().filter(|r| r.label.is_nontrivial_recurrent()) {
        let limit = r.limits.omega_cells.union(&r.limits.alpha_cells);
        let key = limit.dilate();
        if keys.iter().any(|k| k.mismatch(&key) <= delta) {
            continue;
        }
        keys.push(key);
        out.push(QuasiMinimalSet { closure: limit, witness: r.seed });
    }
    out
}

/// A periodic orbit that is a limit set of some non-periodic seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub cells: CellSet,
    pub period: f64,
    pub witness: TorusPoint,
    /// The cycle lies on the grid boundary of the interior of the P cells.
    pub boundary_of_int_p: bool,
}

/// Each set within one cell ring of the other.
fn within_one_cell(a: &CellSet, b: &CellSet) -> bool {
    !a.is_empty() && !b.is_empty() && a.is_subset(&b.dilate()) && b.is_subset(&a.dilate())
}

/// Periodic orbits that appear as omega or alpha limit sets of other seeds.
pub fn limit_cycles(partition: &GridPartition) -> Vec<LimitCycle> {
    let targets: Vec<&CellSet> = partition
        .records
        .iter()
        .filter(|r| matches!(r.label, OrbitClassLabel::P | OrbitClassLabel::LD | OrbitClassLabel::ExceptionalSuspect))
        .flat_map(|r| [&r.limits.omega_cells, &r.limits.alpha_cells])
        .collect();
    if targets.is_empty() {
        return Vec::new();
    }
    let p_cells = partition.cells_labelled(&[codes::P]);
    let int_p = p_cells.interior();
    let near_boundary = int_p.boundary().dilate();
    let mut out: Vec<LimitCycle> = Vec::new();
    // designed (injected) cycles first, so a neighbouring grid orbit is not taken for one
    for r in partition.injected_records().iter().chain(partition.grid_records()) {
        let OrbitClassLabel::Per { period } = r.label else {
            continue;
        };
        if out.iter().any(|c| within_one_cell(&c.cells, &r.closure)) {
            continue;
        }
        if !targets.iter().any(|t| within_one_cell(t, &r.closure)) {
            continue;
        }
        let boundary_of_int_p = r.closure.is_subset(&near_boundary) && !r.closure.intersects(&int_p);
        out.push(LimitCycle { cells: r.closure.clone(), period, witness: r.seed, boundary_of_int_p });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::build_blowup;
    use crate::geometry::wrap;

    const PHI: f64 = 0.618_033_988_749_894_8;

    fn p(x: f64, y: f64) -> TorusPoint {
        wrap(x, y).unwrap()
    }

    fn prm() -> ClassifierParams {
        ClassifierParams::default()
    }

    #[test]
    fn raster_visits_every_crossed_cell() {
        let mut cells = Vec::new();
        raster(0.1, 0.1, 0.9, 0.1, 4, |k| cells.push(k));
        assert_eq!(cells, vec![0, 1, 2, 3]);
        let mut cells = Vec::new();
        raster(0.9, 0.1, 1.1, 0.3, 4, |k| cells.push(k));
        assert_eq!(cells, vec![3, 0, 4]);
        let mut cells = Vec::new();
        raster(0.1, 0.1, 0.1, -0.2, 4, |k| cells.push(k));
        assert_eq!(cells, vec![0, 12]);
    }

    #[test]
    fn periodic_examples() {
        let per = detect_periodic(&VectorFieldSpec::linear(1.0, 0.0), p(0.5, 0.5), &prm()).unwrap().unwrap();
        assert!((per - 1.0).abs() < 1e-8);
        let per = detect_periodic(&VectorFieldSpec::linear(2.0, 1.0), p(0.3, 0.8), &prm()).unwrap().unwrap();
        assert!((per - 1.0).abs() < 1e-8);
        assert_eq!(detect_periodic(&VectorFieldSpec::linear(1.0, PHI), p(0.3, 0.7), &prm()).unwrap(), None);
    }

    #[test]
    fn singular_examples() {
        assert!(detect_singular(&VectorFieldSpec::HamiltonianBand, p(0.7, 0.5), 1e-8).unwrap());
        assert!(!detect_singular(&VectorFieldSpec::linear(1.0, PHI), p(0.2, 0.2), 1e-8).unwrap());
        let spec = build_blowup((1.0, PHI), TorusPoint::ORIGIN, 8, 0.1).unwrap();
        let VectorFieldSpec::BlownUp { schedule, .. } = &spec else { unreachable!() };
        assert!(detect_singular(&spec, schedule.point(3), 1e-8).unwrap());
    }

    #[test]
    fn linear_limit_sets() {
        let e = estimate_limit_sets(&VectorFieldSpec::linear(1.0, PHI), p(0.3, 0.7), &prm()).unwrap();
        assert!(e.omega_cells.coverage() >= 0.99);
        assert!(!e.omega_in_sing && !e.alpha_in_sing);
        assert_eq!(
            classify_orbit(&VectorFieldSpec::linear(1.0, PHI), p(0.3, 0.7), &prm()).unwrap(),
            OrbitClassLabel::LD
        );
    }

    #[test]
    fn hamiltonian_circle() {
        let e = estimate_limit_sets(&VectorFieldSpec::HamiltonianBand, p(0.0, 0.25), &prm()).unwrap();
        let row: CellSet = CellSet::from_indices(64, (0..64).map(|i| 16 * 64 + i));
        assert_eq!(e.omega_cells, row);
        assert!(!e.omega_in_sing);
        match classify_orbit(&VectorFieldSpec::HamiltonianBand, p(0.0, 0.25), &prm()).unwrap() {
            OrbitClassLabel::Per { period } => {
                assert!((period - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-8)
            }
            l => panic!("{l:?}"),
        }
    }

    #[test]
    fn blown_orbit_segment_is_proper() {
        let spec = build_blowup((1.0, PHI), TorusPoint::ORIGIN, 8, 0.1).unwrap();
        let VectorFieldSpec::BlownUp { schedule, .. } = &spec else { unreachable!() };
        let t = 0.5 * (schedule.time(0) + schedule.time(1));
        let seed = schedule.p0.shifted(t, t * PHI);
        let e = estimate_limit_sets(&spec, seed, &prm()).unwrap();
        assert!(e.omega_in_sing && e.alpha_in_sing);
        assert_eq!(classify_orbit(&spec, seed, &prm()).unwrap(), OrbitClassLabel::P);
    }

    #[test]
    fn label_codes_round_trip() {
        for l in [
            OrbitClassLabel::Sing,
            OrbitClassLabel::Per { period: 2.0 },
            OrbitClassLabel::P,
            OrbitClassLabel::LD,
            OrbitClassLabel::ExceptionalSuspect,
        ] {
            assert_eq!(code_name(l.code()), l.name());
            let s = serde_json::to_string(&l).unwrap();
            assert_eq!(serde_json::from_str::<OrbitClassLabel>(&s).unwrap(), l);
        }
    }
}
