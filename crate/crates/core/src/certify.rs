//! Grid-scale certificates for the characterisation theorems of surface flows.
//!
//! Every certificate is a pure function of a [`GridPartition`] with seed
//! records, and carries its scope `(n, T)` and numeric evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classify::{codes, limit_cycles, quasi_minimal_sets, GridPartition, OrbitClassLabel};
use crate::error::{Error, Result};
use crate::geometry::{connected_components, is_coconnected, CellSet, SurfaceDescriptor};

/// Default coverage slack for density predicates.
pub const DELTA_COVER: f64 = 0.01;
/// Coverage required of dilated P cells and of LD cells for rare species.
pub const RARE_SPECIES_COVER: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    fn of(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
}

/// Named predicate, verdict and evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub verdict: Verdict,
    pub evidence: BTreeMap<String, Value>,
    pub scope: Scope,
    /// The statement being checked.
    pub anchor: String,
}

impl Certificate {
    fn new(name: &str, anchor: &str, partition: &GridPartition) -> Certificate {
        Certificate {
            name: name.into(),
            verdict: Verdict::Inconclusive,
            evidence: BTreeMap::new(),
            scope: Scope { n: partition.resolution, t: partition.horizon },
            anchor: anchor.into(),
        }
    }

    fn with(mut self, key: &str, v: impl Into<Value>) -> Certificate {
        self.evidence.insert(key.into(), v.into());
        self
    }

    fn verdict(mut self, v: Verdict) -> Certificate {
        self.verdict = v;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }

    /// Evidence entry as a number.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.evidence.get(key).and_then(Value::as_f64)
    }

    /// Evidence entry as a flag.
    pub fn flag(&self, key: &str) -> Option<bool> {
        self.evidence.get(key).and_then(Value::as_bool)
    }
}

fn need_records(partition: &GridPartition) -> Result<()> {
    if partition.records.len() < partition.resolution * partition.resolution {
        return Err(Error::InvalidArgument("certificates need a partition with seed records".into()));
    }
    Ok(())
}

fn frac(k: usize, total: usize) -> f64 {
    k as f64 / total as f64
}

/// Dilated LD and Per cells together with Sing cells cover the grid up to `delta_cover`.
pub fn certify_nonwandering(partition: &GridPartition, delta_cover: f64) -> Result<Certificate> {
    need_records(partition)?;
    let total = partition.labels.len();
    let cover =
        partition.cells_labelled(&[codes::LD, codes::PER]).dilate().union(&partition.cells_labelled(&[codes::SING]));
    let uncovered = frac(total - cover.len(), total);
    let returning = partition
        .grid_records()
        .iter()
        .filter(|r| {
            let own = r.cell();
            matches!(r.label, OrbitClassLabel::Sing | OrbitClassLabel::Per { .. })
                || r.limits.omega_cells.contains(own)
                || r.limits.alpha_cells.contains(own)
        })
        .count();
    Ok(Certificate::new("nonwandering", "non-wandering iff closure(LD u Per) u Sing is the whole surface", partition)
        .with("uncovered_fraction", uncovered)
        .with("uncovered_cells", total - cover.len())
        .with("returning_fraction", frac(returning, partition.grid_records().len()))
        .with("delta_cover", delta_cover)
        .verdict(Verdict::of(uncovered <= delta_cover)))
}

/// Non-wandering flows carry no exceptional suspects.
pub fn certify_no_exceptional(partition: &GridPartition, nw: &Certificate) -> Result<Certificate> {
    need_records(partition)?;
    let suspects: Vec<Value> =
        partition.seeds_labelled(codes::SUSPECT).map(|r| json!([r.seed.x(), r.seed.y()])).collect();
    let c = Certificate::new("no_exceptional", "a non-wandering flow has no exceptional orbits", partition)
        .with("nonwandering", nw.passed())
        .with("suspect_count", suspects.len())
        .with("suspects", suspects.clone());
    Ok(c.verdict(Verdict::of(!nw.passed() || suspects.is_empty())))
}

/// Per cells away from Sing seeds and injected seeds have all neighbours Per.
pub fn certify_per_open(partition: &GridPartition, nw: &Certificate) -> Result<Certificate> {
    need_records(partition)?;
    let c = Certificate::new("per_open", "Per(v) is open", partition);
    if !nw.passed() {
        return Ok(c.with("reason", "flow not certified non-wandering"));
    }
    let n = partition.resolution;
    let per = partition.cells_labelled(&[codes::PER]);
    let sing_seeds = CellSet::from_indices(
        n,
        partition.injected_records().iter().filter(|r| r.label == OrbitClassLabel::Sing).map(|r| r.cell()),
    );
    let near_sing = sing_seeds.dilate();
    let near_extra = CellSet::from_indices(n, partition.injected_records().iter().map(|r| r.cell())).dilate();
    let violations = per
        .iter()
        .filter(|&k| !near_sing.contains(k) && !near_extra.contains(k))
        .filter(|&k| crate::geometry::neighbours(k, n).iter().any(|&m| !per.contains(m)))
        .count();
    Ok(c.with("per_cells", per.len()).with("violations", violations).verdict(Verdict::of(violations == 0)))
}

/// Seeds labelled P or Sing are exactly those with both limit sets in Sing.
pub fn certify_p_characterization(partition: &GridPartition, nw: &Certificate) -> Result<Certificate> {
    need_records(partition)?;
    let c = Certificate::new("p_characterization", "P u Sing = {x : omega(x) u alpha(x) in Sing}", partition);
    if !nw.passed() {
        return Ok(c.with("reason", "flow not certified non-wandering"));
    }
    let mut labelled_not_trapped = 0usize;
    let mut trapped_not_labelled = 0usize;
    let mut checked = 0usize;
    for r in &partition.records {
        checked += 1;
        let labelled = matches!(r.label, OrbitClassLabel::P | OrbitClassLabel::Sing);
        let trapped = r.limits.omega_in_sing && r.limits.alpha_in_sing;
        match (labelled, trapped) {
            (true, false) => labelled_not_trapped += 1,
            (false, true) => trapped_not_labelled += 1,
            _ => {}
        }
    }
    let p_or_sing = partition.records.iter().filter(|r| matches!(r.label, OrbitClassLabel::P | OrbitClassLabel::Sing));
    Ok(c.with("seeds_checked", checked)
        .with("p_or_sing_seeds", p_or_sing.count())
        .with("labelled_but_not_trapped", labelled_not_trapped)
        .with("trapped_but_not_labelled", trapped_not_labelled)
        .verdict(Verdict::of(labelled_not_trapped + trapped_not_labelled == 0)))
}

/// The three grid conditions of the transitivity characterisation agree.
pub fn certify_transitive(partition: &GridPartition, nw: &Certificate, delta_cover: f64) -> Result<Certificate> {
    need_records(partition)?;
    let total = partition.labels.len();
    let best = partition.records.iter().map(|r| r.closure.len()).max().unwrap_or(0);
    let c1 = frac(best, total) >= 1.0 - delta_cover;
    let p_sing = partition.cells_labelled(&[codes::P, codes::SING]);
    let coconnected = is_coconnected(&p_sing);
    let per_sing_interior = partition.cells_labelled(&[codes::PER, codes::SING]).has_interior();
    let interior = |code: u8| partition.cells_labelled(&[code]).has_interior();
    let (sing_int, per_int, p_int) = (interior(codes::SING), interior(codes::PER), interior(codes::P));
    let c2 = nw.passed() && coconnected && !per_sing_interior;
    let c4 = coconnected && !sing_int && !per_int && !p_int;
    let mut disagree = Vec::new();
    if c1 != c2 {
        disagree.push("C1/C2");
    }
    if c1 != c4 {
        disagree.push("C1/C4");
    }
    if c2 != c4 {
        disagree.push("C2/C4");
    }
    // a transitive flow has all its locally dense orbits dense
    let ld_dense = partition.seeds_labelled(codes::LD).all(|r| frac(r.closure.len(), total) >= 1.0 - delta_cover);
    Ok(Certificate::new("transitive", "transitivity characterisation: C1 <=> C2 <=> C3 <=> C4", partition)
        .with("C1", c1)
        .with("C2", c2)
        .with("C3", c2)
        .with("C3_note", "C3 equals C2 at grid scale")
        .with("C4", c4)
        .with("best_closure_fraction", frac(best, total))
        .with("p_sing_coconnected", coconnected)
        .with("trapped_set_coconnected", coconnected)
        .with("interior_per_sing", per_sing_interior)
        .with("interior_sing", sing_int)
        .with("interior_per", per_int)
        .with("interior_p", p_int)
        .with("ld_orbits_dense", ld_dense)
        .with("disagreements", disagree.clone())
        .verdict(Verdict::of(disagree.is_empty())))
}

/// Exceptional suspects are away from the other closures and inside closure(P).
pub fn certify_separation(partition: &GridPartition) -> Result<Certificate> {
    need_records(partition)?;
    let c =
        Certificate::new("separation", "closure(Sing u Per u LD) misses E, and E lies in int closure(P)", partition);
    let n = partition.resolution;
    let suspects = partition.cells_labelled(&[codes::SUSPECT]);
    if suspects.is_empty() {
        return Ok(c.with("reason", "no exceptional suspects"));
    }
    let mut others = CellSet::new(n);
    for r in partition
        .records
        .iter()
        .filter(|r| !matches!(r.label, OrbitClassLabel::P | OrbitClassLabel::ExceptionalSuspect))
    {
        others.union_with(&r.closure);
    }
    let touching = suspects.intersection(&others.dilate()).len();
    let p_interior = partition.cells_labelled(&[codes::P]).dilate().interior();
    let outside = suspects.difference(&p_interior).len();
    Ok(c.with("suspect_cells", suspects.len())
        .with("suspects_near_other_closures", touching)
        .with("suspects_outside_int_closure_p", outside)
        .verdict(Verdict::of(touching == 0 && outside == 0)))
}

/// The number of quasi-minimal sets does not exceed the genus.
pub fn maier_bound_check(partition: &GridPartition, surface: SurfaceDescriptor) -> Result<Certificate> {
    need_records(partition)?;
    if !surface.orientable {
        return Err(Error::Unsupported("quasi-minimal bound for non-orientable surfaces".into()));
    }
    let count = quasi_minimal_sets(partition).len();
    Ok(Certificate::new("maier_bound", "at most g quasi-minimal sets on an orientable surface of genus g", partition)
        .with("quasi_minimal_sets", count)
        .with("genus", surface.genus)
        .verdict(Verdict::of(count <= surface.genus as usize)))
}

/// Euler characteristic of the union of closed grid squares on the torus.
pub fn euler_characteristic(s: &CellSet) -> i64 {
    let n = s.resolution();
    let mut verts = CellSet::new(n);
    let mut h_edges = CellSet::new(n);
    let mut v_edges = CellSet::new(n);
    for k in s.iter() {
        let (i, j) = (k % n, k / n);
        let (i1, j1) = ((i + 1) % n, (j + 1) % n);
        // vertex (i, j) is the lower-left corner of cell (i, j)
        for v in [j * n + i, j * n + i1, j1 * n + i, j1 * n + i1] {
            verts.insert(v);
        }
        // horizontal edge (i, j) is the bottom side of cell (i, j)
        h_edges.insert(j * n + i);
        h_edges.insert(j1 * n + i);
        // vertical edge (i, j) is the left side of cell (i, j)
        v_edges.insert(j * n + i);
        v_edges.insert(j * n + i1);
    }
    verts.len() as i64 - (h_edges.len() + v_edges.len()) as i64 + s.len() as i64
}

/// Every component of Per cells is the whole surface or an annulus.
pub fn per_component_shape(partition: &GridPartition, nw: &Certificate, delta_cover: f64) -> Result<Certificate> {
    need_records(partition)?;
    let c = Certificate::new("per_component_shape", "each Per component is the surface or an open annulus", partition);
    if !nw.passed() {
        return Ok(c.with("reason", "flow not certified non-wandering"));
    }
    let total = partition.labels.len();
    let per = partition.cells_labelled(&[codes::PER]);
    let mut rows = Vec::new();
    let mut ok = true;
    let mut annuli = 0usize;
    for comp in connected_components(&per) {
        let chi = euler_characteristic(&comp);
        let whole = frac(comp.len(), total) >= 1.0 - delta_cover;
        let annulus = !whole && chi == 0 && comp.len() < total;
        let shape = if whole {
            "surface"
        } else if annulus {
            annuli += 1;
            "annulus"
        } else {
            ok = false;
            "other"
        };
        rows.push(json!({ "cells": comp.len(), "chi": chi, "shape": shape }));
    }
    Ok(c.with("components", rows.len())
        .with("annuli", annuli)
        .with("per_components", rows)
        .with("mobius_possible", false)
        .verdict(Verdict::of(ok)))
}

/// Dilated P cells and LD cells are both dense at grid scale, on a
/// non-wandering flow with P seeds.
pub fn certify_rare_species(partition: &GridPartition, nw: &Certificate) -> Result<Certificate> {
    need_records(partition)?;
    let c = Certificate::new("rare_species", "closure(P) = closure(LD) = T^2", partition);
    if !nw.passed() {
        return Ok(c.with("reason", "flow not certified non-wandering"));
    }
    let n = partition.resolution;
    let mut p_cells = CellSet::new(n);
    let mut p_seeds = 0usize;
    for r in partition.seeds_labelled(codes::P) {
        p_cells.union_with(&r.closure);
        p_seeds += 1;
    }
    if p_seeds == 0 {
        return Ok(c.with("reason", "no P seeds"));
    }
    let p_cover = p_cells.dilate().coverage();
    let ld_cover = partition.cells_labelled(&[codes::LD]).coverage();
    Ok(c.with("p_seeds", p_seeds)
        .with("dilated_p_coverage", p_cover)
        .with("ld_coverage", ld_cover)
        .with("threshold", RARE_SPECIES_COVER)
        .verdict(Verdict::of(p_cover >= RARE_SPECIES_COVER && ld_cover >= RARE_SPECIES_COVER)))
}

/// Limit cycles lie on the boundary of the interior of P.
pub fn certify_limit_cycles(partition: &GridPartition) -> Result<Certificate> {
    need_records(partition)?;
    let c = Certificate::new("limit_cycle_boundary", "each limit cycle lies in the boundary of int P", partition);
    let cycles = limit_cycles(partition);
    if cycles.is_empty() {
        return Ok(c.with("limit_cycles", 0).with("reason", "no limit cycles"));
    }
    let on_boundary = cycles.iter().filter(|l| l.boundary_of_int_p).count();
    Ok(c.with("limit_cycles", cycles.len())
        .with("on_boundary", on_boundary)
        .verdict(Verdict::of(on_boundary == cycles.len())))
}

/// Every certificate, in a fixed order.
pub fn certify_all(
    partition: &GridPartition,
    surface: SurfaceDescriptor,
    delta_cover: f64,
) -> Result<Vec<Certificate>> {
    let nw = certify_nonwandering(partition, delta_cover)?;
    Ok(vec![
        certify_no_exceptional(partition, &nw)?,
        certify_per_open(partition, &nw)?,
        certify_p_characterization(partition, &nw)?,
        certify_transitive(partition, &nw, delta_cover)?,
        certify_separation(partition)?,
        maier_bound_check(partition, surface)?,
        per_component_shape(partition, &nw, delta_cover)?,
        certify_rare_species(partition, &nw)?,
        certify_limit_cycles(partition)?,
        nw,
    ])
}

pub fn report_json(certs: &[Certificate]) -> String {
    serde_json::to_string_pretty(certs).expect("certificates serialise")
}

pub fn report_from_json(text: &str) -> Result<Vec<Certificate>> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_characteristic_of_simple_sets() {
        let n = 8;
        let single = CellSet::from_indices(n, [9]);
        assert_eq!(euler_characteristic(&single), 1);
        let row = CellSet::from_indices(n, 0..n);
        assert_eq!(euler_characteristic(&row), 0);
        let band = CellSet::from_indices(n, 0..3 * n);
        assert_eq!(euler_characteristic(&band), 0);
        assert_eq!(euler_characteristic(&CellSet::full(n)), 0);
        // a ring of 8 cells around a hole
        let ring = CellSet::from_indices(n, [0, 1, 2, 8, 10, 16, 17, 18]);
        assert_eq!(euler_characteristic(&ring), 0);
        let block = CellSet::from_indices(n, [0, 1, 8, 9]);
        assert_eq!(euler_characteristic(&block), 1);
    }

    #[test]
    fn verdict_serialises_lowercase() {
        assert_eq!(serde_json::to_string(&Verdict::Inconclusive).unwrap(), "\"inconclusive\"");
    }
}
