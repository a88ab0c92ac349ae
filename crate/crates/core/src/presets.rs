//! Named flows and maps.

use std::f64::consts::PI;

use crate::circle_map::{CircleMapSpec, DenjoyWeights};
use crate::construct::{apply_x3_holonomy, build_blowup};
use crate::error::{Error, Result};
use crate::field::{FlowBox, VectorFieldSpec, SUSPENSION_WINDOW};
use crate::geometry::{TorusPoint, TorusVector};

/// The golden mean conjugate `(sqrt 5 - 1) / 2`.
pub const PHI: f64 = 0.618_033_988_749_894_8;

pub const FLOW_PRESETS: [&str; 8] = [
    "linear:1,phi",
    "hamiltonian-band",
    "limit-cycle-band",
    "blowup-phi-N8",
    "denjoy-suspension",
    "rotation-half-suspension",
    "rotation-phi-suspension",
    "x3-box-demo",
];

/// Parse a real number or one of the constants `phi`, `pi`, `sqrt2`.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = match t.to_ascii_lowercase().as_str() {
        "phi" => PHI,
        "pi" => PI,
        "sqrt2" => std::f64::consts::SQRT_2,
        _ => t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("cannot read number {t:?}")))?,
    };
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("number {t:?} is not finite")));
    }
    Ok(v)
}

/// Flow preset by name; `linear:a,b` takes parameters.
pub fn flow_preset(name: &str) -> Result<VectorFieldSpec> {
    if let Some(args) = name.strip_prefix("linear:") {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidArgument(format!("linear preset needs two numbers, got {args:?}")));
        }
        return Ok(VectorFieldSpec::linear(parse_real(parts[0])?, parse_real(parts[1])?));
    }
    match name {
        "hamiltonian-band" => Ok(VectorFieldSpec::HamiltonianBand),
        // the attracting circle runs through the centres of the first cell row at n = 64
        "limit-cycle-band" => Ok(VectorFieldSpec::LimitCycleBand { lambda: 1.0, phase: 0.5 / 64.0 }),
        "blowup-phi-N8" => build_blowup((1.0, PHI), TorusPoint::ORIGIN, 8, 0.1),
        "denjoy-suspension" => Ok(VectorFieldSpec::Suspension { map: denjoy_preset_map(), window: SUSPENSION_WINDOW }),
        "rotation-half-suspension" => {
            Ok(VectorFieldSpec::Suspension { map: CircleMapSpec::Rotation { rho: 0.5 }, window: SUSPENSION_WINDOW })
        }
        "rotation-phi-suspension" => {
            Ok(VectorFieldSpec::Suspension { map: CircleMapSpec::Rotation { rho: PHI }, window: SUSPENSION_WINDOW })
        }
        "x3-box-demo" => apply_x3_holonomy(&VectorFieldSpec::linear(1.0, 0.0), &x3_demo_box()),
        _ => Err(Error::InvalidArgument(format!("unknown preset {name:?}"))),
    }
}

/// Denjoy map of the `denjoy-suspension` preset: 15 wandering intervals of
/// length 0.065 and a geometric tail of total length 0.002. The invariant
/// Cantor set has measure 0.023 and sits in 15 arcs, each a fraction of a
/// cell wide at n = 128.
pub fn denjoy_preset_map() -> CircleMapSpec {
    CircleMapSpec::Denjoy {
        rho: PHI,
        weights: DenjoyWeights::Clustered { head: 0.065, head_count: 8, scale: 0.001, ratio: 0.5 },
        truncation: 64,
    }
}

/// Flow box of `x3-box-demo`: straight horizontal flow, transverse half
/// width of six cells at n = 64.
pub fn x3_demo_box() -> FlowBox {
    FlowBox {
        center: TorusPoint::wrap_finite(0.5, 32.5 / 64.0),
        half_length: 0.1,
        half_width: 6.0 / 64.0,
        frame: [TorusVector::new(1.0, 0.0), TorusVector::new(0.0, 1.0)],
    }
}

/// Smooth circle diffeomorphism `h^-1 o R_phi o h` with
/// `h(x) = x + b sin(2 pi x) / (2 pi)`, tabulated on `m` nodes.
pub fn monotone_conjugate_map(b: f64, m: usize) -> Result<CircleMapSpec> {
    if !(0.0..1.0).contains(&b) || m < 4 {
        return Err(Error::InvalidArgument("need 0 <= b < 1 and at least 4 nodes".into()));
    }
    let h = |x: f64| x + b * (2.0 * PI * x).sin() / (2.0 * PI);
    let h_inv = |y: f64| {
        let mut x = y;
        for _ in 0..60 {
            let f = h(x) - y;
            let d = 1.0 + b * (2.0 * PI * x).cos();
            let nx = x - f / d;
            if (nx - x).abs() < 1e-16 {
                return nx;
            }
            x = nx;
        }
        x
    };
    Ok(CircleMapSpec::tabulate(m, |x| h_inv(h(x) + PHI)))
}

/// Map preset by name.
pub fn map_preset(name: &str) -> Result<CircleMapSpec> {
    match name {
        "rotation-half" => Ok(CircleMapSpec::Rotation { rho: 0.5 }),
        "rotation-phi" => Ok(CircleMapSpec::Rotation { rho: PHI }),
        "denjoy-phi" => Ok(denjoy_preset_map()),
        "monotone-phi" => monotone_conjugate_map(0.5, 1024),
        _ => Err(Error::InvalidArgument(format!("unknown map preset {name:?}"))),
    }
}

pub const MAP_PRESETS: [&str; 4] = ["rotation-half", "rotation-phi", "denjoy-phi", "monotone-phi"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_map::rotation_number;

    #[test]
    fn all_presets_compile() {
        for name in FLOW_PRESETS {
            flow_preset(name).unwrap().compile().unwrap();
        }
        for name in MAP_PRESETS {
            map_preset(name).unwrap().compile().unwrap();
        }
        assert!(flow_preset("nope").is_err());
        assert!(flow_preset("linear:1").is_err());
        assert_eq!(flow_preset("linear:2, 1").unwrap(), VectorFieldSpec::linear(2.0, 1.0));
    }

    #[test]
    fn monotone_preset_rotates_by_phi() {
        let r = rotation_number(&map_preset("monotone-phi").unwrap(), 100_000).unwrap();
        assert!((r.rho - PHI).abs() < 1e-4);
    }

    #[test]
    fn preset_json_round_trip() {
        for name in FLOW_PRESETS {
            let spec = flow_preset(name).unwrap();
            assert_eq!(VectorFieldSpec::from_json(&spec.to_json()).unwrap(), spec);
        }
    }
}
