use torusflow::certify::{certify_all, certify_nonwandering, certify_transitive, report_from_json, report_json};
use torusflow::classify::{decompose, ClassifierParams, GridPartition};
use torusflow::presets::flow_preset;
use torusflow::report::{portrait_ppm, portrait_svg, PALETTE};
use torusflow::suite::{SuiteConfig, SuiteReport};
use torusflow::{SurfaceDescriptor, Verdict};

fn partition(name: &str, n: usize) -> GridPartition {
    decompose(&flow_preset(name).unwrap(), &ClassifierParams::with_resolution(n)).unwrap()
}

const CHEAP: [&str; 3] = ["hamiltonian-band", "rotation-half-suspension", "linear:1,0"];

#[test]
fn certificates_are_deterministic_and_round_trip() {
    for name in CHEAP {
        let a = partition(name, 16);
        let b = partition(name, 16);
        assert_eq!(a.to_json(), b.to_json());
        let ca = certify_all(&a, SurfaceDescriptor::TORUS, 0.01).unwrap();
        let cb = certify_all(&b, SurfaceDescriptor::TORUS, 0.01).unwrap();
        let text = report_json(&ca);
        assert_eq!(text, report_json(&cb));
        assert_eq!(report_from_json(&text).unwrap(), ca);
    }
}

#[test]
fn partition_json_round_trips() {
    let p = partition("hamiltonian-band", 16);
    let q = GridPartition::from_json(&p.to_json()).unwrap();
    assert_eq!(q.labels, p.labels);
    assert_eq!(q.extra_seeds, p.extra_seeds);
    assert_eq!(q.to_json(), p.to_json());
}

#[test]
fn transitive_implies_nonwandering() {
    for name in ["linear:1,phi", "hamiltonian-band", "rotation-half-suspension", "linear:1,0"] {
        let p = partition(name, 16);
        let nw = certify_nonwandering(&p, 0.01).unwrap();
        let t = certify_transitive(&p, &nw, 0.01).unwrap();
        assert_eq!(t.verdict, Verdict::Pass, "{name}: conditions disagree");
        if t.flag("C1") == Some(true) {
            assert!(nw.passed(), "{name}");
        }
    }
}

#[test]
fn rotation_half_has_all_conditions_false() {
    let p = partition("rotation-half-suspension", 16);
    let nw = certify_nonwandering(&p, 0.01).unwrap();
    let t = certify_transitive(&p, &nw, 0.01).unwrap();
    assert!(t.passed());
    for c in ["C1", "C2", "C3", "C4"] {
        assert_eq!(t.flag(c), Some(false), "{c}");
    }
}

#[test]
fn portraits_have_grid_dimensions_and_exact_palette() {
    let p = partition("hamiltonian-band", 16);
    let img = portrait_ppm(&p);
    let header = b"P6\n16 16\n255\n";
    assert_eq!(&img[..header.len()], header);
    let px = &img[header.len()..];
    assert_eq!(px.len(), 3 * 16 * 16);
    // blue field with black rows only
    for rgb in px.chunks(3) {
        assert!(rgb == PALETTE[0] || rgb == PALETTE[1], "{rgb:?}");
    }
    assert_eq!(PALETTE, [[0, 0, 0], [0, 0, 255], [255, 165, 0], [0, 128, 0], [255, 0, 0]]);
    let svg = portrait_svg(&p, true);
    assert!(svg.starts_with("<svg") && svg.contains(r#"width="16""#) && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn linear_portrait_is_uniformly_green() {
    let p = partition("linear:1,phi", 16);
    let img = portrait_ppm(&p);
    let px = &img[b"P6\n16 16\n255\n".len()..];
    assert!(px.chunks(3).all(|rgb| rgb == PALETTE[3]));
}

#[test]
fn suite_report_round_trips() {
    let report: SuiteReport = SuiteReport {
        config: SuiteConfig::default(),
        criteria: vec![torusflow::suite::CriterionResult {
            id: 9,
            name: "rotation number within 2/K".into(),
            pass: true,
            detail: [("error".to_string(), serde_json::json!(1.5e-6))].into_iter().collect(),
        }],
        passed: true,
    };
    let back: SuiteReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}
