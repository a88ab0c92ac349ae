//! Phase portraits of grid partitions: binary pixmaps and vector graphics.

use std::fmt::Write;

use crate::classify::{code_name, GridPartition};

/// Colour of each label code: Sing, Per, P, LD, ExceptionalSuspect.
pub const PALETTE: [[u8; 3]; 5] =
    [[0x00, 0x00, 0x00], [0x00, 0x00, 0xFF], [0xFF, 0xA5, 0x00], [0x00, 0x80, 0x00], [0xFF, 0x00, 0x00]];

fn hex(c: [u8; 3]) -> String {
    format!("#{:02X}{:02X}{:02X}", c[0], c[1], c[2])
}

/// Portable pixmap (`P6`), one pixel per cell, `y` growing upwards.
pub fn portrait_ppm(partition: &GridPartition) -> Vec<u8> {
    let n = partition.resolution;
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    out.reserve(3 * n * n);
    for row in 0..n {
        let j = n - 1 - row;
        for i in 0..n {
            out.extend_from_slice(&PALETTE[partition.labels[j * n + i] as usize]);
        }
    }
    out
}

/// SVG of the same image; injected seeds are drawn as dots when `overlay` is set.
pub fn portrait_svg(partition: &GridPartition, overlay: bool) -> String {
    let n = partition.resolution;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{n}" height="{n}" viewBox="0 0 {n} {n}" shape-rendering="crispEdges">"#
    );
    for row in 0..n {
        let j = n - 1 - row;
        let mut i = 0;
        // one rectangle per run of equal labels
        while i < n {
            let code = partition.labels[j * n + i];
            let start = i;
            while i < n && partition.labels[j * n + i] == code {
                i += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{start}" y="{row}" width="{}" height="1" fill="{}"><title>{}</title></rect>"#,
                i - start,
                hex(PALETTE[code as usize]),
                code_name(code)
            );
        }
    }
    if overlay {
        let nf = n as f64;
        for e in &partition.extra_seeds {
            let (cx, cy) = (e.point.x() * nf, nf - e.point.y() * nf);
            let _ = writeln!(
                s,
                r#"<circle cx="{cx:.4}" cy="{cy:.4}" r="0.35" fill="{}" stroke="white" stroke-width="0.08"/>"#,
                hex(PALETTE[e.label.min(4) as usize])
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierParams;

    fn partition(n: usize, labels: Vec<u8>) -> GridPartition {
        GridPartition {
            resolution: n,
            horizon: 1.0,
            labels,
            extra_seeds: Vec::new(),
            diagnostics: Vec::new(),
            params: ClassifierParams::with_resolution(n),
            records: Vec::new(),
        }
    }

    #[test]
    fn ppm_layout() {
        // bottom row Sing, top row LD
        let p = partition(2, vec![0, 0, 3, 3]);
        let img = portrait_ppm(&p);
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&img[..header.len()], header);
        let px = &img[header.len()..];
        assert_eq!(px.len(), 12);
        assert_eq!(&px[..3], &[0x00, 0x80, 0x00]);
        assert_eq!(&px[6..9], &[0, 0, 0]);
    }

    #[test]
    fn svg_runs() {
        let p = partition(2, vec![1, 1, 2, 4]);
        let svg = portrait_svg(&p, true);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("#0000FF") && svg.contains("#FFA500") && svg.contains("#FF0000"));
    }
}
