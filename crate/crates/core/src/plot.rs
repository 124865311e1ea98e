//! Minimal SVG charts. Always drawn from the same rows that go into the CSV
//! files, never the other way round.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str, y: (f64, f64)) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n\
         <line x1=\"{MARGIN}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4e}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4e}</text>\n",
        W / 2.0,
        H - MARGIN,
        W - MARGIN,
        H - MARGIN,
        H - MARGIN,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0,
        MARGIN - 4.0,
        H - MARGIN,
        y.0,
        MARGIN - 4.0,
        MARGIN + 4.0,
        y.1,
    );
}

fn sx(x: f64, b: (f64, f64)) -> f64 {
    MARGIN + (x - b.0) / (b.1 - b.0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, b: (f64, f64)) -> f64 {
    H - MARGIN - (y - b.0) / (b.1 - b.0) * (H - 2.0 * MARGIN)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xb = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yb = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut out = String::new();
    header(&mut out, title, x_label, y_label, yb);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x, xb), sy(y, yb)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            W - MARGIN + 4.0 - 120.0,
            MARGIN + 16.0 * k as f64,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let yb = bounds(bars.iter().map(|b| b.1).chain([0.0]));
    let mut out = String::new();
    header(&mut out, title, "", y_label, yb);
    let slot = (W - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (k, (label, v)) in bars.iter().enumerate() {
        let x = MARGIN + slot * (k as f64 + 0.15);
        let top = sy(v.max(yb.0), yb);
        let base = sy(0f64.max(yb.0), yb);
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            top.min(base),
            slot * 0.7,
            (base - top).abs(),
            COLORS[k % COLORS.len()],
            x + slot * 0.35,
            H - MARGIN + 16.0,
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let s = line_chart(
            "t",
            "x",
            "y",
            &[Series {
                label: "a",
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)],
            }],
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 1);
        let b = bar_chart("t", "y", &[("MFRL".into(), 2.0), ("MARL".into(), 1.0)]);
        assert_eq!(b.matches("<rect").count(), 3);
    }
}
