//! Minimal deterministic SVG rendering of prevalence series.

use std::fmt::Write;

use crate::study::PrevalenceSeries;

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One panel; each series drawn as a posterior-mean line over its 95% band.
pub fn series_svg(title: &str, series: &[PrevalenceSeries]) -> String {
    let all: Vec<_> = series.iter().flat_map(|s| s.buckets.iter()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="20" font-size="14">{}</text>"#,
        escape(title)
    );
    if all.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{PAD}" y="{}">no estimated buckets</text>"#,
            H / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }
    let t_min = all.iter().map(|b| b.start.timestamp()).min().unwrap() as f64;
    let t_max = all.iter().map(|b| b.start.timestamp()).max().unwrap() as f64;
    let y_max = all
        .iter()
        .map(|b| b.ci_hi.max(b.pi_bayes))
        .fold(0.0f64, f64::max)
        .max(0.01)
        * 1.1;
    let x = |t: f64| {
        if t_max > t_min {
            PAD + (t - t_min) / (t_max - t_min) * (W - 2.0 * PAD)
        } else {
            W / 2.0
        }
    };
    let y = |v: f64| H - PAD - v / y_max * (H - 2.0 * PAD);

    let _ = writeln!(
        out,
        r##"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="#333"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="#333"/>"##,
        H - PAD,
        W - PAD
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            PAD - 4.0,
            y(v) + 4.0,
            v
        );
    }
    for (label, t) in [("first", t_min), ("last", t_max)] {
        let date = chrono::DateTime::from_timestamp(t as i64, 0)
            .map(|d| d.format("%Y-%m").to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" class="{label}">{date}</text>"#,
            x(t),
            H - PAD + 16.0
        );
    }

    for (i, s) in series.iter().enumerate() {
        if s.buckets.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let pts = |f: &dyn Fn(&crate::study::SeriesBucket) -> f64| -> Vec<String> {
            s.buckets
                .iter()
                .map(|b| format!("{:.2},{:.2}", x(b.start.timestamp() as f64), y(f(b))))
                .collect()
        };
        let mut band = pts(&|b| b.ci_hi);
        band.extend(pts(&|b| b.ci_lo).into_iter().rev());
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts(&|b| b.pi_bayes).join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{} k={}</text>"#,
            W - PAD - 140.0,
            PAD + 14.0 * i as f64,
            escape(&s.community),
            s.policy_k
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_renders() {
        let svg = series_svg("x & y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("x &amp; y"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
