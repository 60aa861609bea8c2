//! Static horizontal bar chart of surrogate coefficients.

use std::fmt::Write;

use tsfl_core::Explanation;

const ROW: f64 = 22.0;
const LABEL_W: f64 = 170.0;
const PLOT_W: f64 = 420.0;
const PAD: f64 = 16.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bars grow right for positive and left for negative coefficients around a
/// shared zero axis.
pub fn coefficient_chart(e: &Explanation) -> String {
    let n = e.features.len().max(1) as f64;
    let height = 2.0 * PAD + 24.0 + n * ROW;
    let width = LABEL_W + PLOT_W + 2.0 * PAD + 80.0;
    let scale = e
        .features
        .iter()
        .map(|f| f.coefficient.abs())
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let zero = PAD + LABEL_W + PLOT_W / 2.0;
    let half = PLOT_W / 2.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-weight="bold">Surrogate coefficients</text>"#,
        PAD + 8.0
    );
    let top = PAD + 24.0;
    for (i, f) in e.features.iter().enumerate() {
        let y = top + i as f64 * ROW;
        let len = f.coefficient.abs() / scale * half;
        let (x, fill) = if f.coefficient >= 0.0 {
            (zero, "#2b6cb0")
        } else {
            (zero - len, "#c53030")
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            PAD + LABEL_W - 8.0,
            y + ROW * 0.65,
            escape(&f.feature_label)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{len:.2}" height="{:.2}" fill="{fill}"/>"#,
            y + 3.0,
            ROW - 6.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{}" fill="#333">{:.4}</text>"##,
            zero + half + 8.0,
            y + ROW * 0.65,
            f.coefficient
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{zero}" y1="{top}" x2="{zero}" y2="{}" stroke="#333"/>"##,
        top + n * ROW
    );
    s.push_str("</svg>\n");
    s
}
