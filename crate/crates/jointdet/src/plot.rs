//! Miss rate against FPPI on log-log axes, as an SVG document.

use std::fmt::Write;

use jointdet_core::eval::CurvePoint;

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 16.0;
const BOTTOM: f64 = 48.0;
/// log10 range of the FPPI axis.
const X_RANGE: (f64, f64) = (-3.0, 1.0);
const Y_MIN: f64 = 0.05;
const Y_TICKS: [f64; 9] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.64, 0.8, 1.0];
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub name: &'a str,
    pub mr2: f64,
    pub curve: &'a [CurvePoint],
}

/// Legend label: the series name followed by its MR⁻² in percent.
pub fn legend_label(name: &str, mr2: f64) -> String {
    format!("{name} {:.2}%", mr2 * 100.0)
}

fn px(fppi: f64) -> f64 {
    let lx = fppi.max(10f64.powf(X_RANGE.0)).log10().min(X_RANGE.1);
    LEFT + (lx - X_RANGE.0) / (X_RANGE.1 - X_RANGE.0) * (WIDTH - LEFT - RIGHT)
}

fn py(miss_rate: f64) -> f64 {
    let ly = miss_rate.clamp(Y_MIN, 1.0).log10();
    let lo = Y_MIN.log10();
    TOP + (0.0 - ly) / (0.0 - lo) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders every series as a step curve, legend sorted by ascending MR⁻².
pub fn render_svg(series: &[Series]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);

    for e in X_RANGE.0 as i32..=X_RANGE.1 as i32 {
        let x = px(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#, y1 + 16.0);
    }
    for t in Y_TICKS {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, t);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">false positives per image</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">miss rate</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series[a].mr2.total_cmp(&series[b].mr2).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        let sr = &series[i];
        let color = COLORS[i % COLORS.len()];
        // Starts at miss rate 1 before the first detection, then steps right
        // (more false positives) or down (more hits).
        let mut d = format!("M{:.2},{:.2}", px(0.0), py(1.0));
        let mut last_mr = 1.0;
        for c in sr.curve {
            let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", px(c.fppi), py(last_mr), px(c.fppi), py(c.miss_rate));
            last_mr = c.miss_rate;
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#);

        let ly = y0 + 14.0 + rank as f64 * 16.0;
        let lx = x1 - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ =
            writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 24.0, escape(&legend_label(sr.name, sr.mr2)));
    }
    s.push_str("</svg>\n");
    s
}
