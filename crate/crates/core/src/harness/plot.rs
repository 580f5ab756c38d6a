//! Minimal SVG line/scatter plots for sweep results. No styling ambitions,
//! just a quick visual check of the emitted CSVs.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn finite_bounds(series: &[Series<'_>]) -> Option<(f64, f64, f64, f64)> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if xs.is_empty() {
        return None;
    }
    let (xmin, xmax) = xs.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let (ymin, ymax) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let xpad = if xmax > xmin { 0.0 } else { 0.5 };
    let ypad = if ymax > ymin { 0.0 } else { 0.5 };
    Some((xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad))
}

/// Renders the series as polylines (`scatter = false`) or point clouds.
pub fn render_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    scatter: bool,
) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let Some((xmin, xmax, ymin, ymax)) = finite_bounds(series) else {
        let _ = writeln!(svg, "<text x=\"20\" y=\"40\">no finite data</text></svg>");
        return svg;
    };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin) * plot_w;
    let sy = |y: f64| MARGIN_T + (ymax - y) / (ymax - ymin) * plot_h;

    // Frame and axis labels.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        title
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        x_label
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        y_label
    );
    // Four ticks per axis.
    for k in 0..=4 {
        let xv = xmin + (xmax - xmin) * k as f64 / 4.0;
        let yv = ymin + (ymax - ymin) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{:.3}</text>",
            sx(xv),
            MARGIN_T + plot_h + 16.0,
            xv
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>",
            MARGIN_L - 6.0,
            sy(yv) + 3.0,
            yv
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if scatter {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    let _ = writeln!(
                        svg,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
                        sx(x),
                        sy(y)
                    );
                }
            }
        } else {
            let mut path = String::new();
            let mut pen_down = false;
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    let _ = write!(path, "{cmd}{:.2} {:.2} ", sx(x), sy(y));
                    pen_down = true;
                } else {
                    pen_down = false;
                }
            }
            let _ = writeln!(
                svg,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
                path.trim_end()
            );
        }
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{lx}\" y=\"{:.1}\" width=\"12\" height=\"3\" fill=\"{color}\"/>",
            ly - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{ly}\" font-size=\"11\">{}</text>",
            lx + 18.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}
