//! Minimal deterministic SVG line plots.
//!
//! Every coordinate is formatted with a fixed precision, so re-running
//! an experiment reproduces plot files byte for byte.

/// One polyline with a label and a stroke color.
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub const PALETTE: &[&str] = &["#1f6f8b", "#c2571a", "#3a7d44", "#7a4fa3"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the series into one SVG document. Axis ranges are the joint
/// bounding box of the data, padded by 5% per side.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            lo.0 = lo.0.min(x);
            lo.1 = lo.1.min(y);
            hi.0 = hi.0.max(x);
            hi.1 = hi.1.max(y);
        }
    }
    if !lo.0.is_finite() {
        lo = (0.0, 0.0);
        hi = (1.0, 1.0);
    }
    let pad = |l: f64, h: f64| {
        let span = if h > l { h - l } else { 1.0 };
        (l - 0.05 * span, h + 0.05 * span)
    };
    let (x0, x1) = pad(lo.0, hi.0);
    let (y0, y1) = pad(lo.1, hi.1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"15\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = fmt(MARGIN),
        b = fmt(HEIGHT - MARGIN),
        r = fmt(WIDTH - MARGIN)
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = fmt(MARGIN),
        t = fmt(MARGIN),
        b = fmt(HEIGHT - MARGIN)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">{}</text>\n",
        fmt(WIDTH / 2.0),
        fmt(HEIGHT - 16.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0),
        escape(y_label)
    ));
    // Axis extremes, numeric.
    for (v, x, y, anchor) in [
        (x0, sx(x0), HEIGHT - MARGIN + 18.0, "middle"),
        (x1, sx(x1), HEIGHT - MARGIN + 18.0, "middle"),
        (y0, MARGIN - 6.0, sy(y0) + 4.0, "end"),
        (y1, MARGIN - 6.0, sy(y1) + 4.0, "end"),
    ] {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"monospace\" font-size=\"11\">{:.3e}</text>\n",
            fmt(x),
            fmt(y),
            v
        ));
    }
    for (idx, s) in series.iter().enumerate() {
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.color,
            coords.join(" ")
        ));
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n",
                fmt(sx(x)),
                fmt(sy(y)),
                s.color
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            fmt(WIDTH - MARGIN - 150.0),
            fmt(MARGIN + 16.0 * (idx as f64 + 1.0)),
            s.color,
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
