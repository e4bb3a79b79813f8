//! Minimal SVG rendering of accuracy curves. X axis is the budget in
//! /255 units, Y axis accuracy in [0,1].

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 140.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

pub fn render_curves(curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let x_max = curves
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .fold(1.0f64, f64::max);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - y) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));

    for i in 0..=5 {
        let y = i as f64 / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            sx(0.0),
            sy(y),
            sx(x_max),
            sy(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y:.1}</text>\n",
            MARGIN_L - 6.0,
            sy(y) + 4.0
        ));
    }
    let x_ticks = 6usize;
    for i in 0..=x_ticks {
        let x = x_max * i as f64 / x_ticks as f64;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x:.0}</text>\n",
            sx(x),
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">perturbation budget (/255)</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">\
         accuracy</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    for (ci, (label, pts)) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        let ly = MARGIN_T + 16.0 + 18.0 * ci as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\">{}</text>\n",
            lx + 26.0,
            escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
