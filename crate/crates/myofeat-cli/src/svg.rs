//! Standalone SVG heatmap for relevance maps.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use myofeat::interpret::RelevanceMap;

/// Decades below the peak that stay visible before fading to white.
const DECADES: f64 = 4.0;
const CELL_W: usize = 6;
const CELL_H: usize = 22;
const LEFT: usize = 48;
const TOP: usize = 30;
const BOTTOM: usize = 34;
const RIGHT: usize = 12;

/// Renders the channel-by-time grid on a logarithmic color scale: the peak
/// is full red, `DECADES` orders of magnitude below it (and exact zeros)
/// are white.
pub fn save_heatmap(map: &RelevanceMap, path: &Path) -> Result<()> {
    let (rows, cols) = map.values.dim();
    let width = LEFT + cols * CELL_W + RIGHT;
    let height = TOP + rows * CELL_H + BOTTOM;
    let peak = map.values.iter().copied().fold(0.0_f64, f64::max);

    let mut s = String::with_capacity(64 * rows * cols);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    s.push_str(&format!(
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{LEFT}\" y=\"19\">relevance, window {} explained as gesture {} \
         (log scale, {DECADES} decades)</text>\n",
        map.window, map.gesture
    ));
    for r in 0..rows {
        let y = TOP + r * CELL_H;
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">ch {}</text>\n",
            LEFT - 6,
            y + CELL_H / 2 + 4,
            r + 1
        ));
        for c in 0..cols {
            let x = LEFT + c * CELL_W;
            s.push_str(&format!(
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" fill=\"{}\"/>\n",
                shade(map.values[(r, c)], peak)
            ));
        }
    }
    let axis_y = TOP + rows * CELL_H + 16;
    let mut t = 0;
    while t < cols {
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{axis_y}\" text-anchor=\"middle\">{t}</text>\n",
            LEFT + t * CELL_W + CELL_W / 2
        ));
        t += 25;
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">sample</text>\n",
        LEFT + cols * CELL_W / 2,
        axis_y + 15
    ));
    s.push_str("</svg>\n");
    fs::write(path, s).with_context(|| format!("cannot write {}", path.display()))
}

fn shade(v: f64, peak: f64) -> String {
    let t = if peak > 0.0 && v > 0.0 {
        (1.0 + (v / peak).log10() / DECADES).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 178.0),
        lerp(255.0, 24.0),
        lerp(255.0, 43.0)
    )
}
