//! Metric-versus-window-size curves, one line per method.
//!
//! Window sizes are placed at evenly spaced x positions in ascending order
//! and the y axis always spans [0, 1]. Cells without a mean are left out of
//! their line. Output depends only on the rows, so re-plotting a saved
//! report reproduces the same bytes.

use std::collections::BTreeSet;

use image::codecs::png::PngEncoder;
use image::{ImageEncoder, ExtendedColorType, Rgb, RgbImage};

use super::{ReportRow, Task};
use crate::error::{Error, Result};
use crate::proactive::ExpanderChoice;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 400;
const MARGIN: f64 = 40.0;

fn colour(method: ExpanderChoice) -> [u8; 3] {
    match method {
        ExpanderChoice::Baseline => [90, 90, 90],
        ExpanderChoice::LmBeam => [200, 60, 40],
        ExpanderChoice::IntentLinrel => [40, 90, 200],
    }
}

/// Pixel coordinates of every plotted point, grouped by method in
/// `ExpanderChoice::ALL` order.
fn layout(rows: &[ReportRow]) -> Vec<(ExpanderChoice, Vec<(usize, f64, f64)>)> {
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect::<BTreeSet<_>>().into_iter().collect();
    let span_x = f64::from(WIDTH) - 2.0 * MARGIN;
    let span_y = f64::from(HEIGHT) - 2.0 * MARGIN;
    let x_of = |n: usize| {
        let i = ns.iter().position(|&m| m == n).unwrap_or(0);
        if ns.len() < 2 {
            MARGIN + span_x / 2.0
        } else {
            MARGIN + span_x * i as f64 / (ns.len() - 1) as f64
        }
    };
    ExpanderChoice::ALL
        .iter()
        .map(|&m| {
            let mut pts: Vec<(usize, f64, f64)> = rows
                .iter()
                .filter(|r| r.method == m)
                .filter_map(|r| r.mean.map(|y| (r.n, x_of(r.n), MARGIN + span_y * (1.0 - y.clamp(0.0, 1.0)))))
                .collect();
            pts.sort_by_key(|p| p.0);
            (m, pts)
        })
        .filter(|(_, p)| !p.is_empty())
        .collect()
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && x < i64::from(WIDTH) && y < i64::from(HEIGHT) {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = ((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64);
        put(img, x, y, c);
        put(img, x, y + 1, c);
    }
}

pub fn render_png(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let (lo, hi_x, hi_y) = (MARGIN, f64::from(WIDTH) - MARGIN, f64::from(HEIGHT) - MARGIN);
    let axis = [0, 0, 0];
    line(&mut img, (lo, hi_y), (hi_x, hi_y), axis);
    line(&mut img, (lo, lo), (lo, hi_y), axis);
    for tick in 0..=4 {
        let y = lo + (hi_y - lo) * f64::from(tick) / 4.0;
        line(&mut img, (lo - 5.0, y), (lo, y), axis);
    }
    for (method, pts) in layout(rows) {
        let c = colour(method);
        for w in pts.windows(2) {
            line(&mut img, (w[0].1, w[0].2), (w[1].1, w[1].2), c);
        }
        for &(_, x, y) in &pts {
            for dx in -3..=3 {
                for dy in -3..=3 {
                    put(&mut img, x.round() as i64 + dx, y.round() as i64 + dy, c);
                }
            }
        }
    }
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw(), WIDTH, HEIGHT, ExtendedColorType::Rgb8)
        .map_err(|e| Error::NumericFailure(format!("png encoding failed: {e}")))?;
    Ok(out)
}

pub fn render_svg(task: Task, rows: &[ReportRow]) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"20\" font-size=\"14\">{task}</text>\n"
    );
    let (hi_x, hi_y) = (f64::from(WIDTH) - MARGIN, f64::from(HEIGHT) - MARGIN);
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"black\" points=\"{MARGIN},{MARGIN} {MARGIN},{hi_y} {hi_x},{hi_y}\"/>\n"
    ));
    for tick in 0..=4 {
        let v = 1.0 - f64::from(tick) / 4.0;
        let y = MARGIN + (hi_y - MARGIN) * f64::from(tick) / 4.0;
        s.push_str(&format!("<text x=\"4\" y=\"{:.1}\" font-size=\"10\">{v:.2}</text>\n", y + 3.0));
    }
    let layout = layout(rows);
    let mut labelled = BTreeSet::new();
    for (method, pts) in &layout {
        let [r, g, b] = colour(*method);
        let points: Vec<String> = pts.iter().map(|(_, x, y)| format!("{x:.1},{y:.1}")).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"rgb({r},{g},{b})\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        for (n, x, y) in pts {
            s.push_str(&format!("<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"rgb({r},{g},{b})\"/>\n"));
            if labelled.insert(*n) {
                s.push_str(&format!(
                    "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{n}</text>\n",
                    hi_y + 15.0
                ));
            }
        }
    }
    for (i, (method, _)) in layout.iter().enumerate() {
        let [r, g, b] = colour(*method);
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"rgb({r},{g},{b})\">{method}</text>\n",
            hi_x - 60.0,
            MARGIN + 15.0 * i as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}
