//! Static decay-curve images from a diagnostics CSV.
//!
//! Deliberately minimal: polylines on a log-scaled axis with a built-in 5x7
//! digit font, no styling knobs. Output is deterministic byte-for-byte.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const WIDTH: u32 = 900;
const HEIGHT: u32 = 560;
const MARGIN_L: u32 = 70;
const MARGIN_R: u32 = 20;
const MARGIN_T: u32 = 20;
const MARGIN_B: u32 = 40;

const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GRAY: Rgb<u8> = Rgb([200, 200, 200]);
const BLUE: Rgb<u8> = Rgb([31, 119, 180]);
const ORANGE: Rgb<u8> = Rgb([255, 127, 14]);
const GREEN: Rgb<u8> = Rgb([44, 160, 44]);
const RED: Rgb<u8> = Rgb([214, 39, 40]);

/// Parsed diagnostics series.
pub struct CsvSeries {
    pub t: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

pub fn read_csv(path: &Path) -> Result<CsvSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?
        .split(',')
        .collect();
    if header.first() != Some(&"t") {
        return Err(Error::Config("first CSV column must be t".into()));
    }
    let mut t = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> =
        header[1..].iter().map(|h| (h.to_string(), Vec::new())).collect();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Config(format!("CSV row {} has {} cells, expected {}", lineno + 2, cells.len(), header.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}': {e}")));
        t.push(parse(cells[0])?);
        for (k, cell) in cells[1..].iter().enumerate() {
            columns[k].1.push(parse(cell)?);
        }
    }
    Ok(CsvSeries { t, columns })
}

impl CsvSeries {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Optional envelope parameters pulled from a run summary.
pub struct EnvelopeSpec {
    pub lambda: f64,
    pub beta: f64,
    pub w0_max: f64,
}

impl EnvelopeSpec {
    fn bound(&self, t: f64) -> f64 {
        if self.beta == 1.0 {
            self.w0_max * (-self.lambda * t).exp()
        } else {
            (self.w0_max.powf(1.0 - self.beta) + self.lambda * (self.beta - 1.0) * t)
                .powf(1.0 / (1.0 - self.beta))
        }
    }
}

/// Extract the pieces of a summary JSON the plots care about.
pub fn envelope_from_summary(path: &Path) -> Result<Option<EnvelopeSpec>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad summary JSON: {e}")))?;
    let p = &value["prediction"];
    match (p["lambda"].as_f64(), p["beta"].as_f64(), p["w0_max"].as_f64()) {
        (Some(lambda), Some(beta), Some(w0_max)) => Ok(Some(EnvelopeSpec { lambda, beta, w0_max })),
        _ => Ok(None),
    }
}

/// Render the decay plot (max w, steady distance, envelope; log10 y) and the
/// balance plot (mass and energy; linear y). Returns the written paths.
pub fn render_plots(
    csv: &CsvSeries,
    envelope: Option<&EnvelopeSpec>,
    out_dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let w_max = csv.column("w_max").ok_or_else(|| Error::Config("missing w_max column".into()))?;
    let u_dist = csv.column("u_dist_l2").ok_or_else(|| Error::Config("missing u_dist_l2 column".into()))?;

    let mut series: Vec<(Rgb<u8>, Vec<(f64, f64)>)> = Vec::new();
    let log_clip = |y: f64| if y > 0.0 { Some(y.log10().max(-18.0)) } else { None };
    let pick = |values: &[f64]| -> Vec<(f64, f64)> {
        csv.t
            .iter()
            .zip(values)
            .filter_map(|(&t, &y)| log_clip(y).map(|ly| (t, ly)))
            .collect()
    };
    series.push((BLUE, pick(w_max)));
    series.push((GREEN, pick(u_dist)));
    if let Some(env) = envelope {
        let env_pts: Vec<(f64, f64)> = csv
            .t
            .iter()
            .filter_map(|&t| log_clip(env.bound(t)).map(|ly| (t, ly)))
            .collect();
        series.push((RED, env_pts));
    }
    let decay = out_dir.join("decay.png");
    draw_chart(&decay, &series)?;
    written.push(decay);

    let mass = csv.column("mass").ok_or_else(|| Error::Config("missing mass column".into()))?;
    let energy = csv.column("F").ok_or_else(|| Error::Config("missing F column".into()))?;
    let balance_series = vec![
        (BLUE, csv.t.iter().zip(mass).map(|(&t, &y)| (t, y)).collect::<Vec<_>>()),
        (ORANGE, csv.t.iter().zip(energy).map(|(&t, &y)| (t, y)).collect::<Vec<_>>()),
    ];
    let balance = out_dir.join("balance.png");
    draw_chart(&balance, &balance_series)?;
    written.push(balance);
    Ok(written)
}

fn draw_chart(path: &Path, series: &[(Rgb<u8>, Vec<(f64, f64)>)]) -> Result<()> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    if pts.is_empty() {
        return Err(Error::Config("nothing to plot".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }

    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, WHITE);
    let plot_w = (WIDTH - MARGIN_L - MARGIN_R) as f64;
    let plot_h = (HEIGHT - MARGIN_T - MARGIN_B) as f64;
    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let px = MARGIN_L as f64 + (x - x0) / (x1 - x0) * plot_w;
        let py = MARGIN_T as f64 + (1.0 - (y - y0) / (y1 - y0)) * plot_h;
        (px.round() as i64, py.round() as i64)
    };

    // Frame and gridlines with numeric tick labels.
    for k in 0..=4 {
        let xt = x0 + (x1 - x0) * k as f64 / 4.0;
        let (px, _) = to_px(xt, y0);
        vline(&mut img, px, MARGIN_T as i64, (HEIGHT - MARGIN_B) as i64, GRAY);
        draw_text(&mut img, px - 14, (HEIGHT - MARGIN_B + 8) as i64, &short(xt), BLACK);
        let yt = y0 + (y1 - y0) * k as f64 / 4.0;
        let (_, py) = to_px(x0, yt);
        hline(&mut img, py, MARGIN_L as i64, (WIDTH - MARGIN_R) as i64, GRAY);
        draw_text(&mut img, 4, py - 3, &short(yt), BLACK);
    }
    hline(&mut img, (HEIGHT - MARGIN_B) as i64, MARGIN_L as i64, (WIDTH - MARGIN_R) as i64, BLACK);
    vline(&mut img, MARGIN_L as i64, MARGIN_T as i64, (HEIGHT - MARGIN_B) as i64, BLACK);

    for (color, s) in series {
        for pair in s.windows(2) {
            let (ax, ay) = to_px(pair[0].0, pair[0].1);
            let (bx, by) = to_px(pair[1].0, pair[1].1);
            line(&mut img, ax, ay, bx, by, *color);
        }
    }

    img.save(path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn short(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn hline(img: &mut RgbImage, y: i64, x0: i64, x1: i64, c: Rgb<u8>) {
    for x in x0.min(x1)..=x0.max(x1) {
        put(img, x, y, c);
    }
}

fn vline(img: &mut RgbImage, x: i64, y0: i64, y1: i64, c: Rgb<u8>) {
    for y in y0.min(y1)..=y0.max(y1) {
        put(img, x, y, c);
    }
}

fn line(img: &mut RgbImage, mut x0: i64, mut y0: i64, x1: i64, y1: i64, c: Rgb<u8>) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, c);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// 5x7 glyphs for the characters used by tick labels.
fn glyph(c: char) -> Option<[u8; 7]> {
    Some(match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        'e' => [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        ' ' => [0; 7],
        _ => return None,
    })
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, c: Rgb<u8>) {
    let mut cx = x;
    for ch in text.chars() {
        if let Some(rows) = glyph(ch) {
            for (ry, row) in rows.iter().enumerate() {
                for bit in 0..5 {
                    if row & (1 << (4 - bit)) != 0 {
                        put(img, cx + bit as i64, y + ry as i64, c);
                    }
                }
            }
        }
        cx += 6;
    }
}
