//! Scatter-plot rendering for embeddings: a PNG colored by label tag with a
//! legend, plus a CSV of coordinates. Rendering is fully self-contained (a
//! built-in 5x7 bitmap font), so re-exports are byte-identical.

use super::EmbeddingResult;
use crate::error::{Error, Result};
use crate::io::csv::{fmt_f64, CsvTable};
use std::collections::BTreeMap;
use std::path::Path;

const WIDTH: u32 = 800;
const HEIGHT: u32 = 600;
const MARGIN: f64 = 40.0;

const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

/// Distinct label tags in first-appearance-in-sorted-order; the legend shows
/// one entry per tag.
fn legend_entries(result: &EmbeddingResult) -> Vec<String> {
    let mut seen = BTreeMap::new();
    for tag in &result.labels {
        let next = seen.len();
        seen.entry(tag.clone()).or_insert(next);
    }
    let mut entries: Vec<(String, usize)> = seen.into_iter().collect();
    entries.sort_by_key(|(_, order)| *order);
    entries.into_iter().map(|(tag, _)| tag).collect()
}

/// Write `<out_base>.png` and `<out_base>.csv`. The CSV has one row per
/// point: `sample_id, x, y, label`.
pub fn export_embedding_plot(result: &EmbeddingResult, out_base: &Path) -> Result<()> {
    if result.is_empty() {
        return Err(Error::InvalidSpec("empty embedding result".into()));
    }
    let csv_path = out_base.with_extension("csv");
    let png_path = out_base.with_extension("png");

    let mut table = CsvTable::new(&["sample_id", "x", "y", "label"]);
    for ((id, coord), label) in result
        .sample_ids
        .iter()
        .zip(&result.coordinates)
        .zip(&result.labels)
    {
        table.push_row(vec![
            id.clone(),
            fmt_f64(coord[0]),
            fmt_f64(coord[1]),
            label.clone(),
        ]);
    }
    table.write(&csv_path)?;

    let entries = legend_entries(result);
    let color_of: BTreeMap<&str, [u8; 3]> = entries
        .iter()
        .enumerate()
        .map(|(i, tag)| (tag.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();

    let (min_x, max_x, min_y, max_y) = result.coordinates.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(ax, bx, ay, by), c| (ax.min(c[0]), bx.max(c[0]), ay.min(c[1]), by.max(c[1])),
    );
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);

    let mut img = image::RgbImage::from_pixel(WIDTH, HEIGHT, image::Rgb([255, 255, 255]));
    for (coord, label) in result.coordinates.iter().zip(&result.labels) {
        let px = MARGIN + (coord[0] - min_x) / span_x * (WIDTH as f64 - 2.0 * MARGIN);
        let py = MARGIN + (1.0 - (coord[1] - min_y) / span_y) * (HEIGHT as f64 - 2.0 * MARGIN);
        let color = color_of[label.as_str()];
        draw_dot(&mut img, px as i64, py as i64, 3, color);
    }
    // Legend block in the top-left margin area.
    for (i, tag) in entries.iter().enumerate() {
        let y = 8 + i as i64 * 12;
        draw_dot(&mut img, 10, y + 3, 3, color_of[tag.as_str()]);
        draw_text(&mut img, 20, y, tag, [0, 0, 0]);
    }

    if let Some(parent) = png_path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.save(&png_path).map_err(|e| Error::Image {
        path: png_path.clone(),
        source: e,
    })
}

fn draw_dot(img: &mut image::RgbImage, cx: i64, cy: i64, r: i64, color: [u8; 3]) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let x = cx + dx;
            let y = cy + dy;
            if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                img.put_pixel(x as u32, y as u32, image::Rgb(color));
            }
        }
    }
}

/// Glyphs for the characters that appear in label tags; each is 5 columns x
/// 7 rows, one bit per pixel, column-major in the low 7 bits.
fn glyph(ch: char) -> [u8; 5] {
    match ch.to_ascii_lowercase() {
        'a' => [0x7e, 0x09, 0x09, 0x09, 0x7e],
        'b' => [0x7f, 0x49, 0x49, 0x49, 0x36],
        'c' => [0x3e, 0x41, 0x41, 0x41, 0x22],
        'd' => [0x7f, 0x41, 0x41, 0x41, 0x3e],
        'e' => [0x7f, 0x49, 0x49, 0x49, 0x41],
        'f' => [0x7f, 0x09, 0x09, 0x09, 0x01],
        'g' => [0x3e, 0x41, 0x49, 0x49, 0x7a],
        'h' => [0x7f, 0x08, 0x08, 0x08, 0x7f],
        'i' => [0x00, 0x41, 0x7f, 0x41, 0x00],
        'j' => [0x20, 0x40, 0x41, 0x3f, 0x01],
        'k' => [0x7f, 0x08, 0x14, 0x22, 0x41],
        'l' => [0x7f, 0x40, 0x40, 0x40, 0x40],
        'm' => [0x7f, 0x02, 0x0c, 0x02, 0x7f],
        'n' => [0x7f, 0x04, 0x08, 0x10, 0x7f],
        'o' => [0x3e, 0x41, 0x41, 0x41, 0x3e],
        'p' => [0x7f, 0x09, 0x09, 0x09, 0x06],
        'q' => [0x3e, 0x41, 0x51, 0x21, 0x5e],
        'r' => [0x7f, 0x09, 0x19, 0x29, 0x46],
        's' => [0x46, 0x49, 0x49, 0x49, 0x31],
        't' => [0x01, 0x01, 0x7f, 0x01, 0x01],
        'u' => [0x3f, 0x40, 0x40, 0x40, 0x3f],
        'v' => [0x1f, 0x20, 0x40, 0x20, 0x1f],
        'w' => [0x3f, 0x40, 0x38, 0x40, 0x3f],
        'x' => [0x63, 0x14, 0x08, 0x14, 0x63],
        'y' => [0x07, 0x08, 0x70, 0x08, 0x07],
        'z' => [0x61, 0x51, 0x49, 0x45, 0x43],
        '0' => [0x3e, 0x51, 0x49, 0x45, 0x3e],
        '1' => [0x00, 0x42, 0x7f, 0x40, 0x00],
        '2' => [0x42, 0x61, 0x51, 0x49, 0x46],
        '3' => [0x21, 0x41, 0x45, 0x4b, 0x31],
        '4' => [0x18, 0x14, 0x12, 0x7f, 0x10],
        '5' => [0x27, 0x45, 0x45, 0x45, 0x39],
        '6' => [0x3c, 0x4a, 0x49, 0x49, 0x30],
        '7' => [0x01, 0x71, 0x09, 0x05, 0x03],
        '8' => [0x36, 0x49, 0x49, 0x49, 0x36],
        '9' => [0x06, 0x49, 0x49, 0x29, 0x1e],
        '_' => [0x40, 0x40, 0x40, 0x40, 0x40],
        '-' => [0x08, 0x08, 0x08, 0x08, 0x08],
        '/' => [0x60, 0x10, 0x08, 0x04, 0x03],
        _ => [0x00, 0x00, 0x00, 0x00, 0x00],
    }
}

fn draw_text(img: &mut image::RgbImage, x: i64, y: i64, text: &str, color: [u8; 3]) {
    let mut cursor = x;
    for ch in text.chars() {
        let cols = glyph(ch);
        for (ci, col) in cols.iter().enumerate() {
            for row in 0..7 {
                if col >> row & 1 == 1 {
                    let px = cursor + ci as i64;
                    let py = y + row as i64;
                    if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height()
                    {
                        img.put_pixel(px as u32, py as u32, image::Rgb(color));
                    }
                }
            }
        }
        cursor += 6;
    }
}
