use std::path::Path;

use crate::data::{encode_image, ImageRecord};
use crate::error::{size_err, Result};

const GAP: usize = 2;

/// Noisy input, U-Net output, U-Net++ output, clean target.
pub type GridRow = [Vec<f32>; 4];

/// Lays tiles out four to a row with white 2-pixel gutters.
pub fn render_grid(rows: &[GridRow], tile: usize) -> Result<ImageRecord> {
    if rows.is_empty() || tile == 0 {
        return Err(size_err!("grid needs at least one row of non-empty tiles"));
    }
    for (r, row) in rows.iter().enumerate() {
        for (c, t) in row.iter().enumerate() {
            if t.len() != tile * tile {
                return Err(size_err!(
                    "tile ({r}, {c}) has {} pixels, expected {}",
                    t.len(),
                    tile * tile
                ));
            }
        }
    }
    let width = 4 * tile + 3 * GAP;
    let height = rows.len() * tile + (rows.len() - 1) * GAP;
    let mut px = vec![1.0f32; width * height];
    for (r, row) in rows.iter().enumerate() {
        for (c, t) in row.iter().enumerate() {
            let (x0, y0) = (c * (tile + GAP), r * (tile + GAP));
            for y in 0..tile {
                for x in 0..tile {
                    px[(y0 + y) * width + x0 + x] = t[y * tile + x].clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(ImageRecord::new("grid", width, height, px))
}

pub fn write_grid(rows: &[GridRow], tile: usize, path: &Path) -> Result<ImageRecord> {
    let img = render_grid(rows, tile)?;
    encode_image(&img, path)?;
    Ok(img)
}
