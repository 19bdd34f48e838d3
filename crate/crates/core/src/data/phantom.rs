//! Synthetic chest-radiograph-like test images.

use rand::Rng;

use super::image::ImageRecord;
use crate::rng;

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Soft inside-ness of an axis-aligned ellipse, 1 inside and 0 outside.
fn ellipse(u: f64, v: f64, cx: f64, cy: f64, rx: f64, ry: f64, soft: f64) -> f64 {
    let r = ((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2);
    1.0 - smoothstep(1.0 - soft, 1.0 + soft, r)
}

/// Renders `count` phantoms of `size x size`: a dark background, a bright
/// thorax ellipse with darker lung fields crossed by periodic rib bands, a
/// spine, and a diaphragm arc. Geometry is drawn per image from a stream keyed
/// by `(seed, index)`.
pub fn gen_synthetic_phantoms(count: usize, size: usize, seed: u64) -> Vec<ImageRecord> {
    (0..count).map(|i| render(i, size, seed)).collect()
}

fn render(index: usize, size: usize, seed: u64) -> ImageRecord {
    let mut r = rng::keyed_u64(seed, index as u64);
    let mut range = |lo: f64, hi: f64| lo + (hi - lo) * r.gen::<f64>();

    let background = range(0.03, 0.10);
    let (tx, ty) = (range(-0.05, 0.05), range(-0.02, 0.08));
    let (trx, tr_y) = (range(0.72, 0.88), range(0.78, 0.92));
    let body = range(0.50, 0.62);
    let lung_gap = range(0.12, 0.20);
    let (lrx, lry) = (range(0.22, 0.30), range(0.48, 0.60));
    let lung_cy = ty + range(-0.12, -0.04);
    let lung = range(0.20, 0.30);
    let rib_amp = range(0.08, 0.16);
    let rib_freq = range(4.0, 6.5);
    let rib_phase = range(0.0, 1.0);
    let rib_bend = range(0.6, 1.2);
    let dia_top = ty + range(0.35, 0.50);
    let dia_curve = range(0.5, 0.9);
    let dia_level = range(0.62, 0.75);
    let spine = range(0.58, 0.70);
    let spine_w = range(0.05, 0.08);

    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        let v = (y as f64 + 0.5) / size as f64 * 2.0 - 1.0;
        for x in 0..size {
            let u = (x as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let thorax = ellipse(u, v, tx, ty, trx, tr_y, 0.08);
            let lungs = ellipse(u, v, tx - lrx - lung_gap / 2.0, lung_cy, lrx, lry, 0.15).max(
                ellipse(u, v, tx + lrx + lung_gap / 2.0, lung_cy, lrx, lry, 0.15),
            );
            let ribs = 0.5
                + 0.5
                    * (std::f64::consts::TAU
                        * (v * rib_freq + rib_phase + rib_bend * (u - tx).powi(2)))
                    .cos();
            let below_diaphragm =
                smoothstep(-0.03, 0.03, v - (dia_top - dia_curve * (u - tx).powi(2)));
            let spine_band = 1.0 - smoothstep(spine_w * 0.6, spine_w, (u - tx).abs());

            let mut val = background * (1.0 + 0.3 * v);
            let mut inside = body;
            inside += (lung - body) * lungs;
            inside += rib_amp * ribs * lungs;
            inside = inside * (1.0 - spine_band) + spine * spine_band;
            inside = inside * (1.0 - below_diaphragm) + dia_level * below_diaphragm;
            val = val * (1.0 - thorax) + inside * thorax;
            pixels.push(val.clamp(0.0, 1.0) as f32);
        }
    }
    ImageRecord::new(format!("phantom_{index:05}"), size, size, pixels)
}
