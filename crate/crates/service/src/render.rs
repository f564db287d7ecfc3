//! Depth images as 8-bit PNGs for annotators.

use std::sync::OnceLock;

use base64::Engine;
use spadal::recon::DepthImage;

/// Lightness-linear gray ramp: entry `i` is the sRGB gray level whose CIE
/// L* is `100 i / 255`, so equal depth steps look equally spaced.
pub fn lightness_lut() -> &'static [u8; 256] {
    static LUT: OnceLock<[u8; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0u8; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            let l = 100.0 * i as f64 / 255.0;
            let y = if l > 8.0 { ((l + 16.0) / 116.0).powi(3) } else { l / 903.3 };
            let srgb = if y <= 0.003_130_8 { 12.92 * y } else { 1.055 * y.powf(1.0 / 2.4) - 0.055 };
            *v = (srgb * 255.0).round().clamp(0.0, 255.0) as u8;
        }
        lut
    })
}

/// Per-image min/max normalization to LUT indices; near is bright. A flat
/// image maps to index 0.
pub fn colormap(img: &DepthImage) -> Vec<u8> {
    let values = img.depth_m.as_slice();
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let lut = lightness_lut();
    values
        .iter()
        .map(|&v| {
            if !(hi > lo) || !v.is_finite() {
                return lut[0];
            }
            let t = (hi - v) / (hi - lo);
            lut[(t * 255.0).round() as usize]
        })
        .collect()
}

pub fn render_png(img: &DepthImage) -> Vec<u8> {
    let (w, h) = img.dims();
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().expect("in-memory PNG header");
    writer
        .write_image_data(&colormap(img))
        .expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG");
    out
}

pub fn render_base64(img: &DepthImage) -> String {
    base64::engine::general_purpose::STANDARD.encode(render_png(img))
}
