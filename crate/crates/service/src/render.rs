use geosieve::{BitMask, GridF32};

/// Color of candidate pixels in mask overlays.
pub const OVERLAY_RGBA: [u8; 4] = [255, 0, 0, 128];

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().expect("png header to memory");
    w.write_image_data(data).expect("png data to memory");
    w.finish().expect("png finish to memory");
    out
}

/// RGBA overlay: set bits in [`OVERLAY_RGBA`], everything else transparent.
pub fn mask_png(mask: &BitMask) -> Vec<u8> {
    let (w, h) = mask.dims();
    let mut data = vec![0u8; w * h * 4];
    for (r, c) in mask.iter_ones() {
        let i = (r * w + c) * 4;
        data[i..i + 4].copy_from_slice(&OVERLAY_RGBA);
    }
    encode(w, h, png::ColorType::Rgba, &data)
}

/// Grayscale with a linear min/max stretch. Nodata renders black.
pub fn band_png(grid: &GridF32) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let (lo, hi) = grid.min_max().unwrap_or((0.0, 0.0));
    let span = (hi - lo) as f64;
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| {
            if grid.is_nodata_value(v) {
                0
            } else if span > 0.0 {
                (((v - lo) as f64 / span) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                128
            }
        })
        .collect();
    encode(w, h, png::ColorType::Grayscale, &data)
}
