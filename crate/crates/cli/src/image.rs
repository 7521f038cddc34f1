//! Grayscale PNG rendering of depth grids.

use sdi_core::DepthGrid;

use crate::exit::{CliError, CliResult, ExitCode};

/// Near surfaces are bright; invalid pixels are black.
pub fn depth_png(depth: &DepthGrid) -> CliResult<Vec<u8>> {
    let valid: Vec<f32> =
        depth.values().iter().zip(depth.valid_mask()).filter(|(_, ok)| **ok).map(|(z, _)| *z).collect();
    let lo = valid.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = valid.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels: Vec<u8> = depth
        .values()
        .iter()
        .zip(depth.valid_mask())
        .map(|(z, ok)| if *ok { (255.0 - 223.0 * (z - lo) / span).round() as u8 } else { 0 })
        .collect();
    encode_gray(depth.width() as u32, depth.height() as u32, &pixels)
}

pub fn encode_gray(width: u32, height: u32, pixels: &[u8]) -> CliResult<Vec<u8>> {
    let err = |e: png::EncodingError| CliError::new(ExitCode::Internal, format!("png encoding: {e}"));
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(err)?;
        writer.write_image_data(pixels).map_err(err)?;
    }
    Ok(out)
}
