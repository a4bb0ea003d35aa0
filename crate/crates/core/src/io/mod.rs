//! File formats: vecmap container, 16-bit PGM label maps, Cityscapes
//! instance-id rasters and 8-bit magnitude renders.

mod pgm;
mod vecmap;

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma};

pub use pgm::{labelmap_to_bytes, read_labelmap, read_pgm8, write_labelmap, write_pgm8};
pub use vecmap::{read_vecmap, vecmap_to_bytes, write_vecmap, HEADER_LEN as VECMAP_HEADER_LEN};

use crate::error::{Error, Result};
use crate::grid::{ClassMap, Grid, GridDims, InstanceLabelMap, MagnitudeMap};

/// Cityscapes `*_instanceIds.png` convention: values >= 1000 encode
/// `class * 1000 + instance`; smaller values are stuff or crowd regions
/// and count as background here. Instances are re-indexed densely in
/// ascending raw-value order.
pub fn import_cityscapes_ids(raster: &Grid<u16>) -> (InstanceLabelMap, ClassMap) {
    let mut present = vec![false; u16::MAX as usize + 1];
    for &v in raster.as_slice() {
        present[v as usize] = true;
    }
    let mut lut = vec![0u16; u16::MAX as usize + 1];
    let mut next = 0u16;
    for v in 1000..=u16::MAX {
        if present[v as usize] {
            next += 1;
            lut[v as usize] = next;
        }
    }
    let ids = raster.map(|&v| lut[v as usize]);
    let classes = raster.map(|&v| if v >= 1000 { v / 1000 } else { 0 });
    (ids, classes)
}

/// Normalize by the maximum magnitude and scale to 0..=255, rounding half up.
pub fn export_magnitude_image(mm: &MagnitudeMap) -> Grid<u8> {
    let max = mm.as_slice().iter().copied().fold(0.0f32, f32::max) as f64;
    if max <= 0.0 {
        return mm.map(|_| 0);
    }
    mm.map(|&m| ((m as f64 / max * 255.0 + 0.5).floor()).clamp(0.0, 255.0) as u8)
}

fn image_err(e: image::ImageError) -> Error {
    Error::Image(e.to_string())
}

/// Decode any PNG as a 16-bit single-channel raster.
pub fn read_png16(bytes: &[u8]) -> Result<Grid<u16>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(image_err)?
        .into_luma16();
    let dims = GridDims::new(img.height() as usize, img.width() as usize)
        .map_err(|e| Error::Image(e.to_string()))?;
    Grid::from_vec(dims, img.into_raw())
}

pub fn png16_to_bytes(grid: &Grid<u16>) -> Result<Vec<u8>> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        u32::try_from(grid.width()).map_err(|_| Error::Overflow)?,
        u32::try_from(grid.height()).map_err(|_| Error::Overflow)?,
        grid.as_slice().to_vec(),
    )
    .ok_or(Error::Overflow)?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(image_err)?;
    Ok(out.into_inner())
}

pub fn png8_to_bytes(grid: &Grid<u8>) -> Result<Vec<u8>> {
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        u32::try_from(grid.width()).map_err(|_| Error::Overflow)?,
        u32::try_from(grid.height()).map_err(|_| Error::Overflow)?,
        grid.as_slice().to_vec(),
    )
    .ok_or(Error::Overflow)?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(image_err)?;
    Ok(out.into_inner())
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Read a 16-bit raster from `.png` or binary PGM (by extension).
pub fn load_raster16(path: &Path) -> Result<Grid<u16>> {
    let bytes = std::fs::read(path)?;
    if is_png(path) {
        read_png16(&bytes)
    } else {
        read_labelmap(&bytes)
    }
}

/// Write a 16-bit raster as `.png` or binary PGM (by extension).
pub fn save_raster16(grid: &Grid<u16>, path: &Path) -> Result<()> {
    let bytes = if is_png(path) {
        png16_to_bytes(grid)?
    } else {
        labelmap_to_bytes(grid)
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Write an 8-bit image as `.png` or binary PGM (by extension).
pub fn save_image8(grid: &Grid<u8>, path: &Path) -> Result<()> {
    let bytes = if is_png(path) {
        png8_to_bytes(grid)?
    } else {
        let mut buf = Vec::new();
        write_pgm8(grid, &mut buf)?;
        buf
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_vecmap(path: &Path) -> Result<crate::grid::VectorMap> {
    read_vecmap(&std::fs::read(path)?)
}

pub fn save_vecmap(vm: &crate::grid::VectorMap, path: &Path) -> Result<()> {
    std::fs::write(path, vecmap_to_bytes(vm))?;
    Ok(())
}
