//! Row-major 2D grids and the label/vector/magnitude maps built on them.
//!
//! Coordinates follow image conventions: the origin is the top-left corner,
//! `x` is the column and `y` is the row, growing downward.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub height: usize,
    pub width: usize,
}

impl GridDims {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height.checked_mul(width).is_none() {
            return Err(Error::InvalidDims { height, width });
        }
        Ok(Self { height, width })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn coord(&self, index: usize) -> PixelCoord {
        PixelCoord {
            x: index % self.width,
            y: index / self.width,
        }
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64
    }

    /// Upper bound on the number of instances a grid of these dimensions can
    /// hold when every instance needs a center pixel plus at least one vector
    /// pointing at it.
    pub fn max_instances(&self) -> u64 {
        (self.height as u64 * self.width as u64) / 2
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

/// Dense row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dims: GridDims,
    data: Vec<T>,
}

/// Per-pixel instance ids; 0 is background.
pub type InstanceLabelMap = Grid<u16>;
/// Per-pixel class ids; 0 is background / unlabeled.
pub type ClassMap = Grid<u16>;
/// Per-pixel Euclidean norm of a vector map.
pub type MagnitudeMap = Grid<f32>;

impl<T: Clone> Grid<T> {
    pub fn filled(dims: GridDims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(dims: GridDims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimMismatch {
                expected: format!("{} values", dims.len()),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for y in 0..dims.height {
            for x in 0..dims.width {
                data.push(f(x, y));
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.dims.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.dims.width
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.dims.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.dims.index(x, y);
        self.data[i] = value;
    }

    pub fn row(&self, y: usize) -> &[T] {
        let w = self.dims.width;
        &self.data[y * w..(y + 1) * w]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Grid<u16> {
    /// Distinct nonzero ids in ascending order.
    pub fn instance_ids(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &id in &self.data {
            seen[id as usize] = true;
        }
        (1..=u16::MAX).filter(|&id| seen[id as usize]).collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&id| id != 0).count()
    }

    /// Pixel count per nonzero id.
    pub fn id_counts(&self) -> BTreeMap<u16, usize> {
        let mut counts = BTreeMap::new();
        for &id in &self.data {
            if id != 0 {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Re-index nonzero ids densely as 1..=K in ascending order of the old id.
    /// Returns the new map and the old id for each new label (index 0 is label 1).
    pub fn compacted(&self) -> (InstanceLabelMap, Vec<u16>) {
        let old = self.instance_ids();
        let mut lut = vec![0u16; u16::MAX as usize + 1];
        for (i, &id) in old.iter().enumerate() {
            lut[id as usize] = (i + 1) as u16;
        }
        (self.map(|&id| lut[id as usize]), old)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub dx: f32,
    pub dy: f32,
}

impl DisplacementVector {
    pub const ZERO: Self = Self { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f32, dy: f32) -> Self {
        Self { dx, dy }
    }

    #[inline]
    pub fn magnitude(&self) -> f32 {
        (self.dx as f64).hypot(self.dy as f64) as f32
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

/// Per-pixel displacement field. Every component is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMap(Grid<DisplacementVector>);

impl VectorMap {
    pub fn zeros(dims: GridDims) -> Self {
        Self(Grid::filled(dims, DisplacementVector::ZERO))
    }

    pub fn new(grid: Grid<DisplacementVector>) -> Result<Self> {
        if let Some(index) = grid.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(grid))
    }

    pub fn from_vec(dims: GridDims, vectors: Vec<DisplacementVector>) -> Result<Self> {
        Self::new(Grid::from_vec(dims, vectors)?)
    }

    /// Wraps a grid the caller has already established to be finite.
    pub(crate) fn from_finite(grid: Grid<DisplacementVector>) -> Self {
        debug_assert!(grid.as_slice().iter().all(DisplacementVector::is_finite));
        Self(grid)
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.0.dims()
    }

    #[inline]
    pub fn as_slice(&self) -> &[DisplacementVector] {
        self.0.as_slice()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> DisplacementVector {
        *self.0.get(x, y)
    }

    pub fn grid(&self) -> &Grid<DisplacementVector> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<DisplacementVector> {
        self.0
    }

    /// Pixels whose vector magnitude is at least `eps`.
    pub fn foreground_mask(&self, eps: f64) -> Grid<bool> {
        self.0.map(|v| v.magnitude() as f64 >= eps)
    }
}

pub fn magnitude_map(vm: &VectorMap) -> MagnitudeMap {
    vm.grid().map(DisplacementVector::magnitude)
}

fn check_factor(factor: usize) -> Result<()> {
    if factor == 0 {
        return Err(Error::InvalidParam("resample factor must be >= 1".into()));
    }
    Ok(())
}

/// Top-left nearest-neighbor subsampling: output `(r, c)` takes input
/// `(r * factor, c * factor)`; output dims are floored.
pub fn subsample_nearest<T: Copy>(grid: &Grid<T>, factor: usize) -> Result<Grid<T>> {
    check_factor(factor)?;
    let dims = grid.dims();
    if factor > dims.height || factor > dims.width {
        return Err(Error::DegenerateOutput {
            factor,
            height: dims.height,
            width: dims.width,
        });
    }
    let out = GridDims::new(dims.height / factor, dims.width / factor)?;
    Ok(Grid::from_fn(out, |x, y| *grid.get(x * factor, y * factor)))
}

/// Subsample, then crop the top-left `target` window. Used to reproduce a
/// published resolution that is smaller than the floored one.
pub fn subsample_nearest_to<T: Copy>(
    grid: &Grid<T>,
    factor: usize,
    target: GridDims,
) -> Result<Grid<T>> {
    let sampled = subsample_nearest(grid, factor)?;
    let dims = sampled.dims();
    if target.height > dims.height || target.width > dims.width {
        return Err(Error::InvalidParam(format!(
            "target {target} exceeds subsampled {dims}"
        )));
    }
    Ok(Grid::from_fn(target, |x, y| *sampled.get(x, y)))
}

/// Replicate each pixel into a `factor`x`factor` block.
pub fn upsample_nearest<T: Copy>(grid: &Grid<T>, factor: usize) -> Result<Grid<T>> {
    check_factor(factor)?;
    let dims = grid.dims();
    let height = dims.height.checked_mul(factor).ok_or(Error::Overflow)?;
    let width = dims.width.checked_mul(factor).ok_or(Error::Overflow)?;
    height.checked_mul(width).ok_or(Error::Overflow)?;
    let out = GridDims::new(height, width)?;
    Ok(Grid::from_fn(out, |x, y| *grid.get(x / factor, y / factor)))
}

/// Upsample by `factor` into exactly `target` dims: rows/columns past the
/// replicated area repeat the last source row/column, extra ones are cropped.
pub fn upsample_nearest_to<T: Copy>(
    grid: &Grid<T>,
    factor: usize,
    target: GridDims,
) -> Result<Grid<T>> {
    check_factor(factor)?;
    let dims = grid.dims();
    Ok(Grid::from_fn(target, |x, y| {
        let sx = (x / factor).min(dims.width - 1);
        let sy = (y / factor).min(dims.height - 1);
        *grid.get(sx, sy)
    }))
}
