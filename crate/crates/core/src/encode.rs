//! Label map to displacement field.
//!
//! Every pixel of an instance gets the vector from itself to the instance
//! anchor (center of mass by default). Instances are grouped by id, so the
//! disjoint parts of an occluded instance share one anchor. Background stays
//! exactly zero.

use std::collections::BTreeMap;

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{DisplacementVector, Grid, InstanceLabelMap, PixelCoord, VectorMap};

/// The pixels carrying one instance id. The pixels need not be connected.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRegion {
    pub id: u16,
    pub pixels: Vec<PixelCoord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterOfMass {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    #[default]
    CenterOfMass,
    BoundingBoxCentroid,
}

/// Collect the regions of every instance id, ascending by id.
pub fn regions(lm: &InstanceLabelMap) -> Vec<InstanceRegion> {
    let mut by_id: BTreeMap<u16, Vec<PixelCoord>> = BTreeMap::new();
    let dims = lm.dims();
    for (i, &id) in lm.as_slice().iter().enumerate() {
        if id != 0 {
            by_id.entry(id).or_default().push(dims.coord(i));
        }
    }
    by_id
        .into_iter()
        .map(|(id, pixels)| InstanceRegion { id, pixels })
        .collect()
}

/// Mean pixel position under unit pixel mass.
pub fn center_of_mass(region: &InstanceRegion) -> Result<CenterOfMass> {
    if region.pixels.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let n = region.pixels.len() as f64;
    let (sx, sy) = region.pixels.iter().fold((0.0f64, 0.0f64), |(sx, sy), p| {
        (sx + p.x as f64, sy + p.y as f64)
    });
    Ok(CenterOfMass {
        x: sx / n,
        y: sy / n,
    })
}

/// Center of the axis-aligned bounding box.
pub fn bbox_centroid(region: &InstanceRegion) -> Result<CenterOfMass> {
    let first = region.pixels.first().ok_or(Error::EmptyInstance)?;
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for p in &region.pixels {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    Ok(CenterOfMass {
        x: (x0 + x1) as f64 / 2.0,
        y: (y0 + y1) as f64 / 2.0,
    })
}

#[derive(Clone, Copy)]
struct Stats {
    sum_x: f64,
    sum_y: f64,
    count: u64,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Stats {
    fn new(x: usize, y: usize) -> Self {
        Self {
            sum_x: 0.0,
            sum_y: 0.0,
            count: 0,
            x0: x,
            x1: x,
            y0: y,
            y1: y,
        }
    }

    fn push(&mut self, x: usize, y: usize) {
        self.sum_x += x as f64;
        self.sum_y += y as f64;
        self.count += 1;
        self.x0 = self.x0.min(x);
        self.x1 = self.x1.max(x);
        self.y0 = self.y0.min(y);
        self.y1 = self.y1.max(y);
    }

    fn anchor(&self, anchor: Anchor) -> CenterOfMass {
        match anchor {
            Anchor::CenterOfMass => CenterOfMass {
                x: self.sum_x / self.count as f64,
                y: self.sum_y / self.count as f64,
            },
            Anchor::BoundingBoxCentroid => CenterOfMass {
                x: (self.x0 + self.x1) as f64 / 2.0,
                y: (self.y0 + self.y1) as f64 / 2.0,
            },
        }
    }
}

/// Anchor position for every id present in the map, plus its pixel count.
pub fn instance_anchors(
    lm: &InstanceLabelMap,
    anchor: Anchor,
) -> BTreeMap<u16, (CenterOfMass, u64)> {
    let mut stats: Vec<Option<Stats>> = vec![None; u16::MAX as usize + 1];
    let width = lm.width();
    for (i, &id) in lm.as_slice().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (x, y) = (i % width, i / width);
        stats[id as usize]
            .get_or_insert_with(|| Stats::new(x, y))
            .push(x, y);
    }
    stats
        .iter()
        .enumerate()
        .filter_map(|(id, s)| s.map(|s| (id as u16, (s.anchor(anchor), s.count))))
        .collect()
}

pub fn encode(lm: &InstanceLabelMap) -> VectorMap {
    encode_with(lm, Anchor::CenterOfMass)
}

pub fn encode_bbox_centroid(lm: &InstanceLabelMap) -> VectorMap {
    encode_with(lm, Anchor::BoundingBoxCentroid)
}

pub fn encode_with(lm: &InstanceLabelMap, anchor: Anchor) -> VectorMap {
    let anchors = instance_anchors(lm, anchor);
    let mut lut: Vec<Option<CenterOfMass>> = vec![None; u16::MAX as usize + 1];
    for (&id, &(center, count)) in &anchors {
        if count == 1 {
            warn!("instance {id} has a single pixel; it encodes as background");
        }
        lut[id as usize] = Some(center);
    }
    let width = lm.width();
    let vectors = lm
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &id)| match lut[id as usize] {
            Some(c) if id != 0 => {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                DisplacementVector::new((c.x - x) as f32, (c.y - y) as f32)
            }
            _ => DisplacementVector::ZERO,
        })
        .collect();
    VectorMap::from_finite(Grid::from_vec(lm.dims(), vectors).expect("same dims"))
}
