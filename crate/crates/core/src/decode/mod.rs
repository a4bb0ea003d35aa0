//! Vector field back to instance masks.
//!
//! 1. every vector votes for the cell its endpoint lands in;
//! 2. voted cells closer than the distance threshold (DT) are clustered;
//! 3. clusters with fewer than the vote threshold (VT) votes are dropped;
//! 4. pixels whose endpoint lies within the error threshold (ET) of a
//!    surviving center join that instance. [`decode_watershed`] replaces this
//!    last step with a marker-based flood of the magnitude surface.

mod assign;
mod cluster;
mod vote;
mod watershed;

use log::warn;
use serde::{Deserialize, Serialize};

pub use assign::assign_pixels;
pub use cluster::{cluster_candidates, select_centers, CenterCandidate};
pub use vote::{vote_accumulate, VoteAccumulator};
pub use watershed::{marker_pixels, watershed_assign};

use crate::error::{Error, Result};
use crate::grid::{InstanceLabelMap, VectorMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    /// Distance threshold for clustering vote cells, in pixels.
    pub dt: f64,
    /// Minimum votes for a cluster to become an instance.
    pub vt: u32,
    /// Maximum endpoint-to-center distance for a pixel to join, in pixels.
    pub et: f64,
    /// Vectors shorter than this are treated as background.
    pub eps_bg: f64,
    /// Radius within which a near-zero pixel is attached to a center.
    pub r_cm: f64,
}

pub const DEFAULT_EPS_BG: f64 = 0.5;
pub const DEFAULT_R_CM: f64 = 1.0;

impl DecodeParams {
    pub fn new(dt: f64, vt: u32, et: f64) -> Self {
        Self {
            dt,
            vt,
            et,
            eps_bg: DEFAULT_EPS_BG,
            r_cm: DEFAULT_R_CM,
        }
    }

    /// (DT, VT, ET) = (10, 50, 15).
    pub fn segnet() -> Self {
        Self::new(10.0, 50, 15.0)
    }

    /// (DT, VT, ET) = (15, 30, 20).
    pub fn fcn() -> Self {
        Self::new(15.0, 30, 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.dt) {
            return Err(Error::InvalidParam(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !positive(self.et) {
            return Err(Error::InvalidParam(format!(
                "et must be > 0, got {}",
                self.et
            )));
        }
        if self.vt < 1 {
            return Err(Error::InvalidParam("vt must be >= 1".into()));
        }
        if !non_negative(self.eps_bg) {
            return Err(Error::InvalidParam(format!(
                "eps_bg must be >= 0, got {}",
                self.eps_bg
            )));
        }
        if !non_negative(self.r_cm) {
            return Err(Error::InvalidParam(format!(
                "r_cm must be >= 0, got {}",
                self.r_cm
            )));
        }
        Ok(())
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::segnet()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedInstance {
    pub label: u16,
    pub center: CenterCandidate,
    pub pixel_count: usize,
    /// `min(1, votes / pixel_count)`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub labels: InstanceLabelMap,
    pub instances: Vec<DecodedInstance>,
}

/// Steps 1-3: voting, clustering, and vote thresholding.
pub fn find_centers(vm: &VectorMap, params: &DecodeParams) -> Vec<CenterCandidate> {
    let acc = vote_accumulate(vm, params.eps_bg);
    let candidates = cluster_candidates(&acc, params.dt);
    let mut centers = select_centers(&candidates, params.vt);
    if centers.len() > u16::MAX as usize {
        warn!(
            "{} centers exceed the 16-bit label range; keeping the {} strongest",
            centers.len(),
            u16::MAX
        );
        centers.truncate(u16::MAX as usize);
    }
    centers
}

pub fn decode(vm: &VectorMap, params: &DecodeParams) -> Result<DecodeOutput> {
    params.validate()?;
    let centers = find_centers(vm, params);
    let labels = assign_pixels(vm, &centers, params);
    Ok(finalize(labels, &centers))
}

pub fn decode_watershed(vm: &VectorMap, params: &DecodeParams) -> Result<DecodeOutput> {
    params.validate()?;
    let centers = find_centers(vm, params);
    let labels = watershed_assign(vm, &centers, params);
    Ok(finalize(labels, &centers))
}

/// Drop centers that received no pixels and renumber the rest densely.
fn finalize(mut labels: InstanceLabelMap, centers: &[CenterCandidate]) -> DecodeOutput {
    let mut counts = vec![0usize; centers.len() + 1];
    for &l in labels.as_slice() {
        counts[l as usize] += 1;
    }
    let mut remap = vec![0u16; centers.len() + 1];
    let mut instances = Vec::new();
    for (k, center) in centers.iter().enumerate() {
        let pixel_count = counts[k + 1];
        if pixel_count == 0 {
            continue;
        }
        let label = (instances.len() + 1) as u16;
        remap[k + 1] = label;
        instances.push(DecodedInstance {
            label,
            center: *center,
            pixel_count,
            confidence: (center.votes as f64 / pixel_count as f64).min(1.0),
        });
    }
    for l in labels.as_mut_slice() {
        *l = remap[*l as usize];
    }
    DecodeOutput { labels, instances }
}
