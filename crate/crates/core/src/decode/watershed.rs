//! Marker-based priority flood over the magnitude surface.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::assign::CenterIndex;
use super::cluster::CenterCandidate;
use super::vote::round_half_up;
use super::DecodeParams;
use crate::grid::{magnitude_map, Grid, InstanceLabelMap, VectorMap};

/// Queue entry. Pixels pop in (magnitude, row-major index) order; entries
/// for the same pixel pushed by different fronts pop smallest magnitude
/// step first, so a pixel joins the neighbor it continues smoothly from.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level {
    magnitude: f32,
    index: usize,
    step: f32,
    label: u16,
}

impl Eq for Level {}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> Ordering {
        self.magnitude
            .total_cmp(&other.magnitude)
            .then(self.index.cmp(&other.index))
            .then(self.step.total_cmp(&other.step))
            .then(self.label.cmp(&other.label))
    }
}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Marker pixel for each center: rounded half-up, clamped into the grid.
pub fn marker_pixels(centers: &[CenterCandidate], width: usize, height: usize) -> Vec<usize> {
    centers
        .iter()
        .map(|c| {
            let x = round_half_up(c.x).clamp(0, width as i64 - 1) as usize;
            let y = round_half_up(c.y).clamp(0, height as i64 - 1) as usize;
            y * width + x
        })
        .collect()
}

/// Flood foreground pixels (`|D| >= eps_bg`) from the center markers in
/// ascending magnitude order, ties by row-major index, over 4-connectivity.
///
/// Seeds are the marker pixels (a marker shared by two centers stays with
/// the lower index) and the near-zero pixels within `r_cm` of a center, the
/// same rescue rule the assignment step uses. Unreached foreground stays
/// background.
pub fn watershed_assign(
    vm: &VectorMap,
    centers: &[CenterCandidate],
    params: &DecodeParams,
) -> InstanceLabelMap {
    let dims = vm.dims();
    let mut labels = Grid::filled(dims, 0u16);
    if centers.is_empty() {
        return labels;
    }
    let mag = magnitude_map(vm);
    let mag = mag.as_slice();
    let foreground: Vec<bool> = mag.iter().map(|&m| m as f64 >= params.eps_bg).collect();
    let out = labels.as_mut_slice();
    let mut done = vec![false; out.len()];
    let mut heap = BinaryHeap::new();
    let seed = |i: usize, label: u16| {
        Reverse(Level {
            magnitude: mag[i],
            index: i,
            step: 0.0,
            label,
        })
    };

    for (k, &m) in marker_pixels(centers, dims.width, dims.height)
        .iter()
        .enumerate()
    {
        if out[m] == 0 {
            out[m] = (k + 1) as u16;
            heap.push(seed(m, out[m]));
        }
    }
    let near = CenterIndex::new(centers, params.r_cm);
    for i in 0..out.len() {
        if out[i] != 0 || foreground[i] {
            continue;
        }
        let p = dims.coord(i);
        if let Some(k) = near.nearest(p.x as f64, p.y as f64) {
            out[i] = (k + 1) as u16;
            heap.push(seed(i, out[i]));
        }
    }

    let (w, h) = (dims.width, dims.height);
    while let Some(Reverse(Level { index, label, .. })) = heap.pop() {
        if done[index] {
            continue;
        }
        done[index] = true;
        if out[index] == 0 {
            out[index] = label;
        }
        let label = out[index];
        let (x, y) = (index % w, index / w);
        let mut visit = |n: usize| {
            if out[n] == 0 && !done[n] && foreground[n] {
                heap.push(Reverse(Level {
                    magnitude: mag[n],
                    index: n,
                    step: (mag[n] - mag[index]).abs(),
                    label,
                }));
            }
        };
        if y > 0 {
            visit(index - w);
        }
        if x > 0 {
            visit(index - 1);
        }
        if x + 1 < w {
            visit(index + 1);
        }
        if y + 1 < h {
            visit(index + w);
        }
    }
    labels
}
