use std::collections::HashMap;

use super::cluster::CenterCandidate;
use super::vote::endpoint;
use super::DecodeParams;
use crate::grid::{Grid, InstanceLabelMap, VectorMap};

/// Bucketed lookup of the nearest center within a fixed radius.
/// Ties in distance go to the lower center index.
pub(crate) struct CenterIndex<'a> {
    centers: &'a [CenterCandidate],
    cell: f64,
    radius2: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> CenterIndex<'a> {
    pub(crate) fn new(centers: &'a [CenterCandidate], radius: f64) -> Self {
        let cell = radius.max(1.0);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in centers.iter().enumerate() {
            buckets
                .entry(((c.x / cell).floor() as i64, (c.y / cell).floor() as i64))
                .or_default()
                .push(i);
        }
        Self {
            centers,
            cell,
            radius2: radius * radius,
            buckets,
        }
    }

    pub(crate) fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let bx = (x / self.cell).floor();
        let by = (y / self.cell).floor();
        // far outside any representable bucket
        if !bx.is_finite() || !by.is_finite() || bx.abs() > 1e15 || by.abs() > 1e15 {
            return None;
        }
        let (bx, by) = (bx as i64, by as i64);
        let mut best: Option<(f64, usize)> = None;
        for ny in by - 1..=by + 1 {
            for nx in bx - 1..=bx + 1 {
                let Some(list) = self.buckets.get(&(nx, ny)) else {
                    continue;
                };
                for &i in list {
                    let c = &self.centers[i];
                    let d2 = (c.x - x) * (c.x - x) + (c.y - y) * (c.y - y);
                    if d2 > self.radius2 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        best = Some((d2, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Label each pixel with the nearest center (labels `1..=K` in center order).
///
/// Pixels with `|D| >= eps_bg` are judged by their endpoint, which must lie
/// within `et` of the center. Pixels below `eps_bg` are only kept when the
/// pixel itself lies within `r_cm` of a center; this recovers the pixel
/// sitting on a center of mass, whose vector is near zero.
pub fn assign_pixels(
    vm: &VectorMap,
    centers: &[CenterCandidate],
    params: &DecodeParams,
) -> InstanceLabelMap {
    let dims = vm.dims();
    let mut labels = Grid::filled(dims, 0u16);
    if centers.is_empty() {
        return labels;
    }
    let by_endpoint = CenterIndex::new(centers, params.et);
    let by_position = CenterIndex::new(centers, params.r_cm);
    let out = labels.as_mut_slice();
    for (i, v) in vm.as_slice().iter().enumerate() {
        let p = dims.coord(i);
        let hit = if v.magnitude() as f64 >= params.eps_bg {
            let (ex, ey) = endpoint(p.x, p.y, v.dx, v.dy);
            by_endpoint.nearest(ex, ey)
        } else {
            by_position.nearest(p.x as f64, p.y as f64)
        };
        if let Some(k) = hit {
            out[i] = (k + 1) as u16;
        }
    }
    labels
}
