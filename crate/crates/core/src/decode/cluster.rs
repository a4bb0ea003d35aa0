use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::vote::VoteAccumulator;

/// A clustered center proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterCandidate {
    pub x: f64,
    pub y: f64,
    pub votes: u32,
}

impl CenterCandidate {
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    fn cmp_rank(&self, other: &Self) -> Ordering {
        other
            .votes
            .cmp(&self.votes)
            .then(self.y.total_cmp(&other.y))
            .then(self.x.total_cmp(&other.x))
    }
}

/// Greedy peak absorption.
///
/// Cells are visited by descending vote count (ties: lower row, then lower
/// column). An unclaimed cell becomes a peak and claims every unclaimed
/// voted cell within `dt` of it; the candidate sits at the vote-weighted
/// mean of the claimed cells. Output is sorted by votes descending, then
/// row-major position.
pub fn cluster_candidates(acc: &VoteAccumulator, dt: f64) -> Vec<CenterCandidate> {
    let dims = acc.dims();
    let counts = acc.counts();
    let mut order: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));

    let reach = dt.floor().min(dims.height.max(dims.width) as f64).max(0.0) as i64;
    let dt2 = dt * dt;
    let mut claimed = vec![false; counts.len()];
    let mut out = Vec::new();

    for peak in order {
        if claimed[peak] {
            continue;
        }
        let p = dims.coord(peak);
        let (px, py) = (p.x as i64, p.y as i64);
        let (mut sx, mut sy, mut total) = (0.0f64, 0.0f64, 0u64);
        for y in (py - reach).max(0)..=(py + reach).min(dims.height as i64 - 1) {
            let ddy = (y - py) as f64;
            for x in (px - reach).max(0)..=(px + reach).min(dims.width as i64 - 1) {
                let ddx = (x - px) as f64;
                if ddx * ddx + ddy * ddy > dt2 {
                    continue;
                }
                let i = y as usize * dims.width + x as usize;
                if claimed[i] || counts[i] == 0 {
                    continue;
                }
                claimed[i] = true;
                let c = counts[i] as f64;
                sx += c * x as f64;
                sy += c * y as f64;
                total += counts[i] as u64;
            }
        }
        let w = total as f64;
        out.push(CenterCandidate {
            x: sx / w,
            y: sy / w,
            votes: total.min(u32::MAX as u64) as u32,
        });
    }
    out.sort_by(CenterCandidate::cmp_rank);
    out
}

/// Keep candidates with at least `vt` votes, preserving order.
pub fn select_centers(candidates: &[CenterCandidate], vt: u32) -> Vec<CenterCandidate> {
    candidates
        .iter()
        .filter(|c| c.votes >= vt)
        .copied()
        .collect()
}
