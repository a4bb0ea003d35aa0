use crate::grid::{GridDims, VectorMap};

/// Per-cell count of vector endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteAccumulator {
    dims: GridDims,
    counts: Vec<u32>,
}

impl VoteAccumulator {
    pub fn new(dims: GridDims) -> Self {
        Self {
            dims,
            counts: vec![0; dims.len()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[self.dims.index(x, y)]
    }

    pub fn add(&mut self, x: usize, y: usize, votes: u32) {
        let i = self.dims.index(x, y);
        self.counts[i] += votes;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[inline]
pub(crate) fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Endpoint `p + D_p` of a pixel, in continuous pixel coordinates.
#[inline]
pub(crate) fn endpoint(x: usize, y: usize, dx: f32, dy: f32) -> (f64, f64) {
    (x as f64 + dx as f64, y as f64 + dy as f64)
}

/// Every pixel with `|D| >= eps_bg` votes for the cell its endpoint rounds
/// to (half-up per axis). Endpoints outside the grid are dropped.
pub fn vote_accumulate(vm: &VectorMap, eps_bg: f64) -> VoteAccumulator {
    let dims = vm.dims();
    let mut acc = VoteAccumulator::new(dims);
    for (i, v) in vm.as_slice().iter().enumerate() {
        if (v.magnitude() as f64) < eps_bg {
            continue;
        }
        let p = dims.coord(i);
        let (ex, ey) = endpoint(p.x, p.y, v.dx, v.dy);
        let (cx, cy) = (round_half_up(ex), round_half_up(ey));
        if dims.contains(cx, cy) {
            acc.counts[cy as usize * dims.width + cx as usize] += 1;
        }
    }
    acc
}
