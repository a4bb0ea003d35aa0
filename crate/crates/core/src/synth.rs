//! Painter's-order rasterization of rectangles and ellipses.
//!
//! Shapes are drawn in list order and later shapes overwrite earlier ones,
//! so a thin shape drawn across an earlier one splits it into disjoint
//! parts that still share one id. Instance ids are 1-based list positions
//! and are not compacted.
//!
//! Scene files are TOML:
//!
//! ```toml
//! height = 128
//! width = 128
//! seed = 0
//!
//! [[shapes]]
//! kind = "rect"          # or "ellipse"
//! center = [40.0, 30.0]  # x, y in pixels
//! half_extents = [12.0, 8.0]
//! class_id = 1
//! ```

use std::collections::VecDeque;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{instance_anchors, Anchor};
use crate::error::{Error, Result};
use crate::grid::{ClassMap, Grid, GridDims, InstanceLabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    /// `[x, y]` in pixels.
    pub center: [f64; 2],
    /// `[a, b]` half-width and half-height in pixels.
    pub half_extents: [f64; 2],
    pub class_id: u16,
}

impl Shape {
    fn contains(&self, x: usize, y: usize) -> bool {
        let (px, py) = (x as f64, y as f64);
        let [cx, cy] = self.center;
        let [a, b] = self.half_extents;
        match self.kind {
            ShapeKind::Rect => px >= cx - a && px < cx + a && py >= cy - b && py < cy + b,
            ShapeKind::Ellipse => {
                let u = (px - cx) / a;
                let v = (py - cy) / b;
                u * u + v * v <= 1.0
            }
        }
    }

    /// Inclusive pixel window covering the shape, clipped to `dims`.
    fn window(&self, dims: GridDims) -> Option<(usize, usize, usize, usize)> {
        let [cx, cy] = self.center;
        let [a, b] = self.half_extents;
        let x0 = (cx - a).floor().max(0.0);
        let y0 = (cy - b).floor().max(0.0);
        let x1 = (cx + a).ceil().min(dims.width as f64 - 1.0);
        let y1 = (cy + b).ceil().min(dims.height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shapes: Vec<Shape>,
}

impl SceneSpec {
    pub fn new(dims: GridDims, seed: u64) -> Self {
        Self {
            height: dims.height,
            width: dims.width,
            seed,
            shapes: Vec::new(),
        }
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.height, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()?;
        if self.shapes.len() > u16::MAX as usize {
            return Err(Error::InvalidParam(format!(
                "{} shapes exceed the 16-bit id range",
                self.shapes.len()
            )));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            let finite = s
                .center
                .iter()
                .chain(&s.half_extents)
                .all(|v| v.is_finite());
            if !finite || s.half_extents[0] < 1.0 || s.half_extents[1] < 1.0 {
                return Err(Error::InvalidParam(format!(
                    "shape {}: half extents must be finite and >= 1 px",
                    i + 1
                )));
            }
            if s.class_id == 0 {
                return Err(Error::InvalidParam(format!(
                    "shape {}: class_id must be >= 1",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::InvalidParam(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }
}

/// Rasterize the shapes in list order. Returns the instance map (id = list
/// position) and the class map.
pub fn generate_scene(spec: &SceneSpec) -> Result<(InstanceLabelMap, ClassMap)> {
    spec.validate()?;
    let dims = spec.dims()?;
    let mut ids = Grid::filled(dims, 0u16);
    let mut classes = Grid::filled(dims, 0u16);
    for (k, shape) in spec.shapes.iter().enumerate() {
        let id = (k + 1) as u16;
        let mut painted = 0usize;
        if let Some((x0, y0, x1, y1)) = shape.window(dims) {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if shape.contains(x, y) {
                        ids.set(x, y, id);
                        classes.set(x, y, shape.class_id);
                        painted += 1;
                    }
                }
            }
        }
        if painted == 0 {
            warn!("shape {id} lies outside the {dims} grid");
        }
    }
    Ok((ids, classes))
}

pub const DEFAULT_CLASSES: u16 = 8;

fn random_shape<R: Rng>(rng: &mut R, dims: GridDims, size_range: (f64, f64)) -> Shape {
    let (lo, hi) = size_range;
    let area = if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    };
    let aspect: f64 = rng.random_range(0.5..=2.0);
    let kind = if rng.random_bool(0.5) {
        ShapeKind::Rect
    } else {
        ShapeKind::Ellipse
    };
    let base = match kind {
        ShapeKind::Rect => area / (4.0 * aspect),
        ShapeKind::Ellipse => area / (std::f64::consts::PI * aspect),
    };
    let b = base.sqrt().max(1.0);
    let a = (aspect * b).max(1.0);
    let cx = rng.random_range(0.0..dims.width as f64);
    let cy = rng.random_range(0.0..dims.height as f64);
    let class_id = rng.random_range(1..=DEFAULT_CLASSES);
    Shape {
        kind,
        center: [cx, cy],
        half_extents: [a, b],
        class_id,
    }
}

/// Seeded uniform draws of kind, center, area (`size_range` in pixels),
/// aspect ratio in `[0.5, 2]` and class in `1..=8`.
pub fn random_scene(
    dims: GridDims,
    n_shapes: usize,
    size_range: (f64, f64),
    seed: u64,
) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SceneSpec::new(dims, seed);
    spec.shapes = (0..n_shapes)
        .map(|_| random_shape(&mut rng, dims, size_range))
        .collect();
    spec
}

/// Requirements a generated scene must satisfy after rasterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConstraints {
    /// Surviving pixel count per instance, inclusive.
    pub min_pixels: usize,
    pub max_pixels: usize,
    /// Pairwise center-of-mass distance must exceed this.
    pub min_center_distance: f64,
}

impl SceneConstraints {
    pub fn check(&self, lm: &InstanceLabelMap, n_shapes: usize) -> bool {
        let anchors = instance_anchors(lm, Anchor::CenterOfMass);
        if anchors.len() != n_shapes {
            return false;
        }
        let sized = anchors
            .values()
            .all(|&(_, n)| (n as usize) >= self.min_pixels && (n as usize) <= self.max_pixels);
        if !sized {
            return false;
        }
        let centers: Vec<_> = anchors.values().map(|(c, _)| *c).collect();
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d = (centers[i].x - centers[j].x).hypot(centers[i].y - centers[j].y);
                if d <= self.min_center_distance {
                    return false;
                }
            }
        }
        true
    }
}

const ATTEMPTS_PER_SHAPE: usize = 64;

/// A bar crossing `target` through a point near its center, spanning past it.
fn occluder_for<R: Rng>(rng: &mut R, target: &Shape) -> Shape {
    let [cx, cy] = target.center;
    let [a, b] = target.half_extents;
    let thickness = rng.random_range(1.0..=2.0);
    let vertical = rng.random_bool(0.5);
    let class_id = rng.random_range(1..=DEFAULT_CLASSES);
    if vertical {
        let x = cx + rng.random_range(-0.4..=0.4) * a;
        // extend past one side so the bar's own center is off the target's
        let extra = rng.random_range(0.6..=1.6) * b;
        let (y0, y1) = if rng.random_bool(0.5) {
            (cy - b - 2.0, cy + b + extra)
        } else {
            (cy - b - extra, cy + b + 2.0)
        };
        Shape {
            kind: ShapeKind::Rect,
            center: [x, (y0 + y1) / 2.0],
            half_extents: [thickness, (y1 - y0) / 2.0],
            class_id,
        }
    } else {
        let y = cy + rng.random_range(-0.4..=0.4) * b;
        let extra = rng.random_range(0.6..=1.6) * a;
        let (x0, x1) = if rng.random_bool(0.5) {
            (cx - a - 2.0, cx + a + extra)
        } else {
            (cx - a - extra, cx + a + 2.0)
        };
        Shape {
            kind: ShapeKind::Rect,
            center: [(x0 + x1) / 2.0, y],
            half_extents: [(x1 - x0) / 2.0, thickness],
            class_id,
        }
    }
}

/// Rejection-sampled scene whose rasterization satisfies `constraints`.
///
/// Up to `n_shapes` random shapes are placed one at a time; a draw that
/// breaks the constraints is discarded and redrawn a bounded number of
/// times. Then up to `n_splits` thin bars are drawn across earlier shapes so
/// that each splits its target into disjoint parts. The result may hold
/// fewer shapes than requested when the grid is crowded.
pub fn well_posed_scene(
    dims: GridDims,
    n_shapes: usize,
    n_splits: usize,
    size_range: (f64, f64),
    constraints: &SceneConstraints,
    seed: u64,
) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SceneSpec::new(dims, seed);
    let accept = |spec: &SceneSpec| {
        generate_scene(spec)
            .map(|(lm, _)| constraints.check(&lm, spec.shapes.len()))
            .unwrap_or(false)
    };
    for _ in 0..n_shapes {
        for _ in 0..ATTEMPTS_PER_SHAPE {
            spec.shapes.push(random_shape(&mut rng, dims, size_range));
            if accept(&spec) {
                break;
            }
            spec.shapes.pop();
        }
    }
    let mut splits = 0;
    let mut attempts = 0;
    while splits < n_splits
        && attempts < ATTEMPTS_PER_SHAPE * n_splits.max(1)
        && !spec.shapes.is_empty()
    {
        attempts += 1;
        let target_idx = rng.random_range(0..spec.shapes.len());
        let target = spec.shapes[target_idx];
        let bar = occluder_for(&mut rng, &target);
        spec.shapes.push(bar);
        let ok = generate_scene(&spec).is_ok_and(|(lm, _)| {
            constraints.check(&lm, spec.shapes.len())
                && split_instances(&lm).contains(&((target_idx + 1) as u16))
        });
        if ok {
            splits += 1;
        } else {
            spec.shapes.pop();
        }
    }
    spec
}

/// 4-connected components of equal nonzero id. Returns per-pixel component
/// labels (0 = background) and the component count.
pub fn connected_components(lm: &InstanceLabelMap) -> (Grid<u32>, u32) {
    let dims = lm.dims();
    let (w, h) = (dims.width, dims.height);
    let ids = lm.as_slice();
    let mut comp = vec![0u32; ids.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..ids.len() {
        if ids[start] == 0 || comp[start] != 0 {
            continue;
        }
        next += 1;
        comp[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let neighbors = [
                (y > 0).then(|| i - w),
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y + 1 < h).then(|| i + w),
            ];
            for n in neighbors.into_iter().flatten() {
                if comp[n] == 0 && ids[n] == ids[i] {
                    comp[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    (Grid::from_vec(dims, comp).expect("same dims"), next)
}

/// Ids whose pixels form more than one 4-connected component.
pub fn split_instances(lm: &InstanceLabelMap) -> Vec<u16> {
    let (comp, n) = connected_components(lm);
    let mut owner = vec![0u16; n as usize + 1];
    for (&c, &id) in comp.as_slice().iter().zip(lm.as_slice()) {
        owner[c as usize] = id;
    }
    let mut parts = vec![0u32; u16::MAX as usize + 1];
    for &id in &owner[1..] {
        parts[id as usize] += 1;
    }
    (1..=u16::MAX)
        .filter(|&id| parts[id as usize] > 1)
        .collect()
}
