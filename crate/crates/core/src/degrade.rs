//! Seeded degradation of vector maps: per-component Gaussian noise and box blur.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DisplacementVector, Grid, VectorMap};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise std-dev on foreground components, in pixels.
    pub sigma_fg: f64,
    /// Noise std-dev on background components, in pixels.
    pub sigma_bg: f64,
    pub blur_radius: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma_fg", self.sigma_fg), ("sigma_bg", self.sigma_bg)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Add independent Gaussian noise to every component.
///
/// Samples are drawn from one ChaCha8 stream seeded by `spec.seed`, in
/// row-major pixel order, `dx` before `dy`. A sample is drawn for every
/// component even when its sigma is zero, so the stream position of a pixel
/// never depends on the mask.
pub fn gaussian_perturb(
    vm: &VectorMap,
    fg_mask: &Grid<bool>,
    spec: &NoiseSpec,
) -> Result<VectorMap> {
    spec.validate()?;
    if fg_mask.dims() != vm.dims() {
        return Err(Error::DimMismatch {
            expected: vm.dims().to_string(),
            actual: fg_mask.dims().to_string(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sample = |sigma: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * sigma
    };
    let vectors = vm
        .as_slice()
        .iter()
        .zip(fg_mask.as_slice())
        .map(|(v, &fg)| {
            let sigma = if fg { spec.sigma_fg } else { spec.sigma_bg };
            let nx = sample(sigma);
            let ny = sample(sigma);
            if sigma == 0.0 {
                *v
            } else {
                DisplacementVector::new((v.dx as f64 + nx) as f32, (v.dy as f64 + ny) as f32)
            }
        })
        .collect();
    VectorMap::from_vec(vm.dims(), vectors)
}

/// Symmetric reflection of `i` into `0..n` (`-1 -> 0`, `n -> n - 1`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn blur_line(src: &[f64], dst: &mut [f64], radius: usize) {
    let n = src.len();
    let r = radius as i64;
    let norm = (2 * radius + 1) as f64;
    for (i, out) in dst.iter_mut().enumerate() {
        let i = i as i64;
        let sum: f64 = (i - r..=i + r).map(|j| src[reflect(j, n)]).sum();
        *out = sum / norm;
    }
}

/// Separable mean filter over a `(2r+1)^2` window, per component, with
/// symmetric edge reflection.
pub fn box_blur(vm: &VectorMap, radius: usize) -> VectorMap {
    if radius == 0 {
        return vm.clone();
    }
    let dims = vm.dims();
    let (w, h) = (dims.width, dims.height);
    let mut planes = [
        vm.as_slice()
            .iter()
            .map(|v| v.dx as f64)
            .collect::<Vec<_>>(),
        vm.as_slice()
            .iter()
            .map(|v| v.dy as f64)
            .collect::<Vec<_>>(),
    ];
    for plane in planes.iter_mut() {
        let mut tmp = vec![0.0; w.max(h)];
        for y in 0..h {
            blur_line(&plane[y * w..(y + 1) * w], &mut tmp[..w], radius);
            plane[y * w..(y + 1) * w].copy_from_slice(&tmp[..w]);
        }
        let mut col = vec![0.0; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = plane[y * w + x];
            }
            blur_line(&col, &mut tmp[..h], radius);
            for y in 0..h {
                plane[y * w + x] = tmp[y];
            }
        }
    }
    let vectors = planes[0]
        .iter()
        .zip(&planes[1])
        .map(|(&dx, &dy)| DisplacementVector::new(dx as f32, dy as f32))
        .collect();
    VectorMap::from_vec(dims, vectors).expect("blur of finite values is finite")
}

/// Blur, then add noise.
pub fn degrade(vm: &VectorMap, fg_mask: &Grid<bool>, spec: &NoiseSpec) -> Result<VectorMap> {
    let blurred = box_blur(vm, spec.blur_radius);
    gaussian_perturb(&blurred, fg_mask, spec)
}
