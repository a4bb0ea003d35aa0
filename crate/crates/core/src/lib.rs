//! Center-of-mass displacement encoding for instance segmentation.
//!
//! An instance label map is turned into a per-pixel field of 2D displacement
//! vectors that point at the center of mass of the instance each pixel
//! belongs to. A (possibly noisy) vector field is turned back into instance
//! masks by voting for centers, clustering the votes, and assigning pixels
//! whose vectors land near a surviving center.
//!
//! The crate is organised as a pipeline:
//!
//! 1. **grid** – label maps, vector maps, magnitudes and nearest-neighbor resampling.
//! 2. **encode** – center of mass (or bounding-box centroid) anchors and displacement fields.
//! 3. **decode** – voting, clustering, vote thresholding, and pixel assignment or watershed.
//! 4. **degrade** – seeded Gaussian noise and box blur to emulate network output.
//! 5. **synth** – painter's-order rectangle/ellipse scenes for ground truth.
//! 6. **eval** – IoU, greedy matching, and Average Precision.
//! 7. **io** – vecmap and 16-bit PGM codecs, Cityscapes id import, magnitude images.

pub mod decode;
pub mod degrade;
pub mod encode;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod synth;

pub use decode::{decode, decode_watershed, DecodeOutput, DecodeParams, DecodedInstance};
pub use encode::{encode, encode_bbox_centroid, Anchor};
pub use error::{Error, Result};
pub use grid::{
    ClassMap, DisplacementVector, Grid, GridDims, InstanceLabelMap, MagnitudeMap, PixelCoord,
    VectorMap,
};
