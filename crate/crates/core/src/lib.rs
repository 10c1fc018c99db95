//! Any-resolution image generation with a coordinate- and scale-conditioned
//! patch generator.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`geometry`]: patch descriptions, coordinate grids, Fourier features and
//!   scale normalization.
//! * [`resample`]: Lanczos resampling, crops and the base-frame warp.
//! * [`datapipe`]: variable-resolution manifests, the patch sampling policy
//!   and dataset statistics.
//! * [`netcore`]: the generator, discriminator, tiled synthesis and
//!   checkpoints.
//! * [`train`]: losses and the two training phases.
//! * [`eval`]: Fréchet statistics, patch FID, extrapolation sweeps and
//!   radial spectra.

pub mod datapipe;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod netcore;
pub mod nn;
pub mod resample;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{CoordinateGrid, FourierBasis, PatchSpec};
pub use image::{Image, MaskedImage};
pub use rng::SeedStream;
