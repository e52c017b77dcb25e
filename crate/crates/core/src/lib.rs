//! Geometry and ground-truth machinery for counting objects in
//! omnidirectional images.
//!
//! The pipeline reprojects equirectangular panoramas to stereographic
//! rasters ([`resample`]), renders density-map ground truth whose Gaussian
//! width adapts to the radial distortion of that projection ([`density`]),
//! augments stereographic images by rotate/divide/align ([`augment`]), crops
//! dataset unit areas ([`dataset`]) and scores predicted counts
//! ([`evalkit`]). [`synth`] renders synthetic plane scenes through the exact
//! projection chain and produces Tissot diagnostics.
//!
//! Data-parallel kernels run through [`exec::Execution`]; the `parallel`
//! feature (on by default) backs them with rayon. Results are identical for
//! every thread count.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod dataset;
pub mod density;
pub mod error;
pub mod evalkit;
pub mod exec;
pub mod geom;
pub mod raster;
pub mod resample;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
