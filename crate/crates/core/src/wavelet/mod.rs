//! Wavelet-enhanced feature fusion.
//!
//! A one-level Haar transform splits features into a low-frequency band
//! (LL) and three detail bands. The non-local block runs on LL, the details
//! pass through, and the inverse transform restores full resolution. The
//! result is blended with the plain branch and refined by a 3x3 conv.

mod fusion;
mod haar;
mod nonlocal;
mod weights;

pub use fusion::{blend, fuse, refine_conv, FusionConfig};
pub use haar::{dwt2, idwt2, Subbands};
pub use nonlocal::{attention_map, nonlocal_block, wavelet_nonlocal, AttentionMap};
pub use weights::{make_weights, read_weights, write_weights, BlockWeights, XorShift64Star};
