//! File formats: PGM/PPM images, `WFPN` feature tensors and lane text files.

mod lanefile;
mod pnm;
mod tensor;

pub use lanefile::{
    format_lanes, parse_lanes, read_lanes, write_lanes, LaneFile, Lanes, CULANE_HEIGHT, CULANE_WIDTH,
};
pub use pnm::{decode_image, encode_image, read_image, write_image, ImageU8};
pub use tensor::{
    decode_tensor, decode_tensors, encode_tensor, read_tensor, read_tensors, write_tensor,
    write_tensors, FeatureMap, TENSOR_MAGIC,
};
