//! On-disk formats. Values are computed in f64 and narrowed to little-endian f32 on disk.

mod atomic;
mod manifest;
mod params;
mod pgm;
mod ply;
mod report;
mod tensor;

pub use atomic::write_atomic;
pub use manifest::{read_manifest, write_manifest, Manifest};
pub use params::{narrow_params, read_params, write_params, PARAMS_MANIFEST};
pub use pgm::{decode_mask, encode_mask, encode_raw, read_mask, write_mask};
pub use ply::{decode_cloud, encode_cloud, read_cloud, write_cloud, PlyFormat};
pub use report::{
    decode_occlusion_table, decode_report, encode_occlusion_table, encode_report, encode_trace, read_report,
    write_report,
};
pub use tensor::{decode_tensor, encode_tensor, read_tensor, write_tensor, Tensor, TENSOR_MAGIC};
