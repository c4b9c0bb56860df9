//! File formats: depth PGM and NumPy input, PLY output, joint CSV and manifests,
//! `PPNC` checkpoints.

mod checkpoint;
mod joints;
mod npy;
mod pgm;
mod ply;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, encoded_len, load_checkpoint, save_checkpoint,
    FORMAT_VERSION, MAGIC,
};
pub use joints::{
    format_joints_csv, parse_joints_csv, parse_manifest, read_joints_csv, read_manifest,
    write_joints_csv, write_manifest, ManifestEntry, JOINTS_HEADER,
};
pub use npy::{decode_npy, read_npy, NpyArray};
pub use pgm::{decode_depth_pgm, encode_depth_pgm, read_depth_pgm, write_depth_pgm};
pub use ply::{write_ply, write_ply_to};
