//! Point cloud geometry codec: octree decomposition, per-leaf depth-map
//! projection, nine-mode lossy occupancy coding, a multi-resolution
//! Saab + vector-quantization depth coder, and Lagrangian split selection.

pub mod bits;
pub mod bitstream;
pub mod codec;
pub mod config;
pub mod error;
pub mod gic;
pub mod leaf;
pub mod occupancy;
pub mod octree;
pub mod pointcloud;
pub mod projection;
pub mod rdo;
pub mod synth;

pub use codec::{decode, decode_progressive, encode, EncodeStats, Encoded, PreparedInput};
pub use config::CodecConfig;
pub use error::{Error, Result};
pub use gic::{train_model, GicModel};
pub use pointcloud::{Point, PointCloud};
