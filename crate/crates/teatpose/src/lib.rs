//! File formats, the threaded pipeline and the experiment harness around
//! `teatpose-core`.
//!
//! - [`ply`] and [`formats`]: point clouds as PLY; cameras, masks, poses,
//!   scenes and ground truth as JSON.
//! - [`pipeline`]: intake, segmentation, pose and gate stages on threads,
//!   with simulated latency.
//! - [`experiments`]: repeatability, camera distance-error curve and rate
//!   benchmark, written as versioned CSV plus SVG by [`report`].

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod pipeline;
pub mod ply;
pub mod report;

pub use error::{Error, Result};

/// Seed stream tags for [`derive_seed`].
pub const STREAM_FRAME: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_CAMERA: u64 = 3;
pub const STREAM_TARGET: u64 = 4;

/// Independent seed for item `index` of stream `stream` under a master
/// seed (splitmix64 finalizer over the mixed inputs).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
