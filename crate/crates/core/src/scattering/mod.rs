//! Generalized eigenfunctions of `−Δ + V`.

pub mod dilation;
pub mod grid;
pub mod nystrom;
pub mod partial_wave;
pub mod transform;
