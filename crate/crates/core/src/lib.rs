//! Parallel low-precision quantization toolkit.
//!
//! - [`quantizer`]: uniform quantizer with learnable bounds and STE gradients.
//! - [`bitdecomp`]: exact B-bit limb decomposition of M-bit products and the
//!   least-squares parallel approximation.
//! - [`tensorops`]: grouped convolution, cyclic permutation/shuffle, channel
//!   shuffle and group-level information-flow analysis.
//! - [`netmodel`]: ResNet/Plain graphs, the parallel-group transform and
//!   BitOps accounting.
//! - [`hwsim`]: cycle/traffic/energy simulator for 2-bit bit-parallel
//!   accelerators.
//! - [`verify`]: seeded property suites.
//! - [`cli`]: the `palquant` command-line front end.

pub mod bitdecomp;
pub mod cli;
pub mod hwsim;
pub mod matrix;
pub mod netmodel;
pub mod quantizer;
pub mod tensorops;
pub mod verify;
