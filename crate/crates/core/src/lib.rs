#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod jets;
pub mod kernels;
pub mod linalg;
pub mod manifolds;
pub mod oracle;
pub mod points;
pub mod special;
pub mod stein;
pub mod targets;

pub use error::{Error, Result};
