//! Correlation-tensor analysis of finite-dimensional quantum states.
//!
//! The library decomposes a density matrix over a tensor-product basis of
//! traceless Hermitian generators, relates the squared norms of the resulting
//! correlation tensors to subsystem purities, and builds separability and
//! nonlocality tests on top of that link.  Supporting modules provide state
//! factories with seeded randomness, sweep/Monte-Carlo drivers with
//! deterministic CSV output, and a self-check suite.

pub mod basis;
pub mod criteria;
pub mod error;
pub mod experiments;
pub mod mat;
pub mod output;
pub mod purity;
pub mod states;
pub mod tensor;
pub mod validate;

pub use error::{Error, Result};
pub use mat::{CMatrix, DensityMatrix, PartitionScheme, Tolerances};
pub use num_complex::Complex64;
