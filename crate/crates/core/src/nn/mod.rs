//! A small, single-threaded f64 tensor engine: exactly the operations the
//! multi-scale network needs, each with a hand-derived backward pass that is
//! verified against central finite differences (see [`gradcheck`]).
//!
//! Convolutions lower to GEMM via im2col; the GEMM kernels in [`matmul`] are
//! register-tiled and cache-blocked because the whole pipeline runs on one
//! core. All math is f64 so the gradient checks can use tight tolerances.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod matmul;
pub mod ops;
pub mod pool;
pub mod serialize;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{Conv2d, Conv2dScratch};
pub use dense::{Dense, StreamingDense};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{weighted_bce, weighted_bce_logits, BceTerms};
pub use ops::{concat_channels, relu_backward, relu_inplace, sigmoid, sigmoid_backward, split_channels};
pub use pool::MaxPool3x3;
pub use serialize::{read_param_snapshot, write_param_snapshot, NamedTensor, NamedTensorRef};
pub use tensor::{Param, Tensor};
