//! Reverse-mode automatic differentiation over `f64` image tensors.
//!
//! The engine is deliberately small: tensors are dense row-major arrays,
//! image-like values are single samples laid out as `[C, H, W]`, and a
//! [`Graph`] is a tape that is built for one forward pass and then dropped.
//! Operations not provided here can be attached through [`CustomOp`].
//!
//! ```
//! use crossdepth_autograd::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.input(Tensor::new(vec![1, 1, 2], vec![1.0, -2.0]).unwrap());
//! let loss = g.mean(g.square(x));
//! let grads = g.backward(loss);
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, -2.0]);
//! ```

mod conv;
mod graph;
mod optim;
mod params;
mod spatial;
mod tensor;

pub use conv::{ConvSpec, PadMode};
pub use graph::{sigmoid, softplus, CustomOp, Gradients, Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use spatial::ResizeMode;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    ElementCount { shape: Vec<usize>, len: usize },
    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

/// Non-differentiable bilinear or nearest resize of a `[C, H, W]` tensor.
pub fn resize(input: &Tensor, height: usize, width: usize, mode: ResizeMode) -> Tensor {
    spatial::resize_forward(input, height, width, mode)
}
