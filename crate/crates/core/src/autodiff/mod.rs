//! Dense arrays, differentiable primitives and reverse-mode gradients.

mod array;
pub mod gradcheck;
pub mod kernels;
mod params;
mod tape;

pub use array::NumArray;
pub use gradcheck::{compare_gradients, grad_check, relative_error, GradCheckReport};
pub use kernels::{
    conv1d_valid, highway_graph, highway_layer, lstm_cell, lstm_cell_graph, max_over_time,
    softmax, HighwayWeights, LstmWeights,
};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{Activation, Tape, Var};

pub(crate) use array::{dot, matvec_into, sigmoid};
