#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod pipeline;
pub mod estimate;
pub mod weights;
pub mod synth;
