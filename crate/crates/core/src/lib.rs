#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geom;
pub mod hknn;
pub mod octvox;
pub mod par;
pub mod pipeline;
pub mod registration;
pub mod synth;
