#![allow(
    clippy::needless_range_loop,
    clippy::suspicious_arithmetic_impl,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod exec;
pub mod gen;
pub mod harness;
pub mod linalg;
pub mod maslov;
pub mod poisson;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod structures;
pub mod symexpr;
pub mod tensor;
