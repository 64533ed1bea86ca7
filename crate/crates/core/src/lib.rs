//! Active-subspace uncertainty propagation for differentiable feed-forward
//! networks.
//!
//! The pipeline draws a modest number of noisy inputs around a center point,
//! collects input gradients of a scalar quantity of interest, and
//! eigen-decomposes the averaged gradient outer product. A low-degree
//! polynomial fitted over the leading eigen-directions then stands in for the
//! network when estimating output statistics from many more draws.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod export;
pub mod model;
pub mod netcore;
pub mod numkit;
pub mod propagate;
pub mod subspace;
pub mod surface;
