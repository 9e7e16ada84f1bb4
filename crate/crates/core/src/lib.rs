// `!(x > 0.0)` is used on purpose so NaN inputs fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bench;
pub mod calibration;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod glr;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod rng;
pub mod score;
pub mod simulate;
pub mod linalg;
pub mod scan;
