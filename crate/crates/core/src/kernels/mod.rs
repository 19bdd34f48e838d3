//! Slice-level forward and backward routines behind the tape operations.
//!
//! Every routine here is a pure function of its inputs. Layout is always
//! row-major `[N, C, H, W]`.

pub mod conv;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod resample;
