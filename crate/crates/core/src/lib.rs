//! Link-level simulation of permutation and index modulation schemes:
//! combinatorial mappers, codebooks for coherent, differential, multicarrier
//! and optical variants, channel models, ML detection with operation
//! counting, and distance, mutual-information and error-probability metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod constellation;
pub mod detection;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod permutation;
pub mod schemes;

pub use error::{Error, Result};
pub use numerics::{CMatrix, SimRng, C64};
pub use schemes::{Scheme, SchemeConfig, SchemeKind, SpaceTimeCodeword};
