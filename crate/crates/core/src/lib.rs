#![no_std]
#![cfg_attr(docsrs, feature(doc_cfg))]
// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! User-oriented robustness (UOR) for parameterized MDPs.
//!
//! A parameterized MDP draws an environment parameter `p` from a distribution
//! over a hyperrectangle once per trajectory. The UOR metric ranks the
//! policy's expected return across parameters and weights each parameter by a
//! non-increasing preference function of that rank, so a single robustness
//! degree `k` moves the objective from the plain expectation (`k = 0`) towards
//! the worst case (`k -> inf`).
//!
//! The crate is `no_std` with `alloc`. Modules:
//!
//! - [`space`]: parameter hyperrectangle, distributions, grid division into
//!   blocks, block masses, and the drifting parameter process.
//! - [`preference`]: preference functions, closed-form weight integrals and the
//!   exact metric over finite supports.
//! - [`env`]: the PMDP abstraction, two environments, rollouts and the exact
//!   return oracle for the chain.
//! - [`metric`]: distribution-based and distribution-free metric estimators.
//! - [`policy`] and [`trainer`]: policies, the weighted score-function update
//!   and the training loops.
//!
//! Enable the `parallel` feature to collect per-block and per-cluster rollouts
//! on the rayon thread pool. Results do not depend on the thread count since
//! every unit owns its own random stream.

extern crate alloc;

pub mod env;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod policy;
pub mod preference;
pub mod rng;
pub mod space;
pub mod trainer;

pub use crate::error::{Error, Result};
pub use crate::metric::{MetricMode, MetricReport};
pub use crate::policy::Policy;
pub use crate::preference::{PreferenceSpec, RankedLedger};
pub use crate::space::{Block, ParamDistribution, ParameterSpace};
