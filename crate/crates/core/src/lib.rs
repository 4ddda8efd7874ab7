//! Distributed-memory style sparse solvers on simulated ranks.
//!
//! Ranks are threads started by [`comm::launch`]; every distributed object
//! is built from a [`linalg::Map`] that records which rank owns which global
//! index. On top of that sit Krylov solvers, smoothers, domain decomposition
//! and algebraic multigrid preconditioners, forward-mode automatic
//! differentiation, Newton and Anderson nonlinear solvers, and Runge-Kutta
//! and BDF time integrators.

mod codec;
pub mod amg;
pub mod autodiff;
pub mod comm;
pub mod error;
pub mod gdsw;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod nonlinear;
pub mod paramlist;
pub mod smoothers;
pub mod timeint;

pub use comm::{launch, Comm, ReduceOp};
pub use error::{Error, ParamError, Result};
pub use linalg::{CombineMode, CsrMatrix, ImportPlan, Map, MultiVector};
pub use paramlist::{ParameterList, ParameterValue};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/ranks-and-maps.md")]
    mod ranks_and_maps {}
    #[doc = include_str!("../../../book/src/krylov.md")]
    mod krylov {}
    #[doc = include_str!("../../../book/src/preconditioners.md")]
    mod preconditioners {}
    #[doc = include_str!("../../../book/src/nonlinear.md")]
    mod nonlinear {}
    #[doc = include_str!("../../../book/src/time-integration.md")]
    mod time_integration {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
