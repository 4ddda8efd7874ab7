//! Partitioned linear algebra: maps, import plans, multivectors and
//! row-distributed sparse matrices.

pub mod csr;
pub mod local;
pub mod map;
pub mod multivector;
pub mod plan;

pub use csr::CsrMatrix;
pub use local::{DenseLu, LocalCsr};
pub use map::{Gid, Lid, Map};
pub use multivector::MultiVector;
pub use plan::{CombineMode, ImportPlan, Pack, RowSet, Unpack};
