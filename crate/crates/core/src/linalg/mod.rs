//! Dense LU, CSR storage, ILU(0) and Krylov solvers.

mod dense;
mod ilu;
mod krylov;
pub mod mtx;
mod sparse;

pub use dense::{lu_factor, lu_solve, DenseMatrix, LuFactors, PIVOT_TOLERANCE};
pub use ilu::{ilu0, IdentityPreconditioner, Ilu0Factors, Preconditioner};
pub use krylov::{bicgstab, gmres, KrylovConfig, SolveInfo};
pub use mtx::{read_matrix_market, write_matrix_market};
pub use sparse::CsrMatrix;
