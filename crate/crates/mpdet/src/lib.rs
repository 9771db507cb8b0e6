//! Arbitrary-precision determinants and column cofactors of leading
//! submatrices, computed in one elimination pass.

pub mod bench;
pub mod cli;
pub mod elim;
pub mod format;
pub mod gamma;
pub mod genmat;
pub mod matrix;
pub mod oracle;
pub mod paging;
pub mod parexec;
pub mod scalar;
pub mod study;

pub use elim::{eliminate, ElimError, ElimOptions, Elimination, Eliminator, MinorRow, MinorSeries, MinorSink, Pivoting};
pub use matrix::{AnyMatrix, Fingerprint, MatrixBuffer, MatrixError};
pub use scalar::{ExactRational, FloatScalar, Kind, PrecComplex, PrecReal, Precision, Scalar};
