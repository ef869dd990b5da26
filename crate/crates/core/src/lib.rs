pub mod numkernel;
pub mod dataset;
pub mod ols;
pub mod crve;
pub mod inference;
pub mod diagnostics;
pub mod simlab;
pub mod cli;
