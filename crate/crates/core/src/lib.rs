pub mod cli;
pub mod ensembles;
pub mod entropy;
pub mod error;
mod gemm;
pub mod matrix;
pub mod measures;
pub mod microstates;
pub mod models;
pub mod report;
pub mod schur;
pub mod seed;
pub mod spectral;
pub mod svg;
