pub mod cli;
pub mod densities;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod likelihood;
pub mod optimize;
pub mod quadrature;
pub mod scales;
pub mod simulate;
pub mod special;
pub mod summary;
