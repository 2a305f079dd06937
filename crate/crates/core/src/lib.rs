pub mod adaptive;
pub mod c0ip;
pub mod cases;
pub mod control;
pub mod error;
pub mod estimator;
pub mod export;
pub mod kkt;
pub mod mesh;
pub mod p2;
pub mod quadrature;
pub mod study;

pub use error::{Error, Result};
