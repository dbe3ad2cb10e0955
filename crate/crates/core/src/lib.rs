//! Exact and numeric verification of flat structures: extended WDVV
//! potential vector fields, Saito/Okubo matrices, logarithmic vector fields,
//! Painlevé VI extraction, Schlesinger systems and middle convolution.

pub mod catalog;
pub mod cli;
pub mod exprio;
pub mod flatcore;
pub mod isomono;
pub mod linalg;
pub mod logvf;
pub mod midconv;
pub mod p6;
pub mod ring;
