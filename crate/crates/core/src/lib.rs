//! FDTD toolkit for a microfluidic graphene-liquid beam-reconfigurable
//! antenna: materials, geometry, solver, port extraction and far fields.

pub mod config;
pub mod constants;
pub mod error;
pub mod farfield;
pub mod fdtd;
pub mod materials;
pub mod output;
pub mod oracle;
pub mod ports;
pub mod runner;
pub mod scene;

pub use error::{Error, Result};
