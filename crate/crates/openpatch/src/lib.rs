//! File formats, reports and the command-line front end for
//! [`openpatch_core`].

pub mod classes;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod opbk;
pub mod report;

pub use error::FormatError;
