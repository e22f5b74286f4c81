//! Toolchain for programmable magnetic pixel sheets.
//!
//! A sheet of soft magnetic material is written pixel by pixel with an
//! electromagnet carried by a plotter. This crate covers the whole path:
//!
//! - [`pattern`]: pixel grids, Hadamard constructions, complements.
//! - [`interaction`]: cross-correlation between two surfaces and the force it implies.
//! - [`pairs`]: selectively attracting pair sets and metapixel canvases.
//! - [`magnet`]: electromagnet response and sheet hysteresis.
//! - [`protocol`]: the line protocol between host and plotter.
//! - [`toolpath`]: plot/scan programs for the plotter.
//! - [`plotter`]: a simulated plotter that executes those programs.
//! - [`io`]: the `.mixel.json` pattern format, deltas and CSV export.

pub mod error;
pub mod interaction;
pub mod io;
pub mod magnet;
pub mod pairs;
pub mod pattern;
pub mod plotter;
pub mod protocol;
pub mod toolpath;

pub use error::{Error, Result};
