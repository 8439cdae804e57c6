//! TSP with neighbourhoods over parallel vertical segments.

pub mod baseline;
pub mod cli;
pub mod error;
pub mod generate;
pub mod inner_dp;
pub mod geometry;
pub mod instance;
pub mod io;
pub mod oracle;
pub mod ptas;
pub mod structure;

pub use error::{Result, Stage, TspnError};
pub use geometry::{Binding, Point, Tour, TourPoint};
pub use instance::{Instance, Segment};
