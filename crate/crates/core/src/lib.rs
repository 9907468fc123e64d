pub mod cli;
pub mod eigen;
pub mod error;
pub mod geom;
pub mod gpmap;
pub mod io;
pub mod record;
pub mod sim;
pub mod slam;

pub use error::{Error, Result};
