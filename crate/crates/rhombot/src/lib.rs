//! File formats, trajectory export, measurement evaluation and the planning
//! session service for the rhombot simulator. The kinematics and engine live
//! in `rhombot-core`.

pub mod cli;
pub mod error;
pub mod measurement;
pub mod scenario;
pub mod script;
pub mod server;
pub mod session;
pub mod svg;
pub mod trajectory;

pub use error::{Error, ExitCode};
