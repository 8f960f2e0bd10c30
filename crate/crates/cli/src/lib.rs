//! Command-line runner and HTTP annotation service on top of `rsvp_core`.

pub mod commands;
pub mod service;

use rsvp_core::ErrorClass;

/// Process exit code for a failed command. Usage errors exit with 2 (clap).
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let class = err
        .chain()
        .find_map(|e| e.downcast_ref::<rsvp_core::Error>())
        .map(rsvp_core::Error::class);
    match class {
        Some(ErrorClass::Io) => 3,
        Some(ErrorClass::Format) => 4,
        Some(ErrorClass::Data) => 5,
        Some(ErrorClass::Precondition) => 6,
        Some(ErrorClass::Numeric) => 7,
        None => 1,
    }
}
