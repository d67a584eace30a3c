//! HTTP and server-sent-event service over a live velocity market.
//!
//! All mutations go through one session thread; reads are served from the
//! snapshot taken after the most recent block.

pub mod api;
pub mod config;
pub mod error;
pub mod session;

pub use api::{router, AppState};
pub use config::{Config, ConfigError, Mode};
pub use error::ApiError;
pub use session::{ServiceEvent, Session, SessionError, Snapshot};

/// Starts a session for `config` and returns it with its router.
pub fn app(config: Config) -> Result<(Session, axum::Router), SessionError> {
    let session = Session::start(config)?;
    let router = router(AppState::new(&session));
    Ok((session, router))
}
