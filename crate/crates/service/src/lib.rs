//! HTTP service, token authentication and administrative CLI.

pub mod api;
pub mod app;
pub mod auth;
pub mod cli;
pub mod error;
pub mod server;

pub use app::{AppParts, AppState};
pub use server::RunningServer;
