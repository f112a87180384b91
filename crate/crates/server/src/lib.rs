//! HTTP API over the review store and engine.
//!
//! Requests carry a bearer token from `POST /auth/login`. Each route is
//! listed with the rank it needs in [`access::ROUTES`]; the generic
//! `/projects/{p}/entities/{entity}` routes dispatch any entity
//! configuration of the installed schema to one controller per operation.

pub mod access;
mod app;
pub mod config;
mod entities;
pub mod error;
mod extract;
mod handlers;
pub mod session;

pub use app::{router, AppState};
pub use config::Config;
pub use error::ApiError;
