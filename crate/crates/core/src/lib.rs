//! Installation, storage and review workflow of systematic-review projects.
//!
//! A project is created from a validated configuration model: the
//! [`installer`] compiles the model into a [`installer::MigrationPlan`],
//! applies it to the [`store::Store`], and derives the entity
//! configurations and extraction form that drive the runtime. The
//! [`engine`] then runs screening and classification on top of the store.

pub mod engine;
pub mod error;
pub mod ids;
pub mod installer;
pub mod schema;
pub mod store;

pub use error::{Error, FieldViolation, Result};
pub use ids::{ElementId, ProjectId, RecordId, UserId};
