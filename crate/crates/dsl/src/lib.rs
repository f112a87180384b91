//! The `.relis` configuration language.
//!
//! A configuration describes one systematic-review project in three parts:
//! the project and its roles, the screening procedure, and the
//! classification scheme used for data extraction.
//!
//! ```text
//! project mt_survey "Model transformation survey"
//!
//! roles {
//!   reviewer reviewer
//!   lead senior
//!   owner admin
//! }
//!
//! screening {
//!   phases {
//!     title metadata
//!   }
//!   assign automatic 2
//!   conflict majority
//!   validation 20% of excluded by lead
//!   exclusion {
//!     "Not about model transformation"
//!   }
//! }
//!
//! classification {
//!   simple name "Transformation name": text(100) *
//!   list scope "Scope": ("Model level", "Metamodel level", "Both")
//!   dynamiclist language "Language": ("ATL", "QVT") [0]
//! }
//! ```
//!
//! [`parse`] turns source into a [`ConfigModel`], [`validate`] checks it and
//! yields a [`ValidatedModel`], and [`pretty_print`] writes it back in
//! canonical form.

pub mod diagnostic;
mod lexer;
pub mod model;
pub mod order;
mod parser;
mod printer;
pub mod validate;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use diagnostic::{Code, Diagnostic, Severity};
pub use model::*;
pub use order::{dependency_graph, order_categories, OrderError, OrderNode};
pub use parser::{parse, parse_bytes, parse_str};
pub use printer::pretty_print;
pub use validate::{is_identifier, slug, validate, ValidatedModel};

/// Parses and validates in one step.
pub fn check(src: &str) -> Result<ValidatedModel, Vec<Diagnostic>> {
    validate(parse_str(src)?)
}
