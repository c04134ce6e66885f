//! The textual modeling language shared by the five model kinds.
//!
//! Every file starts with `model <kind> <name>;` followed by nested
//! `keyword ident { ... }` blocks whose entries are further blocks or
//! `key: value, ...;` properties. Cross-model links (`satisfies:`,
//! `implements:`, `for:`) are written inline and resolved by the weaver.

mod lexer;
mod model;
mod parse;
mod serialize;
pub mod syntax;
mod validate;

pub use lexer::Unit;
pub use model::*;
pub use parse::parse_model;
pub use serialize::serialize_model;
pub use validate::validate_model;
