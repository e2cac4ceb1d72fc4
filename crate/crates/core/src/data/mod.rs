//! Relational data model: schemas, typed columns, tables, databases,
//! loading from disk, and structural validation.

mod column;
mod database;
mod denormalize;
mod schema;
mod table;

pub use column::{Column, SemType};
pub use database::{
    load_database, Database, LoadError, ValidationReport, Violation,
};
pub use denormalize::denormalize;
pub use schema::{ColumnMeta, ForeignKey, Relationship, Schema, SchemaError, TableMeta};
pub use table::{Table, TableError};
