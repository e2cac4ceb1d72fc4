use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::column::SemType;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("table {table}: unknown sem_type {sdtype:?} for column {column}")]
    UnknownSemType {
        table: String,
        column: String,
        sdtype: String,
    },
    #[error("table {table}: primary key {key} is not a declared column")]
    PrimaryKeyNotDeclared { table: String, key: String },
    #[error("table {table}: primary key {key} must have sem_type id")]
    PrimaryKeyNotId { table: String, key: String },
    #[error("table {table}: foreign key column {column} is not a declared column")]
    ForeignKeyColumnMissing { table: String, column: String },
    #[error("table {table}: foreign key column {column} must have sem_type id")]
    ForeignKeyColumnNotId { table: String, column: String },
    #[error("table {table}: foreign key references undeclared table {parent}")]
    ForeignKeyParentMissing { table: String, parent: String },
    #[error(
        "table {table}: foreign key {column} references {parent}.{key}, \
         which is not that table's primary key"
    )]
    ForeignKeyNotPrimary {
        table: String,
        column: String,
        parent: String,
        key: String,
    },
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("no foreign key links child {child} to parent {parent}")]
    NoRelationship { parent: String, child: String },
    #[error("multiple foreign keys link child {child} to parent {parent}")]
    AmbiguousRelationship { parent: String, child: String },
}

/// A single column declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub sem_type: SemType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datetime_format: Option<String>,
}

/// A single-column foreign key. Composite keys are rejected by the
/// metadata format itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub column: String,
    pub parent_table: String,
    pub parent_key: String,
}

/// Table declaration: primary key, foreign keys, attribute columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub name: String,
    /// Absent only on derived tables (joins); every loaded table has one.
    pub primary_key: Option<String>,
    pub foreign_keys: Vec<ForeignKey>,
    pub columns: Vec<ColumnMeta>,
}

impl TableMeta {
    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Key columns: the primary key plus every foreign-key column.
    pub fn key_columns(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = Vec::new();
        if let Some(pk) = &self.primary_key {
            keys.push(pk);
        }
        for fk in &self.foreign_keys {
            if !keys.contains(&fk.column.as_str()) {
                keys.push(&fk.column);
            }
        }
        keys
    }

    /// Non-key attribute columns in declaration order.
    pub fn attribute_columns(&self) -> Vec<&ColumnMeta> {
        let keys = self.key_columns();
        self.columns
            .iter()
            .filter(|c| !keys.contains(&c.name.as_str()))
            .collect()
    }
}

/// One parent-child link. A child table with two foreign keys into the
/// same parent yields two distinct relationships.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relationship {
    pub parent: String,
    pub child: String,
    pub fk_column: String,
}

impl Relationship {
    /// Prefix used for aggregate column names derived from this
    /// relationship. The foreign-key column is included only when the
    /// child links to the same parent more than once.
    pub fn prefix(&self, schema: &Schema) -> String {
        let multiple = schema
            .relationships()
            .iter()
            .filter(|r| r.parent == self.parent && r.child == self.child)
            .count()
            > 1;
        if multiple {
            format!("{}.{}", self.child, self.fk_column)
        } else {
            self.child.clone()
        }
    }
}

/// Ordered collection of table declarations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<TableMeta>,
}

impl Schema {
    /// Checks the structural invariants: keys declared and id-typed,
    /// foreign keys resolving to declared parents' primary keys.
    pub fn check(&self) -> Result<(), SchemaError> {
        for t in &self.tables {
            if let Some(pk) = &t.primary_key {
                let col = t.column(pk).ok_or_else(|| SchemaError::PrimaryKeyNotDeclared {
                    table: t.name.clone(),
                    key: pk.clone(),
                })?;
                if col.sem_type != SemType::Id {
                    return Err(SchemaError::PrimaryKeyNotId {
                        table: t.name.clone(),
                        key: pk.clone(),
                    });
                }
            }
            for fk in &t.foreign_keys {
                let col = t.column(&fk.column).ok_or_else(|| {
                    SchemaError::ForeignKeyColumnMissing {
                        table: t.name.clone(),
                        column: fk.column.clone(),
                    }
                })?;
                if col.sem_type != SemType::Id {
                    return Err(SchemaError::ForeignKeyColumnNotId {
                        table: t.name.clone(),
                        column: fk.column.clone(),
                    });
                }
                let parent = self.table(&fk.parent_table).ok_or_else(|| {
                    SchemaError::ForeignKeyParentMissing {
                        table: t.name.clone(),
                        parent: fk.parent_table.clone(),
                    }
                })?;
                if parent.primary_key.as_deref() != Some(fk.parent_key.as_str()) {
                    return Err(SchemaError::ForeignKeyNotPrimary {
                        table: t.name.clone(),
                        column: fk.column.clone(),
                        parent: fk.parent_table.clone(),
                        key: fk.parent_key.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableMeta> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// All parent-child relationships in schema declaration order.
    pub fn relationships(&self) -> Vec<Relationship> {
        let mut rels = Vec::new();
        for t in &self.tables {
            for fk in &t.foreign_keys {
                rels.push(Relationship {
                    parent: fk.parent_table.clone(),
                    child: t.name.clone(),
                    fk_column: fk.column.clone(),
                });
            }
        }
        rels
    }

    /// Relationships where `table` is the parent.
    pub fn children_of(&self, table: &str) -> Vec<Relationship> {
        self.relationships()
            .into_iter()
            .filter(|r| r.parent == table)
            .collect()
    }

    /// Parses the on-disk metadata document.
    pub fn from_metadata_json(doc: &str) -> Result<Schema, String> {
        let raw: RawMetadata =
            serde_json::from_str(doc).map_err(|e| format!("metadata parse error: {e}"))?;
        let mut tables = Vec::new();
        for (name, t) in raw.tables {
            let mut columns = Vec::new();
            for (col_name, c) in t.columns {
                let sem_type = SemType::parse(&c.sdtype).ok_or_else(|| {
                    format!(
                        "table {name}: unknown sem_type {:?} for column {col_name}",
                        c.sdtype
                    )
                })?;
                columns.push(ColumnMeta {
                    name: col_name,
                    sem_type,
                    datetime_format: c.datetime_format,
                });
            }
            tables.push(TableMeta {
                name,
                primary_key: Some(t.primary_key),
                foreign_keys: t.foreign_keys,
                columns,
            });
        }
        let schema = Schema { tables };
        schema.check().map_err(|e| e.to_string())?;
        Ok(schema)
    }

    /// Renders the schema back into the metadata document format.
    pub fn to_metadata_json(&self) -> String {
        let mut tables = IndexMap::new();
        for t in &self.tables {
            let mut columns = IndexMap::new();
            for c in &t.columns {
                columns.insert(
                    c.name.clone(),
                    RawColumn {
                        sdtype: c.sem_type.as_str().to_string(),
                        datetime_format: c.datetime_format.clone(),
                    },
                );
            }
            tables.insert(
                t.name.clone(),
                RawTable {
                    primary_key: t.primary_key.clone().unwrap_or_default(),
                    columns,
                    foreign_keys: t.foreign_keys.clone(),
                },
            );
        }
        serde_json::to_string_pretty(&RawMetadata { tables }).expect("schema serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawMetadata {
    tables: IndexMap<String, RawTable>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    primary_key: String,
    columns: IndexMap<String, RawColumn>,
    #[serde(default)]
    foreign_keys: Vec<ForeignKey>,
}

#[derive(Serialize, Deserialize)]
struct RawColumn {
    sdtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    datetime_format: Option<String>,
}
