use indexmap::IndexMap;
use thiserror::Error;

use super::column::Column;
use super::schema::TableMeta;
use crate::seed::ContentHasher;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table {table}: column {column} has {got} rows, expected {expected}")]
    LengthMismatch {
        table: String,
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("table {table}: declared column {column} absent from data")]
    MissingColumn { table: String, column: String },
    #[error("table {table}: column {column} sem_type does not match metadata")]
    TypeMismatch { table: String, column: String },
}

/// A loaded table: metadata plus one column per declaration, all of the
/// same length. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    meta: TableMeta,
    columns: IndexMap<String, Column>,
    row_count: usize,
}

impl Table {
    /// Builds a table, checking that every declared column is present
    /// with the declared sem_type and that all lengths agree.
    pub fn new(meta: TableMeta, columns: IndexMap<String, Column>) -> Result<Table, TableError> {
        let row_count = columns.values().next().map_or(0, Column::len);
        for decl in &meta.columns {
            let col = columns
                .get(&decl.name)
                .ok_or_else(|| TableError::MissingColumn {
                    table: meta.name.clone(),
                    column: decl.name.clone(),
                })?;
            if col.sem_type() != decl.sem_type {
                return Err(TableError::TypeMismatch {
                    table: meta.name.clone(),
                    column: decl.name.clone(),
                });
            }
            if col.len() != row_count {
                return Err(TableError::LengthMismatch {
                    table: meta.name.clone(),
                    column: decl.name.clone(),
                    expected: row_count,
                    got: col.len(),
                });
            }
        }
        Ok(Table {
            meta,
            columns,
            row_count,
        })
    }

    /// Builds a table from named columns, deriving the metadata from the
    /// column variants. Convenient for fixtures and derived tables.
    pub fn from_columns(
        name: &str,
        primary_key: Option<&str>,
        foreign_keys: Vec<crate::data::ForeignKey>,
        columns: Vec<(String, Column)>,
    ) -> Result<Table, TableError> {
        let decls = columns
            .iter()
            .map(|(n, c)| crate::data::ColumnMeta {
                name: n.clone(),
                sem_type: c.sem_type(),
                datetime_format: None,
            })
            .collect();
        let meta = TableMeta {
            name: name.to_string(),
            primary_key: primary_key.map(String::from),
            foreign_keys,
            columns: decls,
        };
        Table::new(meta, columns.into_iter().collect())
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&String, &Column)> {
        self.columns.iter()
    }

    /// A view of the named attribute columns only (keys dropped), in the
    /// given order. Errors if a name is not an attribute column.
    pub fn select_attributes(&self, names: &[&str]) -> Result<Table, TableError> {
        let attrs = self.meta.attribute_columns();
        let mut cols = Vec::new();
        for &name in names {
            if !attrs.iter().any(|c| c.name == name) {
                return Err(TableError::MissingColumn {
                    table: self.meta.name.clone(),
                    column: name.to_string(),
                });
            }
            cols.push((name.to_string(), self.columns[name].clone()));
        }
        let decls = names
            .iter()
            .map(|&n| self.meta.column(n).expect("checked above").clone())
            .collect();
        let meta = TableMeta {
            name: self.meta.name.clone(),
            primary_key: None,
            foreign_keys: vec![],
            columns: decls,
        };
        Ok(Table {
            meta,
            columns: cols.into_iter().collect(),
            row_count: self.row_count,
        })
    }

    /// Rows `idx` as a new table (duplicates and reordering allowed).
    pub fn subset(&self, idx: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|(n, c)| (n.clone(), c.subset(idx)))
            .collect();
        Table {
            meta: self.meta.clone(),
            columns,
            row_count: idx.len(),
        }
    }

    /// Content hash of row `i` over all cells in declaration order.
    pub fn row_hash(&self, i: usize) -> u64 {
        let mut h = ContentHasher::new();
        for decl in &self.meta.columns {
            self.columns[&decl.name].hash_cell(i, &mut h);
        }
        h.finish()
    }

    /// Content hash of row `i` over non-key attribute cells only, so two
    /// rows that differ only in their identifiers hash alike.
    pub fn attribute_row_hash(&self, i: usize) -> u64 {
        let mut h = ContentHasher::new();
        for decl in self.meta.attribute_columns() {
            self.columns[&decl.name].hash_cell(i, &mut h);
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnMeta;
    use crate::data::SemType;

    fn meta() -> TableMeta {
        TableMeta {
            name: "t".into(),
            primary_key: Some("id".into()),
            foreign_keys: vec![],
            columns: vec![
                ColumnMeta {
                    name: "id".into(),
                    sem_type: SemType::Id,
                    datetime_format: None,
                },
                ColumnMeta {
                    name: "x".into(),
                    sem_type: SemType::Numerical,
                    datetime_format: None,
                },
            ],
        }
    }

    #[test]
    fn rejects_length_mismatch() {
        let mut columns = IndexMap::new();
        columns.insert(
            "id".to_string(),
            Column::Id(vec![Some("a".into()), Some("b".into())]),
        );
        columns.insert("x".to_string(), Column::Numerical(vec![Some(1.0)]));
        assert!(matches!(
            Table::new(meta(), columns),
            Err(TableError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn row_hash_ignores_row_order_of_other_rows() {
        let mut columns = IndexMap::new();
        columns.insert(
            "id".to_string(),
            Column::Id(vec![Some("a".into()), Some("b".into())]),
        );
        columns.insert(
            "x".to_string(),
            Column::Numerical(vec![Some(1.0), Some(2.0)]),
        );
        let t = Table::new(meta(), columns).unwrap();
        let swapped = t.subset(&[1, 0]);
        assert_eq!(t.row_hash(0), swapped.row_hash(1));
        assert_eq!(t.row_hash(1), swapped.row_hash(0));
        assert_ne!(t.row_hash(0), t.row_hash(1));
    }
}
