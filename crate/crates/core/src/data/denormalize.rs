use std::collections::HashMap;

use indexmap::IndexMap;

use super::database::Database;
use super::schema::{SchemaError, TableMeta};
use super::table::Table;

/// Inner-joins child rows with the attribute columns of their parent.
///
/// Key columns are dropped from the output; parent attribute names are
/// prefixed with the parent table name to avoid collisions. Requires
/// exactly one foreign key linking `child` to `parent`.
pub fn denormalize(db: &Database, parent: &str, child: &str) -> Result<Table, SchemaError> {
    let parent_table = db
        .table(parent)
        .ok_or_else(|| SchemaError::UnknownTable(parent.to_string()))?;
    let child_table = db
        .table(child)
        .ok_or_else(|| SchemaError::UnknownTable(child.to_string()))?;

    let fks: Vec<_> = child_table
        .meta()
        .foreign_keys
        .iter()
        .filter(|fk| fk.parent_table == parent)
        .collect();
    let fk = match fks.len() {
        0 => {
            return Err(SchemaError::NoRelationship {
                parent: parent.to_string(),
                child: child.to_string(),
            })
        }
        1 => fks[0],
        _ => {
            return Err(SchemaError::AmbiguousRelationship {
                parent: parent.to_string(),
                child: child.to_string(),
            })
        }
    };

    let parent_pk = parent_table
        .meta()
        .primary_key
        .as_deref()
        .ok_or_else(|| SchemaError::UnknownTable(parent.to_string()))?;
    let pk_col = parent_table.column(parent_pk).expect("pk column present");
    let mut parent_row: HashMap<&str, usize> = HashMap::new();
    for i in 0..parent_table.row_count() {
        if let Some(v) = pk_col.string_at(i) {
            parent_row.entry(v).or_insert(i);
        }
    }

    let fk_col = child_table.column(&fk.column).expect("fk column present");
    let mut child_idx = Vec::new();
    let mut parent_idx = Vec::new();
    for i in 0..child_table.row_count() {
        if let Some(v) = fk_col.string_at(i) {
            if let Some(&p) = parent_row.get(v) {
                child_idx.push(i);
                parent_idx.push(p);
            }
        }
    }

    let mut columns = IndexMap::new();
    let mut decls = Vec::new();
    for attr in child_table.meta().attribute_columns() {
        let col = child_table.column(&attr.name).expect("declared column");
        columns.insert(attr.name.clone(), col.subset(&child_idx));
        decls.push(attr.clone());
    }
    for attr in parent_table.meta().attribute_columns() {
        let joined_name = format!("{parent}__{}", attr.name);
        let col = parent_table.column(&attr.name).expect("declared column");
        columns.insert(joined_name.clone(), col.subset(&parent_idx));
        let mut decl = attr.clone();
        decl.name = joined_name;
        decls.push(decl);
    }

    let meta = TableMeta {
        name: format!("{child}__{parent}"),
        primary_key: None,
        foreign_keys: vec![],
        columns: decls,
    };
    Ok(Table::new(meta, columns).expect("join columns aligned"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::database::load_database;
    use std::fs;
    use std::path::Path;

    fn fixture(dir: &Path) -> Database {
        let metadata = r#"{
          "tables": {
            "store": {
              "primary_key": "store_id",
              "columns": {
                "store_id": {"sdtype": "id"},
                "region": {"sdtype": "categorical"}
              },
              "foreign_keys": []
            },
            "sales": {
              "primary_key": "sale_id",
              "columns": {
                "sale_id": {"sdtype": "id"},
                "store_id": {"sdtype": "id"},
                "amount": {"sdtype": "numerical"}
              },
              "foreign_keys": [
                {"column": "store_id", "parent_table": "store", "parent_key": "store_id"}
              ]
            }
          }
        }"#;
        fs::write(dir.join("metadata.json"), metadata).unwrap();
        fs::write(
            dir.join("store.csv"),
            "store_id,region\nS1,north\nS2,south\n",
        )
        .unwrap();
        fs::write(
            dir.join("sales.csv"),
            "sale_id,store_id,amount\nT1,S1,10\nT2,S1,20\nT3,S2,30\n",
        )
        .unwrap();
        load_database(&dir.join("metadata.json"), dir).unwrap()
    }

    #[test]
    fn join_carries_parent_attributes_per_child_row() {
        let dir = tempfile::tempdir().unwrap();
        let db = fixture(dir.path());
        let joined = denormalize(&db, "store", "sales").unwrap();
        // Oracle: manual join of the 3 child rows.
        assert_eq!(joined.row_count(), 3);
        let region = joined.column("store__region").unwrap();
        assert_eq!(region.string_at(0), Some("north"));
        assert_eq!(region.string_at(1), Some("north"));
        assert_eq!(region.string_at(2), Some("south"));
        // key columns dropped
        assert!(joined.column("store_id").is_none());
        assert!(joined.column("sale_id").is_none());
    }

    #[test]
    fn empty_child_joins_to_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("sales.csv"),
            "sale_id,store_id,amount\n",
        )
        .unwrap();
        let db = {
            let _ = fixture(dir.path());
            // rewrite sales as empty, then reload
            fs::write(dir.path().join("sales.csv"), "sale_id,store_id,amount\n").unwrap();
            load_database(&dir.path().join("metadata.json"), dir.path()).unwrap()
        };
        let joined = denormalize(&db, "store", "sales").unwrap();
        assert_eq!(joined.row_count(), 0);
    }

    #[test]
    fn unrelated_tables_error() {
        let dir = tempfile::tempdir().unwrap();
        let db = fixture(dir.path());
        let err = denormalize(&db, "sales", "store").unwrap_err();
        assert!(matches!(err, SchemaError::NoRelationship { .. }));
    }
}
