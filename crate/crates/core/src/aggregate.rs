//! Relational aggregation: augment a target table with aggregate
//! features of its child (and grandchild) tables.
//!
//! For every child relationship of the target we append, per parent row:
//! a child-row count, the mean of each numeric child column, the number
//! of unique categories of each categorical/boolean child column, and —
//! one level deeper — the mean over the parent's child rows of each
//! grandchild's row counts. All functions produce exactly one output row
//! per parent row, so the augmented table keeps the i.i.d. structure the
//! detection test relies on.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ColumnMeta;
use crate::data::{Column, Database, Relationship, SemType, Table, TableMeta};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown relationship {parent} -> {child} via {fk_column}")]
    UnknownRelationship {
        parent: String,
        child: String,
        fk_column: String,
    },
    #[error("table {0} has no primary key; cannot aggregate children")]
    NoPrimaryKey(String),
}

/// Which aggregate functions to apply per child sem_type. The defaults
/// are the full feature set: counts (plus grandchild count means), means
/// of numeric columns, and unique-category counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationSpec {
    pub numeric_mean: bool,
    pub categorical_nunique: bool,
    pub grandchild_count_mean: bool,
}

impl Default for AggregationSpec {
    fn default() -> Self {
        AggregationSpec {
            numeric_mean: true,
            categorical_nunique: true,
            grandchild_count_mean: true,
        }
    }
}

/// Whether a column came with the table or was appended by aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Aggregate,
}

/// A target table plus appended aggregate columns, with per-column
/// provenance. Row count always equals the target's.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedTable {
    pub table: Table,
    pub provenance: Vec<(String, Provenance)>,
}

impl AggregatedTable {
    /// Wraps a plain table; every column is original.
    pub fn from_original(table: &Table) -> AggregatedTable {
        let provenance = table
            .meta()
            .columns
            .iter()
            .map(|c| (c.name.clone(), Provenance::Original))
            .collect();
        AggregatedTable {
            table: table.clone(),
            provenance,
        }
    }

    pub fn provenance_of(&self, column: &str) -> Option<Provenance> {
        self.provenance
            .iter()
            .find(|(n, _)| n == column)
            .map(|(_, p)| *p)
    }
}

/// Number of child rows per parent row for one relationship. Parents
/// with no children get 0; child rows with null foreign keys count
/// nowhere.
pub fn child_row_counts(
    db: &Database,
    relationship: &Relationship,
) -> Result<Vec<f64>, AggregateError> {
    if !db
        .schema()
        .relationships()
        .iter()
        .any(|r| r == relationship)
    {
        return Err(AggregateError::UnknownRelationship {
            parent: relationship.parent.clone(),
            child: relationship.child.clone(),
            fk_column: relationship.fk_column.clone(),
        });
    }
    let parent = db
        .table(&relationship.parent)
        .ok_or_else(|| AggregateError::UnknownTable(relationship.parent.clone()))?;
    let child = db
        .table(&relationship.child)
        .ok_or_else(|| AggregateError::UnknownTable(relationship.child.clone()))?;
    let groups = group_children(parent, child, &relationship.fk_column)?;
    Ok(groups.iter().map(|g| g.len() as f64).collect())
}

/// Child-row indices grouped per parent row, in parent row order.
fn group_children(
    parent: &Table,
    child: &Table,
    fk_column: &str,
) -> Result<Vec<Vec<usize>>, AggregateError> {
    let pk_name = parent
        .meta()
        .primary_key
        .as_deref()
        .ok_or_else(|| AggregateError::NoPrimaryKey(parent.name().to_string()))?;
    let pk = parent.column(pk_name).expect("pk column present");
    let mut row_of: HashMap<&str, usize> = HashMap::new();
    for i in 0..parent.row_count() {
        if let Some(v) = pk.string_at(i) {
            row_of.entry(v).or_insert(i);
        }
    }
    let fk = child.column(fk_column).expect("fk column present");
    let mut groups = vec![Vec::new(); parent.row_count()];
    for j in 0..child.row_count() {
        if let Some(v) = fk.string_at(j) {
            if let Some(&p) = row_of.get(v) {
                groups[p].push(j);
            }
        }
    }
    Ok(groups)
}

/// Mean of non-null values in `col` over each group; a group with no
/// non-null values yields null.
fn group_means(col: &Column, groups: &[Vec<usize>]) -> Vec<Option<f64>> {
    groups
        .iter()
        .map(|g| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &j in g {
                if let Some(v) = col.numeric_at(j) {
                    sum += v;
                    n += 1;
                }
            }
            if n == 0 {
                None
            } else {
                Some(sum / n as f64)
            }
        })
        .collect()
}

/// Number of distinct non-null values in `col` over each group.
fn group_nunique(col: &Column, groups: &[Vec<usize>]) -> Vec<Option<f64>> {
    groups
        .iter()
        .map(|g| {
            let mut seen: HashSet<String> = HashSet::new();
            for &j in g {
                if let Some(v) = col.category_at(j) {
                    seen.insert(v);
                }
            }
            Some(seen.len() as f64)
        })
        .collect()
}

/// For every child of `target`: compute count / mean / nunique
/// aggregates and, for every grandchild of that child, the mean of the
/// grandchild counts over the parent's child rows. Aggregates are
/// appended in schema declaration order.
pub fn relational_aggregation(
    db: &Database,
    target: &str,
    spec: &AggregationSpec,
) -> Result<AggregatedTable, AggregateError> {
    let parent = db
        .table(target)
        .ok_or_else(|| AggregateError::UnknownTable(target.to_string()))?;

    let mut decls: Vec<ColumnMeta> = parent.meta().columns.clone();
    let mut columns: IndexMap<String, Column> = parent
        .columns()
        .map(|(n, c)| (n.clone(), c.clone()))
        .collect();
    let mut provenance: Vec<(String, Provenance)> = decls
        .iter()
        .map(|c| (c.name.clone(), Provenance::Original))
        .collect();

    fn push_aggregate(
        name: String,
        values: Vec<Option<f64>>,
        decls: &mut Vec<ColumnMeta>,
        columns: &mut IndexMap<String, Column>,
        provenance: &mut Vec<(String, Provenance)>,
    ) {
        decls.push(ColumnMeta {
            name: name.clone(),
            sem_type: SemType::Numerical,
            datetime_format: None,
        });
        columns.insert(name.clone(), Column::Numerical(values));
        provenance.push((name, Provenance::Aggregate));
    }

    for rel in db.schema().children_of(target) {
        let child = db
            .table(&rel.child)
            .ok_or_else(|| AggregateError::UnknownTable(rel.child.clone()))?;
        let groups = group_children(parent, child, &rel.fk_column)?;
        let prefix = rel.prefix(db.schema());

        let counts = groups.iter().map(|g| Some(g.len() as f64)).collect();
        push_aggregate(
            format!("{prefix}__count"),
            counts,
            &mut decls,
            &mut columns,
            &mut provenance,
        );

        for attr in child.meta().attribute_columns() {
            let col = child.column(&attr.name).expect("declared column");
            match attr.sem_type {
                SemType::Numerical | SemType::Datetime => {
                    if spec.numeric_mean {
                        push_aggregate(
                            format!("{prefix}__{}__mean", attr.name),
                            group_means(col, &groups),
                            &mut decls,
                            &mut columns,
                            &mut provenance,
                        );
                    }
                }
                SemType::Categorical | SemType::Boolean => {
                    if spec.categorical_nunique {
                        push_aggregate(
                            format!("{prefix}__{}__nunique", attr.name),
                            group_nunique(col, &groups),
                            &mut decls,
                            &mut columns,
                            &mut provenance,
                        );
                    }
                }
                SemType::Id => {}
            }
        }

        if spec.grandchild_count_mean {
            for grand in db.schema().children_of(&rel.child) {
                let grandchild = db
                    .table(&grand.child)
                    .ok_or_else(|| AggregateError::UnknownTable(grand.child.clone()))?;
                let gcounts: Vec<f64> = group_children(child, grandchild, &grand.fk_column)?
                    .iter()
                    .map(|g| g.len() as f64)
                    .collect();
                let gprefix = grand.prefix(db.schema());
                let values = groups
                    .iter()
                    .map(|g| {
                        if g.is_empty() {
                            None
                        } else {
                            Some(g.iter().map(|&j| gcounts[j]).sum::<f64>() / g.len() as f64)
                        }
                    })
                    .collect();
                push_aggregate(
                    format!("{prefix}__{gprefix}__count_mean"),
                    values,
                    &mut decls,
                    &mut columns,
                    &mut provenance,
                );
            }
        }
    }

    let meta = TableMeta {
        name: parent.name().to_string(),
        primary_key: parent.meta().primary_key.clone(),
        foreign_keys: parent.meta().foreign_keys.clone(),
        columns: decls,
    };
    let table = Table::new(meta, columns).expect("aggregate columns aligned");
    Ok(AggregatedTable { table, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_database;
    use std::fs;
    use std::path::Path;

    const METADATA: &str = r#"{
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
            "value": {"sdtype": "numerical"},
            "cat": {"sdtype": "categorical"}
          },
          "foreign_keys": [
            {"column": "store_id", "parent_table": "store", "parent_key": "store_id"}
          ]
        },
        "items": {
          "primary_key": "item_id",
          "columns": {
            "item_id": {"sdtype": "id"},
            "sale_id": {"sdtype": "id"}
          },
          "foreign_keys": [
            {"column": "sale_id", "parent_table": "sales", "parent_key": "sale_id"}
          ]
        }
      }
    }"#;

    const STORES: &str = "store_id,region\nS1,north\nS2,south\nS3,west\n";
    const SALES: &str =
        "sale_id,store_id,value,cat\nT1,S1,10,a\nT2,S1,20,a\nT3,S2,30,b\nT4,S1,,b\n";
    const ITEMS: &str = "item_id,sale_id\nI1,T1\nI2,T1\nI3,T2\nI4,T3\n";

    fn load_fixture(dir: &Path, sales: &str) -> Database {
        fs::write(dir.join("metadata.json"), METADATA).unwrap();
        fs::write(dir.join("store.csv"), STORES).unwrap();
        fs::write(dir.join("sales.csv"), sales).unwrap();
        fs::write(dir.join("items.csv"), ITEMS).unwrap();
        load_database(&dir.join("metadata.json"), dir).unwrap()
    }

    #[test]
    fn counts_match_manual_group_by() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let rel = Relationship {
            parent: "store".into(),
            child: "sales".into(),
            fk_column: "store_id".into(),
        };
        // Oracle: manual group-by of the 4 sales rows: S1 x3, S2 x1, S3 x0.
        assert_eq!(child_row_counts(&db, &rel).unwrap(), vec![3.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_child_table_gives_all_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), "sale_id,store_id,value,cat\n");
        let rel = Relationship {
            parent: "store".into(),
            child: "sales".into(),
            fk_column: "store_id".into(),
        };
        assert_eq!(child_row_counts(&db, &rel).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_relationship_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let rel = Relationship {
            parent: "store".into(),
            child: "items".into(),
            fk_column: "sale_id".into(),
        };
        assert!(matches!(
            child_row_counts(&db, &rel),
            Err(AggregateError::UnknownRelationship { .. })
        ));
    }

    #[test]
    fn aggregation_matches_manual_join_group_by() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let agg = relational_aggregation(&db, "store", &AggregationSpec::default()).unwrap();
        let t = &agg.table;
        assert_eq!(t.row_count(), 3);

        // Oracle: manual join/group-by. Counts [3,1,0]; value means: S1 has
        // values 10,20,null -> 15; S2 -> 30; S3 childless -> null.
        let count = t.column("sales__count").unwrap();
        assert_eq!(count.numeric_at(0), Some(3.0));
        assert_eq!(count.numeric_at(1), Some(1.0));
        assert_eq!(count.numeric_at(2), Some(0.0));

        let mean = t.column("sales__value__mean").unwrap();
        assert_eq!(mean.numeric_at(0), Some(15.0));
        assert_eq!(mean.numeric_at(1), Some(30.0));
        assert_eq!(mean.numeric_at(2), None);

        // Oracle: manual distinct count. S1 cats {a,a,b} -> 2; S3 empty -> 0.
        let nunique = t.column("sales__cat__nunique").unwrap();
        assert_eq!(nunique.numeric_at(0), Some(2.0));
        assert_eq!(nunique.numeric_at(1), Some(1.0));
        assert_eq!(nunique.numeric_at(2), Some(0.0));

        // Grandchild count means: item counts per sale [2,1,1,0];
        // S1 children T1,T2,T4 -> mean(2,1,0)=1; S2 child T3 -> 1; S3 -> null.
        let gc = t.column("sales__items__count_mean").unwrap();
        assert_eq!(gc.numeric_at(0), Some(1.0));
        assert_eq!(gc.numeric_at(1), Some(1.0));
        assert_eq!(gc.numeric_at(2), None);

        assert_eq!(agg.provenance_of("region"), Some(Provenance::Original));
        assert_eq!(
            agg.provenance_of("sales__count"),
            Some(Provenance::Aggregate)
        );
    }

    #[test]
    fn duplicated_child_rows_double_counts_keep_means() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let dir2 = tempfile::tempdir().unwrap();
        let doubled = "sale_id,store_id,value,cat\nT1,S1,10,a\nT2,S1,20,a\nT3,S2,30,b\nT4,S1,,b\n\
                       T5,S1,10,a\nT6,S1,20,a\nT7,S2,30,b\nT8,S1,,b\n";
        let db2 = load_fixture(dir2.path(), doubled);

        let spec = AggregationSpec::default();
        let a = relational_aggregation(&db, "store", &spec).unwrap();
        let b = relational_aggregation(&db2, "store", &spec).unwrap();
        for i in 0..3 {
            let ca = a.table.column("sales__count").unwrap().numeric_at(i);
            let cb = b.table.column("sales__count").unwrap().numeric_at(i);
            assert_eq!(cb, ca.map(|v| v * 2.0));
            let ma = a.table.column("sales__value__mean").unwrap().numeric_at(i);
            let mb = b.table.column("sales__value__mean").unwrap().numeric_at(i);
            assert_eq!(ma, mb);
        }
    }

    #[test]
    fn child_order_does_not_change_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let dir2 = tempfile::tempdir().unwrap();
        let permuted = "sale_id,store_id,value,cat\nT4,S1,,b\nT3,S2,30,b\nT1,S1,10,a\nT2,S1,20,a\n";
        let db2 = load_fixture(dir2.path(), permuted);

        let spec = AggregationSpec::default();
        let a = relational_aggregation(&db, "store", &spec).unwrap();
        let b = relational_aggregation(&db2, "store", &spec).unwrap();
        for name in ["sales__count", "sales__value__mean", "sales__cat__nunique"] {
            assert_eq!(a.table.column(name), b.table.column(name), "{name}");
        }
    }

    #[test]
    fn count_sum_equals_nonnull_fk_rows() {
        let dir = tempfile::tempdir().unwrap();
        let db = load_fixture(dir.path(), SALES);
        let rel = Relationship {
            parent: "store".into(),
            child: "sales".into(),
            fk_column: "store_id".into(),
        };
        let counts = child_row_counts(&db, &rel).unwrap();
        let fk = db.table("sales").unwrap().column("store_id").unwrap();
        let nonnull = (0..fk.len()).filter(|&i| !fk.is_null(i)).count();
        assert_eq!(counts.iter().sum::<f64>() as usize, nonnull);
    }
}
