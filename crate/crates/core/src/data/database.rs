use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use indexmap::IndexMap;
use thiserror::Error;

use super::column::{Column, SemType};
use super::schema::{Schema, TableMeta};
use super::table::{Table, TableError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Metadata(String),
    #[error("missing table file for {table} (expected {path})")]
    MissingTable { table: String, path: PathBuf },
    #[error("table {table}: primary-key column {column} absent from data file")]
    PrimaryKeyColumnAbsent { table: String, column: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("table {table}: csv error: {source}")]
    Csv { table: String, source: csv::Error },
}

/// A structural-integrity violation found by [`Database::validate`].
/// Violations are data, not failures: loading surfaces them and callers
/// decide what to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicatePrimaryKey { table: String, value: String },
    NullPrimaryKey { table: String, row: usize },
    DanglingForeignKey {
        child: String,
        column: String,
        row: usize,
        value: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicatePrimaryKey { table, value } => {
                write!(f, "duplicate primary key {value:?} in table {table}")
            }
            Violation::NullPrimaryKey { table, row } => {
                write!(f, "null primary key in table {table} row {row}")
            }
            Violation::DanglingForeignKey {
                child,
                column,
                row,
                value,
            } => write!(
                f,
                "dangling foreign key {child}.{column}={value:?} (row {row})"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A loaded relational database. Immutable after load/validate, so it is
/// safe to share read-only across concurrent metric computations.
#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    schema: Schema,
    tables: IndexMap<String, Table>,
}

impl Database {
    pub fn new(schema: Schema, tables: IndexMap<String, Table>) -> Database {
        Database { schema, tables }
    }

    /// Builds a database from tables, deriving the schema from their
    /// metadata in the given order.
    pub fn from_tables(tables: Vec<Table>) -> Database {
        let schema = Schema {
            tables: tables.iter().map(|t| t.meta().clone()).collect(),
        };
        let tables = tables
            .into_iter()
            .map(|t| (t.name().to_string(), t))
            .collect();
        Database { schema, tables }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&String, &Table)> {
        self.tables.iter()
    }

    /// Checks primary-key uniqueness/non-nullness and that every
    /// non-null foreign-key value appears in the parent's primary key.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut pk_sets: HashMap<&str, HashSet<&str>> = HashMap::new();

        for (name, table) in &self.tables {
            let Some(pk) = table.meta().primary_key.clone() else {
                continue;
            };
            let Some(col) = table.column(&pk) else {
                continue;
            };
            let mut seen: HashSet<&str> = HashSet::new();
            let mut duplicated: HashSet<&str> = HashSet::new();
            for i in 0..table.row_count() {
                match col.string_at(i) {
                    None => violations.push(Violation::NullPrimaryKey {
                        table: name.clone(),
                        row: i,
                    }),
                    Some(v) => {
                        if !seen.insert(v) && duplicated.insert(v) {
                            violations.push(Violation::DuplicatePrimaryKey {
                                table: name.clone(),
                                value: v.to_string(),
                            });
                        }
                    }
                }
            }
            pk_sets.insert(name.as_str(), seen);
        }

        for (name, table) in &self.tables {
            for fk in &table.meta().foreign_keys {
                let Some(col) = table.column(&fk.column) else {
                    continue;
                };
                let parent_keys = pk_sets.get(fk.parent_table.as_str());
                for i in 0..table.row_count() {
                    if let Some(v) = col.string_at(i) {
                        let resolved = parent_keys.map_or(false, |s| s.contains(v));
                        if !resolved {
                            violations.push(Violation::DanglingForeignKey {
                                child: name.clone(),
                                column: fk.column.clone(),
                                row: i,
                                value: v.to_string(),
                            });
                        }
                    }
                }
            }
        }

        ValidationReport { violations }
    }

    /// Writes one CSV per table plus the metadata document into `dir`.
    /// Loading the output back yields an identical database (datetimes at
    /// second resolution).
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), LoadError> {
        std::fs::create_dir_all(dir).map_err(|e| LoadError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let meta_path = dir.join("metadata.json");
        std::fs::write(&meta_path, self.schema.to_metadata_json()).map_err(|e| LoadError::Io {
            path: meta_path,
            source: e,
        })?;
        for (name, table) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| LoadError::Csv {
                table: name.clone(),
                source: e,
            })?;
            let headers: Vec<&str> = table
                .meta()
                .columns
                .iter()
                .map(|c| c.name.as_str())
                .collect();
            w.write_record(&headers).map_err(|e| LoadError::Csv {
                table: name.clone(),
                source: e,
            })?;
            for i in 0..table.row_count() {
                let mut record = Vec::with_capacity(headers.len());
                for decl in &table.meta().columns {
                    let col = table.column(&decl.name).expect("declared column present");
                    let cell = if decl.sem_type == SemType::Datetime {
                        match col.numeric_at(i) {
                            Some(epoch) => render_datetime(epoch, decl.datetime_format.as_deref()),
                            None => String::new(),
                        }
                    } else {
                        col.render_plain(i)
                    };
                    record.push(cell);
                }
                w.write_record(&record).map_err(|e| LoadError::Csv {
                    table: name.clone(),
                    source: e,
                })?;
            }
            w.flush().map_err(|e| LoadError::Io {
                path: dir.join(format!("{name}.csv")),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// Loads a database: metadata document plus one `<table>.csv` per
/// declared table. Cells are coerced to the declared sem_types;
/// unparseable cells become null and the row is retained.
pub fn load_database(metadata_path: &Path, data_dir: &Path) -> Result<Database, LoadError> {
    let doc = std::fs::read_to_string(metadata_path).map_err(|e| LoadError::Io {
        path: metadata_path.to_path_buf(),
        source: e,
    })?;
    let schema = Schema::from_metadata_json(&doc).map_err(LoadError::Metadata)?;
    let mut tables = IndexMap::new();
    for meta in &schema.tables {
        let path = data_dir.join(format!("{}.csv", meta.name));
        if !path.is_file() {
            return Err(LoadError::MissingTable {
                table: meta.name.clone(),
                path,
            });
        }
        let table = load_table(meta, &path)?;
        tables.insert(meta.name.clone(), table);
    }
    Ok(Database { schema, tables })
}

fn load_table(meta: &TableMeta, path: &Path) -> Result<Table, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| LoadError::Csv {
            table: meta.name.clone(),
            source: e,
        })?;
    let headers = reader
        .headers()
        .map_err(|e| LoadError::Csv {
            table: meta.name.clone(),
            source: e,
        })?
        .clone();
    let mut position = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        position.insert(h.to_string(), i);
    }
    for decl in &meta.columns {
        if !position.contains_key(&decl.name) {
            if meta.primary_key.as_deref() == Some(decl.name.as_str()) {
                return Err(LoadError::PrimaryKeyColumnAbsent {
                    table: meta.name.clone(),
                    column: decl.name.clone(),
                });
            }
            return Err(LoadError::Table(TableError::MissingColumn {
                table: meta.name.clone(),
                column: decl.name.clone(),
            }));
        }
    }

    let mut builders: Vec<Column> = meta
        .columns
        .iter()
        .map(|c| match c.sem_type {
            SemType::Id => Column::Id(Vec::new()),
            SemType::Categorical => Column::Categorical(Vec::new()),
            SemType::Numerical => Column::Numerical(Vec::new()),
            SemType::Boolean => Column::Boolean(Vec::new()),
            SemType::Datetime => Column::Datetime(Vec::new()),
        })
        .collect();

    for record in reader.records() {
        let record = record.map_err(|e| LoadError::Csv {
            table: meta.name.clone(),
            source: e,
        })?;
        for (decl, builder) in meta.columns.iter().zip(builders.iter_mut()) {
            let raw = record.get(position[&decl.name]).unwrap_or("");
            push_cell(builder, raw, decl.datetime_format.as_deref());
        }
    }

    let mut columns = IndexMap::new();
    for (decl, col) in meta.columns.iter().zip(builders) {
        columns.insert(decl.name.clone(), col);
    }
    Ok(Table::new(meta.clone(), columns)?)
}

fn push_cell(builder: &mut Column, raw: &str, fmt: Option<&str>) {
    let trimmed = raw.trim();
    match builder {
        Column::Id(v) | Column::Categorical(v) => {
            v.push(if raw.is_empty() {
                None
            } else {
                Some(raw.to_string())
            });
        }
        Column::Numerical(v) => {
            let parsed = trimmed.parse::<f64>().ok().filter(|x| x.is_finite());
            v.push(parsed);
        }
        Column::Boolean(v) => {
            v.push(parse_bool(trimmed));
        }
        Column::Datetime(v) => {
            v.push(parse_datetime(trimmed, fmt));
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "True" | "TRUE" | "1" => Some(true),
        "false" | "False" | "FALSE" | "0" => Some(false),
        _ => None,
    }
}

/// Parses a datetime cell to epoch seconds. With a declared format, only
/// that format is attempted (first as date-time, then as bare date).
/// Without one, RFC 3339 and two common layouts are tried.
fn parse_datetime(s: &str, fmt: Option<&str>) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    if let Some(fmt) = fmt {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp() as f64);
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
        }
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp() as f64);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
    }
    None
}

fn render_datetime(epoch: f64, fmt: Option<&str>) -> String {
    let secs = epoch as i64;
    let Some(dt) = DateTime::from_timestamp(secs, 0) else {
        return String::new();
    };
    let naive = dt.naive_utc();
    match fmt {
        Some(f) => naive.format(f).to_string(),
        None => naive.format("%Y-%m-%d %H:%M:%S").to_string(),
    }
}
