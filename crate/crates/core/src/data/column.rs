use serde::{Deserialize, Serialize};

use crate::seed::ContentHasher;

/// Semantic type of a column. Fixed once the metadata is loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemType {
    Id,
    Categorical,
    Numerical,
    Boolean,
    Datetime,
}

impl SemType {
    pub fn parse(s: &str) -> Option<SemType> {
        match s {
            "id" => Some(SemType::Id),
            "categorical" => Some(SemType::Categorical),
            "numerical" => Some(SemType::Numerical),
            "boolean" => Some(SemType::Boolean),
            "datetime" => Some(SemType::Datetime),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SemType::Id => "id",
            SemType::Categorical => "categorical",
            SemType::Numerical => "numerical",
            SemType::Boolean => "boolean",
            SemType::Datetime => "datetime",
        }
    }

    /// Numerical and datetime columns enter numeric tests; datetimes are
    /// stored as epoch seconds for exactly this reason.
    pub fn is_numeric_like(&self) -> bool {
        matches!(self, SemType::Numerical | SemType::Datetime)
    }
}

/// A typed value vector with per-cell nulls (`None`).
///
/// Datetimes are held as epoch seconds so every downstream metric can
/// treat them as plain numbers. Non-finite numeric cells are rejected at
/// construction time; a cell is either a finite value or null.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Id(Vec<Option<String>>),
    Categorical(Vec<Option<String>>),
    Numerical(Vec<Option<f64>>),
    Boolean(Vec<Option<bool>>),
    Datetime(Vec<Option<f64>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Id(v) | Column::Categorical(v) => v.len(),
            Column::Numerical(v) | Column::Datetime(v) => v.len(),
            Column::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sem_type(&self) -> SemType {
        match self {
            Column::Id(_) => SemType::Id,
            Column::Categorical(_) => SemType::Categorical,
            Column::Numerical(_) => SemType::Numerical,
            Column::Boolean(_) => SemType::Boolean,
            Column::Datetime(_) => SemType::Datetime,
        }
    }

    pub fn is_null(&self, i: usize) -> bool {
        match self {
            Column::Id(v) | Column::Categorical(v) => v[i].is_none(),
            Column::Numerical(v) | Column::Datetime(v) => v[i].is_none(),
            Column::Boolean(v) => v[i].is_none(),
        }
    }

    pub fn null_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_null(i)).count()
    }

    /// Non-null values of a numeric-like column.
    pub fn numeric_values(&self) -> Vec<f64> {
        match self {
            Column::Numerical(v) | Column::Datetime(v) => {
                v.iter().flatten().copied().collect()
            }
            Column::Boolean(v) => v
                .iter()
                .flatten()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Numeric view of cell `i`, if the column has one.
    pub fn numeric_at(&self, i: usize) -> Option<f64> {
        match self {
            Column::Numerical(v) | Column::Datetime(v) => v[i],
            Column::Boolean(v) => v[i].map(|b| if b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    /// String view of cell `i` for id/categorical columns.
    pub fn string_at(&self, i: usize) -> Option<&str> {
        match self {
            Column::Id(v) | Column::Categorical(v) => v[i].as_deref(),
            _ => None,
        }
    }

    /// Category label of cell `i` for categorical/boolean columns.
    pub fn category_at(&self, i: usize) -> Option<String> {
        match self {
            Column::Categorical(v) | Column::Id(v) => v[i].clone(),
            Column::Boolean(v) => v[i].map(|b| if b { "true".into() } else { "false".into() }),
            _ => None,
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Column {
        match self {
            Column::Id(v) => Column::Id(idx.iter().map(|&i| v[i].clone()).collect()),
            Column::Categorical(v) => {
                Column::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
            Column::Numerical(v) => Column::Numerical(idx.iter().map(|&i| v[i]).collect()),
            Column::Boolean(v) => Column::Boolean(idx.iter().map(|&i| v[i]).collect()),
            Column::Datetime(v) => Column::Datetime(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Feeds cell `i` into a content hash. A type tag and a null marker
    /// keep distinct cells from colliding structurally.
    pub fn hash_cell(&self, i: usize, h: &mut ContentHasher) {
        match self {
            Column::Id(v) | Column::Categorical(v) => {
                h.update(&[0x01]);
                match &v[i] {
                    Some(s) => {
                        h.update(&[0x00]);
                        h.update(s.as_bytes());
                    }
                    None => h.update(&[0xFF]),
                }
            }
            Column::Numerical(v) | Column::Datetime(v) => {
                h.update(&[0x02]);
                match v[i] {
                    Some(x) => {
                        h.update(&[0x00]);
                        h.update_f64(x);
                    }
                    None => h.update(&[0xFF]),
                }
            }
            Column::Boolean(v) => {
                h.update(&[0x03]);
                match v[i] {
                    Some(b) => h.update(&[0x00, b as u8]),
                    None => h.update(&[0xFF]),
                }
            }
        }
    }

    /// Renders cell `i` for CSV output. Nulls become the empty string;
    /// datetimes are re-rendered by the table writer, not here.
    pub fn render_plain(&self, i: usize) -> String {
        match self {
            Column::Id(v) | Column::Categorical(v) => v[i].clone().unwrap_or_default(),
            Column::Numerical(v) | Column::Datetime(v) => {
                v[i].map(|x| format!("{x}")).unwrap_or_default()
            }
            Column::Boolean(v) => v[i]
                .map(|b| if b { "true".into() } else { "false".into() })
                .unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_values_skip_nulls() {
        let c = Column::Numerical(vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(c.numeric_values(), vec![1.0, 3.0]);
        assert_eq!(c.null_count(), 1);
    }

    #[test]
    fn subset_picks_rows() {
        let c = Column::Categorical(vec![Some("a".into()), Some("b".into()), None]);
        let s = c.subset(&[2, 0]);
        assert_eq!(s, Column::Categorical(vec![None, Some("a".into())]));
    }
}
