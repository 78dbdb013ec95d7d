use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{impute_linear, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Indicator,
    Target,
}

/// Role assignment read from a JSON schema file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub indicators: Vec<String>,
    #[serde(default)]
    pub targets: Vec<String>,
}

impl Schema {
    fn role_of(&self, name: &str) -> Option<Role> {
        if self.targets.iter().any(|t| t == name) {
            Some(Role::Target)
        } else if self.indicators.iter().any(|t| t == name) {
            Some(Role::Indicator)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub series: TimeSeries,
}

/// Year-indexed table of named indicator and target columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    years: Vec<i64>,
    columns: Vec<Column>,
}

impl FeatureTable {
    pub fn new(years: Vec<i64>, columns: Vec<Column>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.series.index() != years.as_slice() {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` is not aligned with the table index",
                    c.name
                )));
            }
        }
        Ok(Self { years, columns })
    }

    pub fn years(&self) -> &[i64] {
        &self.years
    }

    pub fn n_rows(&self) -> usize {
        self.years.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn indicators(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == Role::Indicator)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == Role::Target)
    }

    pub fn indicator_names(&self) -> Vec<String> {
        self.indicators().map(|c| c.name.clone()).collect()
    }

    /// Row-major indicator matrix; fails if any indicator has gaps.
    pub fn indicator_rows(&self) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<&[f64]> = self
            .indicators()
            .map(|c| c.series.complete_values())
            .collect::<Result<_>>()?;
        Ok((0..self.n_rows())
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect())
    }

    pub fn missing_cells(&self) -> usize {
        self.columns.iter().map(|c| c.series.missing_count()).sum()
    }

    pub fn total_cells(&self) -> usize {
        self.columns.len() * self.n_rows()
    }

    /// Fraction of missing cells over all data columns.
    pub fn missing_rate(&self) -> f64 {
        if self.total_cells() == 0 {
            0.0
        } else {
            self.missing_cells() as f64 / self.total_cells() as f64
        }
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().all(|c| c.series.is_complete())
    }

    /// Linear imputation applied to every column that has gaps.
    pub fn impute(&self) -> Result<FeatureTable> {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let series = if c.series.is_complete() {
                    c.series.clone()
                } else {
                    impute_linear(&c.series).map_err(|e| e.in_stage(format!("impute `{}`", c.name)))?
                };
                Ok(Column {
                    series,
                    ..c.clone()
                })
            })
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            years: self.years.clone(),
            columns,
        })
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> FeatureTable {
        FeatureTable {
            years: self.years[..n.min(self.years.len())].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    series: c.series.head(n),
                    ..c.clone()
                })
                .collect(),
        }
    }

    /// Copy with one column's series swapped out.
    pub fn with_series(&self, name: &str, series: TimeSeries) -> Result<FeatureTable> {
        let mut columns = self.columns.clone();
        let col = columns
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        col.series = series;
        FeatureTable::new(self.years.clone(), columns)
    }
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a CSV file. See [`read_table`].
pub fn load_table(path: &Path, schema: Option<&Schema>) -> Result<FeatureTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, schema)
}

/// Parses a table whose first column is `year` and whose other columns are
/// numeric; an empty cell is a missing value.
///
/// With a schema, only the listed columns are kept and get the listed roles;
/// every schema name must appear in the header. Without one, every column is
/// an indicator.
pub fn read_table<R: Read>(reader: R, schema: Option<&Schema>) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(|h| h.to_ascii_lowercase()) != Some("year".into()) {
        return Err(Error::Parse {
            row: 1,
            column: header.first().cloned().unwrap_or_default(),
            message: "first column must be `year`".into(),
        });
    }
    let mut seen = HashSet::new();
    for h in &header[1..] {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    if let Some(schema) = schema {
        for name in schema.indicators.iter().chain(&schema.targets) {
            if !seen.contains(name.as_str()) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        if let Some(dup) = schema.indicators.iter().find(|n| schema.targets.contains(n)) {
            return Err(Error::InvalidArgument(format!("`{dup}` is both indicator and target")));
        }
    }

    let mut years = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len() - 1];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let year_txt = record.get(0).unwrap_or("");
        let year: i64 = year_txt.parse().map_err(|_| Error::Parse {
            row: line,
            column: header[0].clone(),
            message: format!("`{year_txt}` is not an integer year"),
        })?;
        if let Some(&prev) = years.last() {
            if year <= prev {
                return Err(Error::NonMonotoneIndex(year, prev));
            }
        }
        years.push(year);
        for (j, col) in cells.iter_mut().enumerate() {
            let txt = record.get(j + 1).unwrap_or("");
            let v = if txt.is_empty() {
                None
            } else {
                match txt.parse::<f64>() {
                    Ok(x) if x.is_finite() => Some(x),
                    _ => {
                        return Err(Error::Parse {
                            row: line,
                            column: header[j + 1].clone(),
                            message: format!("`{txt}` is not a finite number"),
                        })
                    }
                }
            };
            col.push(v);
        }
    }
    if years.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }

    let mut columns = Vec::new();
    for (name, values) in header[1..].iter().zip(cells) {
        let role = match schema {
            Some(s) => match s.role_of(name) {
                Some(r) => r,
                None => continue,
            },
            None => Role::Indicator,
        };
        columns.push(Column {
            name: name.clone(),
            role,
            series: TimeSeries::from_options(years.clone(), values)?,
        });
    }
    FeatureTable::new(years, columns)
}

/// Writes `year` plus every column, six decimals, empty cells for gaps.
pub fn write_table<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["year".to_string()];
    header.extend(table.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (r, year) in table.years().iter().enumerate() {
        let mut row = vec![year.to_string()];
        for c in table.columns() {
            row.push(c.series.get(r).map(|v| format!("{v:.6}")).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(ind: &[&str], tgt: &[&str]) -> Schema {
        Schema {
            indicators: ind.iter().map(|s| s.to_string()).collect(),
            targets: tgt.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn parses_full_table() {
        let mut csv = String::from("year");
        for j in 0..9 {
            csv += &format!(",ind{j}");
        }
        csv += ",cats,dogs\n";
        for y in 2005..=2023 {
            csv += &y.to_string();
            for j in 0..11 {
                csv += &format!(",{}", (y - 2000) * (j + 1));
            }
            csv += "\n";
        }
        let ind: Vec<String> = (0..9).map(|j| format!("ind{j}")).collect();
        let s = Schema {
            indicators: ind,
            targets: vec!["cats".into(), "dogs".into()],
        };
        let t = read_table(csv.as_bytes(), Some(&s)).unwrap();
        assert_eq!(t.columns().len(), 11);
        assert_eq!(t.n_rows(), 19);
        assert_eq!(t.indicators().count(), 9);
        assert_eq!(t.targets().count(), 2);
        assert_eq!(t.years()[0], 2005);
    }

    #[test]
    fn duplicate_years_rejected() {
        let csv = "year,a\n2005,1\n2005,2\n";
        assert!(matches!(read_table(csv.as_bytes(), None), Err(Error::NonMonotoneIndex(2005, 2005))));
    }

    #[test]
    fn empty_cell_is_missing() {
        let csv = "year,a,b\n2005,1,2\n2006,,3\n2007,4,5\n";
        let t = read_table(csv.as_bytes(), None).unwrap();
        let a = &t.column("a").unwrap().series;
        assert_eq!(a.observed(), &[true, false, true]);
        assert!(t.column("b").unwrap().series.is_complete());
        assert_eq!(t.missing_cells(), 1);
        assert!((t.missing_rate() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let csv = "year,a,b\n2005,1,2\n2006,x,3\n";
        match read_table(csv.as_bytes(), None) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_schema_column() {
        let csv = "year,a\n2005,1\n";
        let s = schema(&["a"], &["missing"]);
        assert!(matches!(read_table(csv.as_bytes(), Some(&s)), Err(Error::UnknownColumn(c)) if c == "missing"));
    }

    #[test]
    fn write_then_read() {
        let csv = "year,a,b\n2005,1.5,2\n2006,,3\n";
        let t = read_table(csv.as_bytes(), Some(&schema(&["a"], &["b"]))).unwrap();
        let mut out = Vec::new();
        write_table(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "year,a,b\n2005,1.500000,2.000000\n2006,,3.000000\n");
        let back = read_table(out.as_slice(), Some(&schema(&["a"], &["b"]))).unwrap();
        assert_eq!(back, t);
    }
}
