//! Era-tagged tabular datasets and the CSV format they are read from.
//!
//! Features are stored column-major. Era identifiers are always dense
//! indices in `0..n_eras`; arbitrary integer identifiers found in input
//! files are re-indexed on load, preserving their sort order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    eras: Vec<usize>,
    n_eras: usize,
    /// Original identifier of each dense era index, written back on save.
    era_labels: Vec<i64>,
}

impl Dataset {
    /// Builds a dataset from column-major features and dense era indices.
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        targets: Vec<f64>,
        eras: Vec<usize>,
    ) -> Result<Self> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if feature_names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        if eras.len() != n {
            return Err(Error::LengthMismatch {
                left: eras.len(),
                right: n,
            });
        }
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "feature `{name}` has {} rows, targets have {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                column: "<target>".into(),
            });
        }
        let n_eras = eras.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_eras];
        for &e in &eras {
            seen[e] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "era indices must be dense; era {missing} has no rows"
            )));
        }
        Ok(Self {
            feature_names,
            columns,
            targets,
            eras,
            n_eras,
            era_labels: (0..n_eras as i64).collect(),
        })
    }

    /// Like [`Dataset::new`] but accepts arbitrary integer era identifiers and
    /// re-indexes them densely in ascending identifier order.
    pub fn with_raw_eras(
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        targets: Vec<f64>,
        raw_eras: &[i64],
    ) -> Result<Self> {
        let mut labels = raw_eras.to_vec();
        labels.sort_unstable();
        labels.dedup();
        Self::new(feature_names, columns, targets, reindex_eras(raw_eras))?.with_era_labels(labels)
    }

    /// Replaces the identifiers written for each era on save. Labels must be
    /// strictly increasing so that reloading reproduces the same indices.
    pub fn with_era_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n_eras || labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(
                "era labels must be strictly increasing, one per era".into(),
            ));
        }
        self.era_labels = labels;
        Ok(self)
    }

    pub fn era_labels(&self) -> &[i64] {
        &self.era_labels
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_eras(&self) -> usize {
        self.n_eras
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, f: usize) -> &[f64] {
        &self.columns[f]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn eras(&self) -> &[usize] {
        &self.eras
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Row indices grouped by era: entry `j` lists the rows of era `j` in
    /// ascending order.
    pub fn group_rows_by_era(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_eras];
        for (i, &e) in self.eras.iter().enumerate() {
            groups[e].push(i);
        }
        groups
    }

    /// Writes the dataset in the CSV layout read by [`load_dataset`]:
    /// feature columns first, then the era and target columns.
    pub fn write_csv<W: Write>(&self, writer: W, era_column: &str, target_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(era_column);
        header.push(target_column);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[i].to_string()));
            record.push(self.era_labels[self.eras[i]].to_string());
            record.push(self.targets[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, era_column: &str, target_column: &str) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), era_column, target_column)
    }
}

/// Maps arbitrary era identifiers onto `0..M`, keeping their relative order.
pub fn reindex_eras(raw: &[i64]) -> Vec<usize> {
    let mut index = BTreeMap::new();
    for &r in raw {
        index.insert(r, 0usize);
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    raw.iter().map(|r| index[r]).collect()
}

/// Loads an era-tagged CSV. Every column other than `era_column` and
/// `target_column` becomes a feature, in file order.
pub fn load_dataset(path: impl AsRef<Path>, era_column: &str, target_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file), era_column, target_column)
}

fn parse_real(record: &csv::StringRecord, header: &[String], row: usize, i: usize) -> Result<f64> {
    let text = record.get(i).unwrap_or("").trim();
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        row,
        column: header[i].clone(),
        value: text.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            row,
            column: header[i].clone(),
        });
    }
    Ok(v)
}

fn read_header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }
    Ok(header)
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

pub fn read_dataset<R: Read>(reader: R, era_column: &str, target_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = read_header(&mut rdr)?;
    let era_idx = column_index(&header, era_column)?;
    let target_idx = column_index(&header, target_column)?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != era_idx && i != target_idx)
        .collect();

    let mut columns = vec![Vec::new(); feature_idx.len()];
    let mut targets = Vec::new();
    let mut raw_eras = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, &i) in columns.iter_mut().zip(&feature_idx) {
            col.push(parse_real(&record, &header, row, i)?);
        }
        targets.push(parse_real(&record, &header, row, target_idx)?);
        let era_text = record.get(era_idx).unwrap_or("").trim();
        raw_eras.push(era_text.parse::<i64>().map_err(|_| Error::Parse {
            row,
            column: header[era_idx].clone(),
            value: era_text.to_string(),
        })?);
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let names = feature_idx.iter().map(|&i| header[i].clone()).collect();
    Dataset::with_raw_eras(names, columns, targets, &raw_eras)
}

/// Reads only the named columns, in the given order, ignoring all others.
/// Used for prediction on files without era or target columns.
pub fn read_features<R: Read>(reader: R, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = read_header(&mut rdr)?;
    let idx = names
        .iter()
        .map(|n| column_index(&header, n))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![Vec::new(); idx.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, &i) in columns.iter_mut().zip(&idx) {
            col.push(parse_real(&record, &header, row, i)?);
        }
    }
    if columns.first().is_some_and(|c| c.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    Ok(columns)
}

pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path)?;
    read_features(std::io::BufReader::new(file), names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop1_csv() -> &'static str {
        "feature1,feature2,era,target\n1,1,0,-1\n2,3,0,-2\n3,2,1,-3\n4,4,1,-4\n"
    }

    #[test]
    fn loads_degenerate_split_table() {
        let ds = read_dataset(prop1_csv().as_bytes(), "era", "target").unwrap();
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_eras(), 2);
        assert_eq!(ds.column(1), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(ds.targets(), &[-1.0, -2.0, -3.0, -4.0]);
        assert_eq!(ds.feature_names(), &["feature1", "feature2"]);
    }

    #[test]
    fn feature_subset_by_name() {
        let csv = "b,junk,a\n1,x,2\n3,y,4\n";
        let cols = read_features(csv.as_bytes(), &["a".into(), "b".into()]).unwrap();
        assert_eq!(cols, vec![vec![2.0, 4.0], vec![1.0, 3.0]]);
        assert!(matches!(
            read_features(csv.as_bytes(), &["c".into()]),
            Err(Error::MissingColumn(c)) if c == "c"
        ));
        assert!(matches!(read_features(csv.as_bytes(), &["junk".into()]), Err(Error::Parse { row: 0, .. })));
    }

    #[test]
    fn single_raw_era_becomes_zero() {
        let csv = "x,e,y\n0.5,7,1\n1.5,7,2\n";
        let ds = read_dataset(csv.as_bytes(), "e", "y").unwrap();
        assert_eq!(ds.eras(), &[0, 0]);
        assert_eq!(ds.n_eras(), 1);
    }

    #[test]
    fn sparse_era_ids_are_reindexed_in_order() {
        let csv = "x,e,y\n1,10,0\n2,20,0\n3,10,0\n";
        let ds = read_dataset(csv.as_bytes(), "e", "y").unwrap();
        assert_eq!(ds.eras(), &[0, 1, 0]);
        assert_eq!(ds.n_eras(), 2);
        assert_eq!(ds.era_labels(), &[10, 20]);
        assert_eq!(reindex_eras(&[5, -3, 5, 100]), vec![1, 0, 1, 2]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_dataset(prop1_csv().as_bytes(), "week", "target").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "week"));
    }

    #[test]
    fn bad_cell_reports_location() {
        let csv = "x,e,y\n1,0,0\nabc,0,1\n";
        match read_dataset(csv.as_bytes(), "e", "y").unwrap_err() {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "x", "abc"));
            }
            e => panic!("unexpected {e}"),
        }
        let csv = "x,e,y\n1,0,nan\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), "e", "y").unwrap_err(),
            Error::NonFinite { row: 0, .. }
        ));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(read_dataset("".as_bytes(), "e", "y"), Err(Error::EmptyDataset)));
        assert!(matches!(read_dataset("x,e,y\n".as_bytes(), "e", "y"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn groups_rows() {
        let ds = Dataset::new(vec!["x".into()], vec![vec![0.0; 3]], vec![0.0; 3], vec![1, 0, 1]).unwrap();
        assert_eq!(ds.group_rows_by_era(), vec![vec![1], vec![0, 2]]);
        let ds = read_dataset(prop1_csv().as_bytes(), "era", "target").unwrap();
        assert_eq!(ds.group_rows_by_era(), vec![vec![0, 1], vec![2, 3]]);
        let one = Dataset::new(vec![], vec![], vec![1.0, 2.0], vec![0, 0]).unwrap();
        assert_eq!(one.group_rows_by_era(), vec![vec![0, 1]]);
    }

    #[test]
    fn rejects_gappy_eras() {
        assert!(Dataset::new(vec![], vec![], vec![1.0, 2.0], vec![0, 2]).is_err());
    }
}
