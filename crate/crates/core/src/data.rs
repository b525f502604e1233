//! Data model shared by every phase: tabular input, the normalized [`Dataset`],
//! and the label-by-sensitive-category [`Partition`].

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};
use crate::scalar::Scalar;

/// Name given to the intercept column when ingestion has to insert one.
pub const INTERCEPT: &str = "intercept";

/// A single raw column.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn as_strings(&self) -> Vec<String> {
        match self {
            Column::Numeric(v) => v.iter().map(|x| x.to_string()).collect(),
            Column::Text(v) => v.clone(),
        }
    }
}

/// Column-oriented raw table, the input to [`ingest_dataset`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a column. All columns must share one length.
    pub fn push(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if first.len() != column.len() {
                return Err(FairError::LengthMismatch { expected: first.len(), got: column.len() });
            }
        }
        self.names.push(name.into());
        self.columns.push(column);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, column: Column) -> Result<Self> {
        self.push(name, column)?;
        Ok(self)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    /// Reads a headed CSV. Columns whose every cell parses as a real become
    /// numeric; the rest, and every column named in `categorical`, stay text.
    pub fn from_csv_reader<R: Read>(reader: R, categorical: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (j, cell) in record.iter().enumerate() {
                cells[j].push(cell.trim().to_string());
            }
        }
        let mut table = Table::new();
        for (name, raw) in headers.into_iter().zip(cells) {
            let parsed: Option<Vec<f64>> = if categorical.contains(&name.as_str()) {
                None
            } else {
                raw.iter().map(|c| c.parse::<f64>().ok()).collect()
            };
            let column = match parsed {
                Some(values) => Column::Numeric(values),
                None => Column::Text(raw),
            };
            table.push(name, column)?;
        }
        Ok(table)
    }

    pub fn read_csv(path: impl AsRef<Path>, categorical: &[&str]) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file), categorical)
    }

    /// Writes the table as comma-separated UTF-8 with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let cols: Vec<Vec<String>> = self.columns.iter().map(Column::as_strings).collect();
        for i in 0..self.n_rows() {
            wtr.write_record(cols.iter().map(|c| c[i].as_str()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Group membership: `ids[row]` indexes into `names`; every group is nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Groups {
    names: Vec<String>,
    ids: Vec<usize>,
}

impl Groups {
    /// Builds group ids in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut ids = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            if label.is_empty() {
                return Err(FairError::EmptyGroup(String::new()));
            }
            let next = names.len();
            let id = *index.entry(label).or_insert_with(|| {
                names.push(label.to_string());
                next
            });
            ids.push(id);
        }
        Ok(Self { names, ids })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn n_groups(&self) -> usize {
        self.names.len()
    }

    pub fn label_of(&self, row: usize) -> &str {
        &self.names[self.ids[row]]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.names.len()];
        for &id in &self.ids {
            sizes[id] += 1;
        }
        sizes
    }
}

/// Normalized classification data.
///
/// Column 0 of `features` is the all-ones intercept. Labels, when present,
/// are `-1`/`+1`. Each sensitive vector is 0/1 and also remains a column of
/// `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Array2<T>,
    feature_names: Vec<String>,
    labels: Option<Vec<i8>>,
    sensitive: BTreeMap<String, Vec<u8>>,
    groups: Option<Groups>,
}

impl<T: Scalar> Dataset<T> {
    /// Assembles a dataset, checking every structural invariant.
    pub fn new(
        features: Array2<T>,
        feature_names: Vec<String>,
        labels: Option<Vec<i8>>,
        sensitive: BTreeMap<String, Vec<u8>>,
        groups: Option<Groups>,
    ) -> Result<Self> {
        let (n, width) = features.dim();
        if width == 0 {
            return Err(FairError::InvalidParameter("feature matrix has no columns".into()));
        }
        if feature_names.len() != width {
            return Err(FairError::LengthMismatch { expected: width, got: feature_names.len() });
        }
        if features.column(0).iter().any(|&v| v != T::one()) {
            return Err(FairError::InvalidParameter("column 0 must be the all-ones intercept".into()));
        }
        if let Some(y) = &labels {
            if y.len() != n {
                return Err(FairError::LengthMismatch { expected: n, got: y.len() });
            }
            if let Some(&bad) = y.iter().find(|&&v| v != 1 && v != -1) {
                return Err(FairError::LabelCoding { value: f64::from(bad) });
            }
        }
        for (name, s) in &sensitive {
            if s.len() != n {
                return Err(FairError::LengthMismatch { expected: n, got: s.len() });
            }
            if s.iter().any(|&v| v > 1) {
                return Err(FairError::NonBinarySensitive(name.clone()));
            }
        }
        if let Some(g) = &groups {
            if g.ids.len() != n {
                return Err(FairError::LengthMismatch { expected: n, got: g.ids.len() });
            }
            if let Some(k) = g.sizes().iter().position(|&c| c == 0) {
                return Err(FairError::EmptyGroup(g.names[k].clone()));
            }
        }
        Ok(Self { features, feature_names, labels, sensitive, groups })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    /// Number of columns including the intercept (`p + 1`).
    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[i8]> {
        self.labels().ok_or(FairError::MissingLabels)
    }

    pub fn sensitive_names(&self) -> impl Iterator<Item = &str> {
        self.sensitive.keys().map(String::as_str)
    }

    pub fn sensitive(&self, name: &str) -> Result<&[u8]> {
        self.sensitive.get(name).map(Vec::as_slice).ok_or_else(|| FairError::UnknownSensitive(name.to_string()))
    }

    pub fn groups(&self) -> Option<&Groups> {
        self.groups.as_ref()
    }

    pub fn require_groups(&self) -> Result<&Groups> {
        self.groups().ok_or(FairError::MissingGroups)
    }

    /// Replaces the labels (the `ytrain` argument of the pipeline entry points).
    pub fn with_labels(mut self, labels: &[i8]) -> Result<Self> {
        self.labels = Some(labels.to_vec());
        let Self { features, feature_names, labels, sensitive, groups } = self;
        Self::new(features, feature_names, labels, sensitive, groups)
    }

    /// Attaches group ids given as category labels, one per row.
    pub fn with_groups<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(FairError::LengthMismatch { expected: self.n_rows(), got: labels.len() });
        }
        self.groups = Some(Groups::from_labels(labels)?);
        Ok(self)
    }

    pub fn without_groups(mut self) -> Self {
        self.groups = None;
        self
    }

    /// New dataset made of the given rows, in order; repeats are allowed.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let features = self.features.select(Axis(0), rows);
        let labels = self.labels.as_ref().map(|y| rows.iter().map(|&i| y[i]).collect());
        let sensitive = self.sensitive.iter().map(|(k, s)| (k.clone(), rows.iter().map(|&i| s[i]).collect())).collect();
        let groups = self.groups.as_ref().map(|g| {
            let picked: Vec<&str> = rows.iter().map(|&i| g.label_of(i)).collect();
            Groups::from_labels(&picked).expect("labels of an existing grouping are nonempty")
        });
        Self { features, feature_names: self.feature_names.clone(), labels, sensitive, groups }
    }

    /// Flattens back into a raw table: features, then `label_col`, then `group_col`.
    pub fn to_table(&self, label_col: &str, group_col: &str) -> Table {
        let mut table = Table::new();
        for (j, name) in self.feature_names.iter().enumerate() {
            let col = self.features.column(j).iter().map(|v| v.to_f64_lossy()).collect();
            table.push(name.clone(), Column::Numeric(col)).expect("aligned columns");
        }
        if let Some(y) = &self.labels {
            let col = y.iter().map(|&v| f64::from(v)).collect();
            table.push(label_col, Column::Numeric(col)).expect("aligned columns");
        }
        if let Some(g) = &self.groups {
            let col = (0..self.n_rows()).map(|i| g.label_of(i).to_string()).collect();
            table.push(group_col, Column::Text(col)).expect("aligned columns");
        }
        table
    }
}

/// How a raw label column is coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelCoding {
    /// `-1` / `+1`.
    PlusMinusOne,
    /// `0` / `1`, mapped 0 ↦ −1 and 1 ↦ +1.
    ZeroOne,
    /// Whichever of the two the values fit.
    #[default]
    Auto,
}

/// Column roles for [`ingest_dataset`].
#[derive(Debug, Clone, Default)]
pub struct IngestOptions<'a> {
    pub label_col: Option<&'a str>,
    pub sensitive: &'a [&'a str],
    pub group_col: Option<&'a str>,
    pub label_coding: LabelCoding,
}

/// Normalizes a raw table into a [`Dataset`].
///
/// Every column other than the label and group columns becomes a feature.
/// An exact all-ones column is moved to position 0; if none exists an
/// `intercept` column is prepended.
pub fn ingest_dataset<T: Scalar>(table: &Table, opts: &IngestOptions<'_>) -> Result<Dataset<T>> {
    let n = table.n_rows();
    if n == 0 {
        return Err(FairError::Empty);
    }

    let labels = match opts.label_col {
        None => None,
        Some(name) => {
            let col = table.column(name).ok_or_else(|| FairError::MissingColumn(name.into()))?;
            let Column::Numeric(values) = col else {
                return Err(FairError::NonNumericColumn(name.into()));
            };
            Some(recode_labels(name, values, opts.label_coding)?)
        }
    };

    let groups = match opts.group_col {
        None => None,
        Some(name) => {
            let col = table.column(name).ok_or_else(|| FairError::MissingColumn(name.into()))?;
            Some(Groups::from_labels(&col.as_strings())?)
        }
    };

    let mut names = Vec::new();
    let mut columns: Vec<&Vec<f64>> = Vec::new();
    for (name, col) in table.names.iter().zip(&table.columns) {
        if Some(name.as_str()) == opts.label_col || Some(name.as_str()) == opts.group_col {
            continue;
        }
        match col {
            Column::Numeric(v) => {
                names.push(name.clone());
                columns.push(v);
            }
            Column::Text(_) => return Err(FairError::NonNumericColumn(name.clone())),
        }
    }

    let mut sensitive = BTreeMap::new();
    for &sf in opts.sensitive {
        let j = names.iter().position(|n| n == sf).ok_or_else(|| FairError::MissingColumn(sf.into()))?;
        let coded: Option<Vec<u8>> = columns[j]
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Some(0)
                } else if v == 1.0 {
                    Some(1)
                } else {
                    None
                }
            })
            .collect();
        sensitive.insert(sf.to_string(), coded.ok_or_else(|| FairError::NonBinarySensitive(sf.into()))?);
    }

    match columns.iter().position(|c| c.iter().all(|&v| v == 1.0)) {
        Some(j) => {
            let c = columns.remove(j);
            let name = names.remove(j);
            columns.insert(0, c);
            names.insert(0, name);
        }
        None => {
            names.insert(0, INTERCEPT.to_string());
        }
    }
    let offset = usize::from(names.len() > columns.len());
    let width = names.len();
    let mut features = Array2::<T>::zeros((n, width));
    if offset == 1 {
        features.column_mut(0).fill(T::one());
    }
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            features[[i, j + offset]] = T::lit(v);
        }
    }

    Dataset::new(features, names, labels, sensitive, groups)
}

fn recode_labels(name: &str, values: &[f64], coding: LabelCoding) -> Result<Vec<i8>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in values {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() != 2 {
        return Err(FairError::LabelNotBinary { column: name.into(), distinct: distinct.len() });
    }
    let zero_one = distinct.iter().all(|&v| v == 0.0 || v == 1.0);
    let plus_minus = distinct.iter().all(|&v| v == -1.0 || v == 1.0);
    let use_zero_one = match coding {
        LabelCoding::ZeroOne => true,
        LabelCoding::PlusMinusOne => false,
        LabelCoding::Auto => zero_one,
    };
    let ok = if use_zero_one { zero_one } else { plus_minus };
    if !ok {
        let bad = distinct
            .into_iter()
            .find(|&v| if use_zero_one { v != 0.0 && v != 1.0 } else { v != -1.0 && v != 1.0 })
            .unwrap_or(f64::NAN);
        return Err(FairError::LabelCoding { value: bad });
    }
    Ok(values.iter().map(|&v| if v == 1.0 { 1 } else { -1 }).collect())
}

/// The eight index sets induced by one sensitive feature and the labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Octet {
    pub s0: Vec<usize>,
    pub s1: Vec<usize>,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    /// Positives with s = 0.
    pub dp0: Vec<usize>,
    /// Positives with s = 1.
    pub dp1: Vec<usize>,
    /// Negatives with s = 0.
    pub dn0: Vec<usize>,
    /// Negatives with s = 1.
    pub dn1: Vec<usize>,
}

impl Octet {
    fn push(&mut self, row: usize, s: u8, y: i8) {
        let positive = y == 1;
        match (s == 1, positive) {
            (false, true) => self.dp0.push(row),
            (true, true) => self.dp1.push(row),
            (false, false) => self.dn0.push(row),
            (true, false) => self.dn1.push(row),
        }
        if s == 1 {
            self.s1.push(row)
        } else {
            self.s0.push(row)
        }
        if positive {
            self.pos.push(row)
        } else {
            self.neg.push(row)
        }
    }
}

/// Octet over the whole dataset and, in grouped mode, one octet per group.
/// Row indices always refer to the full dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub global: Octet,
    pub per_group: Option<Vec<Octet>>,
}

pub fn partition<T: Scalar>(d: &Dataset<T>, sf: &str, grouped: bool) -> Result<Partition> {
    let y = d.require_labels()?;
    let s = d.sensitive(sf)?;
    let mut global = Octet::default();
    for (i, (&si, &yi)) in s.iter().zip(y).enumerate() {
        global.push(i, si, yi);
    }
    let per_group = if grouped {
        let g = d.require_groups()?;
        let mut octets = vec![Octet::default(); g.n_groups()];
        for (i, &k) in g.ids().iter().enumerate() {
            octets[k].push(i, s[i], y[i]);
        }
        Some(octets)
    } else {
        None
    };
    Ok(Partition { global, per_group })
}
