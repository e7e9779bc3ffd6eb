//! Tabular ingestion and the numeric design encoding.
//!
//! Categorical features use treatment coding: the lexicographically first
//! level is the reference and every other level gets one indicator column.
//! Column 0 of the design is always the intercept.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    /// Levels sorted lexicographically; the first one is the reference.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    /// Number of design columns this feature owns.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numeric => 1,
            FeatureKind::Categorical { levels } => levels.len() - 1,
        }
    }
}

/// Ordered feature list plus the name of the prediction column, if the
/// predictions live in the training table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    target: Option<String>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>, target: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::InvalidSchema("feature names must be nonempty".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateColumn(f.name.clone()));
            }
            if let FeatureKind::Categorical { levels } = &f.kind {
                if levels.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` needs at least 2 levels, has {}",
                        f.name,
                        levels.len()
                    )));
                }
                if levels.iter().collect::<HashSet<_>>().len() != levels.len() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` has repeated levels",
                        f.name
                    )));
                }
            }
        }
        if features.is_empty() {
            return Err(Error::InvalidSchema("no features".into()));
        }
        Ok(Self { features, target })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Column layout implied by the schema.
    pub fn column_map(&self) -> ColumnMap {
        let mut ranges = Vec::with_capacity(self.features.len());
        let mut next = 1;
        for f in &self.features {
            ranges.push(next..next + f.width());
            next += f.width();
        }
        ColumnMap { ranges, width: next }
    }
}

/// Which contiguous design columns each feature owns. Column 0 is the
/// intercept and belongs to no feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    ranges: Vec<Range<usize>>,
    width: usize,
}

impl ColumnMap {
    /// Total number of design columns `q`, intercept included.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_features(&self) -> usize {
        self.ranges.len()
    }

    pub fn columns(&self, feature: usize) -> Range<usize> {
        self.ranges[feature].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }
}

/// Overrides for schema inference.
#[derive(Debug, Clone, Default)]
pub struct SchemaHints {
    pub categorical: Vec<String>,
    pub numeric: Vec<String>,
    /// Columns dropped entirely (identifiers, unused covariates).
    pub ignore: Vec<String>,
    /// Prediction column inside the training file, excluded from features.
    pub target: Option<String>,
}

/// Raw cells as read from a delimited file, header included.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(Error::DuplicateColumn(h.clone()));
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(Error::DimensionMismatch {
                    expected: headers.len(),
                    found: row.len(),
                }
                .at_row(r));
            }
            if let Some(c) = row.iter().position(|cell| cell.trim().is_empty()) {
                return Err(Error::MissingCell {
                    row: r,
                    column: headers[c].clone(),
                });
            }
        }
        Ok(Self { headers, rows })
    }

    /// Reads a comma-delimited UTF-8 file with a header row.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_owned).collect());
        }
        Self::new(headers, rows)
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    /// Parses a numeric column, e.g. the model predictions.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| parse_number(&row[c], r, name))
            .collect()
    }

    /// Extracts the feature values of one row, matched by column name.
    pub fn observation(&self, row: usize, schema: &FeatureSchema) -> Result<Vec<FeatureValue>> {
        let cells = &self.rows[row];
        schema
            .features()
            .iter()
            .map(|f| {
                let c = self
                    .headers
                    .iter()
                    .position(|h| *h == f.name)
                    .ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
                match f.kind {
                    FeatureKind::Numeric => parse_number(&cells[c], row, &f.name).map(FeatureValue::Number),
                    FeatureKind::Categorical { .. } => Ok(FeatureValue::Level(cells[c].clone())),
                }
            })
            .collect()
    }
}

fn parse_number(token: &str, row: usize, column: &str) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::NotNumeric {
        row,
        column: column.to_owned(),
        token: token.to_owned(),
    })
}

/// Reads a single-column prediction file (header row, one value per line).
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let table = Table::read_csv(path)?;
    if table.headers().len() != 1 {
        return Err(Error::InvalidSchema(format!(
            "prediction file must have exactly one column, found {}",
            table.headers().len()
        )));
    }
    let name = table.headers()[0].clone();
    table.numeric_column(&name)
}

/// Infers a schema from raw cells. A column is categorical iff any of its
/// cells fails to parse as a number, unless a hint says otherwise.
pub fn infer_schema(table: &Table, hints: &SchemaHints) -> Result<FeatureSchema> {
    for name in hints
        .categorical
        .iter()
        .chain(&hints.numeric)
        .chain(&hints.ignore)
        .chain(hints.target.iter())
    {
        table.column_index(name)?;
    }
    if let Some(both) = hints.categorical.iter().find(|c| hints.numeric.contains(c)) {
        return Err(Error::InvalidSchema(format!(
            "column `{both}` hinted as both numeric and categorical"
        )));
    }

    let mut features = Vec::new();
    for (c, name) in table.headers().iter().enumerate() {
        if hints.ignore.contains(name) || hints.target.as_ref() == Some(name) {
            continue;
        }
        let cells = table.rows().iter().map(|row| row[c].as_str());
        let categorical = if hints.categorical.contains(name) {
            true
        } else if hints.numeric.contains(name) {
            false
        } else {
            cells.clone().any(|t| t.parse::<f64>().is_err())
        };
        let kind = if categorical {
            let levels: BTreeSet<&str> = cells.collect();
            FeatureKind::Categorical {
                levels: levels.into_iter().map(str::to_owned).collect(),
            }
        } else {
            for (r, t) in cells.enumerate() {
                parse_number(t, r, name)?;
            }
            FeatureKind::Numeric
        };
        features.push(Feature {
            name: name.clone(),
            kind,
        });
    }
    if let Some(target) = &hints.target {
        table.numeric_column(target)?;
    }
    FeatureSchema::new(features, hints.target.clone())
}

/// Reads a CSV and infers its schema.
pub fn load_table(path: impl AsRef<Path>, hints: &SchemaHints) -> Result<(FeatureSchema, Table)> {
    let table = Table::read_csv(path)?;
    let schema = infer_schema(&table, hints)?;
    Ok((schema, table))
}

/// A single feature value of an observation.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Number(f64),
    Level(String),
}

impl From<f64> for FeatureValue {
    fn from(x: f64) -> Self {
        FeatureValue::Number(x)
    }
}

impl From<&str> for FeatureValue {
    fn from(s: &str) -> Self {
        FeatureValue::Level(s.to_owned())
    }
}

/// Encodes one observation (values in schema order) into a design row of
/// width `q`, intercept included.
pub fn encode_row<T: Scalar>(
    schema: &FeatureSchema,
    columns: &ColumnMap,
    x_star: &[FeatureValue],
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); columns.width()];
    out[0] = T::one();
    encode_into(schema, columns, x_star, &mut out)?;
    Ok(out)
}

fn encode_into<T: Scalar>(
    schema: &FeatureSchema,
    columns: &ColumnMap,
    x_star: &[FeatureValue],
    out: &mut [T],
) -> Result<()> {
    if let Some(missing) = schema.features().get(x_star.len()) {
        return Err(Error::MissingFeature(missing.name.clone()));
    }
    if x_star.len() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            found: x_star.len(),
        });
    }
    for (i, (f, value)) in schema.features().iter().zip(x_star).enumerate() {
        let range = columns.columns(i);
        match (&f.kind, value) {
            (FeatureKind::Numeric, FeatureValue::Number(x)) => {
                if !x.is_finite() {
                    return Err(Error::NonFinite {
                        feature: f.name.clone(),
                        value: *x,
                    });
                }
                out[range.start] = T::lit(*x);
            }
            (FeatureKind::Categorical { levels }, FeatureValue::Level(level)) => {
                let idx = levels.iter().position(|l| l == level).ok_or_else(|| Error::UnseenLevel {
                    feature: f.name.clone(),
                    level: level.clone(),
                })?;
                if idx > 0 {
                    out[range.start + idx - 1] = T::one();
                }
            }
            (FeatureKind::Numeric, FeatureValue::Level(token)) => {
                return Err(Error::InvalidSchema(format!(
                    "numeric feature `{}` given level `{token}`",
                    f.name
                )))
            }
            (FeatureKind::Categorical { .. }, FeatureValue::Number(x)) => {
                return Err(Error::InvalidSchema(format!(
                    "categorical feature `{}` given number {x}",
                    f.name
                )))
            }
        }
    }
    Ok(())
}

/// Dense `N × q` design matrix with its feature-to-column map.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    rows: usize,
    columns: ColumnMap,
    values: Vec<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Wraps row-major values. Column 0 must be the intercept.
    pub fn from_row_major(columns: ColumnMap, values: Vec<T>) -> Result<Self> {
        let q = columns.width();
        if !values.len().is_multiple_of(q) {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: values.len() % q,
            });
        }
        let rows = values.len() / q;
        if rows < q {
            return Err(Error::TooFewRows { rows, columns: q });
        }
        Ok(Self { rows, columns, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.columns.width()
    }

    pub fn column_map(&self) -> &ColumnMap {
        &self.columns
    }

    pub fn row(&self, r: usize) -> &[T] {
        let q = self.width();
        &self.values[r * q..(r + 1) * q]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// Encodes every row of `table` under `schema`.
pub fn build_design<T: Scalar>(schema: &FeatureSchema, table: &Table) -> Result<DesignMatrix<T>> {
    let columns = schema.column_map();
    let q = columns.width();
    let mut values = vec![T::zero(); table.len() * q];
    for (r, chunk) in values.chunks_mut(q).enumerate() {
        let obs = table.observation(r, schema)?;
        chunk[0] = T::one();
        encode_into(schema, &columns, &obs, chunk).map_err(|e| e.at_row(r))?;
    }
    DesignMatrix::from_row_major(columns, values)
}

/// `Q = XᵀX`, `m = Xᵀf` and the largest diagonal entry of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem<T> {
    pub q: SquareMatrix<T>,
    pub m: Vec<T>,
    pub max_diag: T,
}

impl<T: Scalar> GramSystem<T> {
    pub fn width(&self) -> usize {
        self.q.dim()
    }
}

pub fn compute_gram<T: Scalar>(design: &DesignMatrix<T>, f: &[T]) -> Result<GramSystem<T>> {
    if design.rows() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: design.rows(),
            found: f.len(),
        });
    }
    if let Some(bad) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            feature: "prediction".into(),
            value: f[bad].as_f64(),
        }
        .at_row(bad));
    }
    let q = design.width();
    let mut gram = SquareMatrix::zeros(q);
    let mut m = vec![T::zero(); q];
    for r in 0..design.rows() {
        let x = design.row(r);
        for i in 0..q {
            let xi = x[i];
            for j in i..q {
                gram[(i, j)] += xi * x[j];
            }
            m[i] += xi * f[r];
        }
    }
    for i in 0..q {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let max_diag = gram.diagonal().fold(T::zero(), T::max);
    Ok(GramSystem { q: gram, m, max_diag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> Table {
        Table::from_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let t = table("a,b\n1.5,x\n2,y\n3,x\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        assert_eq!(s.features()[0].kind, FeatureKind::Numeric);
        assert_eq!(
            s.features()[1].kind,
            FeatureKind::Categorical {
                levels: vec!["x".into(), "y".into()]
            }
        );
    }

    #[test]
    fn rejects_duplicate_header_and_missing_cells() {
        let err = Table::from_reader("a,a\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(ref c) if c == "a"));
        let err = Table::from_reader("a,b\n1,2\n3,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingCell { row: 1, ref column } if column == "b"));
        let err = Table::from_reader("a,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyTable));
    }

    #[test]
    fn hints_override_inference() {
        let t = table("a,b,id,y\n1,2,r1,0.5\n2,2,r2,0.1\n1,3,r3,0.2\n");
        let hints = SchemaHints {
            categorical: vec!["a".into()],
            ignore: vec!["id".into()],
            target: Some("y".into()),
            ..Default::default()
        };
        let s = infer_schema(&t, &hints).unwrap();
        assert_eq!(s.names().collect::<Vec<_>>(), ["a", "b"]);
        assert!(matches!(s.features()[0].kind, FeatureKind::Categorical { .. }));
        assert_eq!(s.target(), Some("y"));

        let bad = SchemaHints {
            numeric: vec!["id".into()],
            ..Default::default()
        };
        assert!(matches!(infer_schema(&t, &bad), Err(Error::NotNumeric { .. })));
        let unknown = SchemaHints {
            numeric: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(infer_schema(&t, &unknown), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn single_level_categorical_is_invalid() {
        let t = table("a,b\n1,x\n2,x\n");
        assert!(matches!(
            infer_schema(&t, &SchemaHints::default()),
            Err(Error::InvalidSchema(_))
        ));
    }

    #[test]
    fn numeric_design() {
        let t = table("a\n2.0\n3.0\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        let x: DesignMatrix<f64> = build_design(&s, &t).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 1.0, 3.0]);
        assert_eq!(x.column_map().columns(0), 1..2);
    }

    #[test]
    fn treatment_coding() {
        let t = table("c\ny\nx\nz\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        let x: DesignMatrix<f64> = build_design(&s, &t).unwrap();
        assert_eq!(x.column_map().columns(0), 1..3);
        let dummies: Vec<&[f64]> = (0..3).map(|r| &x.row(r)[1..3]).collect();
        assert_eq!(dummies, [&[1.0, 0.0][..], &[0.0, 0.0], &[0.0, 1.0]]);
    }

    #[test]
    fn unseen_level_and_missing_feature() {
        let t = table("c,n\ny,1\nx,2\nz,4\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        let cols = s.column_map();
        let err = encode_row::<f64>(&s, &cols, &["w".into(), 1.0.into()]).unwrap_err();
        assert!(matches!(err, Error::UnseenLevel { .. }));
        let err = encode_row::<f64>(&s, &cols, &["x".into()]).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(ref n) if n == "n"));
        let row = encode_row::<f64>(&s, &cols, &["x".into(), 2.5.into()]).unwrap();
        assert_eq!(row, vec![1.0, 0.0, 0.0, 2.5]);
    }

    #[test]
    fn non_finite_numeric_rejected() {
        let t = table("a\n1\nNaN\n3\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        let err = build_design::<f64>(&s, &t).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
    }

    #[test]
    fn too_few_rows() {
        let t = table("a,b\n1,2\n");
        let s = infer_schema(&t, &SchemaHints::default()).unwrap();
        assert!(matches!(
            build_design::<f64>(&s, &t),
            Err(Error::TooFewRows { rows: 1, columns: 3 })
        ));
    }

    #[test]
    fn gram_examples() {
        let cols = ColumnMap {
            ranges: vec![],
            width: 1,
        };
        let x = DesignMatrix::from_row_major(cols, vec![1.0, 1.0]).unwrap();
        let g = compute_gram(&x, &[1.0, 3.0]).unwrap();
        assert_eq!(g.q.as_slice(), &[2.0]);
        assert_eq!(g.m, vec![4.0]);

        let cols = ColumnMap {
            ranges: vec![1..2],
            width: 2,
        };
        let x = DesignMatrix::from_row_major(cols, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let g = compute_gram(&x, &[0.0, 1.0]).unwrap();
        assert_eq!(g.q.as_slice(), &[2.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.m, vec![1.0, 1.0]);
        assert_eq!(g.max_diag, 2.0);
        assert!(compute_gram(&x, &[0.0]).is_err());
    }
}
