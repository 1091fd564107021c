use std::path::Path;

use super::{Dataset, FeatureSchema, Preprocessor, RawValue};
use crate::error::{Error, Result};

/// Header plus string cells.
pub fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Invalid(format!("{}: {e}", path.display())),
            _ => Error::Csv(e),
        })?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok((header, rows))
}

/// Loads and encodes a CSV. Fits a new [`Preprocessor`] when none is given.
///
/// The label column is optional; when present, a row is positive iff its
/// label equals `schema.positive_label`.
pub fn load_csv(
    path: &Path,
    schema: &FeatureSchema,
    preproc: Option<&Preprocessor>,
) -> Result<(Dataset, Preprocessor)> {
    schema.validate()?;
    let (header, cells) = read_csv_table(path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let feature_cols = schema
        .features
        .iter()
        .map(|f| col(&f.name).ok_or_else(|| Error::MissingColumn(f.name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let label_col = col(&schema.label);

    let mut raw_rows = Vec::with_capacity(cells.len());
    for (i, row) in cells.iter().enumerate() {
        let mut raw = Vec::with_capacity(feature_cols.len());
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            let cell = row.get(c).cloned().unwrap_or_default();
            raw.push(match f.kind {
                super::FeatureKind::Continuous => RawValue::Num(cell.parse::<f64>().map_err(|_| Error::BadNumber {
                    row: i,
                    feature: f.name.clone(),
                    value: cell.clone(),
                })?),
                super::FeatureKind::Categorical => RawValue::Cat(cell),
            });
        }
        raw_rows.push(raw);
    }

    let pre = match preproc {
        Some(p) => p.clone(),
        None => Preprocessor::fit(schema, &raw_rows)?,
    };
    let rows = raw_rows
        .iter()
        .enumerate()
        .map(|(i, r)| pre.encode(schema, r, i))
        .collect::<Result<Vec<_>>>()?;
    let labels = label_col.map(|c| {
        cells
            .iter()
            .map(|r| u8::from(r.get(c).map(String::as_str) == Some(schema.positive_label.as_str())))
            .collect()
    });
    Ok((Dataset::new(schema.clone(), rows, labels)?, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;
    use std::io::Write;

    fn schema() -> FeatureSchema {
        let mut s = FeatureSchema::new(
            vec![
                Feature::continuous("income", true),
                Feature::categorical("grade", &["a", "b", "c"], true),
            ],
            "yes",
        )
        .unwrap();
        s.label = "approved".into();
        s
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_encodes() {
        let f = write("income,grade,approved\n0,a,no\n5,b,yes\n10,c,no\n");
        let (d, p) = load_csv(f.path(), &schema(), None).unwrap();
        assert_eq!(d.rows[1], vec![0.5, 0.0, 1.0, 0.0]);
        assert_eq!(d.rows[2][0], 1.0);
        assert_eq!(d.labels.as_deref(), Some(&[0u8, 1, 0][..]));
        // reuse the fitted preprocessor
        let f2 = write("income,grade\n20,c\n");
        let (d2, _) = load_csv(f2.path(), &schema(), Some(&p)).unwrap();
        assert_eq!(d2.rows[0][0], 1.0);
        assert!(d2.labels.is_none());
    }

    #[test]
    fn missing_column() {
        let f = write("income,approved\n1,no\n2,yes\n");
        let err = load_csv(f.path(), &schema(), None).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "grade"));
    }

    #[test]
    fn bad_number_reports_row() {
        let f = write("income,grade,approved\n1,a,no\nabc,b,yes\n");
        let err = load_csv(f.path(), &schema(), None).unwrap_err();
        assert!(matches!(err, Error::BadNumber { row: 1, .. }), "{err}");
    }

    #[test]
    fn unknown_category() {
        let f = write("income,grade,approved\n1,a,no\n2,q,yes\n");
        let err = load_csv(f.path(), &schema(), None).unwrap_err();
        assert!(matches!(err, Error::UnknownCategory { ref value, .. } if value == "q"));
    }
}
