//! CSV ingestion and export of masked datasets. Empty cells and `NA` are missing.

use std::path::Path;

use crate::domain::{MaskedDataset, MaskedMatrix};
use crate::error::{Error, Result};

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Read a CSV with a header; `outcome` names the outcome column and every
/// other column is a predictor.
pub fn read_dataset<R: std::io::Read>(input: R, outcome: &str) -> Result<MaskedDataset> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let y_col = headers
        .iter()
        .position(|h| h == outcome)
        .ok_or_else(|| Error::Input(format!("outcome column {outcome:?} not found")))?;
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut y_missing = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<Option<f64>> {
            let s = &rec[c];
            if is_missing_token(s) {
                return Ok(None);
            }
            s.trim().parse::<f64>().map(Some).map_err(|_| {
                Error::Input(format!("row {}, column {}: {s:?} is not a number", r + 1, headers[c]))
            })
        };
        rows.push(x_cols.iter().map(|&c| parse(c)).collect::<Result<Vec<_>>>()?);
        match parse(y_col)? {
            Some(v) => {
                y.push(v);
                y_missing.push(false);
            }
            None => {
                y.push(0.0);
                y_missing.push(true);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Input("dataset has no rows".into()));
    }
    let x = MaskedMatrix::from_rows(&rows)?;
    let names = x_cols.iter().map(|&c| headers[c].clone()).collect();
    MaskedDataset::new(x, y, y_missing, names, outcome)
}

pub fn read_dataset_path(path: &Path, outcome: &str) -> Result<MaskedDataset> {
    read_dataset(std::fs::File::open(path)?, outcome)
}

/// Write predictors then the outcome, with `NA` for missing cells.
pub fn write_dataset<W: std::io::Write>(ds: &MaskedDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ds.column_names().iter().map(String::as_str).collect();
    header.push(ds.outcome_name());
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for i in 0..ds.n() {
        let mut rec: Vec<String> = (0..ds.p()).map(|j| fmt(ds.x().opt(i, j))).collect();
        rec.push(fmt(ds.y_at(i).ok()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_path(ds: &MaskedDataset, path: &Path) -> Result<()> {
    write_dataset(ds, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn na_and_empty_are_missing() {
        let text = "a,b,y\n1,NA,0\n,2,1\n3,4,NA\n";
        let ds = read_dataset(text.as_bytes(), "y").unwrap();
        assert_eq!(ds.column_names(), ["a", "b"]);
        assert!(ds.x().is_missing(0, 1));
        assert!(ds.x().is_missing(1, 0));
        assert!(!ds.y_observed(2));
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,y\n1,NA,0\nNA,2,1\n3,4,NA\n");
    }

    #[test]
    fn bad_cell_is_input_error() {
        let err = read_dataset("a,y\nfoo,1\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert!(matches!(read_dataset("a,y\n1,1\n".as_bytes(), "z"), Err(Error::Input(_))));
    }
}
