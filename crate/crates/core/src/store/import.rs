//! Terminology import formats.
//!
//! Delimited text has three columns (code_id, string, rank), UTF-8, with a
//! configurable delimiter (tab by default) and no header unless asked for.
//! The columnar fixture format is a JSON object of three equal-length arrays:
//! `{"code_id": [...], "string": [...], "rank": [...]}`.

use std::io::Read;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRow {
    pub code_id: String,
    pub text: String,
    pub source_rank: i64,
}

impl ImportRow {
    pub fn new(code_id: impl Into<String>, text: impl Into<String>, source_rank: i64) -> Self {
        ImportRow {
            code_id: code_id.into(),
            text: text.into(),
            source_rank,
        }
    }
}

/// A row skipped during import. `row` is 1-based within the input stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DelimitedOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for DelimitedOptions {
    fn default() -> Self {
        DelimitedOptions {
            delimiter: b'\t',
            has_header: false,
        }
    }
}

/// Reads delimited rows; rows with the wrong shape or a non-integer rank come
/// back as rejections in stream order.
pub fn read_delimited<R: Read>(reader: R, opts: &DelimitedOptions) -> Vec<Result<ImportRow, RowRejection>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .quoting(opts.delimiter != b'\t')
        .from_reader(reader);
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 1;
            let rec = rec.map_err(|e| RowRejection {
                row,
                reason: format!("unreadable row: {e}"),
            })?;
            if rec.len() != 3 {
                return Err(RowRejection {
                    row,
                    reason: format!("expected 3 columns, found {}", rec.len()),
                });
            }
            let rank = rec[2].trim().parse::<i64>().map_err(|_| RowRejection {
                row,
                reason: format!("rank '{}' is not an integer", &rec[2]),
            })?;
            Ok(ImportRow::new(&rec[0], &rec[1], rank))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct Columnar {
    code_id: Vec<String>,
    string: Vec<String>,
    rank: Vec<i64>,
}

pub fn read_columnar(json: &str) -> Result<Vec<ImportRow>, String> {
    let c: Columnar = serde_json::from_str(json).map_err(|e| e.to_string())?;
    if c.code_id.len() != c.string.len() || c.code_id.len() != c.rank.len() {
        return Err("columns differ in length".into());
    }
    Ok(c.code_id
        .into_iter()
        .zip(c.string)
        .zip(c.rank)
        .map(|((code_id, text), source_rank)| ImportRow {
            code_id,
            text,
            source_rank,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_tab_delimited_rows_and_rejects_bad_ones() {
        let input = "C001\tmyocardial infarction\t0\nC001\theart attack\t1\nbad row\nC002\tx\tone\n";
        let rows = read_delimited(input.as_bytes(), &DelimitedOptions::default());
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], Ok(ImportRow::new("C001", "myocardial infarction", 0)));
        assert_eq!(rows[2].as_ref().unwrap_err().row, 3);
        assert!(rows[3].as_ref().unwrap_err().reason.contains("rank"));
    }

    #[test]
    fn tab_mode_keeps_quotes_literal() {
        let rows = read_delimited("C1\t\"quoted\" term\t0\n".as_bytes(), &DelimitedOptions::default());
        assert_eq!(rows[0].as_ref().unwrap().text, "\"quoted\" term");
    }

    #[test]
    fn comma_delimiter_with_header() {
        let opts = DelimitedOptions {
            delimiter: b',',
            has_header: true,
        };
        let rows = read_delimited("code,string,rank\nD1,\"fever, high\",0\n".as_bytes(), &opts);
        assert_eq!(rows, vec![Ok(ImportRow::new("D1", "fever, high", 0))]);
    }

    #[test]
    fn columnar_fixture() {
        let rows = read_columnar(r#"{"code_id":["A","A"],"string":["x","y"],"rank":[0,1]}"#).unwrap();
        assert_eq!(rows[1], ImportRow::new("A", "y", 1));
        assert!(read_columnar(r#"{"code_id":["A"],"string":[],"rank":[0]}"#).is_err());
    }
}
