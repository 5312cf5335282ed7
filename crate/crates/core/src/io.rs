//! Matrix files (CSV or a fixed little-endian binary layout), label files and
//! detection reports.
//!
//! Binary matrices are `BIRSMAT1`, then rows and cols as `u64` little endian,
//! then `rows * cols` `f64` little endian values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::region::{DetectionResult, Region};
use crate::simulation::ExperimentResult;

pub const MAGIC: &[u8; 8] = b"BIRSMAT1";
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// `.bin` files are binary, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => Self::Bin,
            _ => Self::Csv,
        }
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_bin(m: &SampleMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_bin(bytes: &[u8], path: &Path) -> Result<SampleMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(
            path,
            format!(
                "truncated header: expected {HEADER_LEN} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(parse_err(path, "bad magic bytes, expected BIRSMAT1"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8), word(16));
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| parse_err(path, format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() as u64 != expected {
        return Err(parse_err(
            path,
            format!(
                "payload size mismatch for {rows}x{cols}: expected {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    SampleMatrix::new(rows as usize, cols as usize, values)
        .map_err(|e| parse_err(path, e.to_string()))
}

fn read_csv(path: &Path) -> Result<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(j, cell)| cell.parse::<f64>().map_err(|_| j))
            .collect();
        let row = match parsed {
            Ok(row) => row,
            // a non-numeric first row is a header
            Err(_) if line == 0 => continue,
            Err(j) => {
                return Err(parse_err(
                    path,
                    format!(
                        "row {}, column {}: '{}' is not a number",
                        line + 1,
                        j + 1,
                        &record[j]
                    ),
                ))
            }
        };
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(
                    path,
                    format!("row {} has {} columns, expected {c}", line + 1, row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, "no numeric rows"))?;
    SampleMatrix::new(rows, cols, values).map_err(|e| parse_err(path, e.to_string()))
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<SampleMatrix> {
    match format {
        MatrixFormat::Bin => decode_bin(&fs::read(path)?, path),
        MatrixFormat::Csv => read_csv(path),
    }
}

pub fn write_matrix(path: &Path, m: &SampleMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Bin => fs::write(path, encode_bin(m))?,
        MatrixFormat::Csv => {
            let mut out = std::io::BufWriter::new(fs::File::create(path)?);
            for row in m.row_iter() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Newline-delimited 0/1 group labels.
pub fn read_labels(path: &Path) -> Result<Vec<bool>> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(parse_err(
                path,
                format!("line {}: label '{other}' is not 0 or 1", i + 1),
            )),
        })
        .collect()
}

/// Split rows by label: label 1 rows form X, label 0 rows form Y.
pub fn split_by_labels(m: &SampleMatrix, labels: &[bool]) -> Result<(SampleMatrix, SampleMatrix)> {
    if labels.len() != m.rows() {
        return Err(Error::Input(format!(
            "{} labels for a matrix with {} rows",
            labels.len(),
            m.rows()
        )));
    }
    let pick = |want: bool| -> Vec<usize> {
        labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == want)
            .map(|(i, _)| i)
            .collect()
    };
    let (xs, ys) = (pick(true), pick(false));
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Input("both label groups must be nonempty".into()));
    }
    Ok((m.select_rows(&xs)?, m.select_rows(&ys)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Json,
    Tsv,
}

impl std::str::FromStr for ResultFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "tsv" => Ok(Self::Tsv),
            other => Err(Error::Config(format!(
                "unknown output format '{other}' (expected json or tsv)"
            ))),
        }
    }
}

/// One reported region, 1-based inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub start_1based: usize,
    pub end_1based_inclusive: usize,
    pub round: u32,
    pub depth: u32,
    pub statistic: f64,
}

impl RegionRecord {
    pub fn region(&self) -> Result<Region> {
        Region::from_one_based(self.start_1based, self.end_1based_inclusive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub regions: Vec<RegionRecord>,
    pub tests_performed: u64,
    pub rounds_used: u32,
    pub bootstrap_runs: u64,
    pub capped: bool,
    pub config_echo: serde_json::Value,
}

impl ResultDocument {
    pub fn new(result: &DetectionResult, config_echo: serde_json::Value) -> Self {
        Self {
            regions: result
                .summaries()
                .into_iter()
                .map(|s| {
                    let (start, end) = s.region.one_based();
                    RegionRecord {
                        start_1based: start,
                        end_1based_inclusive: end,
                        round: s.round,
                        depth: s.depth,
                        statistic: s.statistic,
                    }
                })
                .collect(),
            tests_performed: result.tests_performed,
            rounds_used: result.rounds_used,
            bootstrap_runs: result.bootstrap_runs,
            capped: result.capped,
            config_echo,
        }
    }

    pub fn regions(&self) -> Result<Vec<Region>> {
        self.regions.iter().map(RegionRecord::region).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# tests_performed\t{}\n# rounds_used\t{}\n",
            self.tests_performed, self.rounds_used
        );
        out.push_str("start_1based\tend_1based_inclusive\tround\tdepth\tstatistic\n");
        for r in &self.regions {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.start_1based, r.end_1based_inclusive, r.round, r.depth, r.statistic
            ));
        }
        out
    }
}

pub fn parse_result_json(text: &str) -> Result<ResultDocument> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_result(
    result: &DetectionResult,
    path: &Path,
    format: ResultFormat,
    config_echo: serde_json::Value,
) -> Result<()> {
    let doc = ResultDocument::new(result, config_echo);
    let text = match format {
        ResultFormat::Json => doc.to_json()? + "\n",
        ResultFormat::Tsv => doc.to_tsv(),
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn experiment_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from(ExperimentResult::CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::DetectedSegment;

    #[test]
    fn csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("a.csv");
        fs::write(&plain, "1,2\n3,4\n").unwrap();
        let m = read_matrix(&plain, MatrixFormat::Csv).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0]);

        let headed = dir.path().join("b.csv");
        fs::write(&headed, "snp1,snp2\n1,2\n3,4\n").unwrap();
        assert_eq!(read_matrix(&headed, MatrixFormat::Csv).unwrap(), m);
    }

    #[test]
    fn csv_errors_name_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("r.csv");
        fs::write(&ragged, "1,2\n3\n").unwrap();
        let msg = read_matrix(&ragged, MatrixFormat::Csv)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 2"), "{msg}");

        let bad = dir.path().join("n.csv");
        fs::write(&bad, "1,2\n3,x\n").unwrap();
        let msg = read_matrix(&bad, MatrixFormat::Csv)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 2, column 2"), "{msg}");
    }

    #[test]
    fn bin_layout_and_errors() {
        let m = SampleMatrix::new(2, 3, vec![1.0, -0.5, 3.25, 0.1, 1e-300, -7.0]).unwrap();
        let bytes = encode_bin(&m);
        assert_eq!(&bytes[..8], b"BIRSMAT1");
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 48);

        let p = Path::new("m.bin");
        assert_eq!(decode_bin(&bytes, p).unwrap(), m);
        let msg = decode_bin(&bytes[..60], p).unwrap_err().to_string();
        assert!(msg.contains("expected 72 bytes, found 60"), "{msg}");
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_bin(&wrong, p)
            .unwrap_err()
            .to_string()
            .contains("magic"));
    }

    #[test]
    fn labels_split_groups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "1\n0\n1\n").unwrap();
        let labels = read_labels(&path).unwrap();
        let m = SampleMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (x, y) = split_by_labels(&m, &labels).unwrap();
        assert_eq!(x.values(), &[1.0, 3.0]);
        assert_eq!(y.values(), &[2.0]);
        assert!(split_by_labels(&m, &labels[..2]).is_err());
        fs::write(&path, "1\n2\n").unwrap();
        assert!(read_labels(&path).is_err());
    }

    #[test]
    fn result_documents() {
        let empty = DetectionResult {
            tests_performed: 1,
            ..Default::default()
        };
        let json = ResultDocument::new(&empty, serde_json::json!({}))
            .to_json()
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["regions"], serde_json::json!([]));
        assert_eq!(v["tests_performed"], 1);
        assert_eq!(v["rounds_used"], 0);

        let region = Region::new(0, 4).unwrap();
        let res = DetectionResult {
            regions: vec![region],
            segments: vec![DetectedSegment {
                region,
                round: 0,
                depth: 2,
                statistic: 3.5,
            }],
            tests_performed: 9,
            rounds_used: 1,
            bootstrap_runs: 3,
            capped: false,
        };
        let doc = ResultDocument::new(&res, serde_json::json!({"alpha": 0.05}));
        assert_eq!(doc.regions[0].start_1based, 1);
        assert_eq!(doc.regions[0].end_1based_inclusive, 4);
        let back = parse_result_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.regions().unwrap(), res.regions);
        let tsv = doc.to_tsv();
        assert!(tsv.contains("1\t4\t0\t2\t3.5"));
    }
}
