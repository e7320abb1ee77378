//! CSV formats: training data, bare feature sets, and counterfactual
//! oracles.
//!
//! * training data: header `x1,...,xd,p,y`; one observed treatment and
//!   outcome per row.
//! * features: header `x1,...,xd`.
//! * oracle: header `y_0,...,y_{k-1},optimal`; noiseless per-arm outcomes
//!   and the best arm. Written oracles carry a leading `#` comment with the
//!   standardization constants of the generating recipe.
//!
//! Floats are written with 17 significant digits and parse back exactly.
//! Lines starting with `#` are comments and may appear anywhere.

use std::io::Write as _;
use std::path::Path;

use prescript_core::{OracleTable, Sample, Standardization};

use crate::error::CliError;
use crate::jsonfmt::fmt_f64;
use crate::Result;

fn feature_header(d: usize) -> String {
    (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

fn content_lines(body: &str) -> Vec<(usize, String)> {
    body.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::parse(path, line, format!("not a number: {field:?}")))
}

fn parse_usize(path: &Path, line: usize, field: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::parse(path, line, format!("not a non-negative integer: {field:?}")))
}

pub fn write_train_csv(path: &Path, data: &[Sample]) -> Result<()> {
    if data.is_empty() {
        return Err(CliError::Invalid("refusing to write an empty training CSV".into()));
    }
    let d = data[0].x.len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{},p,y", feature_header(d))?;
    for s in data {
        for v in &s.x {
            write!(out, "{},", fmt_f64(*v))?;
        }
        writeln!(out, "{},{}", s.treatment, fmt_f64(s.outcome))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_train_csv(path: &Path) -> Result<Vec<Sample>> {
    let body = std::fs::read_to_string(path)?;
    let lines = content_lines(&body);
    let (header_line, header) = lines
        .first()
        .ok_or_else(|| CliError::parse(path, 0, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "p" || cols[cols.len() - 1] != "y" {
        return Err(CliError::parse(
            path,
            *header_line,
            "expected header x1,...,xd,p,y",
        ));
    }
    let d = cols.len() - 2;
    for (i, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(CliError::parse(
                path,
                *header_line,
                format!("feature column {} is named {c:?}, expected x{}", i + 1, i + 1),
            ));
        }
    }
    let mut data = Vec::with_capacity(lines.len() - 1);
    for (lineno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(CliError::parse(
                path,
                *lineno,
                format!("expected {} fields, got {}", d + 2, fields.len()),
            ));
        }
        let x = fields[..d]
            .iter()
            .map(|f| parse_f64(path, *lineno, f))
            .collect::<Result<Vec<f64>>>()?;
        let p = parse_usize(path, *lineno, fields[d])?;
        let y = parse_f64(path, *lineno, fields[d + 1])?;
        data.push(Sample::new(x, p, y));
    }
    if data.is_empty() {
        return Err(CliError::parse(path, 0, "no data rows"));
    }
    Ok(data)
}

pub fn write_features_csv(path: &Path, xs: &[Vec<f64>]) -> Result<()> {
    if xs.is_empty() {
        return Err(CliError::Invalid("refusing to write an empty feature CSV".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", feature_header(xs[0].len()))?;
    for row in xs {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let body = std::fs::read_to_string(path)?;
    let lines = content_lines(&body);
    let (header_line, header) = lines
        .first()
        .ok_or_else(|| CliError::parse(path, 0, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    for (i, c) in cols.iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(CliError::parse(
                path,
                *header_line,
                format!("column {} is named {c:?}, expected x{}", i + 1, i + 1),
            ));
        }
    }
    let d = cols.len();
    let mut xs = Vec::with_capacity(lines.len() - 1);
    for (lineno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(CliError::parse(
                path,
                *lineno,
                format!("expected {d} fields, got {}", fields.len()),
            ));
        }
        xs.push(
            fields
                .iter()
                .map(|f| parse_f64(path, *lineno, f))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    if xs.is_empty() {
        return Err(CliError::parse(path, 0, "no data rows"));
    }
    Ok(xs)
}

/// Reads the feature part of either CSV layout: a bare feature file, or a
/// training file whose trailing `p,y` columns are dropped. Useful wherever
/// only points are needed (calibration, partition probes).
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let body = std::fs::read_to_string(path)?;
    let first = body
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if first.ends_with(",p,y") {
        Ok(read_train_csv(path)?.into_iter().map(|s| s.x).collect())
    } else {
        read_features_csv(path)
    }
}

pub fn write_oracle_csv(
    path: &Path,
    oracle: &OracleTable,
    standardization: Option<&Standardization>,
) -> Result<()> {
    if oracle.outcomes.is_empty() {
        return Err(CliError::Invalid("refusing to write an empty oracle CSV".into()));
    }
    let k = oracle.outcomes[0].len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(s) = standardization {
        write!(
            out,
            "# standardization base mean={} sd={}",
            fmt_f64(s.base.mean),
            fmt_f64(s.base.sd)
        )?;
        for (i, e) in s.effects.iter().enumerate() {
            write!(
                out,
                "; effect{} mean={} sd={}",
                i + 1,
                fmt_f64(e.mean),
                fmt_f64(e.sd)
            )?;
        }
        writeln!(out)?;
    }
    let header: Vec<String> = (0..k).map(|p| format!("y_{p}")).collect();
    writeln!(out, "{},optimal", header.join(","))?;
    for (row, &opt) in oracle.outcomes.iter().zip(oracle.optimal.iter()) {
        for v in row {
            write!(out, "{},", fmt_f64(*v))?;
        }
        writeln!(out, "{opt}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_oracle_csv(path: &Path) -> Result<OracleTable> {
    let body = std::fs::read_to_string(path)?;
    let lines = content_lines(&body);
    let (header_line, header) = lines
        .first()
        .ok_or_else(|| CliError::parse(path, 0, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 1] != "optimal" {
        return Err(CliError::parse(
            path,
            *header_line,
            "expected header y_0,...,y_{k-1},optimal",
        ));
    }
    let k = cols.len() - 1;
    for (p, c) in cols[..k].iter().enumerate() {
        if *c != format!("y_{p}") {
            return Err(CliError::parse(
                path,
                *header_line,
                format!("outcome column {p} is named {c:?}, expected y_{p}"),
            ));
        }
    }
    let mut outcomes = Vec::with_capacity(lines.len() - 1);
    let mut optimal = Vec::with_capacity(lines.len() - 1);
    for (lineno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 1 {
            return Err(CliError::parse(
                path,
                *lineno,
                format!("expected {} fields, got {}", k + 1, fields.len()),
            ));
        }
        let row = fields[..k]
            .iter()
            .map(|f| parse_f64(path, *lineno, f))
            .collect::<Result<Vec<f64>>>()?;
        let opt = parse_usize(path, *lineno, fields[k])?;
        if opt >= k {
            return Err(CliError::parse(
                path,
                *lineno,
                format!("optimal arm {opt} out of range for {k} arms"),
            ));
        }
        outcomes.push(row);
        optimal.push(opt);
    }
    if outcomes.is_empty() {
        return Err(CliError::parse(path, 0, "no data rows"));
    }
    Ok(OracleTable { outcomes, optimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use prescript_core::{DatasetSpec, SyntheticDataset};

    #[test]
    fn train_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let spec = DatasetSpec::benchmark(1).unwrap();
        let data = SyntheticDataset::generate(&spec, 50, 0, 4).unwrap();
        write_train_csv(&path, &data.train).unwrap();
        let back = read_train_csv(&path).unwrap();
        assert_eq!(back, data.train);
        let first = std::fs::read(&path).unwrap();
        write_train_csv(&path, &back).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn oracle_csv_round_trips_with_its_comment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oracle.csv");
        let spec = DatasetSpec::benchmark(5).unwrap();
        let data = SyntheticDataset::generate(&spec, 30, 10, 4).unwrap();
        write_oracle_csv(&path, &data.test_oracle, Some(&data.standardization)).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("# standardization base mean="));
        let back = read_oracle_csv(&path).unwrap();
        assert_eq!(back, data.test_oracle);
    }

    #[test]
    fn points_reader_accepts_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec::benchmark(1).unwrap();
        let data = SyntheticDataset::generate(&spec, 20, 20, 4).unwrap();
        let train_path = dir.path().join("train.csv");
        let feat_path = dir.path().join("test.csv");
        write_train_csv(&train_path, &data.train).unwrap();
        write_features_csv(&feat_path, &data.test_x).unwrap();
        let from_train = read_points_csv(&train_path).unwrap();
        assert_eq!(from_train.len(), 20);
        assert_eq!(from_train[3], data.train[3].x);
        assert_eq!(read_points_csv(&feat_path).unwrap(), data.test_x);
    }

    #[test]
    fn malformed_headers_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,x3,p,y\n1.0,2.0,0,3.0\n").unwrap();
        assert!(read_train_csv(&path).is_err());
        std::fs::write(&path, "x1,x2,p,y\n1.0,2.0,0\n").unwrap();
        assert!(read_train_csv(&path).is_err());
        std::fs::write(&path, "y_0,y_1,best\n1.0,2.0,0\n").unwrap();
        assert!(read_oracle_csv(&path).is_err());
        std::fs::write(&path, "y_0,y_1,optimal\n1.0,2.0,5\n").unwrap();
        assert!(read_oracle_csv(&path).is_err());
    }
}
