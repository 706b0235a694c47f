//! CSV and JSON writers for study reports.

use std::io::Write;

use serde::Serialize;

use super::checks::{DesignReport, KernelReport};
use super::study::{QuantileReport, TestReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// A report that can be laid out as a CSV table.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

// `{}` on f64 prints the shortest string that round-trips.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

type Indicator = fn(&super::QuantileCell) -> f64;

impl Tabular for QuantileReport {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["scenario".to_string(), "alpha".into(), "indicator".into()];
        let mut ps: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !ps.contains(&c.p) {
                ps.push(c.p);
            }
        }
        h.extend(ps.iter().map(|p| format!("p={p}")));
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut alphas: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !alphas.contains(&c.alpha) {
                alphas.push(c.alpha);
            }
        }
        let mut rows = Vec::new();
        for a in alphas {
            let cells: Vec<_> = self.cells.iter().filter(|c| c.alpha == a).collect();
            let indicators: [(&str, Indicator); 7] = [
                ("CP", |c| c.cp),
                ("LE", |c| c.le),
                ("RE", |c| c.re),
                ("AL", |c| c.al),
                ("CP_SE", |c| c.cp_se),
                ("LE_SE", |c| c.le_se),
                ("RE_SE", |c| c.re_se),
            ];
            for (name, get) in indicators {
                let mut row = vec![self.scenario.clone(), num(a), name.to_string()];
                row.extend(cells.iter().map(|c| num(get(c))));
                rows.push(row);
            }
        }
        rows
    }
}

impl Tabular for TestReport {
    fn header(&self) -> Vec<String> {
        [
            "scenario",
            "test",
            "designs",
            "N",
            "n",
            "rho",
            "alpha",
            "rejection_rate",
            "se",
            "median_p_value",
            "reps",
            "skipped",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                vec![
                    self.scenario.clone(),
                    self.test.label().to_string(),
                    format!("{}-{}", self.sampling_design, self.resampling_design),
                    self.population.to_string(),
                    self.sample_size.to_string(),
                    num(c.rho),
                    num(c.alpha),
                    num(c.rejection_rate),
                    num(c.se),
                    opt(c.median_p_value),
                    c.reps.to_string(),
                    c.skipped.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for KernelReport {
    fn header(&self) -> Vec<String> {
        ["scenario", "design", "p_i", "p_j", "y_i", "y_j", "mc_covariance", "kernel", "scaled_error"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                vec![
                    self.scenario.clone(),
                    self.design.clone(),
                    num(c.p_i),
                    num(c.p_j),
                    num(c.y_i),
                    num(c.y_j),
                    num(c.mc_covariance),
                    num(c.kernel),
                    num(c.scaled_error),
                ]
            })
            .collect()
    }
}

impl Tabular for DesignReport {
    fn header(&self) -> Vec<String> {
        ["scenario", "design", "quantity", "value"].iter().map(|s| s.to_string()).collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![self.scenario.clone(), self.design.clone(), r.quantity.clone(), num(r.value)])
            .collect()
    }
}

/// Write reports as one CSV table (all must share a header) or as a JSON
/// array.
pub fn write_report<T: Tabular + Serialize>(reports: &[T], format: Format, out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::NumericFailure(format!("write failed: {e}"));
    match format {
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, reports).map_err(|e| Error::NumericFailure(e.to_string()))?;
            writeln!(out).map_err(io)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| Error::NumericFailure(format!("write failed: {e}"));
            if let Some(first) = reports.first() {
                let header = first.header();
                w.write_record(&header).map_err(csv_err)?;
                for r in reports {
                    if r.header() != header {
                        return Err(Error::Config("scenarios written to one table need the same columns".into()));
                    }
                    for row in r.rows() {
                        w.write_record(&row).map_err(csv_err)?;
                    }
                }
            }
            w.flush().map_err(io)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{QuantileCell, TestCell, TestKind};

    fn cell(p: f64) -> QuantileCell {
        QuantileCell {
            p,
            alpha: 0.05,
            true_quantile: 1.0,
            reps: 10,
            covered: 9,
            left: 1,
            right: 0,
            cp: 0.9,
            le: 0.1,
            re: 0.0,
            al: 1.25,
            cp_se: 0.1,
            le_se: 0.1,
            re_se: 0.0,
        }
    }

    #[test]
    fn quantile_table_layout() {
        let r = QuantileReport {
            scenario: "t".into(),
            population: 100,
            sample_size: 10,
            replicates: 5,
            cells: vec![cell(0.1), cell(0.5)],
        };
        let mut buf = Vec::new();
        write_report(std::slice::from_ref(&r), Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,alpha,indicator,p=0.1,p=0.5");
        assert_eq!(lines[1], "t,0.05,CP,0.9,0.9");
        assert_eq!(lines[4], "t,0.05,AL,1.25,1.25");
        assert_eq!(lines.len(), 8);

        let mut buf = Vec::new();
        write_report(&[r], Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["cells"][1]["p"], 0.5);
    }

    #[test]
    fn test_table_leaves_missing_p_values_empty() {
        let r = TestReport {
            scenario: "m".into(),
            test: TestKind::Marginal,
            population: 2500,
            sample_size: 250,
            sampling_design: "CP".into(),
            resampling_design: "PA".into(),
            replicates: 100,
            cells: vec![TestCell {
                rho: 0.0,
                alpha: 0.1,
                reps: 10,
                rejections: 1,
                rejection_rate: 0.1,
                se: 0.09486832980505137,
                median_p_value: None,
                skipped: 0,
            }],
        };
        let mut buf = Vec::new();
        write_report(&[r], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "m,marginal,CP-PA,2500,250,0,0.1,0.1,0.09486832980505137,,10,0");
    }

    #[test]
    fn format_names() {
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
