//! Evaluation reports and their tab-separated text form.
//!
//! ```text
//! train_domain	test_domain	model	fold	accuracy
//! locA	locC	eps_cnn	0	0.9866666666666667
//! locA	locC	eps_cnn	mean	0.98
//!
//! confusion	locA	locC	eps_cnn
//! true\pred	1	2
//! 1	99	1
//! 2	0	100
//! ```
//!
//! One fold row per fold and a `mean` row per report, then one confusion
//! block per report (rows are true classes, columns predictions, pooled over
//! folds). Floats are written in shortest round-trip form, so parsing and
//! re-emitting reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "train_domain\ttest_domain\tmodel\tfold\taccuracy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EpsCnn,
    IqCnn,
    NearestCentroid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::EpsCnn,
        ModelKind::IqCnn,
        ModelKind::NearestCentroid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::EpsCnn => "eps_cnn",
            ModelKind::IqCnn => "iq_cnn",
            ModelKind::NearestCentroid => "nearest_centroid",
        }
    }

    /// Whether the model consumes EPS tensors (otherwise raw IQ windows).
    pub fn uses_eps(self) -> bool {
        self != ModelKind::IqCnn
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown model `{s}` (expected eps_cnn, iq_cnn or nearest_centroid)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_domain: String,
    pub test_domain: String,
    pub model_kind: ModelKind,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Device id of each confusion row/column.
    pub class_ids: Vec<u16>,
    /// `confusion[true][predicted]`, pooled over folds.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    /// Build from per-fold accuracies and pooled confusion counts.
    pub fn new(
        train_domain: impl Into<String>,
        test_domain: impl Into<String>,
        model_kind: ModelKind,
        fold_accuracies: Vec<f64>,
        class_ids: Vec<u16>,
        confusion: Vec<Vec<u64>>,
    ) -> Self {
        let mean_accuracy = if fold_accuracies.is_empty() {
            0.0
        } else {
            fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64
        };
        EvalReport {
            train_domain: train_domain.into(),
            test_domain: test_domain.into(),
            model_kind,
            fold_accuracies,
            mean_accuracy,
            class_ids,
            confusion,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Trace over total of the pooled confusion matrix.
    pub fn pooled_accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum::<u64>() as f64
            / t as f64
    }

    fn key(&self) -> (String, String, ModelKind) {
        (
            self.train_domain.clone(),
            self.test_domain.clone(),
            self.model_kind,
        )
    }

    fn check_text_fields(&self) -> Result<()> {
        for s in [&self.train_domain, &self.test_domain] {
            if s.is_empty() || s.contains(['\t', '\n', '\r']) {
                return Err(Error::validation(format!(
                    "domain name `{s}` must be non-empty without tabs or newlines"
                )));
            }
        }
        Ok(())
    }
}

/// Render reports in the table format above.
pub fn render_reports(reports: &[EvalReport]) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "{REPORT_HEADER}").unwrap();
    for r in reports {
        r.check_text_fields()?;
        for (f, a) in r.fold_accuracies.iter().enumerate() {
            writeln!(
                s,
                "{}\t{}\t{}\t{f}\t{a}",
                r.train_domain, r.test_domain, r.model_kind
            )
            .unwrap();
        }
        if !r.fold_accuracies.is_empty() {
            writeln!(
                s,
                "{}\t{}\t{}\tmean\t{}",
                r.train_domain, r.test_domain, r.model_kind, r.mean_accuracy
            )
            .unwrap();
        }
    }
    for r in reports.iter().filter(|r| !r.class_ids.is_empty()) {
        writeln!(
            s,
            "\nconfusion\t{}\t{}\t{}",
            r.train_domain, r.test_domain, r.model_kind
        )
        .unwrap();
        let ids: Vec<String> = r.class_ids.iter().map(|d| d.to_string()).collect();
        writeln!(s, "true\\pred\t{}", ids.join("\t")).unwrap();
        for (id, row) in r.class_ids.iter().zip(&r.confusion) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(s, "{id}\t{}", cells.join("\t")).unwrap();
        }
    }
    Ok(s)
}

pub fn emit_report(report: &EvalReport, path: &Path) -> Result<()> {
    emit_reports(std::slice::from_ref(report), path)
}

pub fn emit_reports(reports: &[EvalReport], path: &Path) -> Result<()> {
    std::fs::write(path, render_reports(reports)?)?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::validation(format!("report line {}: {msg}", line + 1))
}

/// Parse text produced by [`render_reports`].
pub fn parse_reports(text: &str) -> Result<Vec<EvalReport>> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, h)) if h == REPORT_HEADER => {}
        _ => return Err(bad(0, "missing table header")),
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    while let Some(&(n, line)) = lines.peek() {
        if line.is_empty() {
            break;
        }
        lines.next();
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(n, "expected 5 columns"));
        }
        let kind: ModelKind = f[2].parse()?;
        let acc: f64 = f[4]
            .parse()
            .map_err(|_| bad(n, "accuracy is not a number"))?;
        let key = (f[0].to_string(), f[1].to_string(), kind);
        let pos = match reports.iter().position(|r| r.key() == key) {
            Some(p) => p,
            None => {
                reports.push(EvalReport::new(
                    f[0],
                    f[1],
                    kind,
                    Vec::new(),
                    Vec::new(),
                    Vec::new(),
                ));
                reports.len() - 1
            }
        };
        let r = &mut reports[pos];
        if f[3] == "mean" {
            r.mean_accuracy = acc;
        } else {
            let fold: usize = f[3].parse().map_err(|_| bad(n, "fold is not an integer"))?;
            if fold != r.fold_accuracies.len() {
                return Err(bad(n, "folds out of order"));
            }
            r.fold_accuracies.push(acc);
        }
    }
    while let Some((n, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 || f[0] != "confusion" {
            return Err(bad(n, "expected a confusion block header"));
        }
        let key = (
            f[1].to_string(),
            f[2].to_string(),
            f[3].parse::<ModelKind>()?,
        );
        let pos = reports
            .iter()
            .position(|r| r.key() == key)
            .ok_or_else(|| bad(n, "confusion block for a report with no rows"))?;
        let (n, head) = lines
            .next()
            .ok_or_else(|| bad(n, "truncated confusion block"))?;
        let mut cols = head.split('\t');
        if cols.next() != Some("true\\pred") {
            return Err(bad(n, "expected class header"));
        }
        let ids: Vec<u16> = cols
            .map(|c| c.parse().map_err(|_| bad(n, "class id is not an integer")))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(ids.len());
        for id in &ids {
            let (n, row) = lines
                .next()
                .ok_or_else(|| bad(n, "truncated confusion block"))?;
            let mut cells = row.split('\t');
            if cells.next() != Some(&*id.to_string()) {
                return Err(bad(n, "confusion row label mismatch"));
            }
            let counts: Vec<u64> = cells
                .map(|c| c.parse().map_err(|_| bad(n, "count is not an integer")))
                .collect::<Result<_>>()?;
            if counts.len() != ids.len() {
                return Err(bad(n, "confusion row has the wrong width"));
            }
            rows.push(counts);
        }
        reports[pos].class_ids = ids;
        reports[pos].confusion = rows;
    }
    Ok(reports)
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>> {
    parse_reports(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        EvalReport::new(
            "day0-locA-wireless",
            "day0-locC-wireless",
            ModelKind::EpsCnn,
            vec![0.98, 1.0, 0.9866666666666667],
            vec![1, 2],
            vec![vec![148, 2], vec![1, 149]],
        )
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = EvalReport::new("a", "b", ModelKind::NearestCentroid, vec![], vec![], vec![]);
        assert_eq!(render_reports(&[r]).unwrap(), format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let r = sample();
        let other = EvalReport {
            model_kind: ModelKind::IqCnn,
            ..sample()
        };
        let text = render_reports(&[r.clone(), other.clone()]).unwrap();
        let back = parse_reports(&text).unwrap();
        assert_eq!(back, vec![r, other]);
        assert_eq!(render_reports(&back).unwrap(), text);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.tsv");
        emit_report(&back[0], &p).unwrap();
        let a = std::fs::read(&p).unwrap();
        emit_report(&read_reports(&p).unwrap()[0], &p).unwrap();
        assert_eq!(a, std::fs::read(&p).unwrap());
    }

    #[test]
    fn accuracy_column_mean_matches() {
        let r = sample();
        let text = render_reports(&[r.clone()]).unwrap();
        let folds: Vec<f64> = text
            .lines()
            .skip(1)
            .take_while(|l| !l.is_empty())
            .filter(|l| !l.contains("\tmean\t"))
            .map(|l| l.rsplit('\t').next().unwrap().parse().unwrap())
            .collect();
        let m = folds.iter().sum::<f64>() / folds.len() as f64;
        assert!((m - r.mean_accuracy).abs() <= 1e-12);
        assert_eq!(r.total(), 300);
    }

    #[test]
    fn rejects_tab_in_domain_and_bad_text() {
        let mut r = sample();
        r.train_domain = "a\tb".into();
        assert!(render_reports(&[r]).is_err());
        assert!(parse_reports("nope\n").is_err());
        assert!(parse_reports(&format!("{REPORT_HEADER}\na\tb\teps_cnn\t0\tx\n")).is_err());
        assert!("svm".parse::<ModelKind>().is_err());
        assert_eq!("iq-cnn".parse::<ModelKind>().unwrap(), ModelKind::IqCnn);
    }
}
