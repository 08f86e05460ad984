use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Gmm,
    Mlp,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Gmm => "gmm",
            Stage::Mlp => "mlp",
        }
    }
}

/// Summary of one pass of a training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub stage: Stage,
    /// Mixture components per unit (gmm) or epochs trained so far (mlp).
    pub size: usize,
    pub train_loglik: f64,
    pub dev_wer: f64,
    /// Forced-alignment log-likelihood per dev frame; breaks WER ties.
    pub dev_loglik: f64,
    /// Words whose pronunciation changed in this iteration.
    pub dict_changes: usize,
    pub starved_units: usize,
}

const HEADER: &str = "iteration,stage,size,train_loglik,dev_wer,dev_loglik,dict_changes,starved_units";

pub fn reports_to_csv(reports: &[IterationReport]) -> String {
    let mut out = format!("{HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.stage.as_str(),
            r.size,
            r.train_loglik,
            r.dev_wer,
            r.dev_loglik,
            r.dict_changes,
            r.starved_units
        );
    }
    out
}

pub fn parse_reports_csv(text: &str, origin: &str) -> Result<Vec<IterationReport>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(origin, 1, "missing report header")),
    }
    lines
        .map(|(i, line)| {
            let err = |m: &str| Error::parse(origin, i + 1, m.to_string());
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(err("expected 8 fields"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| err("bad integer"));
            let real = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
            Ok(IterationReport {
                iteration: int(f[0])?,
                stage: match f[1] {
                    "gmm" => Stage::Gmm,
                    "mlp" => Stage::Mlp,
                    _ => return Err(err("stage must be gmm or mlp")),
                },
                size: int(f[2])?,
                train_loglik: real(f[3])?,
                dev_wer: real(f[4])?,
                dev_loglik: real(f[5])?,
                dict_changes: int(f[6])?,
                starved_units: int(f[7])?,
            })
        })
        .collect()
}

/// Plain-text table of the reports plus the best dev WER per stage.
pub fn summary_text(reports: &[IterationReport]) -> String {
    let mut out = String::from("iter  stage  size  train_loglik      dev_wer  changes\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{:>4}  {:<5}  {:>4}  {:>14.3}  {:>9.4}  {:>7}",
            r.iteration,
            r.stage.as_str(),
            r.size,
            r.train_loglik,
            r.dev_wer,
            r.dict_changes
        );
    }
    for stage in [Stage::Gmm, Stage::Mlp] {
        let best = reports
            .iter()
            .filter(|r| r.stage == stage)
            .min_by(|a, b| a.dev_wer.total_cmp(&b.dev_wer).then(b.dev_loglik.total_cmp(&a.dev_loglik)));
        if let Some(b) = best {
            let _ = writeln!(out, "best {}: dev WER {:.4} at iteration {}", stage.as_str(), b.dev_wer, b.iteration);
        }
    }
    out
}

/// WER against the number of units, one row per configuration.
pub fn wer_vs_n_table(rows: &[(String, usize, f64)]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = String::from("N\tWER\trun\n");
    for (name, n, wer) in sorted {
        let _ = writeln!(out, "{n}\t{wer:.4}\t{name}");
    }
    out
}
