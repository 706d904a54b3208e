// SPDX-License-Identifier: Apache-2.0

//! Tab-separated plot data, one file per figure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentOutput;
use crate::error::Result;

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn write(dir: &Path, name: String, body: String, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    written.push(path);
    Ok(())
}

/// Writes scores, affinity histograms and travel-time curves of each output.
/// Nothing is written for an empty set.
pub fn emit_plots(dir: &Path, outputs: &[ExperimentOutput]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if outputs.iter().all(|o| o.reports.is_empty() && o.travel_curves.is_empty()) {
        return Ok(written);
    }
    std::fs::create_dir_all(dir)?;
    for o in outputs {
        let name = slug(&o.name);
        if !o.reports.is_empty() {
            let mut body = String::from("tag\tprecision\trecall\tf_measure\ttrue_positives\tpredicted\tactual\n");
            for r in &o.reports {
                let s = &r.scores;
                let _ = writeln!(
                    body,
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                    r.tag, s.precision, s.recall, s.f_measure, s.true_positives, s.predicted, s.actual
                );
            }
            write(dir, format!("{name}_scores.tsv"), body, &mut written)?;
        }
        for r in &o.reports {
            let Some(h) = &r.histogram else { continue };
            let width = 1.0 / h.edges.len() as f64;
            let mut body = String::from("affinity\tcorrect\twrong\n");
            for (i, lo) in h.edges.iter().enumerate() {
                let _ = writeln!(body, "{:.6}\t{}\t{}", lo + 0.5 * width, h.correct[i], h.wrong[i]);
            }
            write(dir, format!("{name}_{}_affinity.tsv", slug(&r.tag)), body, &mut written)?;
        }
        for c in &o.travel_curves {
            let mut body = String::from("dt\tprior\tlikelihood\tposterior\n");
            for i in 0..c.dt.len() {
                let _ = writeln!(
                    body,
                    "{:.6}\t{:.6e}\t{:.6e}\t{:.6e}",
                    c.dt[i], c.prior[i], c.likelihood[i], c.posterior[i]
                );
            }
            write(dir, format!("{name}_travel_{}_{}.tsv", c.pair.0, c.pair.1), body, &mut written)?;
        }
    }
    Ok(written)
}
