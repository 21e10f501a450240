//! Result files. Every writer is deterministic for identical results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::suite::ExperimentResult;
use crate::error::{Error, Result};

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn thresholds_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("experiment,series,condition,subset,abscissa,threshold,sd,trials,non_monotone,bracket_error\n");
    for t in &result.thresholds {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            t.experiment,
            t.series,
            t.condition,
            t.subset.name(),
            t.abscissa,
            t.threshold,
            t.sd,
            t.trials,
            t.non_monotone,
            t.bracket_error.is_some()
        );
    }
    s
}

pub fn trading_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("subset,itd_s,iid_db,dprime\n");
    for surf in &result.trading {
        for (i, itd) in surf.itds.iter().enumerate() {
            for (j, iid) in surf.iids_db.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", surf.subset.name(), itd, iid, surf.dprime[i][j]);
            }
        }
    }
    s
}

/// Two-column plot files, one per series and subset (or per ITD for trading).
pub fn plot_data(result: &ExperimentResult) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = Vec::new();
    for t in &result.thresholds {
        let name = format!("{}_{}_{}.dat", result.id, sanitize(&t.series), t.subset.name());
        let line = format!("{} {}\n", t.abscissa, t.threshold);
        match files.iter_mut().find(|(n, _)| *n == name) {
            Some((_, body)) => body.push_str(&line),
            None => files.push((name, format!("# {} {} [{}]\n{line}", t.series, t.subset.name(), result.unit))),
        }
    }
    for surf in &result.trading {
        for (i, itd) in surf.itds.iter().enumerate() {
            let mut body = format!("# itd {itd} s, {}\n", surf.subset.name());
            for (j, iid) in surf.iids_db.iter().enumerate() {
                let _ = writeln!(body, "{} {}", iid, surf.dprime[i][j]);
            }
            files.push((format!("{}_itd{}us_{}.dat", result.id, (itd * 1e6).round(), surf.subset.name()), body));
        }
    }
    files
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Writes CSV, JSON and plot files of one experiment. Returns the paths written.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    if result.trading.is_empty() {
        paths.push(write(dir.join(format!("{}.csv", result.id)), &thresholds_csv(result))?);
    } else {
        paths.push(write(dir.join(format!("{}.csv", result.id)), &trading_csv(result))?);
    }
    let json = serde_json::to_string_pretty(result)?;
    paths.push(write(dir.join(format!("{}.json", result.id)), &json)?);
    for (name, body) in plot_data(result) {
        paths.push(write(dir.join(name), &body)?);
    }
    Ok(paths)
}

pub fn scores_csv(results: &[ExperimentResult]) -> String {
    let mut s = String::from("experiment,subset,points,rmse,r2\n");
    for r in results {
        for sc in &r.scores {
            let _ = writeln!(s, "{},{},{},{},{}", r.id, sc.subset.name(), sc.points, sc.rmse, sc.r2);
        }
    }
    s
}

pub fn write_suite(dir: &Path, results: &[ExperimentResult]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for r in results {
        paths.extend(write_experiment(dir, r)?);
    }
    paths.push(write(dir.join("scores.csv"), &scores_csv(results))?);
    let summary: Vec<_> = results
        .iter()
        .map(|r| serde_json::json!({ "id": r.id, "config_hash": r.config_hash, "scores": r.scores }))
        .collect();
    paths.push(write(dir.join("suite.json"), &serde_json::to_string_pretty(&summary)?)?);
    Ok(paths)
}
