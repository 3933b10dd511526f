//! Report files: one CSV per table plus a plain-text summary.
//!
//! Numbers are written in Rust's shortest round-trip form, so a report read
//! back parses to the exact values computed. Undefined values are `NA`.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::dea::EfficiencyScore;
use crate::error::{Error, Result, Stage, StageExt};
use crate::pipeline::PipelineReport;
use crate::records::DropEntry;
use crate::second_stage::pearson_correlation;

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".to_string()
    }
}

/// id, delta, score, classification.
pub fn write_scores<W: Write>(scores: &[EfficiencyScore], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "delta", "score", "efficient"])?;
    for s in scores {
        w.write_record([s.dmu_id.clone(), num(s.delta), num(s.score), s.is_efficient().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_drops<W: Write>(drops: &[DropEntry], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "reasons"])?;
    for d in drops {
        w.write_record([d.id.as_str(), d.reasons.join("; ").as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-unit table: every score set, and the category of every scheme.
pub fn write_unit_table<W: Write>(report: &PipelineReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    for set in &report.score_sets {
        if let Some(scheme) = report.scheme(&set.name) {
            header.push(format!("{}_category", scheme.name));
        }
        header.push(set.name.clone());
    }
    w.write_record(&header)?;
    for (i, id) in report.ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        for set in &report.score_sets {
            if let Some(scheme) = report.scheme(&set.name) {
                row.push(scheme.assignment.label(i).to_string());
            }
            row.push(num(set.scores[i].score));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_categories<W: Write>(report: &PipelineReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "scheme",
        "category",
        "units",
        "mean_preliminary",
        "share_inefficient",
        "mean",
        "median",
    ])?;
    for scheme in &report.schemes {
        for row in &scheme.rows {
            w.write_record([
                scheme.name.clone(),
                row.label.clone(),
                row.units.to_string(),
                num(row.mean_preliminary),
                num(row.separated.share_inefficient),
                num(row.separated.mean),
                num(row.separated.median),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_regressions<W: Write>(report: &PipelineReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "score_set",
        "term",
        "estimate",
        "std_error",
        "t_stat",
        "p_value",
        "r_squared",
        "n_obs",
        "clamped",
    ])?;
    for set in &report.score_sets {
        let Some(fit) = &set.regression else { continue };
        for j in 0..fit.beta.len() {
            w.write_record([
                set.name.clone(),
                fit.labels[j].clone(),
                num(fit.beta[j]),
                num(fit.std_errors[j]),
                num(fit.t_stats[j]),
                num(fit.p_values[j]),
                num(fit.r_squared),
                fit.n_obs.to_string(),
                set.clamped.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_correlations<W: Write>(report: &PipelineReport, writer: W) -> Result<()> {
    let names: Vec<String> = report.score_sets.iter().map(|s| s.name.clone()).collect();
    write_matrix(&names, &report.correlations, writer)
}

/// Reads a score table (such as `scores.csv`) and correlates every column
/// other than `id` whose cells are all numeric. Returns the column names and
/// the correlation matrix; undefined entries are NaN.
pub fn correlate_columns<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns: Vec<Option<Vec<f64>>> = vec![Some(Vec::new()); headers.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (k, col) in columns.iter_mut().enumerate() {
            let parsed = rec.get(k).and_then(|c| c.trim().parse::<f64>().ok());
            match (col.as_mut(), parsed) {
                (Some(v), Some(x)) if x.is_finite() => v.push(x),
                _ => *col = None,
            }
        }
    }
    let (names, vectors): (Vec<String>, Vec<Vec<f64>>) = headers
        .iter()
        .zip(columns)
        .filter(|(h, _)| *h != "id")
        .filter_map(|(h, c)| c.map(|c| (h.to_string(), c)))
        .unzip();
    if vectors.len() < 2 {
        return Err(Error::Input("need at least two numeric score columns to compare".into()));
    }
    let k = vectors.len();
    let mut m = vec![vec![1.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let c = match pearson_correlation(&vectors[a], &vectors[b]) {
                Ok(c) => c,
                Err(Error::Domain(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            m[a][b] = c;
            m[b][a] = c;
        }
    }
    Ok((names, m))
}

pub fn write_matrix<W: Write>(names: &[String], matrix: &[Vec<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["score_set".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(matrix) {
        let mut out = vec![name.clone()];
        out.extend(row.iter().map(|&c| num(c)));
        w.write_record(&out)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_text(report: &PipelineReport) -> String {
    let mut s = String::new();
    let c = &report.config;
    let _ = writeln!(s, "Chebyshev DEA report");
    let _ = writeln!(
        s,
        "mode: {}  returns to scale: {:?}  method: {:?}  epsilon: {}",
        c.mode, c.rts, c.method, c.epsilon
    );
    let _ = writeln!(s, "units scored: {}  records dropped: {}", report.ids.len(), report.drops.len());
    let _ = writeln!(s);

    let _ = writeln!(s, "Score sets");
    let _ = writeln!(s, "{:<12} {:>10} {:>10} {:>10} {:>8}", "set", "inefficient", "mean", "median", "clamped");
    for set in &report.score_sets {
        let _ = writeln!(
            s,
            "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            set.name, set.summary.share_inefficient, set.summary.mean, set.summary.median, set.clamped
        );
    }

    for set in &report.score_sets {
        let _ = writeln!(s);
        match &set.regression {
            Some(fit) => {
                let _ = writeln!(s, "Regression of transformed {} scores (R^2 = {:.4}, n = {})", set.name, fit.r_squared, fit.n_obs);
                let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>10} {:>10}", "term", "estimate", "std.error", "t", "p");
                for j in 0..fit.beta.len() {
                    let _ = writeln!(
                        s,
                        "{:<10} {:>12.4} {:>12.4} {:>10.3} {:>10.4}",
                        fit.labels[j], fit.beta[j], fit.std_errors[j], fit.t_stats[j], fit.p_values[j]
                    );
                }
            }
            None => {
                let _ = writeln!(s, "Regression of transformed {} scores: not fitted", set.name);
            }
        }
    }

    for scheme in &report.schemes {
        let _ = writeln!(s);
        let _ = writeln!(s, "Categories ({})", scheme.name);
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>12} {:>11} {:>10} {:>10}",
            "category", "units", "preliminary", "inefficient", "mean", "median"
        );
        for row in &scheme.rows {
            let _ = writeln!(
                s,
                "{:<8} {:>6} {:>12.4} {:>11.4} {:>10.4} {:>10.4}",
                row.label,
                row.units,
                row.mean_preliminary,
                row.separated.share_inefficient,
                row.separated.mean,
                row.separated.median
            );
        }
    }

    if report.score_sets.len() > 1 {
        let _ = writeln!(s);
        let _ = writeln!(s, "Correlations");
        let _ = write!(s, "{:<12}", "");
        for set in &report.score_sets {
            let _ = write!(s, " {:>12}", set.name);
        }
        let _ = writeln!(s);
        for (set, row) in report.score_sets.iter().zip(&report.correlations) {
            let _ = write!(s, "{:<12}", set.name);
            for &v in row {
                let _ = write!(s, " {:>12.4}", v);
            }
            let _ = writeln!(s);
        }
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Warnings");
        for w in &report.warnings {
            let _ = writeln!(s, "- {}", w);
        }
    }
    s
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<fs::File> {
    let path = dir.join(name);
    let file = fs::File::create(&path)?;
    written.push(path);
    Ok(file)
}

/// Writes every report table into `dir`, creating it if needed. Returns the
/// paths written, in a fixed order.
pub fn write_report(report: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>> {
    write_report_inner(report, dir).stage(Stage::Report)
}

fn write_report_inner(report: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write_unit_table(report, create(dir, "scores.csv", &mut written)?)?;
    if !report.schemes.is_empty() {
        write_categories(report, create(dir, "categories.csv", &mut written)?)?;
    }
    write_regressions(report, create(dir, "regression.csv", &mut written)?)?;
    write_correlations(report, create(dir, "correlations.csv", &mut written)?)?;
    for set in &report.score_sets {
        let Some(curve) = &set.density else { continue };
        let mut w = csv::Writer::from_writer(create(dir, &format!("density_{}.csv", set.name), &mut written)?);
        w.write_record(["score", "density"])?;
        for (x, y) in curve.grid.iter().zip(&curve.values) {
            w.write_record([num(*x), num(*y)])?;
        }
        w.flush()?;
    }
    if let Some(tree) = &report.tree {
        create(dir, "tree.txt", &mut written)?.write_all(tree.to_text().as_bytes())?;
    }
    write_drops(&report.drops, create(dir, "drops.csv", &mut written)?)?;
    create(dir, "summary.txt", &mut written)?.write_all(summary_text(report).as_bytes())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_pipeline, Mode, PipelineConfig};
    use crate::synth::{generate_panel, SynthConfig};

    #[test]
    fn report_files_and_determinism() {
        let (records, _) = generate_panel(&SynthConfig {
            seed: 5,
            n_units: 120,
            ..Default::default()
        })
        .unwrap();
        let config = PipelineConfig {
            mode: Mode::Both,
            tree: crate::partition::TreeParams {
                min_bucket: 10,
                max_depth: 4,
                n_leaves: 4,
            },
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files_a = write_report(&run_pipeline(&records, &config).unwrap(), a.path()).unwrap();
        let files_b = write_report(&run_pipeline(&records, &config).unwrap(), b.path()).unwrap();
        let names: Vec<String> = files_a
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for want in ["scores.csv", "categories.csv", "density_expert.csv", "tree.txt", "summary.txt"] {
            assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
        }
        for (fa, fb) in files_a.iter().zip(&files_b) {
            assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap(), "{}", fa.display());
        }
        let corr = fs::read_to_string(a.path().join("correlations.csv")).unwrap();
        assert!(corr.starts_with("score_set,preliminary,tree,expert\n"));
        let (names, m) = correlate_columns(fs::File::open(a.path().join("scores.csv")).unwrap()).unwrap();
        assert_eq!(names, ["preliminary", "tree", "expert"]);
        let pipeline = run_pipeline(&records, &config).unwrap();
        for (x, y) in m.iter().flatten().zip(pipeline.correlations.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
