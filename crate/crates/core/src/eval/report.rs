use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ablation::AblationTable;
use super::metrics::MetricsReport;
use crate::dataset::REGRESSION_TARGETS;
use crate::error::Result;
use crate::train::TrainLog;

/// Paths written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub jsonl: PathBuf,
    pub table: PathBuf,
}

pub fn reports_to_jsonl(reports: &[MetricsReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("report serializes") + "\n")
        .collect()
}

pub fn reports_from_jsonl(text: &str) -> Result<Vec<MetricsReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn header(first: &str) -> Vec<String> {
    let mut h = vec![first.to_string(), "scale".to_string()];
    h.extend(REGRESSION_TARGETS.iter().map(|c| format!("{} ({})", c.name(), c.unit())));
    h
}

fn render(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
            out.push('\n');
        }
    }
    out
}

/// Aligned MAE and STDE tables with columns PL, Rp, DS, phi, theta and
/// LOS/NLOS accuracy.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut mae = vec![header("MAE")];
    mae[0].push("LOS/NLOS (%)".into());
    let mut stde = vec![header("STDE")];
    for r in reports {
        let mut row = vec![r.model_id.clone(), r.scale.to_string()];
        row.extend(REGRESSION_TARGETS.iter().map(|&c| format!("{:.2}", r.mae(c))));
        row.push(format!("{:.2}", 100.0 * r.accuracy));
        mae.push(row);
        let mut row = vec![r.model_id.clone(), r.scale.to_string()];
        row.extend(REGRESSION_TARGETS.iter().map(|&c| format!("{:.2}", r.stde(c))));
        stde.push(row);
    }
    format!("{}\n{}", render(&mae), render(&stde))
}

fn percent(g: Option<f64>) -> String {
    g.map_or("-".into(), |v| format!("{:+.1}%", 100.0 * v))
}

/// Path-loss medians and gains relative to the MTL row.
pub fn format_ablation(table: &AblationTable) -> String {
    let mut rows = vec![vec![
        "variant".to_string(),
        "seeds".to_string(),
        "PL MAE".to_string(),
        "gain".to_string(),
        "PL STDE".to_string(),
        "gain".to_string(),
    ]];
    for r in &table.rows {
        rows.push(vec![
            r.variant.label().to_string(),
            r.seeds.len().to_string(),
            format!("{:.2}", r.median_mae),
            percent(r.gain_mae),
            format!("{:.2}", r.median_stde),
            percent(r.gain_stde),
        ]);
    }
    render(&rows)
}

/// Writes `<stem>.jsonl` and `<stem>.txt` into `dir`.
pub fn emit_report(dir: &Path, stem: &str, reports: &[MetricsReport]) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        jsonl: dir.join(format!("{stem}.jsonl")),
        table: dir.join(format!("{stem}.txt")),
    };
    std::fs::write(&files.jsonl, reports_to_jsonl(reports))?;
    std::fs::write(&files.table, format_table(reports))?;
    Ok(files)
}

/// Per-epoch curve data as CSV: objective, test MAE per target, accuracy
/// and sigmas.
pub fn curves_csv(log: &TrainLog) -> String {
    let mut out = String::from("stage,epoch,objective");
    for c in REGRESSION_TARGETS {
        let _ = write!(out, ",mae_{}", c.name());
    }
    out.push_str(",accuracy,sigma_PL,sigma_Rp,sigma_DS,sigma_phi,sigma_theta,sigma_LOS\n");
    for r in &log.records {
        let _ = write!(out, "{},{},{}", r.stage.name(), r.epoch, r.objective);
        for c in REGRESSION_TARGETS {
            let v = r.test.as_ref().and_then(|t| t.mae_of(c.name()));
            let _ = write!(out, ",{}", v.map_or(String::new(), |v| v.to_string()));
        }
        let _ = write!(out, ",{}", r.test.as_ref().map_or(String::new(), |t| t.accuracy.to_string()));
        for s in &r.sigma {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}

pub fn write_curves(path: &Path, log: &TrainLog) -> Result<()> {
    std::fs::write(path, curves_csv(log))?;
    Ok(())
}
