use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricsReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
        }
    }
}

/// Test metrics recorded during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSnapshot {
    /// `(target, MAE)` pairs in report order.
    pub mae: Vec<(String, f64)>,
    pub accuracy: f64,
}

impl From<&MetricsReport> for TestSnapshot {
    fn from(r: &MetricsReport) -> Self {
        Self {
            mae: r.targets.iter().map(|t| (t.target.clone(), t.mae)).collect(),
            accuracy: r.accuracy,
        }
    }
}

impl TestSnapshot {
    pub fn mae_of(&self, target: &str) -> Option<f64> {
        self.mae.iter().find(|(t, _)| t == target).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    pub epoch: usize,
    /// Mean per-sample objective: the multi-task loss when pre-training, the
    /// sum of single-task losses when fine-tuning.
    pub objective: f64,
    /// Mean per-sample loss of each trained task.
    pub task_losses: Vec<(String, f64)>,
    /// `exp(s_m)` for all six tasks after the epoch.
    pub sigma: Vec<f64>,
    pub test: Option<TestSnapshot>,
    pub steps: u64,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn last_test(&self, stage: Stage) -> Option<&TestSnapshot> {
        self.stage(stage).filter_map(|r| r.test.as_ref()).last()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for line in f.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { records })
    }

    /// Every logged number except wall-clock time, in record order.
    pub fn metric_sequence(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in &self.records {
            out.push(r.objective);
            out.extend(r.task_losses.iter().map(|(_, v)| *v));
            out.extend(&r.sigma);
            if let Some(t) = &r.test {
                out.extend(t.mae.iter().map(|(_, v)| *v));
                out.push(t.accuracy);
            }
        }
        out
    }
}
