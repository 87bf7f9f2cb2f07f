use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use crate::dataset::{Channel, ChannelMap, Normalization};
use crate::error::{Error, Result};
use crate::model::{ArchConfig, Task};
use crate::train::{evaluate_prepared, prepare, train_two_stage, StageData, TrainConfig, TrainLog};

/// Rows of the cumulative ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationVariant {
    /// Path loss alone on the flat network.
    #[serde(rename = "STL")]
    Stl,
    /// All six tasks on the flat network.
    #[serde(rename = "MTL")]
    Mtl,
    /// All tasks with residual blocks that widen then narrow.
    #[serde(rename = "MTL+RES")]
    MtlRes,
    /// As `MtlRes`, trained on the six-fold augmented set.
    #[serde(rename = "MTL+RES+DA")]
    MtlResDa,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Stl,
        AblationVariant::Mtl,
        AblationVariant::MtlRes,
        AblationVariant::MtlResDa,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::Stl => "STL",
            AblationVariant::Mtl => "MTL",
            AblationVariant::MtlRes => "MTL+RES",
            AblationVariant::MtlResDa => "MTL+RES+DA",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown ablation variant {s:?}")))
    }

    /// Applies the variant's construction rules on top of `base`, whose
    /// budget, scale and learning rate are kept.
    pub fn configure(self, base: &TrainConfig, seed: u64) -> TrainConfig {
        let (arch, tasks, augment) = match self {
            AblationVariant::Stl => (ArchConfig::flat(), vec![Task::PathLoss], false),
            AblationVariant::Mtl => (ArchConfig::flat(), Task::ALL.to_vec(), false),
            AblationVariant::MtlRes => (ArchConfig::default(), Task::ALL.to_vec(), false),
            AblationVariant::MtlResDa => (ArchConfig::default(), Task::ALL.to_vec(), true),
        };
        TrainConfig {
            arch: ArchConfig {
                n_blocks: base.arch.n_blocks,
                ..arch
            },
            tasks,
            augment,
            init_seed: seed,
            shuffle_seed: seed,
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: AblationVariant,
    pub seed: u64,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub seeds: Vec<u64>,
    pub median_mae: f64,
    pub median_stde: f64,
    /// `(MAE_MTL - MAE_v) / MAE_MTL`; `None` without an MTL row.
    pub gain_mae: Option<f64>,
    pub gain_stde: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<AblationRun>,
}

impl AblationTable {
    pub fn row(&self, v: AblationVariant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Path-loss medians per variant and gains relative to the MTL row.
pub fn summarize(runs: Vec<AblationRun>, variants: &[AblationVariant]) -> AblationTable {
    let mut rows: Vec<AblationRow> = variants
        .iter()
        .map(|&v| {
            let mine: Vec<&AblationRun> = runs.iter().filter(|r| r.variant == v).collect();
            let mae: Vec<f64> = mine.iter().map(|r| r.report.mae(Channel::PathLoss)).collect();
            let stde: Vec<f64> = mine.iter().map(|r| r.report.stde(Channel::PathLoss)).collect();
            AblationRow {
                variant: v,
                seeds: mine.iter().map(|r| r.seed).collect(),
                median_mae: median(&mae),
                median_stde: median(&stde),
                gain_mae: None,
                gain_stde: None,
            }
        })
        .collect();
    if let Some(base) = rows.iter().find(|r| r.variant == AblationVariant::Mtl).cloned() {
        for r in rows.iter_mut() {
            r.gain_mae = Some((base.median_mae - r.median_mae) / base.median_mae);
            r.gain_stde = Some((base.median_stde - r.median_stde) / base.median_stde);
        }
    }
    AblationTable { rows, runs }
}

/// One variant and seed, trained on `train` and scored on `test`.
pub fn run_variant(
    variant: AblationVariant,
    seed: u64,
    train: &[ChannelMap],
    test: &[ChannelMap],
    base: &TrainConfig,
    norm: &Normalization,
) -> Result<(AblationRun, TrainLog)> {
    let cfg = variant.configure(base, seed);
    let train_p = prepare(train, cfg.scale, cfg.augment, norm)?;
    let test_p = prepare(test, cfg.scale, false, norm)?;
    let cfg = TrainConfig { eval_every: 0, ..cfg };
    let data = StageData {
        train: &train_p,
        test: &test_p,
        norm,
    };
    let out = train_two_stage(&data, &cfg, |_| {})?;
    let report = evaluate_prepared(&out.finetuned.params, &test_p, norm, &format!("{}-seed{seed}", variant.label()))?;
    Ok((AblationRun { variant, seed, report }, out.log))
}

/// Trains every `(variant, seed)` pair under the same budget, in parallel
/// on the current rayon pool.
pub fn run_ablation(
    train: &[ChannelMap],
    test: &[ChannelMap],
    variants: &[AblationVariant],
    seeds: &[u64],
    base: &TrainConfig,
    norm: &Normalization,
) -> Result<AblationTable> {
    if seeds.is_empty() || variants.is_empty() {
        return Err(Error::invalid("ablation needs at least one variant and one seed"));
    }
    let jobs: Vec<(AblationVariant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(v, s)| run_variant(v, s, train, test, base, norm).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(runs, variants))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TargetMetrics;

    fn run(v: AblationVariant, seed: u64, mae: f64) -> AblationRun {
        AblationRun {
            variant: v,
            seed,
            report: MetricsReport {
                model_id: String::new(),
                scale: 2,
                samples: 1,
                valid_cells: 1,
                targets: vec![TargetMetrics {
                    target: "PL".into(),
                    unit: "dB".into(),
                    mae,
                    stde: mae / 2.0,
                }],
                accuracy: 1.0,
            },
        }
    }

    #[test]
    fn medians_and_gains() {
        let runs = vec![
            run(AblationVariant::Mtl, 1, 10.0),
            run(AblationVariant::Mtl, 2, 30.0),
            run(AblationVariant::Mtl, 3, 20.0),
            run(AblationVariant::MtlRes, 1, 15.0),
        ];
        let t = summarize(runs, &[AblationVariant::Mtl, AblationVariant::MtlRes]);
        let mtl = t.row(AblationVariant::Mtl).unwrap();
        assert_eq!(mtl.median_mae, 20.0);
        assert_eq!(mtl.gain_mae, Some(0.0));
        assert_eq!(mtl.gain_stde, Some(0.0));
        assert_eq!(t.row(AblationVariant::MtlRes).unwrap().gain_mae, Some(0.25));
    }

    #[test]
    fn single_variant_table() {
        let t = summarize(vec![run(AblationVariant::Stl, 1, 3.0)], &[AblationVariant::Stl]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].gain_mae, None);
    }

    #[test]
    fn variant_rules() {
        let base = TrainConfig::default();
        let stl = AblationVariant::Stl.configure(&base, 4);
        assert_eq!(stl.tasks, vec![Task::PathLoss]);
        assert!(!stl.arch.residual);
        assert_eq!(stl.init_seed, 4);
        let res = AblationVariant::MtlRes.configure(&base, 4);
        assert!(res.arch.residual && res.arch.block_mid > res.arch.in_channels);
        assert!(AblationVariant::MtlResDa.configure(&base, 4).augment);
        for v in AblationVariant::ALL {
            assert_eq!(AblationVariant::parse(v.label()).unwrap(), v);
        }
    }
}
