//! Ablation matrix: trains one config per row with a shared seed and emits a
//! table with the benchmark column set.

use serde::{Deserialize, Serialize};

use crate::metrics::MetricReport;

use super::{train, PreparedDataset, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationStudy {
    /// Distance-only vs distance + area attention.
    Attention,
    /// With vs without target physical info.
    Physical,
    /// One vs two stacked LSTM layers.
    Lstm,
    /// Target encoder alone vs +map, +attention, +both.
    Components,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub config: TrainConfig,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn write_json<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), TrainError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Fixed-width text rendering with one row per experiment.
    pub fn render_text(&self) -> String {
        let cols = [
            "minADE_1",
            "minADE_5",
            "minFDE_1",
            "minFDE_5",
            "missRate_1",
            "missRate_5",
            "Off-Road Rate",
        ];
        let label_w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(10)
            .max(10);
        let mut out = format!("{:label_w$}", "Exp");
        for c in cols {
            out.push_str(&format!(" {c:>13}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:label_w$}", row.label));
            match (&row.report, &row.error) {
                (Some(r), _) => {
                    for v in [
                        r.min_ade_1,
                        r.min_ade_5,
                        r.min_fde_1,
                        r.min_fde_5,
                        r.miss_rate_1,
                        r.miss_rate_5,
                        r.offroad_rate,
                    ] {
                        out.push_str(&format!(" {v:>13.4}"));
                    }
                }
                (None, Some(e)) => out.push_str(&format!("  FAILED: {e}")),
                (None, None) => out.push_str("  (not run)"),
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the labeled config list for one study, all derived from `base`.
pub fn standard_matrix(base: &TrainConfig, study: AblationStudy) -> Vec<(String, TrainConfig)> {
    let mut rows: Vec<(String, TrainConfig)> = Vec::new();
    let mut push = |label: &str, cfg: TrainConfig| rows.push((label.to_string(), cfg));

    let attention = |on_area: bool| TrainConfig {
        use_distance_attention: true,
        use_area_attention: on_area,
        ..base.clone()
    };
    let components = |map: bool, att: bool| TrainConfig {
        use_map: map,
        use_distance_attention: att,
        use_area_attention: att,
        ..base.clone()
    };

    match study {
        AblationStudy::Attention => {
            push("distance attention", attention(false));
            push("distance + area attention", attention(true));
        }
        AblationStudy::Physical => {
            push(
                "without physical info",
                TrainConfig {
                    use_physical_info: false,
                    ..base.clone()
                },
            );
            push(
                "with physical info",
                TrainConfig {
                    use_physical_info: true,
                    ..base.clone()
                },
            );
        }
        AblationStudy::Lstm => {
            push(
                "1 LSTM layer",
                TrainConfig {
                    lstm_layers: 1,
                    ..base.clone()
                },
            );
            push(
                "2 LSTM layers",
                TrainConfig {
                    lstm_layers: 2,
                    ..base.clone()
                },
            );
        }
        AblationStudy::Components => {
            push("target encoder", components(false, false));
            push("target encoder + map", components(true, false));
            push("target encoder + attention", components(false, true));
            push("target encoder + map + attention", components(true, true));
        }
        AblationStudy::All => {
            for s in [
                AblationStudy::Attention,
                AblationStudy::Physical,
                AblationStudy::Lstm,
                AblationStudy::Components,
            ] {
                rows.extend(standard_matrix(base, s));
            }
        }
    }
    rows
}

/// Trains and evaluates every row; failed runs are marked in the table and
/// the rest proceed.
pub fn run_ablation(
    matrix: &[(String, TrainConfig)],
    data: &PreparedDataset,
    train_idx: &[usize],
    eval_idx: &[usize],
) -> AblationTable {
    let mut rows = Vec::with_capacity(matrix.len());
    for (label, cfg) in matrix {
        match train(cfg, data, train_idx, eval_idx) {
            Ok((_, record)) => rows.push(AblationRow {
                label: label.clone(),
                config: cfg.clone(),
                report: Some(record.final_report),
                error: None,
            }),
            Err(e) => rows.push(AblationRow {
                label: label.clone(),
                config: cfg.clone(),
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }
    AblationTable { rows }
}
