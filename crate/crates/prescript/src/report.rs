//! Report payloads written by the CLI: training runs, policy evaluations,
//! and region enumerations. All of them are plain JSON files.

use serde::{Deserialize, Serialize};

use prescript_core::{
    EvalReport, Region, Sense, TrainConfig, TrainReport, TreatmentCell,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainRunReport {
    pub n_train: usize,
    pub d: usize,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub mu: f64,
    pub seed: u64,
    pub sparse: bool,
    pub shuffle: bool,
    /// Samples dropped before training because a rule forbade their
    /// observed arm inside its indicated set.
    pub filtered_samples: usize,
    pub epoch_losses: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_accuracy: Option<f64>,
}

impl TrainRunReport {
    pub fn new(
        n_train: usize,
        d: usize,
        k: usize,
        cfg: &TrainConfig,
        filtered_samples: usize,
        report: &TrainReport,
    ) -> Self {
        TrainRunReport {
            n_train,
            d,
            k,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            lr: cfg.lr,
            mu: cfg.mu,
            seed: cfg.seed,
            sparse: cfg.sparse,
            shuffle: cfg.shuffle,
            filtered_samples,
            epoch_losses: report.epoch_losses.clone(),
            final_accuracy: report.final_accuracy,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalEntry {
    pub policy: String,
    pub n: usize,
    pub oracle_accuracy_pct: f64,
    pub mean_prescribed_outcome: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome_mse: Option<f64>,
}

impl EvalEntry {
    pub fn new(policy: impl Into<String>, report: &EvalReport) -> Self {
        EvalEntry {
            policy: policy.into(),
            n: report.n,
            oracle_accuracy_pct: report.oracle_accuracy_pct,
            mean_prescribed_outcome: report.mean_prescribed_outcome,
            outcome_mse: report.outcome_mse,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalRunReport {
    pub entries: Vec<EvalEntry>,
}

/// Renders the evaluation as an aligned text table for the terminal.
pub fn eval_table(entries: &[EvalEntry]) -> String {
    let mut rows: Vec<[String; 5]> = vec![[
        "policy".into(),
        "n".into(),
        "accuracy %".into(),
        "mean outcome".into(),
        "estimate mse".into(),
    ]];
    for e in entries {
        rows.push([
            e.policy.clone(),
            e.n.to_string(),
            format!("{:.2}", e.oracle_accuracy_pct),
            format!("{:.4}", e.mean_prescribed_outcome),
            e.outcome_mse.map_or_else(|| "-".into(), |m| format!("{m:.4}")),
        ]);
    }
    let mut widths = [0usize; 5];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths.iter()).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("{cell:>w$}"));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FormJson {
    pub omega: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HalfspaceJson {
    pub omega: Vec<f64>,
    pub beta: f64,
    /// `">0"` for the open side, `"<=0"` for its closed complement.
    pub sense: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellJson {
    pub treatment: usize,
    pub halfspaces: Vec<HalfspaceJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionJson {
    /// Hidden activation bits, layer-major.
    pub pattern: Vec<bool>,
    /// Probe points that landed in this region.
    pub support: usize,
    pub halfspaces: Vec<HalfspaceJson>,
    /// The K output functions valid on the region.
    pub outputs: Vec<FormJson>,
    /// The region's further split by prescribed arm.
    pub cells: Vec<CellJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionsReport {
    pub n_points: usize,
    pub n_regions: usize,
    pub regions: Vec<RegionJson>,
}

fn sense_label(sense: Sense) -> String {
    match sense {
        Sense::Positive => ">0".into(),
        Sense::NonPositive => "<=0".into(),
    }
}

fn halfspaces_json(hs: &[prescript_core::Halfspace]) -> Vec<HalfspaceJson> {
    hs.iter()
        .map(|h| HalfspaceJson {
            omega: h.omega.clone(),
            beta: h.beta,
            sense: sense_label(h.sense),
        })
        .collect()
}

pub fn regions_report(n_points: usize, regions: &[(Region, Vec<TreatmentCell>)]) -> RegionsReport {
    let rows = regions
        .iter()
        .map(|(r, cells)| RegionJson {
            pattern: r.pattern.0.clone(),
            support: r.support,
            halfspaces: halfspaces_json(&r.halfspaces),
            outputs: r
                .outputs
                .iter()
                .map(|f| FormJson { omega: f.omega.clone(), beta: f.beta })
                .collect(),
            cells: cells
                .iter()
                .map(|c| CellJson {
                    treatment: c.treatment,
                    halfspaces: halfspaces_json(&c.halfspaces),
                })
                .collect(),
        })
        .collect::<Vec<_>>();
    RegionsReport { n_points, n_regions: rows.len(), regions: rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use prescript_core::{enumerate_regions, treatment_cells, Network};

    #[test]
    fn eval_table_aligns_and_marks_missing_mse() {
        let entries = vec![
            EvalEntry {
                policy: "network".into(),
                n: 5000,
                oracle_accuracy_pct: 83.25,
                mean_prescribed_outcome: -0.125,
                outcome_mse: Some(0.04),
            },
            EvalEntry {
                policy: "tree".into(),
                n: 5000,
                oracle_accuracy_pct: 83.25,
                mean_prescribed_outcome: -0.125,
                outcome_mse: None,
            },
        ];
        let table = eval_table(&entries);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("policy"));
        assert!(lines[1].contains("83.25") && lines[1].contains("0.0400"));
        assert!(lines[2].ends_with('-'));
        let header_cols: Vec<usize> = ["n", "accuracy %"]
            .iter()
            .map(|c| lines[0].find(c).unwrap())
            .collect();
        // Right-aligned numeric columns end where their headers end.
        assert_eq!(lines[0].find("accuracy %").unwrap(), header_cols[1]);
    }

    #[test]
    fn regions_report_counts_and_replays_shapes() {
        let net = Network::new(2, &[3], 2, 7).unwrap();
        let points: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64 / 3.5 - 1.0, (i % 5) as f64 / 2.5 - 1.0])
            .collect();
        let regions = enumerate_regions(&net, &points).unwrap();
        let with_cells: Vec<_> = regions
            .iter()
            .map(|r| (r.clone(), treatment_cells(r)))
            .collect();
        let report = regions_report(points.len(), &with_cells);
        assert_eq!(report.n_points, 40);
        assert_eq!(report.n_regions, regions.len());
        let total_support: usize = report.regions.iter().map(|r| r.support).sum();
        assert_eq!(total_support, 40);
        for r in &report.regions {
            assert_eq!(r.halfspaces.len(), 3);
            assert_eq!(r.outputs.len(), 2);
            assert_eq!(r.cells.len(), 2);
            for h in &r.halfspaces {
                assert!(h.sense == ">0" || h.sense == "<=0");
            }
        }
    }
}
