//! Item analysis and group statistics over binary response matrices.

mod anova;
mod items;
mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use anova::{
    levene_test, median_deviations, one_way_anova, pairwise_welch_bonferroni, two_way_anova, AnovaResult, Effect,
    PairwiseComparison, Residual, TwoWayAnovaResult,
};
pub use items::{item_discrimination, item_p_value, item_statistics, ItemStats, ResponseMatrix};
pub use special::{f_survival, ln_gamma, reg_incomplete_beta, t_two_sided};

use crate::par::Parallelism;

#[derive(Debug, thiserror::Error)]
pub enum PsychError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("need at least {needed} participants, got {got}")]
    TooFewParticipants { needed: usize, got: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has {size} observations, need at least 2")]
    GroupTooSmall { group: usize, size: usize },
    #[error("two-way design is not balanced")]
    UnbalancedDesign,
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl PsychError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownItem(_) => "UnknownItem",
            Self::TooFewParticipants { .. } => "TooFewParticipants",
            Self::TooFewGroups(_) => "TooFewGroups",
            Self::GroupTooSmall { .. } => "GroupTooSmall",
            Self::UnbalancedDesign => "UnbalancedDesign",
            Self::DomainError(_) => "DomainError",
            Self::MalformedCsv { .. } => "MalformedCsv",
            Self::InvalidInput(_) => "InvalidInput",
        }
    }
}

/// Item-to-group assignment for group comparisons. `factor_b`, when present,
/// adds a second crossed factor for the two-way table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub groups: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_b: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub items: usize,
    pub p_value: MeanSd,
    pub discrimination: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostHoc {
    pub method: &'static str,
    pub comparisons: Vec<PairwiseComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAnalysis {
    pub summaries: Vec<GroupSummary>,
    pub p_value_anova: AnovaResult,
    pub discrimination_anova: AnovaResult,
    pub levene: AnovaResult,
    pub post_hoc: PostHoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_way: Option<TwoWayTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoWayTable {
    pub factor_a_levels: Vec<String>,
    pub factor_b_levels: Vec<String>,
    pub anova: TwoWayAnovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub participants: usize,
    pub items: usize,
    pub fraction: f64,
    pub item_stats: Vec<ItemStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupAnalysis>,
}

fn levels_in_item_order(matrix: &ResponseMatrix, map: &BTreeMap<String, String>) -> Result<Vec<String>, PsychError> {
    for item in map.keys() {
        matrix.item_index(item)?;
    }
    let mut levels: Vec<String> = Vec::new();
    for item in matrix.items() {
        if let Some(level) = map.get(item) {
            if !levels.contains(level) {
                levels.push(level.clone());
            }
        }
    }
    Ok(levels)
}

/// Item statistics plus, when `spec` is given, per-group summaries and
/// comparisons of item P values across groups.
pub fn analyze(
    matrix: &ResponseMatrix,
    fraction: f64,
    spec: Option<&GroupSpec>,
    mode: Parallelism,
) -> Result<AnalysisReport, PsychError> {
    let stats = item_statistics(matrix, fraction, mode)?;
    let groups = spec.map(|spec| group_analysis(matrix, &stats, spec)).transpose()?;
    Ok(AnalysisReport {
        participants: matrix.participant_count(),
        items: matrix.item_count(),
        fraction,
        item_stats: stats,
        groups,
    })
}

fn group_analysis(matrix: &ResponseMatrix, stats: &[ItemStats], spec: &GroupSpec) -> Result<GroupAnalysis, PsychError> {
    let levels = levels_in_item_order(matrix, &spec.groups)?;
    let collect = |level: &str, pick: fn(&ItemStats) -> f64| -> Vec<f64> {
        stats
            .iter()
            .filter(|s| spec.groups.get(&s.item).map(String::as_str) == Some(level))
            .map(pick)
            .collect()
    };
    let p_groups: Vec<Vec<f64>> = levels.iter().map(|l| collect(l, |s| s.p_value)).collect();
    let d_groups: Vec<Vec<f64>> = levels.iter().map(|l| collect(l, |s| s.discrimination)).collect();
    let summaries = levels
        .iter()
        .zip(p_groups.iter().zip(&d_groups))
        .map(|(level, (p, d))| GroupSummary {
            group: level.clone(),
            items: p.len(),
            p_value: MeanSd::of(p),
            discrimination: MeanSd::of(d),
        })
        .collect();
    let labelled: Vec<(String, Vec<f64>)> = levels.iter().cloned().zip(p_groups.iter().cloned()).collect();

    let two_way = match &spec.factor_b {
        None => None,
        Some(b_map) => {
            let b_levels = levels_in_item_order(matrix, b_map)?;
            let cells = levels
                .iter()
                .map(|a| {
                    b_levels
                        .iter()
                        .map(|b| {
                            stats
                                .iter()
                                .filter(|s| {
                                    spec.groups.get(&s.item) == Some(a) && b_map.get(&s.item) == Some(b)
                                })
                                .map(|s| s.p_value)
                                .collect()
                        })
                        .collect()
                })
                .collect::<Vec<Vec<Vec<f64>>>>();
            Some(TwoWayTable {
                factor_a_levels: levels.clone(),
                factor_b_levels: b_levels,
                anova: two_way_anova(&cells)?,
            })
        }
    };

    Ok(GroupAnalysis {
        summaries,
        p_value_anova: one_way_anova(&p_groups)?,
        discrimination_anova: one_way_anova(&d_groups)?,
        levene: levene_test(&p_groups)?,
        post_hoc: PostHoc { method: "bonferroni_welch", comparisons: pairwise_welch_bonferroni(&labelled)? },
        two_way,
    })
}
