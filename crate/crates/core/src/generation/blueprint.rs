use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GenError;
use crate::assessment::{DifficultyTier, FeatureWeights};

/// `alpha_i = n_i / sum n_j`.
pub fn allocation_ratios(counts: &[u64]) -> Result<Vec<f64>, GenError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(GenError::AllZeroCounts);
    }
    Ok(counts.iter().map(|&n| n as f64 / total as f64).collect())
}

/// Largest-remainder apportionment of `total` items over `ratios`; ties in
/// the remainder go to the lower index.
pub fn allocate_counts(ratios: &[f64], total: u64) -> Result<Vec<u64>, GenError> {
    if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(GenError::BadRatios("ratios must be finite and non-negative".into()));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(GenError::BadRatios(format!("ratios sum to {sum}, not 1")));
    }
    if total == 0 {
        return Err(GenError::BadRatios("total must be at least 1".into()));
    }
    let quotas: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierCounts {
    pub basic: u64,
    pub applied: u64,
    pub comprehensive: u64,
}

impl TierCounts {
    pub fn get(&self, tier: DifficultyTier) -> u64 {
        match tier {
            DifficultyTier::BasicRecall => self.basic,
            DifficultyTier::AppliedUnderstanding => self.applied,
            DifficultyTier::ComprehensiveAnalysis => self.comprehensive,
        }
    }

    pub fn total(&self) -> u64 {
        self.basic + self.applied + self.comprehensive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlueprintSection {
    pub chapter: String,
    pub count: u64,
    pub tiers: TierCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamBlueprint {
    pub subject: String,
    pub sections: Vec<BlueprintSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FeatureWeights>,
}

impl ExamBlueprint {
    /// Splits `total` items over chapters in proportion to `chapter_weights`
    /// and each chapter's share over tiers by `tier_mix`
    /// (basic, applied, comprehensive).
    pub fn allocate(
        subject: &str,
        chapters: &[(&str, u64)],
        total: u64,
        tier_mix: [u64; 3],
    ) -> Result<Self, GenError> {
        let weights: Vec<u64> = chapters.iter().map(|(_, w)| *w).collect();
        let counts = allocate_counts(&allocation_ratios(&weights)?, total)?;
        let tier_ratios = allocation_ratios(&tier_mix)?;
        let sections = chapters
            .iter()
            .zip(counts)
            .map(|((chapter, _), count)| {
                let tiers = if count == 0 {
                    TierCounts::default()
                } else {
                    let t = allocate_counts(&tier_ratios, count)?;
                    TierCounts { basic: t[0], applied: t[1], comprehensive: t[2] }
                };
                Ok(BlueprintSection { chapter: chapter.to_string(), count, tiers })
            })
            .collect::<Result<Vec<_>, GenError>>()?;
        let bp = Self { subject: subject.to_string(), sections, epsilon: None, weights: None };
        bp.validate()?;
        Ok(bp)
    }

    pub fn total(&self) -> u64 {
        self.sections.iter().map(|s| s.count).sum()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.subject.trim().is_empty() {
            return Err(GenError::InvalidBlueprint("subject is empty".into()));
        }
        for (i, s) in self.sections.iter().enumerate() {
            if s.chapter.trim().is_empty() {
                return Err(GenError::InvalidBlueprint(format!("section {i} has an empty chapter")));
            }
            if s.tiers.total() != s.count {
                return Err(GenError::InvalidBlueprint(format!(
                    "section `{}`: tier counts sum to {}, count is {}",
                    s.chapter,
                    s.tiers.total(),
                    s.count
                )));
            }
        }
        if self.total() == 0 {
            return Err(GenError::InvalidBlueprint("blueprint requests no items".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return Err(GenError::InvalidBlueprint(format!("epsilon {e} must be > 0")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the blueprint's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("blueprint serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(allocation_ratios(&[2, 3, 5]).unwrap(), vec![0.2, 0.3, 0.5]);
        assert_eq!(allocation_ratios(&[10]).unwrap(), vec![1.0]);
        assert!(matches!(allocation_ratios(&[0, 0]), Err(GenError::AllZeroCounts)));
    }

    #[test]
    fn largest_remainder() {
        let third = 1.0 / 3.0;
        assert_eq!(allocate_counts(&[third, third, third], 10).unwrap(), vec![4, 3, 3]);
        assert_eq!(allocate_counts(&[0.2, 0.3, 0.5], 10).unwrap(), vec![2, 3, 5]);
        assert_eq!(allocate_counts(&[1.0], 7).unwrap(), vec![7]);
        assert!(allocate_counts(&[0.5, 0.4], 10).is_err());
        assert!(allocate_counts(&[1.0], 0).is_err());
    }

    #[test]
    fn blueprint_json() {
        let json = r#"{"subject":"ecology","sections":[{"chapter":"Ch 1","count":10,"tiers":{"basic":4,"applied":4,"comprehensive":2}}],"epsilon":2,"weights":[1,1,1,1,1,1,1]}"#;
        let bp: ExamBlueprint = serde_json::from_str(json).unwrap();
        bp.validate().unwrap();
        assert_eq!(bp.total(), 10);
        let bad = json.replace("\"basic\":4", "\"basic\":3");
        let bp: ExamBlueprint = serde_json::from_str(&bad).unwrap();
        assert!(matches!(bp.validate(), Err(GenError::InvalidBlueprint(_))));
        assert_eq!(bp.hash().len(), 64);
    }

    #[test]
    fn allocate_blueprint() {
        let bp = ExamBlueprint::allocate("s", &[("a", 1), ("b", 1), ("c", 1)], 30, [1, 1, 1]).unwrap();
        assert_eq!(bp.sections.iter().map(|s| s.count).collect::<Vec<_>>(), vec![10, 10, 10]);
        assert_eq!(bp.sections[0].tiers, TierCounts { basic: 4, applied: 3, comprehensive: 3 });
    }
}
