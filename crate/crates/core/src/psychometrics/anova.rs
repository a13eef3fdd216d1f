//! One-way and balanced two-way ANOVA, Brown–Forsythe Levene, and
//! Bonferroni-corrected pairwise Welch comparisons.

use serde::{Serialize, Serializer};

use super::special::{f_survival, t_two_sided};
use super::PsychError;

// JSON has no infinity; a degenerate F is written as null next to a flag.
fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    #[serde(serialize_with = "finite_or_null")]
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    /// Set when within-group variance vanishes and F is reported as infinite.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_finite(groups: &[&[f64]]) -> Result<(), PsychError> {
    if groups.iter().flat_map(|g| g.iter()).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PsychError::InvalidInput("observations must be finite".into()))
    }
}

/// F statistic and p value from sums of squares, applying the degenerate
/// conventions.
fn f_test(ss_effect: f64, df_effect: usize, ss_error: f64, df_error: usize, ss_total: f64) -> Result<(f64, f64, bool), PsychError> {
    let scale = ss_total.abs().max(f64::MIN_POSITIVE);
    if ss_error <= 1e-13 * scale || ss_total == 0.0 {
        if ss_effect <= 1e-13 * scale {
            return Ok((0.0, 1.0, true));
        }
        return Ok((f64::INFINITY, 0.0, true));
    }
    let f = (ss_effect / df_effect as f64) / (ss_error / df_error as f64);
    let f = f.max(0.0);
    let p = f_survival(f, df_effect as f64, df_error as f64)?;
    Ok((f, p, false))
}

pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, PsychError> {
    let groups: Vec<&[f64]> = groups.iter().map(AsRef::as_ref).collect();
    if groups.len() < 2 {
        return Err(PsychError::TooFewGroups(groups.len()));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(PsychError::GroupTooSmall { group: i, size: g.len() });
    }
    check_finite(&groups)?;
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in &groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let ss_total = groups.iter().flat_map(|g| g.iter()).map(|x| (x - grand).powi(2)).sum::<f64>();
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let (f, p, degenerate) = f_test(ss_between, df_between, ss_within, df_within, ss_total)?;
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
        ss_between,
        ss_within,
        ss_total,
        ms_between: ss_between / df_between as f64,
        ms_within: ss_within / df_within as f64,
        degenerate,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Absolute deviations from each group's median.
pub fn median_deviations<G: AsRef<[f64]>>(groups: &[G]) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            let g = g.as_ref();
            let med = median(g);
            g.iter().map(|x| (x - med).abs()).collect()
        })
        .collect()
}

/// Levene's test, median-centered (Brown–Forsythe).
pub fn levene_test<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, PsychError> {
    if groups.len() < 2 {
        return Err(PsychError::TooFewGroups(groups.len()));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.as_ref().len() < 2) {
        return Err(PsychError::GroupTooSmall { group: i, size: g.as_ref().len() });
    }
    one_way_anova(&median_deviations(groups))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effect {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub f: f64,
    pub p: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoWayAnovaResult {
    pub factor_a: Effect,
    pub factor_b: Effect,
    pub interaction: Effect,
    pub residual: Residual,
    pub ss_total: f64,
    pub df_total: usize,
    pub cell_size: usize,
}

/// Balanced two-way ANOVA over `cells[a][b]`, each cell a sample of equal
/// size.
pub fn two_way_anova(cells: &[Vec<Vec<f64>>]) -> Result<TwoWayAnovaResult, PsychError> {
    let a = cells.len();
    if a < 2 {
        return Err(PsychError::TooFewGroups(a));
    }
    let b = cells[0].len();
    if b < 2 {
        return Err(PsychError::TooFewGroups(b));
    }
    let n = cells[0][0].len();
    for row in cells {
        if row.len() != b || row.iter().any(|c| c.len() != n) {
            return Err(PsychError::UnbalancedDesign);
        }
    }
    if n < 2 {
        return Err(PsychError::GroupTooSmall { group: 0, size: n });
    }
    let flat: Vec<&[f64]> = cells.iter().flat_map(|row| row.iter().map(Vec::as_slice)).collect();
    check_finite(&flat)?;

    let total_n = (a * b * n) as f64;
    let grand = flat.iter().flat_map(|c| c.iter()).sum::<f64>() / total_n;
    let cell_mean: Vec<Vec<f64>> = cells.iter().map(|row| row.iter().map(|c| mean(c)).collect()).collect();
    let a_mean: Vec<f64> = cell_mean.iter().map(|row| row.iter().sum::<f64>() / b as f64).collect();
    let b_mean: Vec<f64> = (0..b).map(|j| cell_mean.iter().map(|row| row[j]).sum::<f64>() / a as f64).collect();

    let ss_a = (b * n) as f64 * a_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = (a * n) as f64 * b_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_res = 0.0;
    for i in 0..a {
        for j in 0..b {
            let m = cell_mean[i][j];
            ss_ab += (m - a_mean[i] - b_mean[j] + grand).powi(2);
            ss_res += cells[i][j].iter().map(|x| (x - m).powi(2)).sum::<f64>();
        }
    }
    ss_ab *= n as f64;
    let ss_total = flat.iter().flat_map(|c| c.iter()).map(|x| (x - grand).powi(2)).sum::<f64>();

    let df_a = a - 1;
    let df_b = b - 1;
    let df_ab = df_a * df_b;
    let df_res = a * b * (n - 1);
    let effect = |ss: f64, df: usize| -> Result<Effect, PsychError> {
        let (f, p, degenerate) = f_test(ss, df, ss_res, df_res, ss_total)?;
        Ok(Effect { ss, df, ms: ss / df as f64, f, p, degenerate })
    };
    Ok(TwoWayAnovaResult {
        factor_a: effect(ss_a, df_a)?,
        factor_b: effect(ss_b, df_b)?,
        interaction: effect(ss_ab, df_ab)?,
        residual: Residual { ss: ss_res, df: df_res, ms: ss_res / df_res as f64 },
        ss_total,
        df_total: a * b * n - 1,
        cell_size: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub group_a: String,
    pub group_b: String,
    pub mean_difference: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p_adjusted: f64,
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// All pairwise Welch t tests with Bonferroni-adjusted p values, pairs in
/// input order.
pub fn pairwise_welch_bonferroni<G: AsRef<[f64]>>(groups: &[(String, G)]) -> Result<Vec<PairwiseComparison>, PsychError> {
    if groups.len() < 2 {
        return Err(PsychError::TooFewGroups(groups.len()));
    }
    if let Some((i, (_, g))) = groups.iter().enumerate().find(|(_, (_, g))| g.as_ref().len() < 2) {
        return Err(PsychError::GroupTooSmall { group: i, size: g.as_ref().len() });
    }
    let m = groups.len() * (groups.len() - 1) / 2;
    let mut out = Vec::with_capacity(m);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let (x, y) = (groups[i].1.as_ref(), groups[j].1.as_ref());
            let (nx, ny) = (x.len() as f64, y.len() as f64);
            let (vx, vy) = (sample_variance(x) / nx, sample_variance(y) / ny);
            let diff = mean(x) - mean(y);
            let se2 = vx + vy;
            let (t, df, p) = if se2 <= 0.0 {
                if diff == 0.0 {
                    (0.0, nx + ny - 2.0, 1.0)
                } else {
                    (f64::INFINITY.copysign(diff), nx + ny - 2.0, 0.0)
                }
            } else {
                let t = diff / se2.sqrt();
                let df = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
                (t, df, t_two_sided(t, df)?)
            };
            out.push(PairwiseComparison {
                group_a: groups[i].0.clone(),
                group_b: groups[j].0.clone(),
                mean_difference: diff,
                t,
                df,
                p,
                p_adjusted: (p * m as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        assert!((r.ss_between - 6.0).abs() < 1e-12);
        assert!((r.ss_within - 6.0).abs() < 1e-12);
        assert!((r.f - 3.0).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (2, 6));
        assert!((r.p - 0.125).abs() < 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn identical_groups() {
        let g = vec![1.0, 2.0, 4.0];
        let r = one_way_anova(&[g.clone(), g.clone(), g]).unwrap();
        assert_eq!(r.f, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_within() {
        let r = one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(r.degenerate && r.f.is_infinite() && r.p == 0.0);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["f"].is_null());
        assert_eq!(json["degenerate"], true);
        let flat = one_way_anova(&[vec![3.0, 3.0], vec![3.0, 3.0]]).unwrap();
        assert!(flat.degenerate && flat.f == 0.0 && flat.p == 1.0);
    }

    #[test]
    fn shifting_lowers_p() {
        let mut prev = 1.1;
        for shift in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0 + shift, 4.0 + shift, 5.0 + shift]]).unwrap();
            assert!(r.p < prev);
            prev = r.p;
        }
    }

    #[test]
    fn preconditions() {
        assert!(matches!(one_way_anova(&[vec![1.0, 2.0]]), Err(PsychError::TooFewGroups(1))));
        assert!(matches!(
            one_way_anova(&[vec![1.0, 2.0], vec![1.0]]),
            Err(PsychError::GroupTooSmall { group: 1, size: 1 })
        ));
        let unbalanced = vec![vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![vec![1.0, 2.0], vec![1.0, 2.0, 3.0]]];
        assert!(matches!(two_way_anova(&unbalanced), Err(PsychError::UnbalancedDesign)));
    }

    #[test]
    fn two_way_null_b() {
        // B levels differ only by a permutation of the same values in each row
        let cells = vec![
            vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]],
            vec![vec![5.0, 6.0, 7.0], vec![7.0, 5.0, 6.0]],
        ];
        let r = two_way_anova(&cells).unwrap();
        assert!(r.factor_b.f.abs() < 1e-12);
        assert!(r.interaction.f.abs() < 1e-12);
        assert!(r.factor_a.p < 0.01);
        assert_eq!((r.factor_a.df, r.factor_b.df, r.interaction.df, r.residual.df), (1, 1, 1, 8));
    }

    #[test]
    fn levene_identity() {
        let groups = vec![vec![1.0, 3.0, 2.0, 7.0], vec![10.0, 30.0, 20.0, 70.0]];
        let direct = levene_test(&groups).unwrap();
        let manual = one_way_anova(&median_deviations(&groups)).unwrap();
        assert_eq!(direct, manual);
        let same = levene_test(&[vec![1.0, 2.0, 3.0], vec![11.0, 12.0, 13.0]]).unwrap();
        assert!(same.f.abs() < 1e-12);
    }

    #[test]
    fn welch_pairs() {
        let groups = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0, 4.0]),
            ("b".to_string(), vec![1.5, 2.5, 3.5, 4.5]),
            ("c".to_string(), vec![10.0, 11.0, 12.0, 13.0]),
        ];
        let pairs = pairwise_welch_bonferroni(&groups).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!((pairs[0].group_a.as_str(), pairs[0].group_b.as_str()), ("a", "b"));
        // equal variances and sizes: Welch df = 2n - 2
        assert!((pairs[0].df - 6.0).abs() < 1e-12);
        assert!(pairs[0].p_adjusted > 0.5);
        assert!(pairs[1].p_adjusted < 0.001);
        assert!(pairs.iter().all(|p| p.p_adjusted >= p.p && p.p_adjusted <= 1.0));
    }
}
