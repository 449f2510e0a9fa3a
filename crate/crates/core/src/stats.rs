//! The statistical machinery behind the discovery protocol: two-sample
//! t-tests (sample and summary forms, pooled and Welch), Cohen's d,
//! Benjamini-Hochberg adjustment, chi-square independence, AUC,
//! accuracy and seeded bootstrap confidence intervals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::special::{chi2_sf, t_sf};

/// Identifier of the resampling generator, recorded in reports so a
/// seed is meaningful across runs of this implementation.
pub const BOOTSTRAP_RNG: &str = "chacha12/stream-per-replicate";

/// Alternative hypothesis. `Greater` means the first group's mean
/// exceeds the second's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

impl Alternative {
    pub fn flipped(self) -> Alternative {
        match self {
            Alternative::Greater => Alternative::Less,
            Alternative::Less => Alternative::Greater,
            Alternative::TwoSided => Alternative::TwoSided,
        }
    }
}

/// Variance model for the two-sample t statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceModel {
    /// Pooled (Student) variance; reproduces the published analyses.
    #[default]
    Pooled,
    /// Welch's unpooled variance with Satterthwaite df.
    Welch,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Cohen's d with the pooled standard deviation (for chi-square
    /// results this field carries Cramer's V instead).
    pub effect_size: f64,
    pub direction: Alternative,
}

/// Mean / SD / n summary of one group.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl GroupSummary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Self {
        GroupSummary { mean, sd, n }
    }

    /// Sample mean and (n-1)-denominator SD of a slice.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        GroupSummary {
            mean,
            sd: var.sqrt(),
            n,
        }
    }
}

/// Two-sample t-test on raw samples.
pub fn t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    t_test_with(a, b, alternative, VarianceModel::Pooled)
}

pub fn t_test_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    variance: VarianceModel,
) -> Result<TestResult> {
    t_test_from_summary_with(
        GroupSummary::from_samples(a),
        GroupSummary::from_samples(b),
        alternative,
        variance,
    )
}

/// Two-sample t-test from published summary statistics; identical
/// formulas to `t_test`.
pub fn t_test_from_summary(
    a: GroupSummary,
    b: GroupSummary,
    alternative: Alternative,
) -> Result<TestResult> {
    t_test_from_summary_with(a, b, alternative, VarianceModel::Pooled)
}

pub fn t_test_from_summary_with(
    a: GroupSummary,
    b: GroupSummary,
    alternative: Alternative,
    variance: VarianceModel,
) -> Result<TestResult> {
    if a.n < 2 || b.n < 2 {
        return Err(CoreError::TooFewSamples { n_a: a.n, n_b: b.n });
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let (va, vb) = (a.sd * a.sd, b.sd * b.sd);
    let pooled_var = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled_var <= 0.0 || !pooled_var.is_finite() {
        return Err(CoreError::ZeroVariance);
    }
    let pooled_sd = pooled_var.sqrt();
    let effect_size = (a.mean - b.mean) / pooled_sd;

    let (statistic, df) = match variance {
        VarianceModel::Pooled => {
            let se = pooled_sd * (1.0 / na + 1.0 / nb).sqrt();
            ((a.mean - b.mean) / se, na + nb - 2.0)
        }
        VarianceModel::Welch => {
            let se2 = va / na + vb / nb;
            if se2 <= 0.0 {
                return Err(CoreError::ZeroVariance);
            }
            let df = se2 * se2
                / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
            ((a.mean - b.mean) / se2.sqrt(), df)
        }
    };

    let p_value = match alternative {
        Alternative::Greater => t_sf(statistic, df),
        Alternative::Less => 1.0 - t_sf(statistic, df),
        Alternative::TwoSided => 2.0 * t_sf(statistic.abs(), df),
    }
    .min(1.0);

    Ok(TestResult {
        statistic,
        df,
        p_value,
        effect_size,
        direction: alternative,
    })
}

/// Benjamini-Hochberg step-up adjustment. Returns adjusted p-values in
/// the original order: for ascending p(1..m), adj(i) = min over j >= i
/// of p(j) * m / j, clipped to 1.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(CoreError::BadPValue(p));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = vec![0.0; m];
    let mut running_min = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        let scaled = p_values[idx] * m as f64 / (rank + 1) as f64;
        running_min = running_min.min(scaled);
        adjusted[idx] = running_min.min(1.0);
    }
    Ok(adjusted)
}

/// Pearson chi-square test of independence on an r x c count table
/// (no continuity correction). The effect-size slot carries Cramer's V.
pub fn chi_square_independence(table: &[Vec<f64>]) -> Result<TestResult> {
    let r = table.len();
    let c = table.first().map_or(0, |row| row.len());
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(CoreError::DegenerateTable {
            context: format!("need a rectangular table with r,c >= 2, got {r}x{c}"),
        });
    }
    if table.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(CoreError::DegenerateTable {
            context: "counts must be finite and non-negative".into(),
        });
    }
    let row_sums: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    if row_sums.iter().chain(&col_sums).any(|&s| s <= 0.0) {
        return Err(CoreError::DegenerateTable {
            context: "every row and column must have a positive total".into(),
        });
    }
    let total: f64 = row_sums.iter().sum();
    let mut statistic = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = row_sums[i] * col_sums[j] / total;
            let diff = table[i][j] - expected;
            statistic += diff * diff / expected;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    let cramers_v = (statistic / (total * (r.min(c) as f64 - 1.0))).sqrt();
    Ok(TestResult {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
        effect_size: cramers_v,
        direction: Alternative::TwoSided,
    })
}

/// Area under the ROC curve in the Mann-Whitney formulation:
/// P(score_pos > score_neg) + 0.5 P(tie), computed by rank summation.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(CoreError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CoreError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // Average ranks across ties, sum the positive ranks.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0; // 1-based
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[bool], truth: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(CoreError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(CoreError::LengthMismatch { left: 0, right: 0 });
    }
    let hits = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Chance-level accuracy: the frequency of the majority class.
pub fn class_ratio_chance(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(CoreError::LengthMismatch { left: 0, right: 0 });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    Ok(pos.max(neg) as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMetric {
    Auc,
    Accuracy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub metric: BootstrapMetric,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// One-sided: fraction of replicate metrics at or below chance.
    pub p_vs_chance: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub seed: u64,
    pub chance_level: f64,
    pub rng: String,
}

/// Percentile bootstrap of AUC or accuracy over (score, label) pairs.
///
/// For the accuracy metric, scores are thresholded at 0.5. Replicates
/// are drawn on independent, deterministic RNG streams indexed by
/// replicate number, so the report depends only on `(seed, B)` and not
/// on evaluation order. AUC replicates that draw a single class are
/// redrawn on a fresh stream.
pub fn bootstrap_metric(
    scores: &[f64],
    labels: &[bool],
    metric: BootstrapMetric,
    replicates: usize,
    seed: u64,
    chance_level: f64,
) -> Result<BootstrapReport> {
    if scores.len() != labels.len() {
        return Err(CoreError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let evaluate = |s: &[f64], l: &[bool]| -> Result<f64> {
        match metric {
            BootstrapMetric::Auc => auc(s, l),
            BootstrapMetric::Accuracy => {
                let predicted: Vec<bool> = s.iter().map(|&v| v >= 0.5).collect();
                accuracy(&predicted, l)
            }
        }
    };
    let point_estimate = evaluate(scores, labels)?;

    let n = scores.len();
    let mut stats = Vec::with_capacity(replicates);
    let mut sample_scores = vec![0.0; n];
    let mut sample_labels = vec![false; n];
    for b in 0..replicates as u64 {
        // One attempt per stream; streams beyond `replicates` handle
        // single-class redraws.
        let mut attempt = 0u64;
        let value = loop {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(b + attempt * replicates as u64);
            for i in 0..n {
                let k = rng.random_range(0..n);
                sample_scores[i] = scores[k];
                sample_labels[i] = labels[k];
            }
            match evaluate(&sample_scores, &sample_labels) {
                Ok(v) => break v,
                Err(CoreError::OneClassOnly) if attempt < 64 => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        stats.push(value);
    }
    let p_vs_chance =
        stats.iter().filter(|&&v| v <= chance_level).count() as f64 / replicates as f64;
    stats.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = (quantile(&stats, 0.025), quantile(&stats, 0.975));
    Ok(BootstrapReport {
        metric,
        point_estimate,
        ci_low,
        ci_high,
        p_vs_chance,
        replicates,
        seed,
        chance_level,
        rng: BOOTSTRAP_RNG.to_string(),
    })
}

/// Linear-interpolated quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_test_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = t_test(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.effect_size, 0.0);
    }

    #[test]
    fn t_test_hand_computed() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.0, 4.0];
        let r = t_test(&a, &b, Alternative::TwoSided).unwrap();
        assert_abs_diff_eq!(r.statistic, -1.224744871391589, epsilon = 1e-12);
        assert_eq!(r.df, 4.0);
        assert_abs_diff_eq!(r.p_value, 0.28786413472703, epsilon = 1e-9);
        assert_abs_diff_eq!(r.effect_size, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn t_test_error_paths() {
        assert!(matches!(
            t_test(&[1.0], &[1.0, 2.0], Alternative::TwoSided),
            Err(CoreError::TooFewSamples { .. })
        ));
        assert!(matches!(
            t_test(&[1.0, 1.0], &[1.0, 1.0], Alternative::TwoSided),
            Err(CoreError::ZeroVariance)
        ));
    }

    #[test]
    fn summary_reproduces_published_nodes_row() {
        // Verification vessel-graph node counts.
        let r = t_test_from_summary(
            GroupSummary::new(349.31, 57.51, 200),
            GroupSummary::new(332.66, 53.70, 200),
            Alternative::Greater,
        )
        .unwrap();
        assert!((r.effect_size - 0.299).abs() < 0.001, "d = {}", r.effect_size);
        assert!((r.p_value - 0.0015).abs() < 0.0002, "p = {}", r.p_value);
    }

    #[test]
    fn summary_reproduces_published_peripapillary_row() {
        let r = t_test_from_summary(
            GroupSummary::new(0.682, 0.054, 200),
            GroupSummary::new(0.669, 0.054, 200),
            Alternative::Greater,
        )
        .unwrap();
        assert!((r.effect_size - 0.243).abs() < 0.003, "d = {}", r.effect_size);
    }

    #[test]
    fn summary_equal_means_is_symmetric() {
        let r = t_test_from_summary(
            GroupSummary::new(1.0, 0.5, 10),
            GroupSummary::new(1.0, 0.5, 10),
            Alternative::Greater,
        )
        .unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn summary_matches_sample_form() {
        let a = [0.3, 1.7, 2.9, 0.4, 1.1];
        let b = [1.0, 2.2, 0.1, 0.8];
        let from_samples = t_test(&a, &b, Alternative::Greater).unwrap();
        let from_summary = t_test_from_summary(
            GroupSummary::from_samples(&a),
            GroupSummary::from_samples(&b),
            Alternative::Greater,
        )
        .unwrap();
        assert_abs_diff_eq!(
            from_samples.statistic,
            from_summary.statistic,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(from_samples.p_value, from_summary.p_value, epsilon = 1e-10);
    }

    #[test]
    fn swapping_groups_negates() {
        let a = [0.3, 1.7, 2.9, 0.4, 1.1];
        let b = [1.0, 2.2, 0.1, 0.8];
        let ab = t_test(&a, &b, Alternative::Greater).unwrap();
        let ba = t_test(&b, &a, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(ab.statistic, -ba.statistic, epsilon = 1e-12);
        assert_abs_diff_eq!(ab.effect_size, -ba.effect_size, epsilon = 1e-12);
        assert_abs_diff_eq!(ab.p_value, 1.0 - ba.p_value, epsilon = 1e-10);
    }

    #[test]
    fn bh_step_up_by_hand() {
        let adj = bh_adjust(&[0.01, 0.02, 0.04, 0.5]).unwrap();
        assert_abs_diff_eq!(adj[0], 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(adj[1], 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(adj[2], 0.04 * 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(adj[3], 0.5, epsilon = 1e-12);

        let flat = bh_adjust(&[0.2, 0.2, 0.2]).unwrap();
        assert!(flat.iter().all(|&p| (p - 0.2).abs() < 1e-12));

        let single = bh_adjust(&[0.031]).unwrap();
        assert_eq!(single, vec![0.031]);

        assert!(matches!(
            bh_adjust(&[0.5, 1.2]),
            Err(CoreError::BadPValue(_))
        ));
    }

    #[test]
    fn chi_square_tables() {
        // Peripapillary abnormality counts, male vs female.
        let table = vec![
            vec![7.0, 7.0],
            vec![31.0, 44.0],
            vec![16.0, 20.0],
            vec![18.0, 17.0],
        ];
        let r = chi_square_independence(&table).unwrap();
        assert_abs_diff_eq!(r.statistic, 1.137726, epsilon = 1e-4);
        assert_eq!(r.df, 3.0);
        assert!((r.p_value - 0.768).abs() < 0.001, "p = {}", r.p_value);

        // Perfectly proportional table.
        let prop = vec![vec![10.0, 20.0], vec![30.0, 60.0]];
        let r = chi_square_independence(&prop).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);

        // Fully separated 2x2.
        let sep = vec![vec![10.0, 0.0], vec![0.0, 10.0]];
        let r = chi_square_independence(&sep).unwrap();
        assert_abs_diff_eq!(r.statistic, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 7.7442164310440836e-6, epsilon = 1e-12);

        let empty_col = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(
            chi_square_independence(&empty_col),
            Err(CoreError::DegenerateTable { .. })
        ));
    }

    #[test]
    fn auc_examples() {
        let scores = [0.9, 0.4, 0.6, 0.2];
        let labels = [true, true, false, false];
        assert_abs_diff_eq!(auc(&scores, &labels).unwrap(), 0.75, epsilon = 1e-12);

        // Perfect separation.
        let scores = [0.9, 0.8, 0.2, 0.1];
        assert_abs_diff_eq!(auc(&scores, &labels).unwrap(), 1.0, epsilon = 1e-12);

        // All ties.
        let scores = [0.5; 4];
        assert_abs_diff_eq!(auc(&scores, &labels).unwrap(), 0.5, epsilon = 1e-12);

        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(CoreError::OneClassOnly)
        ));
    }

    #[test]
    fn accuracy_and_chance() {
        assert_eq!(
            accuracy(&[true, false, true], &[true, false, true]).unwrap(),
            1.0
        );
        assert!(matches!(
            accuracy(&[true], &[true, false]),
            Err(CoreError::LengthMismatch { .. })
        ));

        // ODIR test split: 260 male of 480.
        let labels: Vec<bool> = (0..480).map(|i| i < 260).collect();
        let chance = class_ratio_chance(&labels).unwrap();
        assert_abs_diff_eq!(chance, 0.5417, epsilon = 0.0001);

        let balanced: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        assert_eq!(class_ratio_chance(&balanced).unwrap(), 0.5);
    }

    #[test]
    fn bootstrap_is_deterministic_and_degenerate_cases() {
        let scores: Vec<f64> = (0..40).map(|i| if i < 20 { 0.9 } else { 0.1 }).collect();
        let labels: Vec<bool> = (0..40).map(|i| i < 20).collect();
        let a = bootstrap_metric(&scores, &labels, BootstrapMetric::Auc, 500, 7, 0.5).unwrap();
        let b = bootstrap_metric(&scores, &labels, BootstrapMetric::Auc, 500, 7, 0.5).unwrap();
        assert_eq!(a.point_estimate, b.point_estimate);
        assert_eq!(a.ci_low, b.ci_low);
        assert_eq!(a.p_vs_chance, b.p_vs_chance);

        // Perfectly separated scores: CI collapses at 1.0, p = 0.
        assert_eq!(a.ci_low, 1.0);
        assert_eq!(a.ci_high, 1.0);
        assert_eq!(a.p_vs_chance, 0.0);
        assert_eq!(a.rng, BOOTSTRAP_RNG);
    }

    #[test]
    fn bootstrap_null_covers_chance() {
        // Labels assigned independently of scores: the CI should cover
        // 0.5 in nearly all seeds.
        let mut covered = 0;
        let trials = 40;
        for seed in 0..trials {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
            let scores: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
            let labels: Vec<bool> = (0..60).map(|_| rng.random_range(0..2) == 1).collect();
            let rep =
                bootstrap_metric(&scores, &labels, BootstrapMetric::Auc, 400, seed, 0.5).unwrap();
            if rep.ci_low <= 0.5 && 0.5 <= rep.ci_high {
                covered += 1;
            }
        }
        assert!(
            covered as f64 >= 0.9 * trials as f64,
            "covered {covered}/{trials}"
        );
    }

    #[test]
    fn bootstrap_ci_brackets_point_estimate() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<bool> = scores
            .iter()
            .map(|&s| s + rng.random_range(-0.4..0.4) > 0.5)
            .collect();
        let rep = bootstrap_metric(&scores, &labels, BootstrapMetric::Auc, 1000, 3, 0.5).unwrap();
        assert!(rep.ci_low <= rep.point_estimate && rep.point_estimate <= rep.ci_high);
    }
}
