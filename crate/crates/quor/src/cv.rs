//! Repeated stratified cross-validation of feature selection methods.
//!
//! Every repeat deals each group's samples round-robin into folds after a
//! seeded per-group shuffle. Within a fold, features are ranked on the
//! training columns only, the top-k features feed a Gaussian naive Bayes
//! classifier, and the held-out columns are scored. Accuracies pool over
//! folds within a repeat; the report carries mean and standard deviation
//! over repeats per method. The test columns never reach the selector: the
//! ranking is recomputed inside every fold.

use std::collections::BTreeSet;
use std::io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ranking::{rank_features, Correction, Method, QuantileSpec};

/// Cross-validation settings. Defaults: 5 folds, 20 repeats, top 20
/// features, seed 42, all four methods, median quantile.
#[derive(Clone, Debug)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub top_k: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub quantile: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: 20,
            top_k: 20,
            seed: 42,
            methods: vec![Method::Quor, Method::T, Method::U, Method::Ks],
            quantile: 0.5,
        }
    }
}

/// Accuracy summary for one scoring method.
#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_accuracy: f64,
    /// Sample standard deviation over repeats (0 for a single repeat).
    pub std_accuracy: f64,
    /// Pooled accuracy of each repeat, folds combined.
    pub per_repeat: Vec<f64>,
}

/// Cross-validation results with the configuration echoed for provenance.
#[derive(Clone, Debug, Serialize)]
pub struct CvReport {
    pub folds: usize,
    pub repeats: usize,
    pub top_k: usize,
    pub seed: u64,
    pub quantile: f64,
    pub methods: Vec<String>,
    pub results: Vec<MethodSummary>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stream seed for one (repeat, group) pair. Folding the group label in by
/// name (not column position) keeps fold assignment independent of how the
/// groups interleave across columns.
fn derive_seed(seed: u64, repeat: u64, label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(seed ^ splitmix64(repeat) ^ h)
}

fn validate_config(matrix: &FeatureMatrix, config: &CvConfig) -> Result<Vec<Vec<usize>>> {
    if config.folds < 2 {
        return Err(Error::InvalidConfig {
            message: format!("folds must be at least 2, got {}", config.folds),
        });
    }
    if config.repeats == 0 || config.top_k == 0 {
        return Err(Error::InvalidConfig {
            message: "repeats and top_k must be positive".into(),
        });
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidConfig { message: "no methods selected".into() });
    }
    if !config.quantile.is_finite() || config.quantile <= 0.0 || config.quantile >= 1.0 {
        return Err(Error::InvalidConfig {
            message: format!("quantile must lie strictly in (0, 1), got {}", config.quantile),
        });
    }
    let groups = matrix.groups();
    let mut group_cols = Vec::with_capacity(groups.len());
    for g in &groups {
        let cols: Vec<usize> = matrix
            .group_labels()
            .iter()
            .enumerate()
            .filter(|(_, l)| *l == g)
            .map(|(s, _)| s)
            .collect();
        if cols.len() < config.folds {
            return Err(Error::InvalidConfig {
                message: format!(
                    "group '{}' has {} samples, fewer than {} folds",
                    g,
                    cols.len(),
                    config.folds
                ),
            });
        }
        group_cols.push(cols);
    }
    Ok(group_cols)
}

/// Runs the repeated stratified cross-validation protocol.
pub fn run_cv(matrix: &FeatureMatrix, config: &CvConfig) -> Result<CvReport> {
    run_cv_impl(matrix, config, false)
}

/// `leak` selects features once on the full matrix (test columns included)
/// instead of per training fold; it exists so tests can demonstrate that
/// leakage changes results, and is never exposed publicly.
fn run_cv_impl(matrix: &FeatureMatrix, config: &CvConfig, leak: bool) -> Result<CvReport> {
    let group_cols = validate_config(matrix, config)?;
    let groups = matrix.groups();
    let n_samples = matrix.n_samples();
    let quantiles = QuantileSpec::Global(config.quantile);

    let mut results = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let leak_top: Option<Vec<String>> = if leak {
            let full = rank_features(matrix, method, &quantiles, Correction::None)?;
            Some(
                full.entries
                    .into_iter()
                    .take(config.top_k)
                    .map(|e| e.feature_id)
                    .collect(),
            )
        } else {
            None
        };

        let mut per_repeat = Vec::with_capacity(config.repeats);
        for repeat in 0..config.repeats {
            let mut fold_of = vec![0usize; n_samples];
            for (label, cols) in groups.iter().zip(&group_cols) {
                let mut ordinals: Vec<usize> = (0..cols.len()).collect();
                let mut rng =
                    ChaCha12Rng::seed_from_u64(derive_seed(config.seed, repeat as u64, label));
                ordinals.shuffle(&mut rng);
                for (i, &ord) in ordinals.iter().enumerate() {
                    fold_of[cols[ord]] = i % config.folds;
                }
            }

            let (mut correct, mut total) = (0usize, 0usize);
            for fold in 0..config.folds {
                let train_cols: Vec<usize> =
                    (0..n_samples).filter(|&s| fold_of[s] != fold).collect();
                let test_cols: Vec<usize> =
                    (0..n_samples).filter(|&s| fold_of[s] == fold).collect();
                let train = matrix.select_samples(&train_cols)?;
                let top: Vec<String> = match &leak_top {
                    Some(ids) => ids.clone(),
                    None => rank_features(&train, method, &quantiles, Correction::None)?
                        .entries
                        .into_iter()
                        .take(config.top_k)
                        .map(|e| e.feature_id)
                        .collect(),
                };
                let rows: Vec<usize> = top
                    .iter()
                    .map(|id| matrix.feature_index(id).expect("selected feature exists"))
                    .collect();
                let slice = |cols: &[usize]| -> Vec<Vec<f64>> {
                    rows.iter()
                        .map(|&f| {
                            cols.iter()
                                .map(|&s| matrix.value(f, s).unwrap_or(f64::NAN))
                                .collect()
                        })
                        .collect()
                };
                let train_labels: Vec<String> = train_cols
                    .iter()
                    .map(|&s| matrix.group_labels()[s].clone())
                    .collect();
                let predicted =
                    gaussian_nb_fit_predict(&slice(&train_cols), &train_labels, &slice(&test_cols))?;
                for (p, &s) in predicted.iter().zip(&test_cols) {
                    total += 1;
                    if *p == matrix.group_labels()[s] {
                        correct += 1;
                    }
                }
            }
            per_repeat.push(correct as f64 / total as f64);
        }

        let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
        let std = if per_repeat.len() < 2 {
            0.0
        } else {
            (per_repeat.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                / (per_repeat.len() - 1) as f64)
                .sqrt()
        };
        results.push(MethodSummary {
            method: method.name().to_string(),
            mean_accuracy: mean,
            std_accuracy: std,
            per_repeat,
        });
    }

    Ok(CvReport {
        folds: config.folds,
        repeats: config.repeats,
        top_k: config.top_k,
        seed: config.seed,
        quantile: config.quantile,
        methods: config.methods.iter().map(|m| m.name().to_string()).collect(),
        results,
    })
}

struct ClassModel {
    log_prior: f64,
    /// Per kept feature: (mean, floored variance).
    stats: Vec<(f64, f64)>,
}

/// Per-class log scores for every test sample. Returns the ascending class
/// labels and, per test sample, one log score per class.
///
/// Missing (NaN) cells are skipped: a missing training cell is left out of
/// that class's moments, a feature with no data in some class is dropped
/// from the model entirely, and a missing test cell skips that feature's
/// factor for every class. Variances are maximum-likelihood with floor
/// `1e-9 * (pooled variance + 1)`.
pub fn gaussian_nb_log_scores(
    train: &[Vec<f64>],
    train_labels: &[String],
    test: &[Vec<f64>],
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    if train_labels.is_empty() {
        return Err(Error::EmptyGroup { label: "training set".into() });
    }
    if train.len() != test.len() {
        return Err(Error::InvalidConfig {
            message: format!(
                "train has {} features but test has {}",
                train.len(),
                test.len()
            ),
        });
    }
    for row in train {
        if row.len() != train_labels.len() {
            return Err(Error::InvalidConfig {
                message: "training rows and labels disagree in length".into(),
            });
        }
    }
    let n_test = test.first().map_or(0, Vec::len);
    for row in test {
        if row.len() != n_test {
            return Err(Error::InvalidConfig { message: "ragged test rows".into() });
        }
    }

    let classes: Vec<String> = train_labels
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let n_train = train_labels.len() as f64;
    let mut models: Vec<ClassModel> = classes
        .iter()
        .map(|c| {
            let count = train_labels.iter().filter(|l| *l == c).count();
            ClassModel {
                log_prior: (count as f64 / n_train).ln(),
                stats: Vec::with_capacity(train.len()),
            }
        })
        .collect();

    // kept[f] marks features with data in every class.
    let mut kept = Vec::with_capacity(train.len());
    for row in train {
        let pooled: Vec<f64> = row.iter().copied().filter(|v| !v.is_nan()).collect();
        let floor = if pooled.is_empty() {
            1e-9
        } else {
            let mu = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let var =
                pooled.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / pooled.len() as f64;
            1e-9 * (var + 1.0)
        };
        let mut per_class = Vec::with_capacity(classes.len());
        for c in &classes {
            let vals: Vec<f64> = row
                .iter()
                .zip(train_labels)
                .filter(|(v, l)| !v.is_nan() && *l == c)
                .map(|(v, _)| *v)
                .collect();
            if vals.is_empty() {
                per_class.clear();
                break;
            }
            let mu = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / vals.len() as f64;
            per_class.push((mu, var + floor));
        }
        if per_class.len() == classes.len() {
            for (model, stat) in models.iter_mut().zip(per_class) {
                model.stats.push(stat);
            }
            kept.push(true);
        } else {
            kept.push(false);
        }
    }

    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut scores = Vec::with_capacity(n_test);
    for s in 0..n_test {
        let mut row = Vec::with_capacity(models.len());
        for model in &models {
            let mut score = model.log_prior;
            let mut k = 0;
            for (f, row_kept) in kept.iter().enumerate() {
                if !row_kept {
                    continue;
                }
                let x = test[f][s];
                if !x.is_nan() {
                    let (mu, var) = model.stats[k];
                    score += -0.5 * (ln_2pi + var.ln()) - (x - mu) * (x - mu) / (2.0 * var);
                }
                k += 1;
            }
            row.push(score);
        }
        scores.push(row);
    }
    Ok((classes, scores))
}

/// Fits Gaussian naive Bayes on the training slice and predicts a label per
/// test sample; score ties go to the lexicographically smaller label.
pub fn gaussian_nb_fit_predict(
    train: &[Vec<f64>],
    train_labels: &[String],
    test: &[Vec<f64>],
) -> Result<Vec<String>> {
    let (classes, scores) = gaussian_nb_log_scores(train, train_labels, test)?;
    Ok(scores
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, s) in row.iter().enumerate() {
                if *s > row[best] {
                    best = c;
                }
            }
            classes[best].clone()
        })
        .collect())
}

/// Writes the report as TSV with `#` comment lines echoing the config.
pub fn write_cv_tsv(report: &CvReport, out: &mut impl io::Write) -> Result<()> {
    writeln!(out, "# folds={}", report.folds)?;
    writeln!(out, "# repeats={}", report.repeats)?;
    writeln!(out, "# top_k={}", report.top_k)?;
    writeln!(out, "# seed={}", report.seed)?;
    writeln!(out, "# quantile={}", report.quantile)?;
    writeln!(out, "method\tmean_accuracy\tstd_accuracy\tper_repeat")?;
    for r in &report.results {
        let per: Vec<String> = r.per_repeat.iter().map(|a| crate::format_score(*a)).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.method,
            crate::format_score(r.mean_accuracy),
            crate::format_score(r.std_accuracy),
            per.join(",")
        )?;
    }
    Ok(())
}

/// Writes the report as pretty-printed JSON.
pub fn write_cv_json(report: &CvReport, out: &mut impl io::Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report).map_err(|e| Error::Numeric {
        message: format!("report serialization: {e}"),
    })?;
    writeln!(out)?;
    Ok(())
}
