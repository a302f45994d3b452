//! Exact nonparametric confidence values for quantile orderings.
//!
//! Given per-group samples and a quantile percentage for each group, this
//! crate computes the confidence that the population quantiles obey a strict
//! ordering, by maximizing a product of binomial order-statistic tail
//! probabilities over all witness tuples with a dynamic program. Around that
//! core it provides classical two-sample baselines (Student's t, Mann-Whitney
//! U, Kolmogorov-Smirnov, Holm-Bonferroni correction), delimited-matrix
//! ingestion, feature ranking, and a repeated stratified cross-validation
//! harness with a Gaussian naive Bayes classifier.

pub mod baselines;
pub mod binom;
pub mod confidence;
pub mod cv;
pub mod dataset;
pub mod error;
pub mod ranking;

pub use baselines::{
    holm_bonferroni, ks_test, t_test, t_test_variant, u_test, BaselineMethod, TTestVariant,
    TestResult, U_EXACT_LIMIT,
};
pub use binom::BinomialCache;
pub use dataset::{load_matrix, write_matrix, FeatureMatrix, MatrixFormat, Orientation};

pub use cv::{
    gaussian_nb_fit_predict, gaussian_nb_log_scores, run_cv, write_cv_json, write_cv_tsv,
    CvConfig, CvReport, MethodSummary,
};

pub use ranking::{
    format_score, rank_features, score_feature, write_ranking_jsonl, write_ranking_tsv,
    Correction, FeatureScore, Method, QuantileSpec, RankingEntry, RankingReport, SkipRecord,
};

pub use confidence::{
    brute_force_confidence, evaluate_witness, permutation_scan, quantile_ci, quor_confidence,
    quor_confidence_pair, ConfidenceResult, GroupSample, OrderWitness, QuantileCi,
    BRUTE_FORCE_CAP, DEFAULT_MAX_PERMUTATION_GROUPS,
};
pub use error::{Error, Result};
