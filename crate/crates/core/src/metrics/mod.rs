//! Evaluation metrics: ranking accuracy, clustering agreement, confusion
//! matrices and rank correlation.

pub mod cluster;
pub mod confusion;
pub mod correlation;
pub mod ranking;

pub use cluster::{kmeans, kmeans_vmeasure, v_measure, KMeansConfig, KMeansResult, VMeasure};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use correlation::{fractional_ranks, spearman};
pub use ranking::{
    evaluate_rankings, evaluate_with, per_pos_report, summarize_ranks, top_k_accuracy_by_label, EvalOptions,
    EvalSummary, PosGroup, TranslationEvalReport,
};
