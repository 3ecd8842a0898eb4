//! Cross-validation protocol, cross-domain transfer and report tables.

pub mod folds;
pub mod harness;
pub mod report;

pub use folds::{kfold_split, FoldSplit};
pub use harness::{
    domain_matrix, evaluate_cross_domain, evaluate_cross_domain_with, evaluate_same_domain,
    evaluate_same_domain_with, evaluate_transfer, evaluate_transfer_with, featurize,
    featurize_records, input_scale_for, learner_for, record_fingerprint, shuffled_label_accuracy,
    CentroidLearner, CnnLearner, CnnPreset, EvalConfig, LabeledSet, Learner, ShuffledLabels,
};
pub use report::{
    emit_report, emit_reports, parse_reports, read_reports, render_reports, EvalReport, ModelKind,
    REPORT_HEADER,
};
