//! Classification metrics, ROC curves, stratified splits and report tables.

mod metrics;
mod roc;
mod split;
mod tables;

pub use metrics::{confusion, metrics, Averaging, ClassCounts, ConfusionMatrix, MetricsReport};
pub use roc::{roc_curve, trapezoid, RocCurve};
pub use split::{largest_remainder, stratified_split, SplitMasks, SplitRatios};
pub use tables::{
    column_maxima, render_tables, MaxScope, ModelGroup, RenderedTables, TableEntry, MAX_MARKER,
};

/// Metrics plus per-class one-vs-rest AUC from predicted probabilities.
pub fn evaluate_probabilities(
    probs: &crate::autodiff::Tensor,
    y_true: &[usize],
    n_classes: usize,
    averaging: Averaging,
) -> crate::Result<(MetricsReport, Vec<Option<RocCurve>>)> {
    let y_pred = probs.argmax_rows();
    let cm = confusion(y_true, &y_pred, n_classes)?;
    let mut report = metrics(&cm, averaging)?;
    let curves: Vec<Option<RocCurve>> = (0..n_classes)
        .map(|c| roc_curve(probs, y_true, c))
        .collect::<crate::Result<_>>()?;
    report.per_class_auc = Some(curves.iter().map(|c| c.as_ref().map(|r| r.auc)).collect());
    Ok((report, curves))
}
