use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::ingest::CancerType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelGroup {
    Gnn,
    Baseline,
}

/// Where column maxima are searched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxScope {
    /// Separately within the GNN block and the baseline block.
    #[default]
    Group,
    Global,
}

#[derive(Clone, Debug)]
pub struct TableEntry<'a> {
    pub name: &'a str,
    pub group: ModelGroup,
    pub report: &'a MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedTables {
    pub overall: String,
    pub per_class: String,
}

/// Marker appended to a column maximum.
pub const MAX_MARKER: char = '*';

/// Formats each row's values at `decimals` and flags the cells equal to the
/// column maximum of their scope. Comparison happens on the rounded text so
/// values that print identically tie.
pub fn column_maxima(
    rows: &[(ModelGroup, Vec<f64>)],
    decimals: usize,
    scope: MaxScope,
) -> Vec<Vec<bool>> {
    let ncols = rows.first().map_or(0, |r| r.1.len());
    let rounded: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, v)| {
            v.iter()
                .map(|x| format!("{x:.decimals$}").parse::<f64>().unwrap_or(*x))
                .collect()
        })
        .collect();
    let in_scope = |a: ModelGroup, b: ModelGroup| scope == MaxScope::Global || a == b;
    rows.iter()
        .enumerate()
        .map(|(i, (g, _))| {
            (0..ncols)
                .map(|c| {
                    let best = rows
                        .iter()
                        .enumerate()
                        .filter(|(_, (h, _))| in_scope(*g, *h))
                        .map(|(j, _)| rounded[j][c])
                        .fold(f64::NEG_INFINITY, f64::max);
                    rounded[i][c] == best
                })
                .collect()
        })
        .collect()
}

fn render(
    entries: &[TableEntry<'_>],
    headers: &[String],
    values: impl Fn(&MetricsReport) -> Vec<f64>,
    decimals: usize,
    scope: MaxScope,
) -> String {
    let mut ordered: Vec<&TableEntry<'_>> = entries.iter().collect();
    ordered.sort_by_key(|e| e.group);
    let rows: Vec<(ModelGroup, Vec<f64>)> = ordered
        .iter()
        .map(|e| (e.group, values(e.report)))
        .collect();
    let marks = column_maxima(&rows, decimals, scope);
    let name_w = ordered
        .iter()
        .map(|e| e.name.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5)
        + 2;
    let col_w = headers
        .iter()
        .map(|h| h.len())
        .chain(std::iter::once(decimals + 4))
        .max()
        .unwrap_or(8)
        + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Model");
    for h in headers {
        let _ = write!(out, "{h:>col_w$}");
    }
    out.push('\n');
    let rule = "-".repeat(name_w + col_w * headers.len());
    let _ = writeln!(out, "{rule}");
    let mut prev = None;
    for (i, e) in ordered.iter().enumerate() {
        if prev.is_some_and(|g| g != e.group) {
            let _ = writeln!(out, "{rule}");
        }
        prev = Some(e.group);
        let _ = write!(out, "{:<name_w$}", e.name);
        for (c, v) in rows[i].1.iter().enumerate() {
            let marker = if marks[i][c] { MAX_MARKER } else { ' ' };
            let cell = format!("{v:.decimals$}{marker}");
            let _ = write!(out, "{cell:>col_w$}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{rule}");
    out
}

/// Overall metrics table (three decimals) and per-class F1 table (two
/// decimals). GNN rows come first; column maxima carry [`MAX_MARKER`].
pub fn render_tables(entries: &[TableEntry<'_>], scope: MaxScope) -> RenderedTables {
    let overall_headers: Vec<String> = ["Accuracy", "Precision", "Recall", "F1 Score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let overall = render(
        entries,
        &overall_headers,
        |r| vec![r.accuracy, r.precision, r.recall, r.f1],
        3,
        scope,
    );
    let class_headers: Vec<String> = CancerType::ALL
        .iter()
        .map(|c| c.display_name().to_string())
        .collect();
    let per_class = render(
        entries,
        &class_headers,
        |r| r.per_class_f1.clone(),
        2,
        scope,
    );
    RenderedTables { overall, per_class }
}
