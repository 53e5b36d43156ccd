use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ExperimentReport;
use crate::pipelines::Family;

/// One point of a sweep curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sweep: String,
    pub x: String,
    pub family: Family,
    pub model: String,
    pub r2: f64,
    pub mean_fold_r2: Option<f64>,
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn push_aligned(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}

/// Human-readable aligned table of model metrics and pairwise tests.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "outcome {}  instances {}  folds {}  seed {}",
        report.outcome,
        report.instance_ids.len(),
        report.n_folds,
        report.seed
    );
    out.push('\n');
    let mut rows = vec![vec![
        "model".to_string(),
        "family".to_string(),
        "strategy".to_string(),
        "R2".to_string(),
        "mean fold R2".to_string(),
        "Pearson r".to_string(),
    ]];
    for m in &report.models {
        rows.push(vec![
            m.name.clone(),
            m.family.map_or("-".into(), |f| f.to_string()),
            m.fs_strategy.map_or("-".into(), |s| s.to_string()),
            format!("{:.4}", m.r2),
            fmt_opt(m.mean_fold_r2, 4),
            fmt_opt(m.pearson_r, 4),
        ]);
    }
    push_aligned(&mut out, &rows);

    if !report.comparisons.is_empty() {
        out.push('\n');
        let mut rows = vec![vec![
            "model a".to_string(),
            "model b".to_string(),
            "MAE a".to_string(),
            "MAE b".to_string(),
            "t".to_string(),
            "p".to_string(),
        ]];
        for c in &report.comparisons {
            rows.push(vec![
                c.a.clone(),
                c.b.clone(),
                format!("{:.4}", c.mean_abs_error_a),
                format!("{:.4}", c.mean_abs_error_b),
                fmt_opt(c.t, 3),
                c.p.map_or("-".into(), |p| format!("{p:.3e}")),
            ]);
        }
        push_aligned(&mut out, &rows);
    }
    out
}

/// Sweep curves as CSV with a header row.
pub fn render_curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("sweep,x,family,model,r2,mean_fold_r2\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.sweep,
            p.x,
            p.family,
            p.model,
            p.r2,
            p.mean_fold_r2.map_or(String::new(), |v| v.to_string())
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let mut out = String::new();
        push_aligned(
            &mut out,
            &[vec!["a".into(), "1".into()], vec!["long".into(), "22".into()]],
        );
        assert_eq!(out, "a      1\nlong  22\n");
    }

    #[test]
    fn curves_csv() {
        let p = CurvePoint {
            sweep: "kbest".into(),
            x: "100".into(),
            family: Family::Rfa,
            model: "rfa@100".into(),
            r2: 0.5,
            mean_fold_r2: None,
        };
        assert_eq!(
            render_curves_csv(&[p]),
            "sweep,x,family,model,r2,mean_fold_r2\nkbest,100,rfa,rfa@100,0.5,\n"
        );
    }
}
