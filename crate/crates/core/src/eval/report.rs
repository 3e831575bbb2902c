//! Combined evaluation report: JSON and aligned text tables (percent, one decimal).

use serde::{Deserialize, Serialize};

use super::{FewShotReport, RetrievalReport, ZeroShotReport};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    /// Effective run configuration.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrieval: Vec<RetrievalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<ZeroShotReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub few_shot: Vec<FewShotReport>,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.retrieval.is_empty() {
            let rows: Vec<Vec<String>> = self
                .retrieval
                .iter()
                .map(|r| {
                    vec![
                        r.direction.label().to_string(),
                        pct(r.r1),
                        pct(r.r5),
                        pct(r.r10),
                    ]
                })
                .collect();
            out.push_str(&table(&["Retrieval", "R@1", "R@5", "R@10"], &rows));
        }
        if let Some(z) = &self.zero_shot {
            if !out.is_empty() {
                out.push('\n');
            }
            let rows = vec![vec![
                format!("{} classes", z.classes),
                pct(z.top1),
                pct(z.top3),
                pct(z.top5),
            ]];
            out.push_str(&table(&["Zero-shot", "Top1", "Top3", "Top5"], &rows));
        }
        if !self.few_shot.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            let rows: Vec<Vec<String>> = self
                .few_shot
                .iter()
                .map(|f| {
                    vec![
                        format!("{}-way {}-shot", f.n_way, f.m_shot),
                        format!("{} ± {}", pct(f.mean), pct(f.std)),
                        f.accuracies.len().to_string(),
                    ]
                })
                .collect();
            out.push_str(&table(&["Few-shot", "Accuracy", "Runs"], &rows));
        }
        out
    }
}
