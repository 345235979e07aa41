//! Success-rate tables (text, CSV) and a bar chart per task family.

use crate::campaign::CampaignResult;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub task: String,
    pub family: String,
    pub episodes: usize,
    pub successes: usize,
    /// `None` when no episodes ran.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAverage {
    pub family: String,
    pub tasks: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub rows: Vec<Row>,
    pub families: Vec<FamilyAverage>,
    pub achieved: usize,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |r| format!("{r:.2}"))
}

pub fn success_table(result: &CampaignResult) -> SuccessTable {
    let rows: Vec<Row> = result
        .tasks
        .iter()
        .map(|t| Row {
            task: t.task.clone(),
            family: t.family.clone().unwrap_or_else(|| "-".into()),
            episodes: t.episodes,
            successes: t.successes,
            rate: (t.episodes > 0).then(|| round2(t.successes as f64 / t.episodes as f64)),
        })
        .collect();
    let mut families: Vec<FamilyAverage> = Vec::new();
    for r in &rows {
        if families.iter().any(|f| f.family == r.family) {
            continue;
        }
        let members: Vec<&Row> = rows.iter().filter(|x| x.family == r.family).collect();
        let rated: Vec<f64> = members.iter().filter_map(|x| x.rate).collect();
        families.push(FamilyAverage {
            family: r.family.clone(),
            tasks: members.len(),
            rate: (!rated.is_empty()).then(|| round2(rated.iter().sum::<f64>() / rated.len() as f64)),
        });
    }
    let achieved = rows.iter().filter(|r| r.rate.is_some_and(|x| x > 0.0)).count();
    SuccessTable { rows, families, achieved }
}

impl SuccessTable {
    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.task.len()).max().unwrap_or(4).max(4);
        let fw = self.rows.iter().map(|r| r.family.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:<fw$}  {:>8}  {:>9}  {:>5}", "task", "family", "episodes", "successes", "rate");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:<fw$}  {:>8}  {:>9}  {:>5}",
                r.task,
                r.family,
                r.episodes,
                r.successes,
                fmt_rate(r.rate)
            );
        }
        s.push('\n');
        for f in &self.families {
            let _ = writeln!(s, "{:<w$}  {:<fw$}  {:>8}  {:>9}  {:>5}", "average", f.family, "", "", fmt_rate(f.rate));
        }
        let _ = writeln!(s, "achieved tasks: {}/{}", self.achieved, self.rows.len());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,family,episodes,successes,rate\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.task, r.family, r.episodes, r.successes, fmt_rate(r.rate));
        }
        s
    }

    /// One bar per task, grouped by family.
    pub fn to_svg(&self) -> String {
        let bar = 18.0;
        let gap = 4.0;
        let left = 220.0;
        let width = 300.0;
        let mut y = 30.0;
        let mut body = String::new();
        for f in &self.families {
            let _ = writeln!(
                body,
                r#"<text x="10" y="{y}" font-weight="bold">{} (avg {})</text>"#,
                xml_escape(&f.family),
                fmt_rate(f.rate)
            );
            y += bar + gap;
            for r in self.rows.iter().filter(|r| r.family == f.family) {
                let len = r.rate.unwrap_or(0.0) * width;
                let _ = writeln!(
                    body,
                    r#"<text x="10" y="{}">{}</text><rect x="{left}" y="{}" width="{len:.1}" height="{bar}" fill="steelblue"/><text x="{}" y="{}">{}</text>"#,
                    y + bar * 0.75,
                    xml_escape(&r.task),
                    y,
                    left + len + 5.0,
                    y + bar * 0.75,
                    fmt_rate(r.rate)
                );
                y += bar + gap;
            }
            y += gap * 2.0;
        }
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n{body}</svg>\n",
            left + width + 60.0,
            y + 10.0
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
