//! Plain-text tables for the human-facing output.

use std::fmt::Write;

use fedreorder::workload::TimingRow;
use fedreorder::{PlanReport, Strategy};
use serde_json::{json, Value};

/// Published exhaustive planning times (ms) for 5 to 12 services.
const PUBLISHED_MS: [(usize, f64); 8] = [
    (5, 8.0),
    (6, 22.0),
    (7, 89.0),
    (8, 290.0),
    (9, 2_400.0),
    (10, 25_000.0),
    (11, 360_000.0),
    (12, 4_020_000.0),
];

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn timing_json(rows: &[TimingRow]) -> Value {
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let exhaustive = row.exhaustive.map(ms);
        let previous = i.checked_sub(1).and_then(|j| rows[j].exhaustive).map(ms);
        let ratio = match (exhaustive, previous) {
            (Some(now), Some(before)) if before > 0.0 => Some(now / before),
            _ => None,
        };
        let published = PUBLISHED_MS
            .iter()
            .find(|(n, _)| *n == row.services)
            .map(|(_, t)| *t);
        out.push(json!({
            "services": row.services,
            "exhaustive_ms": exhaustive,
            "greedy_ms": ms(row.greedy),
            "exhaustive_growth": ratio,
            "published_exhaustive_ms": published,
        }));
    }
    Value::Array(out)
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.push('\n');
    };
    line(
        &mut out,
        &header.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    );
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for row in rows {
        line(&mut out, row);
    }
    out
}

fn num(v: &Value, digits: usize) -> String {
    v.as_f64()
        .map_or_else(|| "-".to_owned(), |x| format!("{x:.digits$}"))
}

fn order(v: &Value) -> String {
    v.as_array()
        .map(|segments| {
            segments
                .iter()
                .map(|s| {
                    let ids: Vec<String> = s
                        .as_array()
                        .into_iter()
                        .flatten()
                        .map(|i| i.to_string())
                        .collect();
                    format!("({})", ids.join(" "))
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default()
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Exhaustive => "exhaustive",
        Strategy::Greedy => "greedy",
        Strategy::Sort => "sort",
    }
}

pub fn plan_summary(report: &PlanReport) -> String {
    let order: Vec<String> = report
        .chosen_order
        .iter()
        .map(|s| format!("{s:?}"))
        .collect();
    let mut out = format!(
        "{} / {}: order {} cost {:.4}\n",
        report.method,
        strategy_name(report.strategy),
        order.join(" "),
        report.chosen_cost
    );
    for c in &report.constraints_applied {
        let _ = writeln!(out, "  {c}");
    }
    out
}

pub fn explain(report: &PlanReport) -> String {
    let mut out = plan_summary(report);
    out.push('\n');
    let rows: Vec<Vec<String>> = report
        .per_service_costs
        .iter()
        .map(|c| {
            vec![
                c.original_index.to_string(),
                c.segment.to_string(),
                format!("{:.4}", c.cost),
                format!("{:.4}", c.cost_in_plan),
                c.tie_break.to_string(),
            ]
        })
        .collect();
    out.push_str(&table(
        &["service", "segment", "cost", "in plan", "tie-break"],
        &rows,
    ));
    if let Some(perms) = &report.permutation_table {
        out.push('\n');
        let rows: Vec<Vec<String>> = perms
            .iter()
            .map(|p| {
                vec![
                    format!("{:?}", p.order),
                    p.segment.to_string(),
                    format!("{:.4}", p.cost),
                ]
            })
            .collect();
        out.push_str(&table(&["ordering", "segment", "cost"], &rows));
    }
    out
}

pub fn simulate(value: &Value) -> String {
    let mut rows = Vec::new();
    for key in ["input", "planner", "optimal"] {
        let v = &value[key];
        if v.is_null() {
            continue;
        }
        if v["completed"] == json!(false) {
            rows.push(vec![
                key.to_owned(),
                order(&v["order"]),
                "over budget".into(),
                "-".into(),
                "-".into(),
            ]);
            continue;
        }
        let sizes: Vec<String> = v["intermediate_sizes"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|s| s.to_string())
            .collect();
        rows.push(vec![
            key.to_owned(),
            order(&v["order"]),
            v["total_calls"].to_string(),
            sizes.join(","),
            v["solutions"].to_string(),
        ]);
    }
    let mut out = table(
        &["order", "services", "calls", "intermediate", "solutions"],
        &rows,
    );
    let _ = writeln!(
        out,
        "\nplanner matches optimal: {}",
        value["planner_matches_optimal"]
    );
    out
}

pub fn bench(value: &Value) -> String {
    let mut out = format!("seed {}\n", value["seed"]);
    if let Some(timing) = value["timing"].as_array() {
        out.push_str("\nplanning time (best of reps)\n");
        let rows: Vec<Vec<String>> = timing
            .iter()
            .map(|r| {
                vec![
                    r["services"].to_string(),
                    num(&r["exhaustive_ms"], 3),
                    num(&r["exhaustive_growth"], 1),
                    num(&r["greedy_ms"], 3),
                    num(&r["published_exhaustive_ms"], 0),
                ]
            })
            .collect();
        out.push_str(&table(
            &[
                "services",
                "exhaustive ms",
                "growth",
                "greedy ms",
                "published ms",
            ],
            &rows,
        ));
    }
    if let Some(methods) = value["accuracy"]["methods"].as_array() {
        let _ = writeln!(
            out,
            "\naccuracy over {} instances",
            value["accuracy"]["instances"]
        );
        let rows: Vec<Vec<String>> = methods
            .iter()
            .map(|m| {
                vec![
                    m["method"].as_str().unwrap_or("?").to_owned(),
                    m["strategy"].as_str().unwrap_or("?").to_owned(),
                    format!("{}/{}", m["hits"], m["instances"]),
                    num(&m["hit_rate"], 3),
                    num(&m["greedy_agreement_rate"], 3),
                ]
            })
            .collect();
        out.push_str(&table(
            &["method", "strategy", "optimal", "hit rate", "greedy agrees"],
            &rows,
        ));
    }
    out
}
