use std::collections::BTreeMap;
use std::io::{self, Write};

use super::{DseError, MetricRow};

/// Min-max normalized averages of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config_id: String,
    pub perf: Option<f64>,
    pub energy_eff: Option<f64>,
    pub area_eff: Option<f64>,
}

fn config_order(rows: &[MetricRow]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for r in rows {
        if !ids.contains(&r.config_id) {
            ids.push(r.config_id.clone());
        }
    }
    ids
}

/// Per-config means of a metric normalized to [0, 1] within each
/// (benchmark, variant) group. A group whose values are all equal
/// contributes 0. Configs with no value in any group get `None`.
fn normalized(rows: &[MetricRow], ids: &[String], get: fn(&MetricRow) -> Option<f64>) -> Vec<Option<f64>> {
    let mut groups: BTreeMap<_, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        if let (Some(v), Some(c)) = (get(r), ids.iter().position(|id| *id == r.config_id)) {
            groups.entry((r.benchmark, r.variant)).or_default().push((c, v));
        }
    }
    let mut sum = vec![0.0; ids.len()];
    let mut n = vec![0usize; ids.len()];
    for vals in groups.values() {
        let lo = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let hi = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        for &(c, v) in vals {
            sum[c] += if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            n[c] += 1;
        }
    }
    sum.iter().zip(&n).map(|(&s, &k)| (k > 0).then(|| s / k as f64)).collect()
}

/// One row per configuration, in order of first appearance.
pub fn normalize_summary(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let ids = config_order(rows);
    let perf = normalized(rows, &ids, |r| r.perf_gflops);
    let energy = normalized(rows, &ids, |r| r.energy_eff);
    let area = normalized(rows, &ids, |r| r.area_eff);
    ids.into_iter()
        .enumerate()
        .map(|(i, config_id)| SummaryRow { config_id, perf: perf[i], energy_eff: energy[i], area_eff: area[i] })
        .collect()
}

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub const RESULT_HEADER: [&str; 17] = [
    "benchmark",
    "variant",
    "config_id",
    "cycles",
    "flops",
    "active",
    "tcdm_contention",
    "l2_stall",
    "fpu_stall",
    "fpu_contention",
    "fpu_wb_stall",
    "icache_miss",
    "perf_gflops",
    "energy_eff_gflops_per_w",
    "area_eff_gflops_per_mm2",
    "provenance",
    "status",
];

/// The result matrix, one row per cell. With `summary`, one `NAVG` row per
/// configuration follows, carrying the normalized averages in the metric
/// columns.
pub fn write_csv<W: Write>(out: W, rows: &[MetricRow], summary: bool) -> Result<(), DseError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        let c = &r.counters;
        w.write_record([
            r.benchmark.to_string(),
            r.variant.to_string(),
            r.config_id.clone(),
            r.cycles.to_string(),
            r.flops.to_string(),
            c.active.to_string(),
            c.tcdm_contention.to_string(),
            c.l2_stall.to_string(),
            c.fpu_stall.to_string(),
            c.fpu_contention.to_string(),
            c.fpu_wb_stall.to_string(),
            c.icache_miss.to_string(),
            fixed(r.perf_gflops),
            fixed(r.energy_eff),
            fixed(r.area_eff),
            r.provenance.map_or_else(String::new, |p| p.to_string()),
            r.status.clone(),
        ])?;
    }
    for s in if summary { normalize_summary(rows) } else { Vec::new() } {
        let mut rec = vec![String::new(); RESULT_HEADER.len()];
        rec[0] = "NAVG".into();
        rec[2] = s.config_id;
        rec[12] = fixed(s.perf);
        rec[13] = fixed(s.energy_eff);
        rec[14] = fixed(s.area_eff);
        rec[16] = "summary".into();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn markdown_table<W: Write>(
    out: &mut W,
    title: &str,
    rows: &[MetricRow],
    ids: &[String],
    get: fn(&MetricRow) -> Option<f64>,
    navg: &[Option<f64>],
) -> io::Result<()> {
    writeln!(out, "### {title}\n")?;
    writeln!(out, "| benchmark | {} |", ids.join(" | "))?;
    writeln!(out, "|---|{}", "---:|".repeat(ids.len()))?;
    let mut groups: BTreeMap<_, Vec<Option<f64>>> = BTreeMap::new();
    for r in rows {
        let cells = groups.entry((r.benchmark, r.variant)).or_insert_with(|| vec![None; ids.len()]);
        if let Some(c) = ids.iter().position(|id| *id == r.config_id) {
            cells[c] = get(r);
        }
    }
    let line = |label: String, cells: &[Option<f64>], digits: usize| {
        let best = cells.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let body: Vec<String> = cells
            .iter()
            .map(|v| match v {
                Some(v) if *v == best => format!("**{v:.digits$}**"),
                Some(v) => format!("{v:.digits$}"),
                None => "-".to_string(),
            })
            .collect();
        format!("| {label} | {} |", body.join(" | "))
    };
    for ((b, v), cells) in &groups {
        writeln!(out, "{}", line(format!("{b} {v}"), cells, 3))?;
    }
    writeln!(out, "{}\n", line("NAVG".to_string(), navg, 2))
}

/// One table per metric with configurations as columns. The best value
/// of every row is bold; the last row holds the normalized averages.
pub fn write_markdown<W: Write>(mut out: W, rows: &[MetricRow]) -> Result<(), DseError> {
    let ids = config_order(rows);
    let summary = normalize_summary(rows);
    let tables: [(&str, fn(&MetricRow) -> Option<f64>, fn(&super::SummaryRow) -> Option<f64>); 3] = [
        ("Performance [Gflop/s]", |r| r.perf_gflops, |s| s.perf),
        ("Energy efficiency [Gflop/s/W]", |r| r.energy_eff, |s| s.energy_eff),
        ("Area efficiency [Gflop/s/mm2]", |r| r.area_eff, |s| s.area_eff),
    ];
    for (title, get, nav) in tables {
        let navg: Vec<_> = summary.iter().map(nav).collect();
        markdown_table(&mut out, title, rows, &ids, get, &navg)?;
    }
    writeln!(out, "### Status\n")?;
    writeln!(out, "| benchmark | config | cycles | status |\n|---|---|---:|---|")?;
    for r in rows.iter().filter(|r| r.status != "ok") {
        writeln!(out, "| {} {} | {} | {} | {} |", r.benchmark, r.variant, r.config_id, r.cycles, r.status)?;
    }
    Ok(())
}
