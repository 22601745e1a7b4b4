//! Report emission: CSV/JSON tables comparing engine runs, plus a static
//! SVG bar chart.

use super::runner::{EngineKind, RunMetrics};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// One labeled configuration's paired results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub sva_time: f64,
    pub optsva_time: f64,
    pub sva_throughput: f64,
    pub optsva_throughput: f64,
    /// Relative reduction of execution time, percent.
    pub gain_percent: f64,
}

/// Pairs labeled metrics by configuration label and computes gains. Entries
/// lacking one of the engines are dropped. Times prefer the logical
/// makespan when present, wall-clock otherwise.
pub fn comparison(rows: &[(String, RunMetrics)]) -> Vec<ComparisonRow> {
    let mut by_label: BTreeMap<&str, BTreeMap<EngineKind, Vec<&RunMetrics>>> = BTreeMap::new();
    for (label, m) in rows {
        by_label
            .entry(label.as_str())
            .or_default()
            .entry(m.engine)
            .or_default()
            .push(m);
    }
    let mut out = Vec::new();
    for (label, engines) in by_label {
        let (Some(sva), Some(opt)) = (
            engines.get(&EngineKind::Sva),
            engines.get(&EngineKind::Optsva),
        ) else {
            continue;
        };
        let time = |ms: &[&RunMetrics]| -> f64 {
            let total: f64 = ms
                .iter()
                .map(|m| m.makespan.map(|t| t as f64).unwrap_or(m.wall_micros as f64))
                .sum();
            total / ms.len() as f64
        };
        let tput = |ms: &[&RunMetrics]| -> f64 {
            ms.iter().map(|m| m.throughput_ops_per_sec).sum::<f64>() / ms.len() as f64
        };
        let sva_time = time(sva);
        let optsva_time = time(opt);
        out.push(ComparisonRow {
            label: label.to_string(),
            sva_time,
            optsva_time,
            sva_throughput: tput(sva),
            optsva_throughput: tput(opt),
            gain_percent: if sva_time > 0.0 {
                (sva_time - optsva_time) / sva_time * 100.0
            } else {
                0.0
            },
        });
    }
    out
}

pub fn write_csv<W: Write>(mut w: W, rows: &[ComparisonRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "label,sva_time,optsva_time,sva_throughput,optsva_throughput,gain_percent"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{:.1},{:.1},{:.2},{:.2},{:.1}",
            r.label, r.sva_time, r.optsva_time, r.sva_throughput, r.optsva_throughput, r.gain_percent
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(w: W, rows: &[ComparisonRow]) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, rows)
}

/// Renders a paired-bars chart of execution times per configuration.
pub fn write_svg<W: Write>(mut w: W, rows: &[ComparisonRow]) -> std::io::Result<()> {
    let width = 900.0;
    let height = 420.0;
    let margin = 60.0;
    let max_time = rows
        .iter()
        .map(|r| r.sva_time.max(r.optsva_time))
        .fold(1.0_f64, f64::max);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )?;
    writeln!(
        w,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16">Execution time per configuration (lower is better)</text>"#,
        margin
    )?;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let group_w = plot_w / rows.len().max(1) as f64;
    let bar_w = (group_w * 0.35).min(40.0);
    for (i, r) in rows.iter().enumerate() {
        let x0 = margin + i as f64 * group_w + group_w * 0.15;
        for (off, time, color) in [
            (0.0, r.sva_time, "#888888"),
            (bar_w + 4.0, r.optsva_time, "#2b6cb0"),
        ] {
            let h = plot_h * time / max_time;
            let y = margin + plot_h - h;
            writeln!(
                w,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                x0 + off,
                y,
                bar_w,
                h,
                color
            )?;
        }
        writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" transform="rotate(30 {:.1} {:.1})">{}</text>"#,
            x0,
            height - margin + 14.0,
            x0,
            height - margin + 14.0,
            r.label
        )?;
        writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10">{:.0}%</text>"#,
            x0,
            margin + plot_h - plot_h * r.sva_time.max(r.optsva_time) / max_time - 4.0,
            r.gain_percent
        )?;
    }
    writeln!(
        w,
        r##"<rect x="{0}" y="36" width="12" height="12" fill="#888888"/><text x="{1}" y="46" font-family="sans-serif" font-size="12">baseline</text>"##,
        width - 220.0,
        width - 202.0
    )?;
    writeln!(
        w,
        r##"<rect x="{0}" y="54" width="12" height="12" fill="#2b6cb0"/><text x="{1}" y="64" font-family="sans-serif" font-size="12">optimized</text>"##,
        width - 220.0,
        width - 202.0
    )?;
    writeln!(w, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(engine: EngineKind, makespan: u64) -> RunMetrics {
        RunMetrics {
            engine,
            threads: 2,
            txns: 4,
            ops: 20,
            wall_micros: 1000,
            makespan: Some(makespan),
            throughput_ops_per_sec: 100.0,
            forced_aborts: 0,
            manual_aborts: 0,
        }
    }

    #[test]
    fn two_runs_become_one_comparison_row() {
        let rows = vec![
            ("cfg".to_string(), metrics(EngineKind::Sva, 200)),
            ("cfg".to_string(), metrics(EngineKind::Optsva, 100)),
        ];
        let cmp = comparison(&rows);
        assert_eq!(cmp.len(), 1);
        assert!((cmp[0].gain_percent - 50.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_gives_empty_report() {
        let cmp = comparison(&[]);
        assert!(cmp.is_empty());
        let mut csv = Vec::new();
        write_csv(&mut csv, &cmp).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("label,"));
    }
}
