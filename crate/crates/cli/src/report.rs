//! `report`: summary table and figures from the metric tables of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::eval::{read_csv, write_csv, ApaRow, FidRow, SsimRow, APA_CSV, FID_CSV, FID_FIGURE, SSIM_CSV, SSIM_FIGURE};
use crate::{ensure_dir, plot, Status};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const APA_TABLE: &str = "apa_table.md";
pub const REPORT_MD: &str = "report.md";
/// Group name for statistics over every SSIM row.
pub const ALL_GROUP: &str = "all";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub group: String,
    pub value: String,
}

fn row(metric: &str, group: &str, value: String) -> SummaryRow {
    SummaryRow {
        metric: metric.into(),
        group: group.into(),
        value,
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ssim_stats(group: &str, values: &[f64], out: &mut Vec<SummaryRow>) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(row("ssim_count", group, values.len().to_string()));
    out.push(row("ssim_mean", group, fmt6(mean)));
    out.push(row("ssim_median", group, fmt6(median(values))));
    out.push(row("ssim_min", group, fmt6(min)));
}

pub fn summarize(ssim: &[SsimRow], fid: &[FidRow], apa: &[ApaRow]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    if !ssim.is_empty() {
        let all: Vec<f64> = ssim.iter().map(|r| r.ssim).collect();
        ssim_stats(ALL_GROUP, &all, &mut rows);
        let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in ssim {
            groups.entry(&r.group).or_default().push(r.ssim);
        }
        for (g, v) in groups {
            ssim_stats(g, &v, &mut rows);
        }
    }
    for r in fid {
        rows.push(row("fid", &r.group, fmt6(r.fid)));
    }
    for r in apa {
        rows.push(row("apa_percent", &r.level, fmt6(r.apa_percent)));
        rows.push(row("apa_samples", &r.level, r.samples.to_string()));
    }
    rows
}

pub fn apa_markdown(apa: &[ApaRow]) -> String {
    let mut s = String::from("| clutter level | APA (%) | samples |\n|---|---:|---:|\n");
    for r in apa {
        let _ = writeln!(s, "| {} | {:.2} | {} |", r.level, r.apa_percent, r.samples);
    }
    s
}

fn read_optional<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<Vec<T>>> {
    if path.is_file() {
        read_csv(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn run(run_dir: &Path, out: &Path) -> Result<Status> {
    if !run_dir.is_dir() {
        bail!("run directory {} does not exist", run_dir.display());
    }
    let ssim: Option<Vec<SsimRow>> = read_optional(&run_dir.join(SSIM_CSV))?;
    let fid: Option<Vec<FidRow>> = read_optional(&run_dir.join(FID_CSV))?;
    let apa: Option<Vec<ApaRow>> = read_optional(&run_dir.join(APA_CSV))?;
    if ssim.is_none() && fid.is_none() && apa.is_none() {
        bail!(
            "run directory {} has no metric tables ({SSIM_CSV}, {FID_CSV}, {APA_CSV}); run `sceneaug eval` first",
            run_dir.display()
        );
    }
    ensure_dir(out)?;
    let (ssim, fid, apa) = (ssim.unwrap_or_default(), fid.unwrap_or_default(), apa.unwrap_or_default());
    let summary = summarize(&ssim, &fid, &apa);
    write_csv(&out.join(SUMMARY_CSV), &summary)?;

    let mut md = String::from("# Run report\n\n");
    if !ssim.is_empty() {
        let values: Vec<f64> = ssim.iter().map(|r| r.ssim).collect();
        plot::ssim_histogram(&out.join(SSIM_FIGURE), &values)?;
        let _ = writeln!(md, "## SSIM\n\n![SSIM distribution]({SSIM_FIGURE})\n");
        md.push_str("| group | n | mean | median | min |\n|---|---:|---:|---:|---:|\n");
        let stat = |metric: &str, group: &str| {
            summary
                .iter()
                .find(|r| r.metric == metric && r.group == group)
                .map(|r| r.value.clone())
                .unwrap_or_default()
        };
        let mut groups: Vec<&str> = vec![ALL_GROUP];
        for r in &ssim {
            if !groups.contains(&r.group.as_str()) {
                groups.push(&r.group);
            }
        }
        groups[1..].sort_unstable();
        for g in groups {
            let _ = writeln!(
                md,
                "| {g} | {} | {} | {} | {} |",
                stat("ssim_count", g),
                stat("ssim_mean", g),
                stat("ssim_median", g),
                stat("ssim_min", g)
            );
        }
        md.push('\n');
    }
    if !fid.is_empty() {
        let bars: Vec<(String, f64)> = fid.iter().map(|r| (r.group.clone(), r.fid)).collect();
        plot::bar_chart(&out.join(FID_FIGURE), "FID by operation", "FID", &bars)?;
        let _ = writeln!(md, "## FID\n\n![FID by operation]({FID_FIGURE})\n");
        md.push_str("| group | FID | reference | candidate |\n|---|---:|---:|---:|\n");
        for r in &fid {
            let _ = writeln!(
                md,
                "| {} | {:.4} | {} | {} |",
                r.group, r.fid, r.reference_count, r.candidate_count
            );
        }
        md.push('\n');
    }
    if !apa.is_empty() {
        let table = apa_markdown(&apa);
        std::fs::write(out.join(APA_TABLE), &table)
            .with_context(|| format!("writing {}", out.join(APA_TABLE).display()))?;
        let _ = writeln!(md, "## APA by clutter level\n\n{table}");
    }
    std::fs::write(out.join(REPORT_MD), md)
        .with_context(|| format!("writing {}", out.join(REPORT_MD).display()))?;
    println!("report written to {}", out.display());
    Ok(Status::Success)
}
