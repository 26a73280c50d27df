//! Result files: the versioned results table, per-episode JSON lines, per-step quality
//! traces and the markdown summary, plus a recount check of the table against the records.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use vnb_planning::bench::{aggregate, RegimeMetrics};
use vnb_planning::episode::EpisodeRecord;

use crate::error::CliError;

pub const RESULTS_SCHEMA: &str = "vnb-results/1";

pub const RESULTS_COLUMNS: [&str; 13] = ["schema", "method", "regime", "episodes", "SR", "Robust", "PertSurv", "eps", "Quality", "P_bel", "P_emp", "dP", "Time"];

pub const RESULTS_FILE: &str = "results.csv";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const TRACES_FILE: &str = "eps_traces.csv";
pub const SUMMARY_FILE: &str = "summary.md";

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// One formatted results row; rates are percentages, times are seconds per episode.
pub fn results_row(m: &RegimeMetrics) -> Vec<String> {
    vec![
        RESULTS_SCHEMA.to_string(),
        m.method.clone(),
        m.regime.clone(),
        m.episodes.to_string(),
        pct(m.success_rate),
        pct(m.robust_rate),
        pct(m.pert_survival),
        format!("{:.4}", m.mean_eps),
        format!("{:.2}", m.quality),
        format!("{:.2}", m.p_fail_bel),
        format!("{:.2}", m.p_fail_emp),
        format!("{:.2}", m.abs_dp),
        format!("{:.2}", m.mean_time_s),
    ]
}

pub fn results_csv(metrics: &[RegimeMetrics]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_COLUMNS).map_err(runtime)?;
    for m in metrics {
        w.write_record(results_row(m)).map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn traces_csv(records: &[EpisodeRecord]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "regime", "object", "beta", "episode", "t", "eps", "contacts", "p_fail_bel"]).map_err(runtime)?;
    for r in records {
        for s in &r.steps {
            w.write_record([
                r.method.clone(),
                r.regime.clone(),
                r.object.clone(),
                r.beta.to_string(),
                r.episode.to_string(),
                s.t.to_string(),
                format!("{:.6}", s.eps),
                s.contacts.to_string(),
                format!("{:.4}", s.p_fail_bel),
            ])
            .map_err(runtime)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
}

pub fn episodes_jsonl(records: &[EpisodeRecord]) -> Result<String, CliError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line().map_err(runtime)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(runtime)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::Runtime(format!("{} line {}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

pub fn summary_markdown(metrics: &[RegimeMetrics], title: &str) -> String {
    let mut s = format!("# {title}\n\n");
    let _ = writeln!(s, "| Method | Regime | Episodes | SR (%) | Robust (%) | PertSurv (%) | ε | Quality | P̂bel | P̂emp | abs ΔP̂ | Time (s) |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|");
    for m in metrics {
        let r = results_row(m);
        let _ = writeln!(s, "| {} |", r[1..].join(" | "));
    }
    let mut regimes: Vec<&str> = Vec::new();
    for m in metrics {
        if !regimes.contains(&m.regime.as_str()) {
            regimes.push(&m.regime);
        }
    }
    s.push_str("\n## Regime comparison\n\n");
    for regime in regimes {
        let rows: Vec<&RegimeMetrics> = metrics.iter().filter(|m| m.regime == regime).collect();
        let best_robust = rows.iter().max_by(|a, b| a.robust_rate.total_cmp(&b.robust_rate));
        let best_cal = rows.iter().min_by(|a, b| a.abs_dp.total_cmp(&b.abs_dp));
        if let (Some(r), Some(c)) = (best_robust, best_cal) {
            let _ = writeln!(
                s,
                "- {regime}: highest robust success {} ({}%), smallest calibration gap {} ({:.2}).",
                r.method,
                pct(r.robust_rate),
                c.method,
                c.abs_dp
            );
        }
    }
    s
}

/// Writes every benchmark artifact into `dir`.
pub fn write_outputs(dir: &Path, records: &[EpisodeRecord], title: &str) -> Result<Vec<RegimeMetrics>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let metrics = aggregate(records);
    let write = |name: &str, text: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(text.as_bytes()).map_err(runtime)
    };
    write(RESULTS_FILE, &results_csv(&metrics)?)?;
    write(EPISODES_FILE, &episodes_jsonl(records)?)?;
    write(TRACES_FILE, &traces_csv(records)?)?;
    write(SUMMARY_FILE, &summary_markdown(&metrics, title))?;
    Ok(metrics)
}

/// Recomputes the results table from the episode records in `dir` and compares it with
/// the written table; returns the first differing line on mismatch.
pub fn verify_outputs(dir: &Path) -> Result<(), CliError> {
    let records = read_episodes(&dir.join(EPISODES_FILE))?;
    let expected = results_csv(&aggregate(&records))?;
    let written = std::fs::read_to_string(dir.join(RESULTS_FILE)).map_err(runtime)?;
    if expected == written {
        return Ok(());
    }
    let diff = expected.lines().zip(written.lines()).find(|(a, b)| a != b).map(|(a, b)| format!("recomputed '{a}' but found '{b}'"));
    Err(CliError::Runtime(diff.unwrap_or_else(|| "results table row count differs from episode records".into())))
}
