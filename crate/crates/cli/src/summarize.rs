use std::fmt::Write;
use std::path::Path;

use mfamd::diagnostics::{hellinger_profile, modal_response_table};
use mfamd::postprocess::summarize;

use crate::diagnose::run_profiles;
use crate::invalid;
use crate::rundir::{LoadedRun, REPORT};

/// Plain-text digest of a finished run.
pub fn cmd_summarize(dir: &Path) -> anyhow::Result<String> {
    if !dir.join(REPORT).exists() {
        return Err(invalid(anyhow::anyhow!("missing {} in {}", REPORT, dir.display())));
    }
    let run = LoadedRun::open(dir)?;
    let report = summarize(&run.trace);
    let g = run.trace.n_groups;
    let n = run.responses.n_rows();
    let mut s = String::new();
    writeln!(s, "run: {}", dir.display())?;
    writeln!(
        s,
        "clusters: {g}, traits: {}, households: {n}, snapshots: {}",
        run.trace.n_traits, report.n_snapshots
    )?;
    writeln!(s, "fingerprint: {}", run.manifest.fingerprint)?;
    for (k, size) in report.cluster_sizes.iter().enumerate() {
        writeln!(
            s,
            "cluster {}: {size} households ({:.1}%), weight {:.3}",
            k + 1,
            100.0 * *size as f64 / n as f64,
            report.pi_mean.get(k).copied().unwrap_or(f64::NAN)
        )?;
    }
    let uncertain = report.uncertainties.iter().filter(|&&u| u > 0.2).count();
    writeln!(s, "households with uncertainty above 0.2: {uncertain}")?;

    let profiles = run_profiles(&run);
    let rows = modal_response_table(&profiles, &run.schema);
    if rows.is_empty() {
        writeln!(s, "no modal differences between clusters")?;
    } else {
        writeln!(s, "modal responses where clusters differ:")?;
        let width = rows.iter().map(|r| r.item.len()).max().unwrap_or(4).max(4);
        for row in &rows {
            let cells: Vec<String> = row
                .modes
                .iter()
                .map(|m| match m {
                    Some(m) if m.tie => format!("{}*", m.label),
                    Some(m) => m.label.clone(),
                    None => "-".into(),
                })
                .collect();
            writeln!(s, "  {:width$}  {}", row.item, cells.join(" | "))?;
        }
        if rows.iter().any(|r| r.modes.iter().flatten().any(|m| m.tie)) {
            writeln!(s, "  (* tie broken by lowest level)")?;
        }
    }
    for a in 0..g {
        for b in a + 1..g {
            let cmp = hellinger_profile(&profiles, a, b)?;
            writeln!(s, "Hellinger total, clusters {} and {}: {:.3}", a + 1, b + 1, cmp.total)?;
        }
    }
    Ok(s)
}
