use mfamd::mcmc::Snapshot;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarRhat {
    pub parameter: String,
    pub split_rhat: f64,
}

/// Split-R̂ of one scalar: each chain is halved (a trailing odd draw is
/// dropped) and the halves are compared as separate sequences. NaN when
/// fewer than two draws per half exist.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let seqs: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let n = half as f64;
    let m = seqs.len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let pooled = (n - 1.0) / n * within + between / n;
    (pooled / within).sqrt()
}

fn scalars(s: &Snapshot<f64>) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (g, p) in s.pi.iter().enumerate() {
        out.push((format!("pi[{}]", g + 1), *p));
    }
    for (g, l) in s.loadings.iter().enumerate() {
        for ((d, c), v) in l.indexed_iter() {
            let name = if c == 0 {
                format!("mean[{}][{}]", g + 1, d + 1)
            } else {
                format!("loading[{}][{}][{}]", g + 1, d + 1, c)
            };
            out.push((name, *v));
        }
    }
    for (j, cuts) in s.cuts.iter().enumerate() {
        for (k, v) in cuts.iter().enumerate().skip(1) {
            out.push((format!("cut[{}][{}]", j + 1, k + 1), *v));
        }
    }
    out
}

/// Split-R̂ for every scalar parameter across label-matched, aligned chains.
pub fn parameter_rhats(chains: &[&[Snapshot<f64>]]) -> Vec<ScalarRhat> {
    let Some(first) = chains.iter().find_map(|c| c.first()) else {
        return Vec::new();
    };
    let names: Vec<String> = scalars(first).into_iter().map(|(n, _)| n).collect();
    let mut series: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); chains.len()]; names.len()];
    for (c, snaps) in chains.iter().enumerate() {
        for s in snaps.iter() {
            for (k, (_, v)) in scalars(s).into_iter().enumerate() {
                series[k][c].push(v);
            }
        }
    }
    names
        .into_iter()
        .zip(series)
        .map(|(parameter, per_chain)| ScalarRhat { parameter, split_rhat: split_rhat(&per_chain) })
        .collect()
}
