mod common;

use approx::assert_abs_diff_eq;
use mfamd::diagnostics::*;
use mfamd::mcmc::Snapshot;
use mfamd::model::{ClusterParams, Thresholds};
use mfamd::rng::{Phase, StreamKey};
use mfamd::special::norm_cdf;
use mfamd::survey::{ItemKind, ItemSpec, ResponseMatrix, SurveySchema};
use ndarray::{array, Array2};
use proptest::prelude::*;

use common::*;

fn snapshot_of(params: &ClusterParams<f64>, thresholds: &Thresholds<f64>) -> Snapshot<f64> {
    let g = params.n_groups();
    Snapshot {
        iteration: 0,
        pi: params.pi.clone(),
        loadings: params.loadings.clone(),
        cuts: thresholds.cuts.clone(),
        trait_means: vec![vec![0.0; params.n_traits()]; g],
        counts: vec![0; g],
        permutation: (0..g).collect(),
        rotations: None,
    }
}

fn stove_schema() -> SurveySchema {
    let stove = ItemSpec { name: "Stove".into(), kind: ItemKind::Binary, levels: vec!["No".into(), "Yes".into()] };
    SurveySchema::new(vec![stove]).unwrap()
}

fn profile_of(rows: Vec<Vec<Vec<f64>>>) -> ClusterItemProfile {
    ClusterItemProfile {
        sizes: vec![1; rows.len()],
        probs: rows.into_iter().map(|items| items.into_iter().map(Some).collect()).collect(),
    }
}

fn simplex(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

mod hellinger {
    use super::*;

    #[test]
    fn reproduces_the_published_stove_distance() {
        let d = hellinger_item(&[0.005, 0.995], &[0.509, 0.491]).unwrap();
        assert!((d - 0.501).abs() <= 0.001, "{d}");
    }

    #[test]
    fn bounds() {
        assert_eq!(hellinger_item(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_abs_diff_eq!(hellinger_item(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(hellinger_item(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn profile_totals_add_items() {
        // Binary pairs whose distances are 0.3 and 0.4.
        let pair = |h: f64| {
            // H² = 1 − √(p q) − √((1−p)(1−q)) with p = 1 and q = (1 − h²)²
            let q = (1.0 - h * h).powi(2);
            (vec![1.0, 0.0], vec![q, 1.0 - q])
        };
        let (a1, b1) = pair(0.3);
        let (a2, b2) = pair(0.4);
        let prof = profile_of(vec![vec![a1, a2], vec![b1, b2]]);
        let cmp = hellinger_profile(&prof, 0, 1).unwrap();
        assert_abs_diff_eq!(cmp.per_item[0].unwrap(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.per_item[1].unwrap(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.total, 0.7, epsilon = 1e-12);
        let same = hellinger_profile(&prof, 1, 1).unwrap();
        assert_eq!(same.total, 0.0);
    }

    #[test]
    fn asset_sized_total_is_bounded() {
        let schema = asset_schema();
        let (params, thresholds) = asset_params(&schema, 3);
        let (y, latent) = mfamd::model::simulate_dataset(&schema, &params, &thresholds, 600, 5).unwrap();
        let prof = cluster_item_profiles(&y, &latent.alloc, &schema, 3);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let cmp = hellinger_profile(&prof, a, b).unwrap();
            assert_eq!(cmp.per_item.len(), 28);
            assert!((0.0..=28.0).contains(&cmp.total));
        }
    }

    fn simplex_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 4).prop_filter_map("nonzero", |v| {
            (v.iter().sum::<f64>() > 1e-6).then(|| simplex(v))
        })
    }

    proptest! {
        #[test]
        fn is_a_metric(p in simplex_vec(), q in simplex_vec(), r in simplex_vec()) {
            let d = |a: &[f64], b: &[f64]| hellinger_item(a, b).unwrap();
            prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&d(&p, &q)));
            prop_assert!(d(&p, &p) == 0.0);
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
        }
    }
}

mod patterns {
    use super::*;

    fn table(entries: &[(&[u16], usize)]) -> PatternTable {
        PatternTable::from_counts(entries.iter().map(|(p, c)| (p.to_vec(), *c)))
    }

    #[test]
    fn single_pattern_arithmetic() {
        let o = table(&[(&[1, 2], 10)]);
        let p = table(&[(&[1, 2], 5)]);
        assert_abs_diff_eq!(tsspr(&o, &p, 1), 5.0, epsilon = 1e-15);
        assert_eq!(tsspr(&o, &o, 1), 0.0);
    }

    #[test]
    fn missing_replicated_pattern_uses_half_count() {
        let o = table(&[(&[1, 1], 4)]);
        let p = table(&[(&[2, 2], 4)]);
        assert_abs_diff_eq!(tsspr(&o, &p, 1), (4.0 - 0.5f64).powi(2) / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn truncation_takes_the_most_frequent_with_lexicographic_ties() {
        let o = table(&[(&[2, 1], 7), (&[1, 2], 7), (&[1, 1], 9), (&[2, 2], 1)]);
        let top: Vec<Vec<u16>> = o.top(3).into_iter().map(|(p, _)| p.to_vec()).collect();
        assert_eq!(top, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
        assert_eq!(o.at_least(7).len(), 3);
        assert_eq!(o.total(), 24);
        // Only the top two patterns are compared, so [2, 1] never contributes.
        let p = table(&[(&[1, 1], 9), (&[1, 2], 7), (&[2, 1], 1)]);
        assert_eq!(tsspr(&o, &p, 2), 0.0);
        assert!(tsspr(&o, &p, 3) > 0.0);
        assert_eq!(tsspr_min_count(&o, &p, 8), 0.0);
    }

    #[test]
    fn tables_from_responses_count_rows() {
        let schema = small_schema();
        let y = ResponseMatrix::new(array![[1, 2, 3, 1], [1, 2, 3, 1], [2, 2, 1, 3]], &schema).unwrap();
        let t = PatternTable::from_responses(&y);
        assert_eq!(t.count(&[1, 2, 3, 1]), 2);
        assert_eq!(t.n_distinct(), 2);
        assert_eq!(t.total(), 3);
    }

    proptest! {
        #[test]
        fn statistic_is_nonnegative(
            o in prop::collection::vec((prop::collection::vec(1u16..3, 3), 1usize..40), 1..10),
            r in prop::collection::vec((prop::collection::vec(1u16..3, 3), 1usize..40), 0..10),
            t in 1usize..8,
        ) {
            let o = PatternTable::from_counts(o);
            let r = PatternTable::from_counts(r);
            prop_assert!(tsspr(&o, &r, t) >= 0.0);
            prop_assert_eq!(tsspr(&o, &o, t), 0.0);
        }
    }
}

mod uncertainty {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(clustering_uncertainty(&[1.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(clustering_uncertainty(&[1.0 / 3.0; 3]), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(clustering_uncertainty(&[0.7, 0.2, 0.1]), 0.3, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn depends_only_on_the_maximum(raw in prop::collection::vec(0.01f64..1.0, 2..7), seed in any::<u64>()) {
            let p = simplex(raw);
            let u = clustering_uncertainty(&p);
            let max = p.iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(u, 1.0 - max);
            prop_assert!(u <= 1.0 - 1.0 / p.len() as f64 + 1e-12);
            let mut shuffled = p.clone();
            shuffled.rotate_left((seed % p.len() as u64) as usize);
            prop_assert_eq!(clustering_uncertainty(&shuffled), u);
        }
    }
}

mod profiles {
    use super::*;

    #[test]
    fn counts_within_clusters() {
        let schema = SurveySchema::new(vec![item("b", ItemKind::Binary, 2)]).unwrap();
        let y = ResponseMatrix::new(array![[2], [2], [1], [2]], &schema).unwrap();
        let prof = cluster_item_profiles(&y, &[0, 0, 0, 0], &schema, 2);
        assert_eq!(prof.get(0, 0).unwrap(), &[0.25, 0.75]);
        assert!(prof.get(1, 0).is_none());
        assert_eq!(prof.sizes, vec![4, 0]);
    }

    #[test]
    fn single_cluster_profiles_match_analytic_probabilities() {
        let schema = SurveySchema::new(vec![item("b", ItemKind::Binary, 2), item("o", ItemKind::Ordinal, 4)]).unwrap();
        let params = ClusterParams { pi: vec![1.0], loadings: vec![array![[0.4, 0.0], [0.9, 0.0]]] };
        let thresholds = Thresholds { cuts: vec![vec![0.0], vec![0.0, 0.5, 1.5]] };
        let n = 40_000;
        let (y, _) = mfamd::model::simulate_dataset(&schema, &params, &thresholds, n, 12).unwrap();
        let prof = cluster_item_profiles(&y, &vec![0; n], &schema, 1);
        let interval = |lo: f64, hi: f64, m: f64| norm_cdf(hi - m) - norm_cdf(lo - m);
        let inf = f64::INFINITY;
        let want = [
            vec![interval(-inf, 0.0, 0.4), interval(0.0, inf, 0.4)],
            vec![interval(-inf, 0.0, 0.9), interval(0.0, 0.5, 0.9), interval(0.5, 1.5, 0.9), interval(1.5, inf, 0.9)],
        ];
        for (j, w) in want.iter().enumerate() {
            let got = prof.get(0, j).unwrap();
            assert_abs_diff_eq!(got.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for (a, b) in got.iter().zip(w) {
                assert!((a - b).abs() < 4.0 * (b * (1.0 - b) / n as f64).sqrt(), "item {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn stove_modes_differ() {
        let prof = profile_of(vec![vec![vec![0.005, 0.995]], vec![vec![0.509, 0.491]], vec![vec![0.626, 0.374]]]);
        let rows = modal_response_table(&prof, &stove_schema());
        assert_eq!(rows.len(), 1);
        let labels: Vec<&str> = rows[0].modes.iter().map(|m| m.as_ref().unwrap().label.as_str()).collect();
        assert_eq!(labels, ["Yes", "No", "No"]);
        assert!(rows[0].modes.iter().all(|m| !m.as_ref().unwrap().tie));
    }

    #[test]
    fn identical_modes_are_omitted_and_ties_flagged() {
        let same = profile_of(vec![vec![vec![0.3, 0.7]], vec![vec![0.1, 0.9]]]);
        assert!(modal_response_table(&same, &stove_schema()).is_empty());
        let tied = profile_of(vec![vec![vec![0.5, 0.5]], vec![vec![0.1, 0.9]]]);
        let rows = modal_response_table(&tied, &stove_schema());
        let first = rows[0].modes[0].as_ref().unwrap();
        assert_eq!((first.level, first.tie), (1, true));
    }

    proptest! {
        #[test]
        fn table_depends_only_on_argmaxes(
            raw in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 3),
            bump in 0.0f64..0.5,
        ) {
            let schema = SurveySchema::new(vec![item("n", ItemKind::Nominal, 3)]).unwrap();
            let base: Vec<Vec<Vec<f64>>> = raw.iter().map(|r| vec![simplex(r.clone())]).collect();
            // Moves mass onto each row's mode, which keeps every argmax.
            let shifted: Vec<Vec<Vec<f64>>> = base
                .iter()
                .map(|items| {
                    let p = &items[0];
                    let m = (0..3).fold(0, |b, k| if p[k] > p[b] { k } else { b });
                    let mut q = p.clone();
                    q[m] += bump;
                    vec![simplex(q)]
                })
                .collect();
            let a = modal_response_table(&profile_of(base), &schema);
            let b = modal_response_table(&profile_of(shifted), &schema);
            let levels = |rows: &[ModalRow]| -> Vec<Vec<usize>> {
                rows.iter().map(|r| r.modes.iter().map(|m| m.as_ref().unwrap().level).collect()).collect()
            };
            prop_assert_eq!(levels(&a), levels(&b));
        }
    }
}

mod replicates {
    use super::*;

    #[test]
    fn degenerate_weights_use_one_cluster() {
        let schema = small_schema();
        let dim = schema.latent_dim();
        let mut params = ClusterParams::<f64>::zeros(3, dim, 1);
        params.pi = vec![1.0, 0.0, 0.0];
        params.loadings[0].column_mut(0).fill(3.0);
        params.loadings[1].column_mut(0).fill(-3.0);
        params.loadings[2].column_mut(0).fill(-3.0);
        let snap = snapshot_of(&params, &Thresholds::default_for(&schema));
        let y = posterior_predictive_replicate(&snap, &schema, 2000, 4).unwrap();
        let high = y.values().column(0).iter().filter(|&&v| v == 2).count();
        assert!(high > 1980, "{high}");
        assert_eq!(y, posterior_predictive_replicate(&snap, &schema, 2000, 4).unwrap());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_abs_diff_eq!(quantile_sorted(&v, 0.1), 1.4, epsilon = 1e-12);
    }
}

mod residuals {
    use super::*;

    #[test]
    fn inconsistent_response_shifts_the_residual() {
        let schema = SurveySchema::new(vec![item("b", ItemKind::Binary, 2), item("o", ItemKind::Ordinal, 3)]).unwrap();
        let params = ClusterParams { pi: vec![1.0], loadings: vec![array![[3.0, 0.2], [0.5, 0.2]]] };
        let thresholds = Thresholds { cuts: vec![vec![0.0], vec![0.0, 1.0]] };
        let snap = snapshot_of(&params, &thresholds);
        // Row 0 answers level 1 where the cluster almost always answers 2.
        let y = ResponseMatrix::new(array![[1, 2], [2, 2]], &schema).unwrap();
        let mut shifted = Vec::new();
        let mut typical = Vec::new();
        for s in 0..2000 {
            let key = StreamKey::with_tag(9, s, Phase::Residual, 0);
            let r = conditional_residuals(&snap, &y, &schema, &[0, 1], &[0, 0], 3, key).unwrap();
            shifted.push(r[[0, 0]]);
            typical.push(r[[1, 0]]);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&shifted) <= -1.0, "{}", mean(&shifted));
        assert!(mean(&typical).abs() < 0.5);
    }

    #[test]
    fn ks_statistic_of_exact_quantiles_is_small() {
        let n = 1000;
        let samples: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        assert_abs_diff_eq!(ks_statistic(&samples, |x| x.clamp(0.0, 1.0)), 0.5 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn series_cover_every_dimension() {
        let schema = small_schema();
        let dim = schema.latent_dim();
        let mut params = ClusterParams::<f64>::zeros(1, dim, 1);
        params.pi = vec![1.0];
        params.loadings[0].column_mut(1).fill(0.5);
        let thresholds = Thresholds { cuts: vec![vec![0.0], vec![0.0], vec![0.0, 0.8]] };
        let (y, _) = mfamd::model::simulate_dataset(&schema, &params, &thresholds, 30, 2).unwrap();
        let snap = snapshot_of(&params, &thresholds);
        let trace = mfamd::mcmc::Trace {
            n_groups: 1,
            n_traits: 1,
            snapshots: vec![snap; 4],
            tallies: Array2::from_elem((30, 1), 4),
            z_mean: Array2::zeros((30, dim)),
            z_last: Array2::zeros((30, dim)),
            theta_last: Array2::zeros((30, 1)),
            alloc_last: vec![0; 30],
            retained: None,
            acceptance: Vec::new(),
            decode_violations: 0,
            rng: mfamd::mcmc::RngRecord { generator: "test".into(), seed: 0, sweeps: 0 },
        };
        let opts = ResidualOptions { households: vec![3, 7], sweeps: 5, max_snapshots: 3, seed: 1 };
        let series = bayesian_latent_residuals(&trace, &y, &schema, &opts).unwrap();
        assert_eq!(series.len(), 2 * dim);
        assert!(series.iter().all(|s| s.values.len() == 3 && s.values.iter().all(|v| v.is_finite())));
        assert_eq!(series[dim - 1].item, "n");
        let bad = ResidualOptions { households: vec![30], ..opts };
        assert!(bayesian_latent_residuals(&trace, &y, &schema, &bad).is_err());
    }
}

#[test]
fn rand_index_examples() {
    assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
    assert_abs_diff_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]), -0.5, epsilon = 1e-12);
}
