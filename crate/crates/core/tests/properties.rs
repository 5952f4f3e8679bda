// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tradenet::counterfactual::{apply_recommendations, virtual_network};
use tradenet::diffusion;
use tradenet::evaluation::new_exports;
use tradenet::fitness::{solve_fitness, SolverConfig};
use tradenet::trade_graph::{build_snapshot, compute_rca, ExportRecord};
use tradenet::{Algorithm, Bipartite, BipartiteSnapshot, DiffusionParams, ExportTable, Recommender};

fn table_from(values: &[Vec<f64>], scale: f64) -> ExportTable {
    let mut recs = Vec::new();
    for (i, row) in values.iter().enumerate() {
        for (a, &v) in row.iter().enumerate() {
            recs.push(ExportRecord {
                year: 2001,
                country: format!("c{i:02}"),
                product: format!("p{a:02}"),
                value: v * scale,
            });
        }
    }
    ExportTable::from_records(recs).unwrap()
}

fn export_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..7)
        .prop_flat_map(|(u, n)| prop::collection::vec(prop::collection::vec(0.0f64..1e6, n), u))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rca_power_of_two_scaling_is_bitwise(values in export_matrix(), k in -20i32..20) {
        prop_assume!(values.iter().flatten().any(|&v| v > 0.0));
        let base = compute_rca(&table_from(&values, 1.0), 2001).unwrap();
        let scaled = compute_rca(&table_from(&values, 2f64.powi(k)), 2001).unwrap();
        prop_assert_eq!(&base.values, &scaled.values);
    }

    #[test]
    fn rca_general_scaling(values in export_matrix(), c in 1e-3f64..1e3) {
        prop_assume!(values.iter().flatten().any(|&v| v > 0.0));
        let t0 = table_from(&values, 1.0);
        let t1 = table_from(&values, c);
        let (r0, r1) = (compute_rca(&t0, 2001).unwrap(), compute_rca(&t1, 2001).unwrap());
        for (x, y) in r0.values.iter().zip(r1.values.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        // links can only differ where RCA sits within rounding of the threshold
        let (s0, s1) = (build_snapshot(&t0, 2001, 1.0).unwrap(), build_snapshot(&t1, 2001, 1.0).unwrap());
        let near_one = r0.values.iter().any(|x| (x - 1.0).abs() < 1e-12);
        prop_assert!(near_one || s0 == s1);
    }

    #[test]
    fn rank_one_table_has_unit_rca(
        c in prop::collection::vec(0.5f64..100.0, 1..6),
        d in prop::collection::vec(0.5f64..100.0, 1..7),
    ) {
        let values: Vec<Vec<f64>> = c.iter().map(|ci| d.iter().map(|dj| ci * dj).collect()).collect();
        let rca = compute_rca(&table_from(&values, 1.0), 2001).unwrap();
        for x in rca.values.iter() {
            prop_assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degrees_are_consistent_and_deterministic(values in export_matrix()) {
        prop_assume!(values.iter().flatten().any(|&v| v > 0.0));
        let t = table_from(&values, 1.0);
        let s = build_snapshot(&t, 2001, 1.0).unwrap();
        let links = s.link_count();
        prop_assert_eq!(s.country_degrees().iter().sum::<usize>(), links);
        prop_assert_eq!(s.product_degrees().iter().sum::<usize>(), links);
        prop_assert!(s.country_degrees().iter().all(|&k| k >= 1));
        prop_assert!(s.countries().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(build_snapshot(&t, 2001, 1.0).unwrap(), s);
    }

    #[test]
    fn probs_conserves_resource(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_snapshot(&mut rng, 6, 8);
        for (i, c) in s.countries().iter().enumerate() {
            let raw = diffusion::probs_raw_scores(&s, c).unwrap();
            let total: f64 = raw.iter().sum();
            prop_assert!((total - s.country_degrees()[i] as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn heats_matches_explicit_averaging(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_snapshot(&mut rng, 6, 8);
        for (i, c) in s.countries().iter().enumerate() {
            let h = diffusion::heats_raw_scores(&s, c).unwrap();
            for (x, y) in h.iter().zip(common::heat_scores(&s, i)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_algorithm_masks_exported_products(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let now = common::random_snapshot_sized(&mut rng, 2005, 5, 8, 0.4);
        let past = common::random_snapshot_sized(&mut rng, 2004, 5, 8, 0.3);
        let rec = Recommender::new(&now, Some(&past), DiffusionParams::default()).unwrap();
        for algo in Algorithm::ALL {
            let m = rec.score_matrix(algo).unwrap();
            for (i, row) in now.rows().iter().enumerate() {
                for &a in row {
                    prop_assert_eq!(m.scores[[i, a]], 0.0);
                }
            }
            prop_assert!(m.scores.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn fitness_is_normalized_and_positive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_snapshot(&mut rng, 8, 8);
        for iters in [1, 2, 5, 20] {
            let r = solve_fitness(&s, SolverConfig { max_iter: iters, stability_window: usize::MAX }).unwrap();
            let mf = r.fitness.iter().sum::<f64>() / r.fitness.len() as f64;
            let mq = r.complexity.iter().sum::<f64>() / r.complexity.len() as f64;
            prop_assert!((mf - 1.0).abs() < 1e-12);
            prop_assert!((mq - 1.0).abs() < 1e-12);
            prop_assert!(r.fitness.iter().all(|f| f.is_finite() && *f > 0.0));
            prop_assert!(r.complexity.iter().all(|q| q.is_finite() && *q > 0.0));
        }
    }

    #[test]
    fn fixed_length_additions_are_prefixes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_snapshot_sized(&mut rng, 2001, 5, 8, 0.3);
        let rec = Recommender::new(&s, None, DiffusionParams::default()).unwrap();
        let lists = rec.recommend_all(Algorithm::HeatS, 8).unwrap();
        for list in &lists {
            let longest = list.len();
            let mut prev: Vec<usize> = Vec::new();
            for l in 0..=longest {
                let sc = apply_recommendations(&s, &list.country, list, l).unwrap();
                prop_assert!(sc.added().starts_with(&prev));
                prev = sc.added().to_vec();
            }
        }
    }
}

#[test]
fn heats_prefers_low_degree_products() {
    // 100 random networks, fixed seed: mean degree of HeatS top-L products
    // stays at or below that of ProbS top-L products
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let (mut heats_total, mut probs_total, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..100 {
        let density = rng.gen_range(0.1..0.4);
        let s = common::random_snapshot_sized(&mut rng, 2001, 20, 40, density);
        let rec = Recommender::new(&s, None, DiffusionParams::default()).unwrap();
        let degrees = s.product_degrees();
        for (algo, total) in [
            (Algorithm::HeatS, &mut heats_total),
            (Algorithm::ProbS, &mut probs_total),
        ] {
            for list in rec.recommend_all(algo, 5).unwrap() {
                *total += list.product_indices().map(|a| degrees[a] as f64).sum::<f64>();
            }
        }
        count += s.countries().len() * 5;
    }
    let (h, p) = (heats_total / count as f64, probs_total / count as f64);
    assert!(h <= p, "HeatS mean degree {h} > ProbS mean degree {p}");
}

#[test]
fn virtual_network_isolation_and_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let train = common::random_snapshot_sized(&mut rng, 2001, 6, 10, 0.3);
        let test = common::random_snapshot_sized(&mut rng, 2006, 6, 10, 0.4);
        let rec = Recommender::new(&train, None, DiffusionParams::default()).unwrap();
        let lists = rec.recommend_all(Algorithm::ProbS, 10).unwrap();
        for list in &lists {
            let gained = new_exports(&train, &test, &list.country).unwrap();
            if gained.is_empty() {
                continue;
            }
            let sc = virtual_network(&train, &test, &list.country, list).unwrap();
            assert_eq!(sc.link_count(), test.link_count());
            for i in (0..test.country_count()).filter(|&i| i != sc.focal()) {
                assert_eq!(sc.row(i), test.row(i));
            }
        }
    }
}

#[test]
fn permuted_labels_give_identical_fitness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let s = common::random_snapshot(&mut rng, 8, 8);
        let mut cperm: Vec<usize> = (0..s.countries().len()).collect();
        let mut pperm: Vec<usize> = (0..s.products().len()).collect();
        cperm.shuffle(&mut rng);
        pperm.shuffle(&mut rng);
        let new_products = common::product_ids(pperm.len());
        let rows = s.rows().iter().enumerate().map(|(i, row)| {
            (
                format!("c{:02}", cperm[i]),
                row.iter().map(|&a| pperm[a]).collect::<Vec<_>>(),
            )
        });
        let relabeled = BipartiteSnapshot::from_rows(s.year(), new_products, rows).unwrap();

        let r0 = solve_fitness(&s, SolverConfig::default()).unwrap();
        let r1 = solve_fitness(&relabeled, SolverConfig::default()).unwrap();
        assert_eq!(r0.iterations, r1.iterations);
        for (i, f) in r0.fitness.iter().enumerate() {
            let j = relabeled.country_index(&format!("c{:02}", cperm[i])).unwrap();
            assert_eq!(f.to_bits(), r1.fitness[j].to_bits());
        }
    }
}
