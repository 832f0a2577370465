mod common;

use std::collections::HashSet;

use common::{enumerate, run_to_memory, seq, synthetic};
use evoseq::campaign::Event;
use evoseq::landscape::{minmax_normalize, potts_fitness, Sign};
use evoseq::propose::validate_proposal;
use evoseq::select::{pareto_frontier, scalarize, select_topk};
use evoseq::seq::crossover_with;
use evoseq::{hamming, Candidate, CampaignSettings, ObjectiveVector, Regime, Sequence, Source, VariantSpace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const AA: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

fn sequence(len: usize) -> impl Strategy<Value = Sequence> {
    prop::collection::vec(0..20usize, len)
        .prop_map(|v| seq(&v.into_iter().map(|i| AA[i] as char).collect::<String>()))
}

fn triple() -> impl Strategy<Value = (Sequence, Sequence, Sequence)> {
    (1..30usize).prop_flat_map(|n| (sequence(n), sequence(n), sequence(n)))
}

fn naive_hamming(a: &Sequence, b: &Sequence) -> usize {
    a.as_str().chars().zip(b.as_str().chars()).filter(|(x, y)| x != y).count()
}

fn cand(s: Sequence, objectives: Vec<f64>, iteration: usize) -> Candidate {
    Candidate {
        sequence: s,
        fitness: ObjectiveVector::scalar(objectives[0]).unwrap(),
        objectives: ObjectiveVector::new(objectives).unwrap(),
        parents: None,
        source: Source::Init,
        iteration,
    }
}

/// Objective vectors on a coarse grid so ties and duplicates are common.
fn objective_sets(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-4i32..5).prop_map(|v| v as f64 * 0.5), dim), 0..60)
}

fn as_candidates(points: &[Vec<f64>]) -> Vec<Candidate> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // distinct sequences so every point is its own candidate
            let name: String = format!("{:03}", i).bytes().map(|b| AA[(b - b'0') as usize] as char).collect();
            cand(seq(&name), p.clone(), 0)
        })
        .collect()
}

fn brute_frontier(points: &[Vec<f64>]) -> HashSet<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| {
                q != &points[i] && q.iter().zip(&points[i]).all(|(a, b)| a >= b)
            })
        })
        .collect()
}

proptest! {
    #[test]
    fn hamming_is_a_metric((a, b, c) in triple()) {
        let ab = hamming(&a, &b).unwrap();
        prop_assert_eq!(ab, naive_hamming(&a, &b));
        prop_assert_eq!(ab, hamming(&b, &a).unwrap());
        prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
    }

    #[test]
    fn apply_then_extract_is_identity(wt in sequence(12), mask in prop::collection::vec(any::<bool>(), 12), fill in sequence(12)) {
        let mut sites: Vec<usize> = (1..=12).filter(|&i| mask[i - 1]).collect();
        if sites.is_empty() {
            sites.push(5);
        }
        let space = VariantSpace::new("p", wt.clone(), &sites).unwrap();
        let variant = seq(&sites.iter().map(|&s| fill.as_str().as_bytes()[s - 1] as char).collect::<String>());
        let full = space.apply_variant(&variant).unwrap();
        prop_assert_eq!(space.extract_sites(&full).unwrap(), variant);
        // off-site positions still match the wild type
        for i in 1..=12 {
            if !sites.contains(&i) {
                prop_assert_eq!(full.residue(i - 1), wt.residue(i - 1));
            }
        }
        prop_assert_eq!(space.apply_variant(&space.extract_sites(&full).unwrap()).unwrap(), full);
    }

    #[test]
    fn crossover_draws_each_position_from_a_parent((a, b, _) in triple(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = crossover_with(&a, &b, p, &mut rng).unwrap();
        prop_assert_eq!(child.len(), a.len());
        for i in 0..a.len() {
            let r = child.residue(i);
            prop_assert!(r == a.residue(i) || r == b.residue(i));
        }
    }

    #[test]
    fn potts_wild_type_scores_zero(len in 2usize..12, q in 2usize..21, seed in any::<u64>(), minus in any::<bool>()) {
        let s = synthetic(len, q, 0.7, seed);
        let sign = if minus { Sign::Minus } else { Sign::Plus };
        prop_assert_eq!(potts_fitness(&s.params, &s.wild_type, &s.wild_type, sign).unwrap(), 0.0);
    }

    #[test]
    fn coupling_free_optimum_is_sitewise_best(len in 2usize..5, q in 2usize..7, seed in any::<u64>()) {
        let s = synthetic(len, q, 0.0, seed);
        let letters = s.params.alphabet().letters().to_vec();
        let all = enumerate(&letters, len);
        let exec = evoseq::Executor::new(1);
        let scores = s.oracle.score_variants(&all, &exec).unwrap();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.primary().total_cmp(&b.1.primary()))
            .map(|(i, _)| &all[i])
            .unwrap();
        let sitewise: String = (0..len)
            .map(|i| {
                let a = (0..q).max_by(|&x, &y| s.params.field(i, x).total_cmp(&s.params.field(i, y))).unwrap();
                letters[a] as char
            })
            .collect();
        prop_assert_eq!(best.as_str(), sitewise.as_str());
    }

    #[test]
    fn normalization_is_monotone(x1 in -10.0f64..10.0, x2 in -10.0f64..10.0, lo in -5.0f64..0.0, width in 0.1f64..5.0) {
        let hi = lo + width;
        let (a, b) = (minmax_normalize(x1, lo, hi).unwrap().value, minmax_normalize(x2, lo, hi).unwrap().value);
        if x1 < x2 {
            prop_assert!(a <= b);
        }
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn frontier_matches_brute_force(points in (2usize..5).prop_flat_map(objective_sets)) {
        let cands = as_candidates(&points);
        let got: HashSet<Sequence> = pareto_frontier(&cands).unwrap().into_iter().map(|c| c.sequence).collect();
        let want: HashSet<Sequence> = brute_frontier(&points).into_iter().map(|i| cands[i].sequence.clone()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn topk_never_loses_the_best(pool in objective_sets(1), kids in objective_sets(1), k in 1usize..10) {
        prop_assume!(!pool.is_empty());
        let all = as_candidates(&[pool.clone(), kids].concat());
        let (p, o) = all.split_at(pool.len());
        let next = select_topk(p, o, k, |c| c.primary_fitness()).unwrap();
        let before = p.iter().map(|c| c.primary_fitness()).fold(f64::NEG_INFINITY, f64::max);
        let after = next.iter().map(|c| c.primary_fitness()).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(after >= before);
        prop_assert_eq!(next.len(), k.min(all.len()));
    }

    #[test]
    fn scalarized_argmax_survives_rescaling(points in objective_sets(2), w in 0.0f64..=1.0, scale in 0.01f64..100.0) {
        prop_assume!(!points.is_empty());
        let weights = [w, 1.0 - w];
        let argmax = |pts: &[Vec<f64>]| {
            let vals: Vec<f64> = pts.iter().map(|p| scalarize(&ObjectiveVector::new(p.clone()).unwrap(), &weights).unwrap()).collect();
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vals.iter().enumerate().filter(|(_, v)| **v == best).map(|(i, _)| i).collect::<HashSet<_>>()
        };
        // Exact dyadic grid values keep the comparison free of rounding.
        let scale = (scale * 8.0).round().max(1.0) / 8.0;
        let scaled: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
        let (a, b) = (argmax(&points), argmax(&scaled));
        prop_assert!(a.intersection(&b).next().is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn campaign_bookkeeping(seed in any::<u64>(), regime_pick in 0usize..4, k in 2usize..12, n in 1usize..5) {
        let s = synthetic(8, 6, 0.5, seed);
        let regime = match regime_pick {
            0 => Regime::Single,
            1 => Regime::Constrained { h: 2 },
            2 => Regime::Budget { bh: 1 },
            _ => Regime::MultiPareto,
        };
        let mut settings = CampaignSettings::new(k, n, seed, regime.clone());
        settings.threads = 1;
        let (t, out) = run_to_memory(&settings, &s.oracle, None);
        let space = s.oracle.space();
        let wild = space.wild_variant();

        // A failed slot yields a crossover child plus, sometimes, a mutant.
        let proposals = t.proposals().count();
        prop_assert!(proposals <= 2 * k * n);
        prop_assert!(out.ledger.call_count() as usize <= k + proposals);
        let distinct: HashSet<&Sequence> = t.distinct_evaluations().into_iter().map(|(_, e)| &e.sequence).collect();
        prop_assert_eq!(distinct.len(), out.ledger.len());
        prop_assert_eq!(out.ledger.len() as u64, out.ledger.call_count());

        for (_, p) in t.proposals() {
            prop_assert!(validate_proposal(&p.sequence, &p.parents[0], &p.parents[1], &wild, space).is_ok());
        }

        for r in t.records() {
            if let Event::Evaluation(e) = &r.event {
                if e.cached {
                    continue;
                }
                if r.iteration > 0 {
                    match regime {
                        Regime::Constrained { h } => {
                            let d = naive_hamming(&e.sequence, &wild);
                            prop_assert!((1..=h).contains(&d));
                        }
                        Regime::Budget { bh } => {
                            // against everything evaluated before this iteration
                            let before = out.ledger.records().iter().filter(|c| c.iteration < r.iteration);
                            let d = before.map(|c| naive_hamming(&c.sequence, &e.sequence)).min().unwrap();
                            prop_assert!((1..=bh).contains(&d));
                        }
                        _ => {}
                    }
                }
            }
        }
        if regime == Regime::Single {
            let mut best = f64::NEG_INFINITY;
            for (_, b) in t.best_so_far() {
                prop_assert!(b >= best);
                best = b;
            }
            let pools: Vec<f64> = t
                .selections()
                .map(|(_, s)| s.pool_fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            prop_assert!(pools.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
