use std::collections::BTreeMap;

use hytarget::synth::{generate, GenConfig};

/// Share of discordant household pairs between a ranking and the true
/// welfare order.
fn kendall_distance(order: &[&str], score: &BTreeMap<String, f64>) -> f64 {
    let (mut bad, mut all) = (0usize, 0usize);
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            all += 1;
            bad += usize::from(score[order[i]] > score[order[j]]);
        }
    }
    bad as f64 / all as f64
}

fn mean_distance(omega: f64) -> f64 {
    let g = generate::<f64>(&GenConfig {
        n_communities: 200,
        omega: vec![omega; 3],
        seed: 41,
        ..GenConfig::default()
    })
    .unwrap();
    let d: Vec<f64> = g
        .dataset
        .rankings
        .iter()
        .map(|r| kendall_distance(&r.order(), &g.truth.score))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

#[test]
fn better_rankers_agree_more_with_truth() {
    let d: Vec<f64> = [0.25, 1.0, 4.0, 16.0].iter().map(|&w| mean_distance(w)).collect();
    assert!(d.windows(2).all(|w| w[0] > w[1]), "{d:?}");
}

#[test]
fn same_seed_same_population() {
    let cfg = GenConfig {
        seed: 5,
        ..GenConfig::default()
    };
    let a = generate::<f64>(&cfg).unwrap();
    let b = generate::<f64>(&cfg).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.splits, b.splits);
    assert_eq!(a.dataset.rankings, b.dataset.rankings);
}
