//! Structural/behavioral fixture battery and the algebraic properties of
//! consistent configurations: additivity of consistent breakings, weight
//! symmetrization, and the row-sum balance condition at the origin.

use rand::Rng;

use rbcml::breaking::{weighted_union, BreakingGraph};
use rbcml::cml::CmlWeights;
use rbcml::consistency::expected_gradient;
use rbcml::sampling::rng_from_seed;
use rbcml::{Theta, UtilityFamily};

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).expect("fixture present")
}

fn graph(name: &str) -> BreakingGraph {
    BreakingGraph::from_text(&fixture(name)).expect("valid graph fixture")
}

fn weights(name: &str) -> CmlWeights {
    CmlWeights::from_text(&fixture(name)).expect("valid weights fixture")
}

fn grad_norm(family: &UtilityFamily, g: &BreakingGraph, w: &CmlWeights, theta0: &Theta) -> f64 {
    let grad = expected_gradient(family, g, w, theta0).unwrap();
    grad.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_thetas(m: usize, count: usize, seed: u64) -> Vec<Theta> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            Theta::new((0..m).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap()
        })
        .collect()
}

#[test]
fn sum_of_consistent_breakings_stays_consistent() {
    // Both position-union graphs are consistent for PL with uniform W;
    // so is any nonnegative combination.
    let pl = UtilityFamily::plackett_luce();
    let w = CmlWeights::uniform(3);
    let combos = [
        (graph("g_posunion_m3.txt"), graph("g_pos1_m3.txt")),
        (graph("g_uniform_m3.txt"), graph("g_posunion_m3.txt")),
    ];
    for (g1, g2) in combos {
        let sum = weighted_union(&[(1.0, &g1), (1.0, &g2)]).unwrap();
        for theta0 in random_thetas(3, 5, 81) {
            assert!(grad_norm(&pl, &sum, &w, &theta0) < 1e-8);
        }
    }
    let g1 = graph("g_uniform_m4.txt");
    let g2 = graph("g_posunion_m4.txt");
    let sum = weighted_union(&[(2.0, &g1), (0.5, &g2)]).unwrap();
    let w4 = CmlWeights::uniform(4);
    for theta0 in random_thetas(4, 3, 82) {
        assert!(grad_norm(&pl, &sum, &w4, &theta0) < 1e-8);
    }
}

#[test]
fn adding_an_inconsistent_breaking_breaks_consistency() {
    let pl = UtilityFamily::plackett_luce();
    let w = CmlWeights::uniform(3);
    let sum = weighted_union(&[
        (1.0, &graph("g_uniform_m3.txt")),
        (1.0, &graph("g_single_m3.txt")),
    ])
    .unwrap();
    let worst = random_thetas(3, 5, 83)
        .iter()
        .map(|t| grad_norm(&pl, &sum, &w, t))
        .fold(0.0f64, f64::max);
    assert!(worst > 1e-3, "worst {worst:e}");
}

#[test]
fn symmetrized_weights_preserve_vanishing_gradient() {
    // For symmetric families: wherever the expected gradient vanishes under
    // W, it also vanishes under w'_ij = w_ij + w_ji.
    let gauss = UtilityFamily::gaussian_unit(3);
    let g = graph("g_uniform_m3.txt");
    let mut probes = random_thetas(3, 4, 84);
    probes.push(Theta::zeros(3));
    for wname in ["w_uniform_m3.txt", "w_chain_m3.txt", "w_cyclic_m3.txt", "w_asym_m3.txt"] {
        let w = weights(wname);
        let m = w.m();
        let symmetrized = CmlWeights::from_entries(
            m,
            (0..m * m)
                .map(|idx| {
                    let (i, j) = (idx / m, idx % m);
                    if i == j {
                        0.0
                    } else {
                        w.get(i, j) + w.get(j, i)
                    }
                })
                .collect(),
        )
        .unwrap();
        for theta0 in &probes {
            if grad_norm(&gauss, &g, &w, theta0) < 1e-8 {
                let sym_norm = grad_norm(&gauss, &g, &symmetrized, theta0);
                assert!(sym_norm < 1e-8, "{wname} at {theta0:?}: {sym_norm:e}");
            }
        }
    }
}

#[test]
fn row_sum_balance_governs_gradient_at_origin() {
    // At theta0 = 0 the expected gradient vanishes iff each alternative's
    // outgoing and incoming weight sums match.
    let gauss = UtilityFamily::gaussian_unit(3);
    let g = graph("g_uniform_m3.txt");
    let origin = Theta::zeros(3);
    for wname in ["w_uniform_m3.txt", "w_chain_m3.txt", "w_cyclic_m3.txt", "w_asym_m3.txt"] {
        let w = weights(wname);
        let m = w.m();
        let balanced = (0..m).all(|i| {
            let out: f64 = (0..m).filter(|&j| j != i).map(|j| w.get(i, j)).sum();
            let inc: f64 = (0..m).filter(|&j| j != i).map(|j| w.get(j, i)).sum();
            (out - inc).abs() < 1e-12
        });
        let norm = grad_norm(&gauss, &g, &w, &origin);
        if balanced {
            assert!(norm < 1e-8, "{wname}: balanced but gradient {norm:e}");
        } else {
            assert!(norm > 1e-3, "{wname}: unbalanced but gradient {norm:e}");
        }
    }
    // The cyclic fixture is the interesting case: asymmetric yet balanced,
    // so it passes at the origin while failing globally.
    let cyclic = weights("w_cyclic_m3.txt");
    assert!(!cyclic.is_symmetric(1e-12));
    assert!(grad_norm(&gauss, &g, &cyclic, &origin) < 1e-8);
    let worst = random_thetas(3, 5, 85)
        .iter()
        .map(|t| grad_norm(&gauss, &g, &cyclic, t))
        .fold(0.0f64, f64::max);
    assert!(worst > 1e-3, "cyclic W should fail away from the origin, worst {worst:e}");
}

#[test]
fn single_edge_gradient_values_recorded() {
    // The single-edge breaking's gradient at theta = (ln 2, 0, 0): the
    // enumeration gives (1/18, -1/36); nonzero is what matters.
    let pl = UtilityFamily::plackett_luce();
    let g = graph("g_single_m3.txt");
    let w = CmlWeights::uniform(3);
    let theta0 = Theta::new(vec![2.0f64.ln(), 0.0, 0.0]).unwrap();
    let grad = expected_gradient(&pl, &g, &w, &theta0).unwrap();
    assert!((grad[0] - 1.0 / 18.0).abs() < 1e-12);
    assert!((grad[1] + 1.0 / 36.0).abs() < 1e-12);
}
