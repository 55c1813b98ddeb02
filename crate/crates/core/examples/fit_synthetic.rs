//! Sample a synthetic profile and fit RBCML(G_u, W_u) to it.

use rbcml::breaking::{kappa_stats, uniform_breaking};
use rbcml::cml::{maximize_cll, CmlWeights, FitOptions};
use rbcml::sampling::{rng_from_seed, sample_profile};
use rbcml::{Theta, UtilityFamily};

fn main() {
    let family = UtilityFamily::plackett_luce();
    let truth = Theta::new(vec![1.2, 0.4, 0.0]).unwrap();
    let profile = sample_profile(&family, &truth, 5000, &mut rng_from_seed(7)).unwrap();

    let g = uniform_breaking(3).unwrap();
    let kappa = kappa_stats(&g, &profile).unwrap();
    let fit = maximize_cll(&family, &kappa, &CmlWeights::uniform(3),
                           &Theta::zeros(3), &FitOptions::default()).unwrap();
    assert!(fit.converged);
    println!("truth:    {:?}", truth.values());
    println!("estimate: {:?}", fit.theta.values());
    println!("objective {:.6}, {} Newton iterations", fit.objective, fit.iterations);
}
