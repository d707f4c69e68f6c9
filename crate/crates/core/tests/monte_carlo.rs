//! Sampled runs against the closed-form cost model.

use sqdaa_core::analytics::{log_slope, qtot_sqdaa, Distribution, DistributionSpec};
use sqdaa_core::driver::{run_sqd, run_sqdaa, DriverConfig, StoppingRule};
use sqdaa_core::experiment::index_energy_hamiltonian;
use sqdaa_core::state::{model_probabilities, model_state};

const N: usize = 10;
const SEEDS: u64 = 150;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn sampled(dist: Distribution, m: u64) -> (f64, f64) {
    let s0 = model_state(&dist, N).unwrap();
    let h = index_energy_hamiltonian(N).unwrap();
    let (mut sqd, mut aa) = (Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let cfg = DriverConfig {
            shots_it: 100,
            stopping: StoppingRule::CollectTopM { m: m as usize },
            seed,
            ..Default::default()
        };
        sqd.push(run_sqd(&h, &s0, &cfg).unwrap().q_tot as f64);
        aa.push(run_sqdaa(&h, &s0, &cfg).unwrap().q_tot as f64);
    }
    (median(sqd), median(aa))
}

/// Shots at which all of the `m` largest probabilities have been seen with
/// probability 1/2, treating the outcomes as independent.
fn collection_median(probs: &[f64], m: usize) -> f64 {
    let mut p = probs.to_vec();
    p.sort_by(|a, b| b.total_cmp(a));
    let cdf = |shots: f64| p[..m].iter().map(|q| 1.0 - (-q * shots).exp()).product::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while cdf(hi) < 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn exponential_costs_track_the_model() {
    let dist = Distribution::Exponential { alpha: 1.0 };
    let spec = DistributionSpec::finite(dist, N);
    let probs = model_probabilities(&dist, N).unwrap();
    let (mut sqd_pts, mut aa_pts) = (Vec::new(), Vec::new());
    for m in [8u64, 12, 16, 20, 25] {
        let (sqd, aa) = sampled(dist, m);
        let oracle = collection_median(&probs, m as usize);
        let bound = qtot_sqdaa(&spec, m, 100, 0.5).unwrap().q_tot;
        assert!((sqd / oracle - 1.0).abs() < 0.35, "m = {m}: sampled SQD {sqd}, oracle {oracle}");
        // one new state per iteration is the worst case
        assert!(aa <= bound, "m = {m}: sampled SQD-AA {aa} above {bound}");
        sqd_pts.push((m as f64, sqd));
        aa_pts.push((m as f64, aa));
    }
    // SQD grows like e^{αm}, SQD-AA like e^{αm/2}
    let (a, b) = (log_slope(&sqd_pts), log_slope(&aa_pts));
    assert!((0.8..1.2).contains(&a), "SQD slope {a}");
    assert!((0.35..0.65).contains(&b), "SQD-AA slope {b}");
}

#[test]
fn step_costs_track_the_model() {
    let dist = Distribution::Step { m: 16 };
    let spec = DistributionSpec::finite(dist, N);
    let probs = model_probabilities(&dist, N).unwrap();
    for m in [4u64, 8, 16] {
        let (sqd, aa) = sampled(dist, m);
        let oracle = collection_median(&probs, m as usize);
        let bound = qtot_sqdaa(&spec, m, 100, 0.5).unwrap().q_tot;
        assert!((sqd / oracle - 1.0).abs() < 0.35, "m = {m}: sampled SQD {sqd}, oracle {oracle}");
        assert!(aa <= bound, "m = {m}: sampled SQD-AA {aa} above {bound}");
    }
}
