mod common;

use common::{normalize, power_metric};
use proptest::prelude::*;
use uorrl_core::env::{exact_chain_return, ParamChainEnv};
use uorrl_core::metric::{
    db_metric_batches, db_metric_from_returns, db_metric_with, df_metric_from_means, DbMetricConfig,
};
use uorrl_core::preference::{equal_mass_metric, exact_metric};
use uorrl_core::space::{set_division, total_variation_masses};
use uorrl_core::trainer::{policy_update, Baseline, WeightedBatch};
use uorrl_core::{Block, ParamDistribution, ParameterSpace, Policy, PreferenceSpec};

fn blocks_with(masses: &[f64]) -> Vec<Block> {
    let space = ParameterSpace::interval(0.0, masses.len() as f64).unwrap();
    set_division(&space, 1.0)
        .unwrap()
        .into_iter()
        .zip(masses)
        .map(|(b, &mass)| Block { mass, ..b })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_returns_give_the_exact_metric(
        theta in prop::collection::vec(-3.0f64..3.0, 10),
        delta in 0.02f64..0.5,
        k in 0.0f64..25.0,
    ) {
        let env = ParamChainEnv::new(5, 0.95).unwrap();
        let policy = Policy::tabular(5, 2).with_params(theta).unwrap();
        let dist = ParamDistribution::uniform(ParameterSpace::interval(0.0, 0.5).unwrap());
        let cfg = DbMetricConfig::from_distribution(&dist, delta, 1).unwrap();
        let pref = PreferenceSpec::power(k).unwrap();
        let via_db = db_metric_with(&cfg, &pref, |b| exact_chain_return(&env, &policy, &b.representative)).unwrap();
        let pairs: Vec<(f64, f64)> = cfg
            .blocks()
            .iter()
            .map(|b| (exact_chain_return(&env, &policy, &b.representative).unwrap(), b.mass))
            .collect();
        let direct = exact_metric(&pairs, &pref).unwrap().0;
        prop_assert!((via_db.value - direct).abs() <= 1e-12);
        prop_assert!((via_db.value - power_metric(&pairs, k)).abs() <= 1e-9);
    }

    #[test]
    fn mass_perturbation_is_bounded_by_total_variation(
        returns in prop::collection::vec(-50.0f64..50.0, 2..25),
        raw in prop::collection::vec(0.05f64..1.0, 25),
        noise in prop::collection::vec(0.0f64..1.0, 25),
        k in 0.0f64..10.0,
        t in prop::sample::select(vec![0.01, 0.05]),
    ) {
        let n = returns.len();
        let base = normalize(&raw[..n]);
        let target = normalize(&noise[..n]);
        // mix toward `target` until the distance is exactly `t`
        let full = total_variation_masses(&base, &target).unwrap();
        prop_assume!(full > t);
        let s = t / full;
        let moved: Vec<f64> = base.iter().zip(&target).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        let tv = total_variation_masses(&base, &moved).unwrap();
        prop_assert!((tv - t).abs() <= 1e-12);

        let pref = PreferenceSpec::power(k).unwrap();
        let e0 = db_metric_from_returns(&blocks_with(&base), &returns, &pref).unwrap().value;
        let e1 = db_metric_from_returns(&blocks_with(&moved), &returns, &pref).unwrap().value;
        let lo = returns.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((e1 - e0).abs() <= tv * (hi - lo) * pref.sup() + 1e-9);
    }

    #[test]
    fn unit_clusters_reduce_to_the_equal_mass_metric(
        returns in prop::collection::vec(-50.0f64..50.0, 1..60),
        k in 0.0f64..25.0,
    ) {
        let pref = PreferenceSpec::power(k).unwrap();
        let df = df_metric_from_means(&returns, &pref).unwrap().value;
        let eq = equal_mass_metric(&returns, &pref).unwrap().0;
        prop_assert!((df - eq).abs() <= 1e-12 * (1.0 + eq.abs()));
    }
}

#[test]
fn logged_value_is_the_weighted_batch_means() {
    let env = ParamChainEnv::new(5, 0.9).unwrap();
    let policy = Policy::tabular(5, 2);
    let dist = ParamDistribution::uniform(ParameterSpace::interval(0.0, 0.5).unwrap());
    let cfg = DbMetricConfig::from_distribution(&dist, 0.1, 6).unwrap();
    let pref = PreferenceSpec::power(2.0).unwrap();
    let (report, batches) = db_metric_batches(&env, &policy, &cfg, &pref, 11).unwrap();
    let w = report.weights_by_unit();
    let recomputed: f64 = batches
        .iter()
        .map(|b| {
            w[b.id] * b.trajectories.iter().map(|t| t.discounted_return).sum::<f64>() / b.trajectories.len() as f64
        })
        .sum();
    assert!((report.value - recomputed).abs() <= 1e-12);
}

#[test]
fn policy_update_is_pure() {
    let env = ParamChainEnv::new(5, 0.9).unwrap();
    let policy = Policy::tabular(5, 2);
    let dist = ParamDistribution::uniform(ParameterSpace::interval(0.0, 0.5).unwrap());
    let cfg = DbMetricConfig::from_distribution(&dist, 0.25, 4).unwrap();
    let pref = PreferenceSpec::power(1.0).unwrap();
    let step = |seed: u64| {
        let (report, units) = db_metric_batches(&env, &policy, &cfg, &pref, seed).unwrap();
        let w = report.weights_by_unit();
        let batches: Vec<WeightedBatch> = units
            .into_iter()
            .map(|u| WeightedBatch {
                id: u.id,
                weight: w[u.id],
                trajectories: u.trajectories,
            })
            .collect();
        policy_update(&policy, &batches, 0.5, Baseline::MeanReturn, 0.01).unwrap()
    };
    assert_eq!(step(17).params(), step(17).params());
    assert_ne!(step(17).params(), step(18).params());
}
