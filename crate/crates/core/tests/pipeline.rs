use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthforge::experiments::pipeline::{fit_response_model, stage1};
use synthforge::experiments::run_pipeline;
use synthforge::{CvGrid, Dataset, HybridConfig, Matrix, Stage1Sampler, SynthesisPlan};

fn smooth_data(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y = x
        .iter_rows()
        .map(|r| r.iter().enumerate().map(|(j, v)| ((j + 1) as f64 * v).sin()).sum())
        .collect();
    Dataset::new(x, Some(y)).unwrap()
}

fn quick_plan(seed: u64, alpha: f64) -> SynthesisPlan {
    SynthesisPlan {
        seed,
        hybrid: HybridConfig::Alpha(alpha),
        lambda_grid: CvGrid::new(vec![0.0005, 0.002], 3).unwrap(),
        bandwidth_grid: vec![0.2, 0.5, 1.0],
        ..SynthesisPlan::default()
    }
}

#[test]
fn alpha_one_releases_original_inputs() {
    let data = smooth_data(150, 3, 1);
    let out = run_pipeline(&data, &quick_plan(3, 1.0)).unwrap();
    assert_eq!(out.synthetic.inputs(), data.inputs());
    assert_eq!(out.privacy.lid_percent, 100.0);
    assert_eq!(out.fidelity.mean_tv_norm, 0.0);
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let data = smooth_data(150, 3, 2);
    let a = run_pipeline(&data, &quick_plan(11, 0.5)).unwrap();
    let b = run_pipeline(&data, &quick_plan(11, 0.5)).unwrap();
    let c = run_pipeline(&data, &quick_plan(12, 0.5)).unwrap();
    assert_eq!(a.synthetic, b.synthetic);
    assert_eq!(a.privacy, b.privacy);
    assert_ne!(a.synthetic.inputs(), c.synthetic.inputs());
}

#[test]
fn budget_mode_solves_alpha_from_closed_form() {
    let data = smooth_data(150, 3, 3);
    let (budget, eta, width) = (5.0, 0.001, 1.0);
    let plan = SynthesisPlan {
        hybrid: HybridConfig::LidBudget {
            budget_percent: budget,
            range_width: Some(width),
        },
        eta,
        ..quick_plan(0, 0.0)
    };
    let out = run_pipeline(&data, &plan).unwrap();
    let r = 1.0 - (1.0 - budget / 100.0f64).powf(1.0 / 3.0);
    let expected = 1.0 - 2.0 * eta / (width * r);
    assert!((out.alpha.alpha - expected).abs() < 1e-12, "{} vs {expected}", out.alpha.alpha);
    let bound = out.privacy.theoretical_bound_percent.unwrap();
    assert!((bound - budget).abs() < 1e-9, "{bound}");
}

#[test]
fn released_response_follows_the_fitted_model() {
    let data = smooth_data(120, 2, 4);
    let plan = quick_plan(5, 0.3);
    let out = run_pipeline(&data, &plan).unwrap();
    let model = fit_response_model(&data, &plan).unwrap();
    let expected = model.predict(out.synthetic.inputs()).unwrap();
    assert_eq!(out.synthetic.response().unwrap(), expected.as_slice());
    assert_eq!(out.lambda, model.lambda());
}

#[test]
fn sh_release_tracks_marginals_better_than_random_noise() {
    let data = smooth_data(400, 2, 6);
    let sh = run_pipeline(&data, &quick_plan(7, 0.0)).unwrap();
    let random = run_pipeline(
        &data,
        &SynthesisPlan {
            stage1: Stage1Sampler::cauchy(),
            ..quick_plan(7, 0.0)
        },
    )
    .unwrap();
    assert!(sh.fidelity.mean_tv_norm < random.fidelity.mean_tv_norm);
    assert!(sh.fidelity.mean_tv_norm < 0.2, "{}", sh.fidelity.mean_tv_norm);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn release_lies_between_original_and_paired_rows(seed in 0u64..1000, alpha in 0.0f64..=1.0) {
        let data = smooth_data(40, 2, seed);
        let plan = SynthesisPlan { stage1: Stage1Sampler::Random, ..quick_plan(seed, alpha) };
        let s1 = stage1(data.inputs(), &plan).unwrap();

        let mut pairing = s1.pairing.clone();
        pairing.sort_unstable();
        prop_assert_eq!(pairing, (0..40).collect::<Vec<_>>());

        let out = run_pipeline(&data, &plan).unwrap();
        for i in 0..40 {
            for j in 0..2 {
                let (x, s, m) = (data.inputs()[(i, j)], s1.paired[(i, j)], out.synthetic.inputs()[(i, j)]);
                let (lo, hi) = (x.min(s), x.max(s));
                prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12, "row {} col {}: {} not in [{}, {}]", i, j, m, lo, hi);
            }
        }
        prop_assert!((0.0..=100.0).contains(&out.privacy.lid_percent));
        prop_assert!(out.fidelity.tv_norm.iter().all(|t| (0.0..=1.0).contains(t)));
    }
}
