use asm_core::domain::DensityKind;
use asm_core::models::RidgeLink;
use asm_core::pipeline::{
    check_hygiene, run_comparison, run_full_space_baseline, run_local_sensitivity_baseline, run_perturbation_study,
    run_pipeline, ModelSpec, PipelineConfig,
};
use asm_core::subspace::{bound_perturbed, BoundInputs, BoundKind};

fn embedded(a: &[f64], m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[..a.len()].copy_from_slice(a);
    v
}

fn ridge_config(link: RidgeLink, m: usize, samples: usize) -> PipelineConfig {
    PipelineConfig {
        model: ModelSpec::Ridge {
            direction: embedded(&[0.7, 0.3], m),
            link,
            domain: DensityKind::GaussianStandard,
        },
        gradient_samples: samples,
        n: 1,
        ..PipelineConfig::default()
    }
}

#[test]
fn one_dimensional_ridge_is_recovered() {
    let out = run_pipeline(&ridge_config(RidgeLink::Identity, 10, 20)).unwrap();
    assert!(out.report.summary.mean <= 1e-6, "{:?}", out.report.summary);
    assert_eq!(out.surface.model.hyperparameters().eta2, 0.0);
}

#[test]
fn budget_matches_counters() {
    let mut cfg = ridge_config(RidgeLink::Exp, 6, 30);
    cfg.mc_samples = 3;
    cfg.design.points_per_dim = 7;
    let out = run_pipeline(&cfg).unwrap();
    let b = out.report.budget;
    assert_eq!(b.gradient_evals, 30);
    assert_eq!(b.value_evals, 30 + 7 * 3);
    assert_eq!(b.effective_cost, 3 * 30 + 7 * 3);
    assert_eq!(out.surface.training_inputs.len(), 21);
}

#[test]
fn hygiene_rejects_shared_points() {
    let train = vec![vec![0.5, 1.0], vec![2.0, 3.0]];
    assert!(check_hygiene(&train, &[vec![0.1, 0.2]]).is_ok());
    assert!(check_hygiene(&train, &[vec![0.1, 0.2], vec![2.0, 3.0]]).is_err());
}

#[test]
fn coordinate_baseline_picks_the_ridge_axis() {
    let mut cfg = ridge_config(RidgeLink::Identity, 8, 20);
    cfg.model = ModelSpec::Ridge {
        direction: (0..8).map(|i| if i == 4 { 1.0 } else { 0.0 }).collect(),
        link: RidgeLink::Identity,
        domain: DensityKind::GaussianStandard,
    };
    let out = run_local_sensitivity_baseline(&cfg).unwrap();
    assert_eq!(out.coordinates, vec![4]);
    assert!(out.report.summary.mean <= 1e-6);
}

#[test]
fn uniform_inputs_use_the_zonotope() {
    for n in [1, 2] {
        let cfg = PipelineConfig {
            model: ModelSpec::Quadratic {
                matrix: None,
                diagonal: Some(vec![1.0, 0.6, 0.3, 0.1, 0.05]),
                domain: DensityKind::UniformHypercube,
            },
            gradient_samples: 100,
            n,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&cfg).unwrap();
        assert!(out.surface.domain.is_zonotope());
        assert!(out
            .surface
            .training_inputs
            .iter()
            .all(|x| x.iter().all(|v| (-1.0..=1.0).contains(v))));
        assert!(out.report.summary.mean.is_finite());
        assert!(out.surface.design.iter().all(|y| out.surface.domain.contains(y, 1e-9)));
    }
}

#[test]
fn failures_carry_the_stage() {
    let cfg = PipelineConfig {
        model: ModelSpec::Ridge {
            direction: embedded(&[800.0], 3),
            link: RidgeLink::Exp,
            domain: DensityKind::GaussianStandard,
        },
        gradient_samples: 10,
        ..PipelineConfig::default()
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("sampling"), "{err}");
    assert!(!err.is_config());

    let mut bad = ridge_config(RidgeLink::Exp, 4, 10);
    bad.n = 4;
    assert!(run_pipeline(&bad).unwrap_err().is_config());
}

#[test]
fn run_directory_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = ridge_config(RidgeLink::Exp, 10, 40);
    cfg.mc_samples = 2;
    for dir in [&a, &b] {
        cfg.output_dir = Some(dir.path().to_path_buf());
        run_pipeline(&cfg).unwrap();
    }
    for name in [
        "samples.csv",
        "subspace.json",
        "design.csv",
        "training.csv",
        "model.json",
        "errors.csv",
        "report.json",
        "histogram.csv",
    ] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn perturbation_study_rows() {
    let cfg = ridge_config(RidgeLink::Exp, 10, 200);
    let eps = [0.0, 0.05, 0.1, 0.2];
    let rows = run_perturbation_study(&cfg, &eps).unwrap();
    let base = run_pipeline(&cfg).unwrap();
    assert_eq!(rows[0].mean_relative_error, base.report.summary.mean);
    assert_eq!(rows[0].distance, 0.0);
    let lambda = base.subspace.eigenvalues().to_vec();
    for r in &rows {
        assert!(r.distance <= r.epsilon + 1e-12 && r.distance >= 0.9 * r.epsilon - 1e-12);
        let inputs = BoundInputs::new(lambda.clone(), 1, 1.0).unwrap().with_epsilon(r.epsilon).unwrap();
        let mc = bound_perturbed(&inputs, BoundKind::MonteCarlo);
        assert!((mc - r.bound_mc).abs() <= 1e-12 * mc.abs().max(1.0));
        let rs = bound_perturbed(&inputs.with_c2delta(r.c2delta).unwrap(), BoundKind::ResponseSurface);
        assert!((rs - r.bound_surface).abs() <= 1e-12 * rs.abs().max(1.0));
    }
    let inversions = rows.windows(2).filter(|w| w[1].mse_mc < w[0].mse_mc).count();
    assert!(inversions <= 1, "{rows:?}");
}

#[test]
fn full_space_baseline_on_a_two_dimensional_toy() {
    let mut cfg = ridge_config(RidgeLink::Exp, 2, 30);
    cfg.comparison_test_points = 200;
    let full = run_full_space_baseline(&cfg).unwrap();
    assert_eq!(full.report.budget.value_evals, 3 * 30 + 5);
    assert_eq!(full.report.errors.len(), 200);
    let cmp = run_comparison(&cfg).unwrap();
    let asm = cmp.asm_fresh.unwrap().summary.median;
    let fs = cmp.full.unwrap().report.summary.median;
    assert!(fs <= 10.0 * asm, "full {fs} vs subspace {asm}");
}
