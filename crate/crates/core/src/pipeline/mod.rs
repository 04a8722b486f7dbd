//! End-to-end runs: sample gradients, estimate the subspace, build the
//! reduced domain and design, train and fit the kriging surface, then test
//! it. Also the two baselines and the perturbed-direction study.

mod config;
mod report;

use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{sample_conditional_z, tensor_design, zonotope_design, DensityKind, InputDomain, ReducedDomain};
use crate::error::{Error, Result, StageExt};
use crate::kriging::{fit_spectrum, FullSpaceModel, FullSpaceOptions, KrigingModel, Spectrum};
use crate::linalg::seeded_rng;
use crate::models::{Counted, ModelFunction};
use crate::subspace::{
    bound_perturbed, estimate_subspace, local_sensitivity_ranking, perturb_subspace, subspace_distance,
    ActiveSubspace, BoundInputs, BoundKind, GradientSampleSet,
};
use crate::surrogate::{evaluate_fhat, write_training_csv, McSurrogateConfig};

pub use config::{CompareToggles, DesignSpec, ModelSpec, PipelineConfig, Seeds};
pub use report::{relative_error, Budget, ErrorReport, ErrorSummary, Histogram, PointError, RELATIVE_ERROR_FLOOR};

/// RNG streams split off the sampling seed.
const STREAM_INITIAL: u64 = 0;
const STREAM_FULL_TRAIN: u64 = 2;
const STREAM_FULL_TEST: u64 = 3;
/// Salt separating the testing-time Monte Carlo draws from the training draws.
const TEST_MC_SALT: u64 = 0x7465_7374;

/// `count` independent draws from the input density.
pub fn sample_inputs(domain: InputDomain, count: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, stream);
    (0..count)
        .map(|_| {
            (0..domain.m)
                .map(|_| match domain.kind {
                    DensityKind::GaussianStandard => rng.sample(StandardNormal),
                    DensityKind::UniformHypercube => rng.random_range(-1.0..=1.0),
                })
                .collect()
        })
        .collect()
}

fn model_error(x: &[f64], e: Error) -> Error {
    Error::Model {
        point: x.to_vec(),
        source: Box::new(e),
    }
}

/// Step 1: values and gradients at `M` points drawn from the input density.
pub fn initial_samples(model: &dyn ModelFunction, cfg: &PipelineConfig) -> Result<GradientSampleSet> {
    let points = sample_inputs(model.input_domain(), cfg.gradient_samples, cfg.seeds.sampling, STREAM_INITIAL);
    let mut values = Vec::with_capacity(points.len());
    let mut gradients = Vec::with_capacity(points.len());
    for x in &points {
        let (v, g) = model.value_and_gradient(x).map_err(|e| model_error(x, e))?;
        values.push(v);
        gradients.push(g);
    }
    GradientSampleSet::new(points, values, gradients)
}

/// Step 4: the design on the reduced domain.
pub fn make_design(domain: &ReducedDomain, spec: &DesignSpec) -> Result<Vec<Vec<f64>>> {
    if domain.is_zonotope() {
        zonotope_design(domain, spec.spacing)
    } else {
        tensor_design(domain, spec.points_per_dim)
    }
}

/// Monte Carlo training values `Ĝ(y_k)` and the inputs at which `f` was evaluated.
pub fn training_values(
    model: &dyn ModelFunction,
    domain: &ReducedDomain,
    design: &[Vec<f64>],
    mc: &McSurrogateConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut values = Vec::with_capacity(design.len());
    let mut inputs = Vec::with_capacity(design.len() * mc.samples);
    for (k, y) in design.iter().enumerate() {
        let draws = sample_conditional_z(domain, y, mc.samples, mc.for_point(k).seed)?;
        let mut sum = 0.0;
        for z in &draws.samples {
            let x = domain.combine(y, z);
            sum += model.value(&x).map_err(|e| model_error(&x, e))?;
            inputs.push(x);
        }
        values.push(sum / draws.samples.len() as f64);
    }
    Ok((values, inputs))
}

/// Steps 3 to 5 for a given basis.
#[derive(Clone, Debug)]
pub struct Surface {
    pub domain: ReducedDomain,
    pub design: Vec<Vec<f64>>,
    pub training: Vec<f64>,
    /// Full-space inputs evaluated while training.
    pub training_inputs: Vec<Vec<f64>>,
    pub model: KrigingModel,
}

impl Surface {
    /// `F̃(x) = G̃(W1ᵀx)`: mean and predictive variance.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        self.model.predict(&self.domain.project(x))
    }

    fn report(&self, points: &[Vec<f64>], values: &[f64], budget: Budget) -> ErrorReport {
        let triples: Vec<(f64, f64, f64)> = points
            .iter()
            .zip(values)
            .map(|(x, f)| {
                let (mean, var) = self.predict(x);
                (*f, mean, var)
            })
            .collect();
        ErrorReport::from_predictions(&triples, budget)
    }
}

fn build_surface(
    model: &dyn ModelFunction,
    subspace: ActiveSubspace,
    spectrum: Spectrum,
    sigma_hat2: f64,
    cfg: &PipelineConfig,
) -> Result<Surface> {
    let input = model.input_domain();
    let domain = ReducedDomain::new(input, subspace).stage("reduced domain")?;
    let design = make_design(&domain, &cfg.design).stage("design")?;
    let mc = McSurrogateConfig::new(cfg.mc_samples, cfg.seeds.mc)?;
    let (training, training_inputs) = training_values(model, &domain, &design, &mc).stage("training")?;
    let kriging = fit_spectrum(&design, &training, spectrum, sigma_hat2, input.poincare_constant()).stage("fit")?;
    for w in kriging.warnings() {
        log::warn!("{w}");
    }
    Ok(Surface {
        domain,
        design,
        training,
        training_inputs,
        model: kriging,
    })
}

fn input_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Fails if any testing input coincides bit-for-bit with a training input.
pub fn check_hygiene(training_inputs: &[Vec<f64>], test_inputs: &[Vec<f64>]) -> Result<()> {
    let seen: HashSet<Vec<u64>> = training_inputs.iter().map(|x| input_key(x)).collect();
    if let Some(i) = test_inputs.iter().position(|x| seen.contains(&input_key(x))) {
        return Err(Error::invalid(format!("testing point {i} is also a training point")));
    }
    Ok(())
}

/// Eigenvalues with their ratio to `λ₁` and cumulative share, to guide the choice of `n`.
pub fn eigenvalue_table(subspace: &ActiveSubspace, rows: usize) -> String {
    let lambda = subspace.eigenvalues();
    let total: f64 = lambda.iter().sum();
    let mut out = format!("{:>4} {:>14} {:>12} {:>12}\n", "i", "eigenvalue", "ratio", "cumulative");
    let mut cum = 0.0;
    for (i, l) in lambda.iter().take(rows).enumerate() {
        cum += l;
        let ratio = if lambda[0] > 0.0 { l / lambda[0] } else { 0.0 };
        let share = if total > 0.0 { cum / total } else { 0.0 };
        out.push_str(&format!("{:>4} {:>14.6e} {:>12.4e} {:>12.6}\n", i + 1, l, ratio, share));
    }
    out
}

fn build_model(cfg: &PipelineConfig) -> Result<Box<dyn ModelFunction>> {
    cfg.validate()?;
    cfg.model.build().map_err(|e| match e {
        Error::Io(_) => e,
        other => Error::Config(format!("model: {other}")),
    })
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub samples: GradientSampleSet,
    pub subspace: ActiveSubspace,
    pub surface: Surface,
    pub report: ErrorReport,
}

/// The six-step algorithm, testing on the `M` initial samples. Writes the
/// run directory if the config names one.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let model = build_model(cfg)?;
    let outcome = pipeline_with(&*model, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_run(dir, &outcome)?;
    }
    Ok(outcome)
}

fn pipeline_with(model: &dyn ModelFunction, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let counted = Counted::new(model);
    let samples = initial_samples(&counted, cfg).stage("sampling")?;
    let subspace = estimate_subspace(&samples, cfg.n).stage("subspace")?;
    log::info!("gradient covariance eigenvalues:\n{}", eigenvalue_table(&subspace, 10));
    let spectrum = Spectrum {
        values: subspace.eigenvalues().to_vec(),
        n: cfg.n,
    };
    let surface = build_surface(&counted, subspace.clone(), spectrum, samples.sigma_hat2(), cfg)?;
    let budget = Budget::new(counted.value_evals(), counted.gradient_evals());
    check_hygiene(&surface.training_inputs, samples.points()).stage("testing")?;
    let report = surface.report(samples.points(), samples.values(), budget);
    Ok(PipelineOutcome {
        samples,
        subspace,
        surface,
        report,
    })
}

fn write_csv_rows(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Write a design as CSV with header `y1..yn`.
pub fn write_design_csv(path: &Path, design: &[Vec<f64>]) -> Result<()> {
    let n = design.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
    write_csv_rows(path, &header, design)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    summary: &'a ErrorSummary,
    budget: &'a Budget,
    gradient_samples: usize,
    design_points: usize,
    eigenvalues: &'a [f64],
    hyperparameters: &'a crate::kriging::KrigingHyperparameters,
    log_likelihood: f64,
    variance: &'static str,
    warnings: &'a [String],
}

/// Write the standard run directory.
pub fn write_run(dir: &Path, outcome: &PipelineOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    outcome
        .samples
        .write_csv(BufWriter::new(File::create(dir.join("samples.csv"))?))?;
    std::fs::write(dir.join("subspace.json"), outcome.subspace.to_json()?)?;
    write_design_csv(&dir.join("design.csv"), &outcome.surface.design)?;
    write_training_csv(
        &outcome.surface.design,
        &outcome.surface.training,
        BufWriter::new(File::create(dir.join("training.csv"))?),
    )?;
    std::fs::write(dir.join("model.json"), outcome.surface.model.to_json()?)?;
    outcome
        .report
        .write_errors_csv(BufWriter::new(File::create(dir.join("errors.csv"))?))?;
    outcome
        .report
        .write_histogram_csv(BufWriter::new(File::create(dir.join("histogram.csv"))?))?;
    let summary = RunSummary {
        summary: &outcome.report.summary,
        budget: &outcome.report.budget,
        gradient_samples: outcome.samples.len(),
        design_points: outcome.surface.design.len(),
        eigenvalues: outcome.subspace.eigenvalues(),
        hyperparameters: outcome.surface.model.hyperparameters(),
        log_likelihood: outcome.surface.model.log_likelihood(),
        variance: "universal-kriging predictive variance",
        warnings: outcome.surface.model.warnings(),
    };
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LocalSensitivityOutcome {
    /// Zero-based selected coordinates, most sensitive first.
    pub coordinates: Vec<usize>,
    pub surface: Surface,
    pub report: ErrorReport,
}

/// Kriging on the `n` coordinates with the largest gradient magnitude at
/// the origin, with the same design, budget and testing set as the
/// subspace arm.
pub fn run_local_sensitivity_baseline(cfg: &PipelineConfig) -> Result<LocalSensitivityOutcome> {
    let model = build_model(cfg)?;
    let counted = Counted::new(&*model);
    let samples = initial_samples(&counted, cfg).stage("sampling")?;
    local_sensitivity_with(&counted, &samples, cfg)
}

fn local_sensitivity_with(
    counted: &Counted<'_>,
    samples: &GradientSampleSet,
    cfg: &PipelineConfig,
) -> Result<LocalSensitivityOutcome> {
    let m = counted.dim();
    let ranking = local_sensitivity_ranking(counted, &vec![0.0; m]).stage("ranking")?;
    let coordinates = ranking.top(cfg.n).to_vec();
    let mut order = coordinates.clone();
    order.extend((0..m).filter(|i| !coordinates.contains(i)));

    // Mean squared partial derivatives stand in for the eigenvalues.
    let mut diag = vec![0.0; m];
    for g in samples.gradients() {
        for (d, gi) in diag.iter_mut().zip(g) {
            *d += gi * gi / samples.len() as f64;
        }
    }
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let w = DMatrix::from_fn(m, m, |r, c| if order[c] == r { 1.0 } else { 0.0 });
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let subspace = ActiveSubspace::from_parts(w, sorted, cfg.n).stage("coordinate basis")?;
    let spectrum = Spectrum { values, n: cfg.n };
    let surface = build_surface(counted, subspace, spectrum, samples.sigma_hat2(), cfg)?;
    let budget = Budget::new(counted.value_evals(), counted.gradient_evals());
    check_hygiene(&surface.training_inputs, samples.points()).stage("testing")?;
    let report = surface.report(samples.points(), samples.values(), budget);
    Ok(LocalSensitivityOutcome {
        coordinates,
        surface,
        report,
    })
}

pub struct FullSpaceOutcome {
    pub model: FullSpaceModel,
    pub report: ErrorReport,
    pub test_points: Vec<Vec<f64>>,
    pub test_values: Vec<f64>,
}

/// Kriging on all `m` inputs with `3M + PN` training evaluations, tested
/// on a fresh set of points.
pub fn run_full_space_baseline(cfg: &PipelineConfig) -> Result<FullSpaceOutcome> {
    let model = build_model(cfg)?;
    let asm = pipeline_with(&*model, cfg)?;
    full_space_with(&*model, asm.report.budget.effective_cost, cfg)
}

fn full_space_with(model: &dyn ModelFunction, training_count: usize, cfg: &PipelineConfig) -> Result<FullSpaceOutcome> {
    let counted = Counted::new(model);
    let input = model.input_domain();
    let points = sample_inputs(input, training_count, cfg.seeds.sampling, STREAM_FULL_TRAIN);
    let values = points
        .iter()
        .map(|x| counted.value(x).map_err(|e| model_error(x, e)))
        .collect::<Result<Vec<f64>>>()
        .stage("full-space training")?;
    let budget = Budget::new(counted.value_evals(), counted.gradient_evals());
    let (test_points, test_values) = test_set(model, cfg)?;
    check_hygiene(&points, &test_points).stage("testing")?;
    let fitted = FullSpaceModel::fit(&points, &values, &FullSpaceOptions::default()).stage("full-space fit")?;
    let triples: Vec<(f64, f64, f64)> = test_points
        .iter()
        .zip(&test_values)
        .map(|(x, f)| {
            let (mean, var) = fitted.predict(x);
            (*f, mean, var)
        })
        .collect();
    Ok(FullSpaceOutcome {
        model: fitted,
        report: ErrorReport::from_predictions(&triples, budget),
        test_points,
        test_values,
    })
}

fn test_set(model: &dyn ModelFunction, cfg: &PipelineConfig) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let points = sample_inputs(
        model.input_domain(),
        cfg.comparison_test_points,
        cfg.seeds.sampling,
        STREAM_FULL_TEST,
    );
    let values = points
        .iter()
        .map(|x| model.value(x).map_err(|e| model_error(x, e)))
        .collect::<Result<Vec<f64>>>()
        .stage("testing")?;
    Ok((points, values))
}

pub struct ComparisonOutcome {
    pub asm: PipelineOutcome,
    pub local: Option<LocalSensitivityOutcome>,
    pub full: Option<FullSpaceOutcome>,
    /// The subspace surface on the full-space arm's fresh testing set.
    pub asm_fresh: Option<ErrorReport>,
}

#[derive(Serialize, Deserialize)]
struct ComparisonSummary {
    asm: ErrorSummary,
    asm_budget: Budget,
    local_sensitivity: Option<(Vec<usize>, ErrorSummary, Budget)>,
    full_space: Option<(ErrorSummary, Budget)>,
    asm_on_full_space_test_set: Option<ErrorSummary>,
}

/// The subspace surface against the enabled baselines.
pub fn run_comparison(cfg: &PipelineConfig) -> Result<ComparisonOutcome> {
    let model = build_model(cfg)?;
    let asm = pipeline_with(&*model, cfg)?;
    let local = if cfg.compare.local_sensitivity {
        let counted = Counted::new(&*model);
        let samples = initial_samples(&counted, cfg).stage("sampling")?;
        Some(local_sensitivity_with(&counted, &samples, cfg)?)
    } else {
        None
    };
    let (full, asm_fresh) = if cfg.compare.full_space {
        let full = full_space_with(&*model, asm.report.budget.effective_cost, cfg)?;
        let fresh = asm
            .surface
            .report(&full.test_points, &full.test_values, asm.report.budget);
        (Some(full), Some(fresh))
    } else {
        (None, None)
    };
    let outcome = ComparisonOutcome {
        asm,
        local,
        full,
        asm_fresh,
    };
    if let Some(dir) = &cfg.output_dir {
        write_comparison(dir, &outcome)?;
    }
    Ok(outcome)
}

fn write_comparison(dir: &Path, c: &ComparisonOutcome) -> Result<()> {
    write_run(dir, &c.asm)?;
    if let Some(l) = &c.local {
        l.report
            .write_errors_csv(BufWriter::new(File::create(dir.join("errors_local_sensitivity.csv"))?))?;
    }
    if let Some(f) = &c.full {
        f.report
            .write_errors_csv(BufWriter::new(File::create(dir.join("errors_full_space.csv"))?))?;
    }
    if let Some(r) = &c.asm_fresh {
        r.write_errors_csv(BufWriter::new(File::create(dir.join("errors_asm_fresh.csv"))?))?;
    }
    let summary = ComparisonSummary {
        asm: c.asm.report.summary.clone(),
        asm_budget: c.asm.report.budget,
        local_sensitivity: c
            .local
            .as_ref()
            .map(|l| (l.coordinates.clone(), l.report.summary.clone(), l.report.budget)),
        full_space: c.full.as_ref().map(|f| (f.report.summary.clone(), f.report.budget)),
        asm_on_full_space_test_set: c.asm_fresh.as_ref().map(|r| r.summary.clone()),
    };
    std::fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub epsilon: f64,
    /// `‖W1 - W̃1‖₂` after sign alignment.
    pub distance: f64,
    /// Mean squared error of the response surface built on `W̃`.
    pub mse_surface: f64,
    /// Mean squared error of the Monte Carlo surrogate built on `W̃`.
    pub mse_mc: f64,
    /// Mean squared gap between the two, the empirical `C₂δ`.
    pub c2delta: f64,
    pub bound_mc: f64,
    pub bound_surface: f64,
    pub mean_relative_error: f64,
}

/// Rebuild the surface on perturbed bases and compare empirical errors on
/// the initial samples with the perturbed-direction bounds.
pub fn run_perturbation_study(cfg: &PipelineConfig, epsilons: &[f64]) -> Result<Vec<PerturbationRow>> {
    let model = build_model(cfg)?;
    let asm = pipeline_with(&*model, cfg)?;
    let lambda = asm.subspace.eigenvalues().to_vec();
    let c1 = model.input_domain().poincare_constant();
    let test_mc = McSurrogateConfig::new(cfg.mc_samples, cfg.seeds.mc ^ TEST_MC_SALT)?;
    let (points, values) = (asm.samples.points(), asm.samples.values());
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let perturbed = perturb_subspace(&asm.subspace, eps, cfg.seeds.perturbation).stage("perturbation")?;
        let distance = subspace_distance(&asm.subspace.w1(), &perturbed.w1())?;
        let spectrum = Spectrum {
            values: lambda.clone(),
            n: cfg.n,
        };
        let surface = build_surface(&*model, perturbed, spectrum, asm.samples.sigma_hat2(), cfg)?;
        let report = surface.report(points, values, asm.report.budget);
        let mut mse_surface = 0.0;
        let mut mse_mc = 0.0;
        let mut c2delta = 0.0;
        for (j, (x, f)) in points.iter().zip(values).enumerate() {
            let tilde = report.errors[j].prediction;
            let hat = evaluate_fhat(&*model, &surface.domain, x, &test_mc.for_point(j)).stage("perturbation")?;
            mse_surface += (f - tilde).powi(2);
            mse_mc += (f - hat).powi(2);
            c2delta += (hat - tilde).powi(2);
        }
        let count = points.len() as f64;
        let (mse_surface, mse_mc, c2delta) = (mse_surface / count, mse_mc / count, c2delta / count);
        let inputs = BoundInputs::new(lambda.clone(), cfg.n, c1)?
            .with_samples(cfg.mc_samples)?
            .with_epsilon(eps)?;
        let bound_mc = bound_perturbed(&inputs, BoundKind::MonteCarlo);
        let bound_surface = bound_perturbed(&inputs.with_c2delta(c2delta)?, BoundKind::ResponseSurface);
        rows.push(PerturbationRow {
            epsilon: eps,
            distance,
            mse_surface,
            mse_mc,
            c2delta,
            bound_mc,
            bound_surface,
            mean_relative_error: report.summary.mean,
        });
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        write_perturbation_csv(&dir.join("perturbation.csv"), &rows)?;
    }
    Ok(rows)
}

pub fn write_perturbation_csv(path: &Path, rows: &[PerturbationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
