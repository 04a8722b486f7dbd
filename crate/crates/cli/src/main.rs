use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asm_core::domain::ReducedDomain;
use asm_core::kriging::{self, KrigingModel};
use asm_core::pipeline::{self, PipelineConfig};
use asm_core::surrogate::{write_training_csv, McSurrogateConfig};
use asm_core::{estimate_subspace, ActiveSubspace, Error, GradientSampleSet, Result};

#[derive(Parser)]
#[command(name = "asm", version, about = "Active subspace detection and kriging response surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration as JSON.
    DefaultConfig,
    /// Draw M inputs and record values and gradients.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the active subspace from a samples file.
    Subspace {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the design on the reduced domain.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        subspace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute training values on a design and fit the kriging surface.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        subspace: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        design: PathBuf,
        /// Directory receiving training.csv and model.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a fitted model at points from a CSV file (one point per row).
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Treat the points as full-space inputs and project them with this subspace.
        #[arg(long)]
        subspace: Option<PathBuf>,
    },
    /// Run the whole algorithm and write the run directory.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare against the local-sensitivity and full-space baselines.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the surface on perturbed subspaces and tabulate errors and bounds.
    PerturbStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2")]
        epsilons: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    if out.is_some() {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn read_samples(path: &Path) -> Result<GradientSampleSet> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    GradientSampleSet::read_csv(BufReader::new(file))
}

fn read_subspace(path: &Path) -> Result<ActiveSubspace> {
    ActiveSubspace::from_json(&read_to_string(path)?)
}

fn print_summary(label: &str, report: &pipeline::ErrorReport) {
    let s = &report.summary;
    println!(
        "{label:<22} mean {:.4e}  median {:.4e}  q90 {:.4e}  cost {} (values {}, gradients {})",
        s.mean, s.median, s.q90, report.budget.effective_cost, report.budget.value_evals, report.budget.gradient_evals
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DefaultConfig => println!("{}", PipelineConfig::default().to_json()?),
        Command::Sample { config, out } => {
            let cfg = load_config(&config, None)?;
            let model = cfg.model.build()?;
            let samples = pipeline::initial_samples(&*model, &cfg)?;
            samples.write_csv(BufWriter::new(File::create(&out)?))?;
            println!("wrote {} samples to {}", samples.len(), out.display());
        }
        Command::Subspace { samples, n, out } => {
            let samples = read_samples(&samples)?;
            let subspace = estimate_subspace(&samples, n)?;
            std::fs::write(&out, subspace.to_json()?)?;
            print!("{}", pipeline::eigenvalue_table(&subspace, subspace.m()));
        }
        Command::Design { config, subspace, out } => {
            let cfg = load_config(&config, None)?;
            let model = cfg.model.build()?;
            let domain = ReducedDomain::new(model.input_domain(), read_subspace(&subspace)?)?;
            let design = pipeline::make_design(&domain, &cfg.design)?;
            pipeline::write_design_csv(&out, &design)?;
            println!("wrote {} design points to {}", design.len(), out.display());
        }
        Command::Fit {
            config,
            subspace,
            samples,
            design,
            out,
        } => {
            let cfg = load_config(&config, None)?;
            let model = cfg.model.build()?;
            let subspace = read_subspace(&subspace)?;
            let samples = read_samples(&samples)?;
            let design = pipeline::read_points_csv(&design)?;
            let input = model.input_domain();
            let domain = ReducedDomain::new(input, subspace.clone())?;
            let mc = McSurrogateConfig::new(cfg.mc_samples, cfg.seeds.mc)?;
            let (training, _) = pipeline::training_values(&*model, &domain, &design, &mc)?;
            let fitted = kriging::fit(
                &design,
                &training,
                subspace.eigenvalues(),
                subspace.n(),
                samples.sigma_hat2(),
                &input,
            )?;
            std::fs::create_dir_all(&out)?;
            write_training_csv(&design, &training, BufWriter::new(File::create(out.join("training.csv"))?))?;
            std::fs::write(out.join("model.json"), fitted.to_json()?)?;
            let h = fitted.hyperparameters();
            println!(
                "alpha {:.6e}  sigma2 {:.6e}  eta2 {:.6e}  lengths {:?}",
                h.alpha, h.sigma2, h.eta2, h.lengths
            );
        }
        Command::Predict {
            model,
            points,
            subspace,
        } => {
            let fitted = KrigingModel::from_json(&read_to_string(&model)?)?;
            let points = pipeline::read_points_csv(&points)?;
            let projector = match subspace {
                Some(p) => {
                    let s = read_subspace(&p)?;
                    Some(ReducedDomain::new(asm_core::InputDomain::gaussian(s.m()), s)?)
                }
                None => None,
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "mean,variance")?;
            for p in &points {
                let y = match &projector {
                    Some(d) if p.len() == d.m() => d.project(p),
                    Some(d) => return Err(Error::Config(format!("points must have {} columns", d.m()))),
                    None => p.clone(),
                };
                if y.len() != fitted.n() {
                    return Err(Error::Config(format!("points must have {} columns", fitted.n())));
                }
                let (mean, var) = fitted.predict(&y);
                writeln!(out, "{mean},{var}")?;
            }
        }
        Command::Pipeline { config, out } => {
            let cfg = load_config(&config, out)?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            print!("{}", pipeline::eigenvalue_table(&outcome.subspace, 10));
            print_summary("active subspace", &outcome.report);
            if let Some(dir) = &cfg.output_dir {
                println!("wrote {}", dir.display());
            }
        }
        Command::Compare { config, out } => {
            let cfg = load_config(&config, out)?;
            let c = pipeline::run_comparison(&cfg)?;
            print_summary("active subspace", &c.asm.report);
            if let Some(l) = &c.local {
                let coords: Vec<usize> = l.coordinates.iter().map(|i| i + 1).collect();
                print_summary(&format!("coordinates {coords:?}"), &l.report);
            }
            if let (Some(f), Some(fresh)) = (&c.full, &c.asm_fresh) {
                print_summary("full space", &f.report);
                print_summary("active subspace (fresh)", fresh);
            }
        }
        Command::PerturbStudy { config, epsilons, out } => {
            let cfg = load_config(&config, out)?;
            let rows = pipeline::run_perturbation_study(&cfg, &epsilons)?;
            println!(
                "{:>8} {:>10} {:>12} {:>12} {:>12} {:>12}",
                "epsilon", "distance", "mse_surface", "mse_mc", "bound_mc", "bound_surf"
            );
            for r in rows {
                println!(
                    "{:>8} {:>10.3e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                    r.epsilon, r.distance, r.mse_surface, r.mse_mc, r.bound_mc, r.bound_surface
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
