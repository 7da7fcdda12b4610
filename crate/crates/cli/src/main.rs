//! `rotoscat`: scattering features, feature selection and SVM classification
//! from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rotoscat::classifier::{accuracy, predict};
use rotoscat::datasets::write_manifest;
use rotoscat::formats::{read_basis, read_model, write_basis, write_model, FeatureFile};
use rotoscat::pipeline::{
    ablation_csv, ablation_variants, fit_model, fit_selection, load_split, reduce, run_ablation, run_experiment, transform_dataset,
    PipelineConfig, CACHE_DIR_ENV,
};
use rotoscat::scattering::{completeness_value, count_frames, enumerate_frames, ScatteringNetwork};
use rotoscat::validation::{invariant_checks, network_with_scaled_bank};

#[derive(Parser)]
#[command(name = "rotoscat", version, about = "Roto-translation scattering image classification")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute scattering features of every split and write them to a directory.
    Transform {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write each feature file as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Log-normalize training features and fit the selected basis.
    Select {
        #[command(flatten)]
        config: ConfigArgs,
        /// Training feature file.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Gaussian SVM on selected training features.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of a trained model on a feature file.
    Eval {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Write the key=value report here as well.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Transform, select, train and evaluate every split in one go.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the five translation/roto-translation configurations.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the planned configurations without computing anything.
        #[arg(long)]
        dry_run: bool,
        /// CSV table output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check filter-bank bounds, frame counts, covariance and contraction.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Random image pairs for the contraction check.
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        /// Multiply the band-pass filters by this factor before checking.
        #[arg(long, hide = true)]
        break_bank: Option<f64>,
    },
    /// Print the effective configuration and network dimensions.
    Info {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Flags mirroring the configuration file. A file given with `--config`
/// overrides them.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dataset kind.
    #[arg(long, value_parser = ["cifar10", "cifar100", "image-dir", "synthetic"])]
    dataset: Option<String>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Accept CIFAR directories with partial batches.
    #[arg(long)]
    no_strict_counts: bool,
    /// Class directories to skip (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long, value_parser = ["stretch", "crop"])]
    aspect: Option<String>,
    /// Class count of the synthetic dataset.
    #[arg(long)]
    synthetic_classes: Option<usize>,

    /// log2 of the image side.
    #[arg(long)]
    log_side: Option<u32>,
    /// Number of spatial scales J.
    #[arg(long)]
    max_scale: Option<u32>,
    /// Number of orientations L.
    #[arg(long)]
    angles: Option<usize>,
    /// Number of angular scales K.
    #[arg(long)]
    angular_scales: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: Option<u8>,
    /// Translation scattering instead of roto-translation.
    #[arg(long)]
    translation_only: bool,
    #[arg(long, value_parser = ["periodic", "mirror"])]
    boundary: Option<String>,
    #[arg(long, value_parser = ["yuv", "rgb", "gray"])]
    color: Option<String>,

    /// Skip orthogonal least squares selection.
    #[arg(long)]
    no_ols: bool,
    /// Total number of selected features.
    #[arg(long)]
    features: Option<usize>,
    /// Selected features per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Log floor relative to the median training coefficient.
    #[arg(long)]
    epsilon_relative: Option<f64>,

    /// SVM box constraint.
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long, value_parser = ["mean-norm", "mean-squared-norm"])]
    bandwidth: Option<String>,
    #[arg(long)]
    svm_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,

    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Feature cache directory.
    #[arg(long, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
}

fn set<T: Into<toml::Value>>(table: &mut toml::Table, section: &str, key: &str, value: Option<T>) {
    if let Some(v) = value {
        let entry = table.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = entry {
            t.insert(key.to_string(), v.into());
        }
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.to_string_lossy().into_owned())
}

fn int<T: TryInto<i64>>(v: Option<T>) -> Option<i64> {
    v.and_then(|v| v.try_into().ok())
}

impl ConfigArgs {
    fn flag_table(&self) -> toml::Table {
        let mut t = toml::Table::new();
        set(&mut t, "dataset", "kind", self.dataset.clone());
        set(&mut t, "dataset", "path", path_value(&self.data));
        set(&mut t, "dataset", "train_per_class", int(self.train_per_class));
        set(&mut t, "dataset", "test_per_class", int(self.test_per_class));
        set(&mut t, "dataset", "strict_counts", self.no_strict_counts.then_some(false));
        if !self.exclude.is_empty() {
            set(&mut t, "dataset", "exclude", Some(toml::Value::Array(self.exclude.iter().cloned().map(Into::into).collect())));
        }
        set(&mut t, "dataset", "aspect", self.aspect.clone());
        set(&mut t, "dataset", "synthetic_classes", int(self.synthetic_classes));

        set(&mut t, "scattering", "log_side", int(self.log_side));
        set(&mut t, "scattering", "max_scale", int(self.max_scale));
        set(&mut t, "scattering", "n_angles", int(self.angles));
        set(&mut t, "scattering", "angular_scales", int(self.angular_scales));
        set(&mut t, "scattering", "order", int(self.order));
        set(&mut t, "scattering", "roto", self.translation_only.then_some(false));
        set(&mut t, "scattering", "boundary", self.boundary.clone());
        set(&mut t, "scattering", "color", self.color.clone());

        set(&mut t, "selection", "ols", self.no_ols.then_some(false));
        set(&mut t, "selection", "features", int(self.features));
        set(&mut t, "selection", "per_class", int(self.per_class));
        set(&mut t, "selection", "epsilon_relative", self.epsilon_relative);

        set(&mut t, "svm", "c", self.svm_c);
        set(&mut t, "svm", "bandwidth", self.bandwidth.clone());
        set(&mut t, "svm", "tolerance", self.svm_tolerance);
        set(&mut t, "svm", "max_iterations", int(self.max_iterations));

        set(&mut t, "run", "seed", int(self.seed));
        set(&mut t, "run", "splits", int(self.splits));
        set(&mut t, "run", "threads", int(self.threads));
        set(&mut t, "run", "cache_dir", path_value(&self.cache_dir));
        t
    }

    /// Defaults, then flags, then the configuration file.
    fn resolve(&self) -> Result<PipelineConfig> {
        let flags = toml::to_string(&self.flag_table())?;
        let mut config = PipelineConfig::default().merge_toml(&flags)?;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config = config.merge_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        }
        if let Some(n) = config.run.threads {
            // Fails only if a pool already exists, which is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(config)
    }
}

fn write_report(text: &str, path: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(p) = path {
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn transform(config: &PipelineConfig, out: &Path, csv: bool) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), config.to_toml()?)?;
    for split in 0..config.run.splits {
        let (train_ds, test_ds) = load_split(config, split)?;
        write_manifest(&out.join(format!("manifest-{split}.csv")), &[("train", &train_ds), ("test", &test_ds)])?;
        for (name, ds) in [("train", &train_ds), ("test", &test_ds)] {
            let file = transform_dataset(ds, &config.scattering)?;
            let path = out.join(format!("{name}-{split}.bin"));
            file.write(&path)?;
            if csv {
                file.write_csv(&path.with_extension("csv"))?;
            }
            println!("{}: {} images x {} coefficients", path.display(), file.matrix.n_rows(), file.matrix.n_cols());
        }
    }
    Ok(())
}

fn validate(config: &PipelineConfig, pairs: usize, break_bank: Option<f64>) -> Result<bool> {
    let net_config = config.scattering.network_config();
    let network = match break_bank {
        Some(factor) => network_with_scaled_bank(net_config, factor)?,
        None => ScatteringNetwork::new(net_config)?,
    };
    println!("j  Q_j(closed form)  Q_j(enumerated)");
    let mut ok = true;
    for j in 1..=net_config.max_scale.max(6) {
        let q = count_frames(j, net_config.n_angles);
        let e = enumerate_frames(j, net_config.n_angles, net_config.angular_scales) as u64;
        ok &= q == e;
        println!("{j}  {q}  {e}");
    }
    for check in invariant_checks(&network, config.scattering.n_channels(), pairs, config.run.seed)? {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
        ok &= check.passed;
    }
    Ok(ok)
}

fn info(config: &PipelineConfig) -> Result<()> {
    let net = config.scattering.network_config();
    net.validate()?;
    let channels = config.scattering.n_channels();
    let paths = rotoscat::scattering::enumerate_paths(&net, channels);
    let per_order = |o: u8| paths.iter().filter(|p| p.order == o).count();
    let cells = net.grid_side() * net.grid_side();
    print!("{}", config.to_toml()?);
    println!("# image_side={} grid={}x{} channels={channels}", net.side(), net.grid_side(), net.grid_side());
    println!("# paths order0={} order1={} order2={}", per_order(0), per_order(1), per_order(2));
    println!("# coefficients total={} order0={} order1={} order2={}", net.output_dim(channels), per_order(0) * cells, per_order(1) * cells, per_order(2) * cells);
    println!("# completeness 2^-2J L^2 J^2 = {:.4}", completeness_value(net.max_scale, net.n_angles));
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Transform { config, out, csv } => transform(&config.resolve()?, &out, csv)?,
        Command::Select { config, train, out } => {
            let config = config.resolve()?;
            let file = FeatureFile::read(&train)?;
            let basis = fit_selection(&file, &config.selection)?;
            write_basis(&out, &basis)?;
            println!("selected={} truncated={}", basis.len(), basis.truncated());
        }
        Command::Train { config, train, basis, out } => {
            let config = config.resolve()?;
            let reduced = reduce(&FeatureFile::read(&train)?, &read_basis(&basis)?)?;
            let model = fit_model(&reduced, &config.svm)?;
            write_model(&out, &model)?;
            println!("support_vectors={} sigma2={:.6e}", model.n_support(), model.sigma2);
        }
        Command::Eval { test, basis, model, report } => {
            let reduced = reduce(&FeatureFile::read(&test)?, &read_basis(&basis)?)?;
            let model = read_model(&model)?;
            let predicted = predict(&model, &reduced)?;
            let acc = accuracy(&predicted, reduced.labels());
            write_report(&format!("accuracy={acc:.6}\nn_test={}\n", reduced.n_rows()), report.as_deref())?;
        }
        Command::Run { config, report } => {
            let report_text = run_experiment(&config.resolve()?, "run")?.to_key_values();
            write_report(&report_text, report.as_deref())?;
        }
        Command::Ablate { config, dry_run, out } => {
            let config = config.resolve()?;
            if dry_run {
                for (name, c) in ablation_variants(&config) {
                    println!("{name}: order={} roto={} ols={}", c.scattering.order, c.scattering.roto, c.selection.ols);
                }
                return Ok(ExitCode::SUCCESS);
            }
            let reports = run_ablation(&config)?;
            for r in &reports {
                print!("{}", r.to_key_values());
            }
            let table = ablation_csv(&reports);
            match out {
                Some(p) => fs::write(&p, table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Validate { config, pairs, break_bank } => {
            if !validate(&config.resolve()?, pairs, break_bank)? {
                eprintln!("validation failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Info { config } => info(&config.resolve()?)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<std::io::Error>()) {
                return ExitCode::from(3);
            }
            ExitCode::from(2)
        }
    }
}

