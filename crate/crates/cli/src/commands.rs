use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use akws_core::features::{save_features, write_manifest, Manifest, ManifestTask, MfccInfo};
use akws_core::harness::{
    oracle_check as check, prepare, read_grid_csv, run_prepared, split_tasks, write_grid_csv, DataPool, Hyper,
    PreparedRun, ResultsDocument, TaskSplit,
};
use akws_core::Error;
use anyhow::Context;

use crate::config::{ConfigError, DataSource, RunConfig, SplitConfig, SynthConfig};
use crate::{GenArgs, GlobalArgs, MetricsArgs, OracleArgs, SourceArgs};

/// Oracle tolerance on the relative Frobenius deviation of the weights.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

pub enum Failure {
    Config(ConfigError),
    Input(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<ExitCode, Failure>;

/// Config file (or defaults) with flag overrides applied, then validated.
fn effective_config(global: &GlobalArgs, source: Option<&SourceArgs>) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(gamma) = global.gamma {
        cfg.gamma = gamma;
    }
    if let Some(e) = global.expansion {
        cfg.expansion = e as usize;
    }
    if let Some(a) = global.activation {
        cfg.activation = a.into();
    }
    if let Some(m) = source.and_then(|s| s.manifest.clone()) {
        cfg.data = DataSource::Manifest(m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<(DataPool, TaskSplit), Failure> {
    let seeds = cfg.seeds();
    match &cfg.data {
        DataSource::Synth(s) => {
            let pool = DataPool::from_synth(&s.spec(seeds.data), s.test_fraction).context("generating data")?;
            let (base, steps) = cfg.split.layout(s.classes)?;
            let split = split_tasks(&pool.classes(), base, steps, cfg.split.per_step, seeds.split)
                .context("splitting classes")?;
            Ok((pool, split))
        }
        DataSource::Manifest(path) => DataPool::from_manifest(path).map_err(|e| match e {
            Error::Io { .. } | Error::Parse { .. } | Error::Data { .. } | Error::Manifest(_) => {
                Failure::Input(format!("manifest {}: {e}", path.display()))
            }
            other => Failure::Runtime(anyhow::Error::new(other)),
        }),
    }
}

fn prepared_run(cfg: &RunConfig) -> Result<(PreparedRun, TaskSplit), Failure> {
    let (pool, split) = load_data(cfg)?;
    let hyper = Hyper {
        gamma: cfg.gamma,
        expansion_size: cfg.expansion,
        activation: cfg.activation,
        expansion_seed: cfg.seeds().expansion,
        extractor: cfg.pretrain(),
    };
    let prepared = prepare(&pool, &split, &hyper).map_err(|e| match e {
        Error::InvalidExpansionSize { .. } => Failure::Config(ConfigError {
            path: "expansion".into(),
            message: e.to_string(),
        }),
        other => Failure::Runtime(anyhow::Error::new(other).context("preparing features")),
    })?;
    Ok((prepared, split))
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)
}

pub fn gen(global: &GlobalArgs, args: &GenArgs) -> CmdResult {
    let synth = SynthConfig {
        classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        separation: args.separation,
        noise: args.noise,
        test_fraction: args.test_fraction,
    };
    let cfg = RunConfig {
        seed: global.seed.unwrap_or(0),
        data: DataSource::Synth(synth),
        split: SplitConfig {
            base: args.base,
            per_step: args.per_step,
        },
        extractor: None,
        expansion: args.dim + 1,
        ..RunConfig::default()
    };
    cfg.validate()?;
    let (pool, split) = load_data(&cfg)?;
    create_out(&global.out)?;

    let mut tasks = Vec::with_capacity(split.num_tasks());
    for (id, classes) in split.tasks().enumerate() {
        let train = format!("task_{id:02}_train.csv");
        let test = format!("task_{id:02}_test.csv");
        for (name, ds) in [(&train, &pool.train), (&test, &pool.test)] {
            let path = global.out.join(name);
            save_features(&ds.filter_classes(classes), &path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        tasks.push(ManifestTask {
            id,
            classes: classes.to_vec(),
            train: train.into(),
            test: test.into(),
        });
    }
    let manifest_path = global.out.join("manifest.json");
    write_manifest(
        &Manifest {
            mfcc: MfccInfo::default(),
            tasks,
        },
        &manifest_path,
    )
    .with_context(|| format!("writing {}", manifest_path.display()))?;
    println!("{}", manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn run(global: &GlobalArgs, args: &SourceArgs) -> CmdResult {
    let cfg = effective_config(global, Some(args))?;
    let (prepared, split) = prepared_run(&cfg)?;
    let outcome = run_prepared(&prepared).context("running experiment")?;
    create_out(&global.out)?;

    let config_json = serde_json::to_value(&cfg).context("serializing config")?;
    let doc = ResultsDocument::new(config_json, &outcome, &split);
    doc.write(&global.out.join("results.json")).context("writing results.json")?;
    write_grid_csv(&outcome.accuracy, &global.out.join("grid.csv")).context("writing grid.csv")?;
    outcome
        .snapshot
        .write(&global.out.join("snapshot.akws"))
        .context("writing snapshot.akws")?;

    let mut line = format!("ACC={} BWT={} TT={}", doc.acc, doc.bwt, doc.tt_mean);
    if !doc.bwt_defined {
        line.push_str(" BWT_DEFINED=false");
    }
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

pub fn oracle_check(global: &GlobalArgs, args: &OracleArgs) -> CmdResult {
    let cfg = effective_config(global, Some(&args.source))?;
    if let Some(scale) = args.inject_noise {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Failure::Config(ConfigError {
                path: "inject_noise".into(),
                message: "must be a non-negative number".into(),
            }));
        }
    }
    let (prepared, _) = prepared_run(&cfg)?;
    let report = check(&prepared, ORACLE_TOLERANCE, args.inject_noise).context("running oracle check")?;
    for p in &report.prefixes {
        println!(
            "prefix={} weight_deviation={:e} afam_deviation={:e} agreement={}/{}",
            p.prefix,
            p.weight_deviation,
            p.afam_deviation,
            p.samples - p.disagreements,
            p.samples
        );
    }
    if report.passed {
        println!("PASS max_deviation={:e} tolerance={:e}", report.max_deviation, report.tolerance);
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "FAIL worst_prefix={} max_deviation={:e} tolerance={:e}",
            report.worst_prefix, report.max_deviation, report.tolerance
        );
        Ok(ExitCode::from(1))
    }
}

pub fn metrics(args: &MetricsArgs) -> CmdResult {
    let grid = read_grid_csv(&args.grid).map_err(|e| Failure::Input(format!("{}: {e}", args.grid.display())))?;
    let acc = grid
        .acc()
        .map_err(|e| Failure::Input(format!("{}: {e}", args.grid.display())))?;
    let bwt = grid.bwt();
    let mut line = format!("ACC={acc} BWT={}", bwt.value);
    if !bwt.defined {
        line.push_str(" BWT_DEFINED=false");
    }
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}
