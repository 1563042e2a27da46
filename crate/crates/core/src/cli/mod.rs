//! `zsoftmax` command-line driver.
//!
//! ```text
//! zsoftmax <command> [--config FILE] [--<key> VALUE]... [command flags]
//!
//! commands:
//!   synth              write attributes.csv + train/test_seen/test_unseen.zsfb
//!   train              write model.zsfm + history.csv
//!   eval [--zsl]       print a JSON metrics record (also metrics.jsonl)
//!   sweep --param q|tau --values v1,v2,...
//!   cv --grid key=v1,v2 [--grid ...]
//!   gradcheck [--instances N] [--inject-bug]
//!   dump-softlabels    write softlabels.csv
//! ```
//!
//! Exit codes: 0 success, 1 failed check, 2 usage/config error, 3 I/O or format error.

mod config;

pub use config::{RunConfig, KEYS};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, Command};

use crate::data::{l2_normalize, synth_generate, AttributeMatrix, FeatureSet};
use crate::error::Error;
use crate::eval::{evaluate_gzsl, evaluate_zsl, sweep, DataSplits, SweepParam};
use crate::gradcheck::{run_gradcheck, GradCheckConfig};
use crate::model::{load_checkpoint, save_checkpoint};
use crate::numeric::Activation;
use crate::softlabel::build_table;
use crate::train::{cross_validate, train, GridSpec, ValidationSets};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub enum CliError {
    /// Help or version text; not a failure.
    Help(String),
    Usage(String),
    CheckFailed(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                Error::Io(_) | Error::Format(_) | Error::Parse { .. } | Error::DimensionMismatch { .. } => 3,
                Error::NonFiniteLoss { .. } => 1,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Help(m) => write!(f, "{m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Default)]
struct Invocation {
    command: String,
    config: RunConfig,
    zsl: bool,
    param: Option<String>,
    values: Option<String>,
    instances: Option<usize>,
    inject_bug: bool,
    grid: Vec<(String, String)>,
}

fn command() -> Command {
    let mut root = Command::new("zsoftmax")
        .about("Soft-labeled softmax classifier for generalized zero-shot learning")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("flat `key = value` config file"),
        );
    for &key in KEYS {
        let dashed = key.replace('_', "-");
        root = root.arg(
            Arg::new(key)
                .long(dashed)
                .alias(key)
                .value_name("VALUE")
                .global(true)
                .help_heading("Config overrides"),
        );
    }
    let param = Arg::new("param").long("param").value_name("q|tau");
    let values = Arg::new("values").long("values").value_name("V1,V2,...");
    root.subcommand(Command::new("synth").about("write attributes.csv and train/test_seen/test_unseen.zsfb"))
        .subcommand(Command::new("train").about("write the checkpoint and history.csv"))
        .subcommand(
            Command::new("eval")
                .about("print GZSL metrics as a JSON line")
                .arg(Arg::new("zsl").long("zsl").action(ArgAction::SetTrue).help("also report ZSL accuracy")),
        )
        .subcommand(Command::new("sweep").about("retrain over q or tau values").arg(param).arg(values))
        .subcommand(
            Command::new("cv").about("grid cross-validation on pseudo-unseen classes").arg(
                Arg::new("grid")
                    .long("grid")
                    .value_name("KEY=V1,V2")
                    .action(ArgAction::Append),
            ),
        )
        .subcommand(
            Command::new("gradcheck")
                .about("compare analytic and finite-difference gradients")
                .arg(
                    Arg::new("instances")
                        .long("instances")
                        .value_name("N")
                        .value_parser(clap::value_parser!(usize)),
                )
                .arg(Arg::new("inject-bug").long("inject-bug").action(ArgAction::SetTrue)),
        )
        .subcommand(Command::new("dump-softlabels").about("write softlabels.csv"))
}

fn parse_args(args: &[String]) -> CliResult<Invocation> {
    let matches = command()
        .try_get_matches_from(std::iter::once("zsoftmax".to_string()).chain(args.iter().cloned()))
        .map_err(|e| match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
            _ => CliError::Usage(e.to_string().trim_start_matches("error: ").trim_end().to_string()),
        })?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut config = match matches.get_one::<String>("config") {
        Some(p) => RunConfig::from_file(Path::new(p))?,
        None => RunConfig::default(),
    };
    for &key in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            config.set(key, v, "command line")?;
        }
    }
    config.validate()?;
    let flag = |id: &str| sub.try_get_one::<bool>(id).ok().flatten().copied().unwrap_or(false);
    let text = |id: &str| sub.try_get_one::<String>(id).ok().flatten().cloned();
    let grid = match sub.try_get_many::<String>("grid").ok().flatten() {
        Some(items) => items
            .map(|g| {
                g.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| CliError::Usage(format!("--grid expects key=v1,v2, got `{g}`")))
            })
            .collect::<CliResult<_>>()?,
        None => Vec::new(),
    };
    Ok(Invocation {
        command: name.to_string(),
        config,
        zsl: flag("zsl"),
        param: text("param"),
        values: text("values"),
        instances: sub.try_get_one::<usize>("instances").ok().flatten().copied(),
        inject_bug: flag("inject-bug"),
        grid,
    })
}

/// Runs one invocation (`args` excludes the program name) and returns the exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(args, out, err) {
        Ok(()) => 0,
        Err(CliError::Help(text)) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let inv = parse_args(args)?;
    match inv.command.as_str() {
        "synth" => cmd_synth(&inv.config, err),
        "train" => cmd_train(&inv.config, err),
        "eval" => cmd_eval(&inv.config, inv.zsl, out, err),
        "sweep" => cmd_sweep(&inv.config, inv.param.as_deref(), inv.values.as_deref(), out, err),
        "cv" => cmd_cv(&inv.config, &inv.grid, out, err),
        "gradcheck" => cmd_gradcheck(&inv.config, inv.instances, inv.inject_bug, out),
        "dump-softlabels" => cmd_dump_softlabels(&inv.config, err),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

fn require(path: &Path, key: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Lib(Error::Config {
            key: key.into(),
            location: "config".into(),
            msg: format!("input file {} does not exist", path.display()),
        }))
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(())
}

fn load_attrs(cfg: &RunConfig) -> CliResult<AttributeMatrix> {
    let path = cfg.attributes();
    require(&path, "attributes_path")?;
    Ok(AttributeMatrix::load(&path)?)
}

fn load_raw(path: PathBuf, key: &str) -> CliResult<FeatureSet> {
    require(&path, key)?;
    Ok(FeatureSet::load(&path)?)
}

fn load_set(cfg: &RunConfig, path: PathBuf, key: &str) -> CliResult<FeatureSet> {
    let set = load_raw(path, key)?;
    Ok(if cfg.train.l2_normalize {
        l2_normalize(&set)
    } else {
        set
    })
}

pub fn cmd_synth(cfg: &RunConfig, err: &mut dyn Write) -> CliResult<()> {
    let spec = cfg.synth_spec();
    let bench = synth_generate(&spec)?;
    ensure_out_dir(cfg)?;
    bench.attributes.save(cfg.attributes())?;
    bench.train.save(cfg.train_file())?;
    bench.test_seen.save(cfg.test_seen_file())?;
    bench.test_unseen.save(cfg.test_unseen_file())?;
    writeln!(
        err,
        "synth: a={} d={} C_S={} C_U={} train={} test_seen={} test_unseen={} -> {}",
        spec.dim_a,
        spec.dim_d,
        spec.num_seen,
        spec.num_unseen,
        bench.train.len(),
        bench.test_seen.len(),
        bench.test_unseen.len(),
        cfg.out_dir.display()
    )?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, err: &mut dyn Write) -> CliResult<()> {
    let attrs = load_attrs(cfg)?;
    let train_set = load_raw(cfg.train_file(), "train_path")?;
    // `train` applies l2 normalization to these itself
    let val = match (&cfg.val_seen_path, &cfg.val_unseen_path) {
        (Some(s), Some(u)) => Some((load_raw(s.clone(), "val_seen_path")?, load_raw(u.clone(), "val_unseen_path")?)),
        _ => None,
    };
    let val_sets = val.as_ref().map(|(s, u)| ValidationSets { seen: s, unseen: u });
    let (params, history) = train(&cfg.train, &attrs, &train_set, val_sets)?;
    ensure_out_dir(cfg)?;
    save_checkpoint(&params, cfg.checkpoint())?;
    fs::write(cfg.out_dir.join("history.csv"), history.to_csv())?;
    writeln!(
        err,
        "train: {} epochs, loss {:.6} -> {:.6}; checkpoint {}",
        history.epochs.len(),
        history.first_loss().unwrap_or(f64::NAN),
        history.final_loss().unwrap_or(f64::NAN),
        cfg.checkpoint().display()
    )?;
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, zsl: bool, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let ckpt = cfg.checkpoint();
    require(&ckpt, "checkpoint_path")?;
    let params = load_checkpoint(&ckpt)?;
    let seen = load_set(cfg, cfg.test_seen_file(), "test_seen_path")?;
    let unseen = load_set(cfg, cfg.test_unseen_file(), "test_unseen_path")?;
    for set in [&seen, &unseen] {
        if set.dim() != params.input_dim() || set.num_classes() > params.num_classes() {
            return Err(CliError::Lib(Error::DimensionMismatch {
                op: "eval: checkpoint vs test data",
                left: (params.input_dim(), params.num_classes()),
                right: (set.dim(), set.num_classes()),
            }));
        }
    }
    let metrics = evaluate_gzsl(&params, &seen, &unseen)?;
    let mut record = metrics.to_json();
    if zsl {
        record["a_zsl"] = serde_json::json!(evaluate_zsl(&params, &unseen)?);
    }
    let line = record.to_string();
    writeln!(out, "{line}")?;
    ensure_out_dir(cfg)?;
    fs::write(cfg.out_dir.join("metrics.jsonl"), format!("{line}\n"))?;
    writeln!(
        err,
        "eval: A_S={:.4} A_U={:.4} A_H={:.4}",
        metrics.a_seen, metrics.a_unseen, metrics.a_harmonic
    )?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(key: &str, values: &str) -> CliResult<Vec<T>> {
    values
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{key}: cannot parse `{v}`")))
        })
        .collect()
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    param: Option<&str>,
    values: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let param: SweepParam = param
        .ok_or_else(|| CliError::Usage("sweep needs --param q|tau".into()))?
        .parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let values: Vec<f64> = parse_list(
        "--values",
        values.ok_or_else(|| CliError::Usage("sweep needs --values v1,v2,...".into()))?,
    )?;
    let attrs = load_attrs(cfg)?;
    let train_set = load_raw(cfg.train_file(), "train_path")?;
    // `sweep` applies the configured normalization
    let seen = load_raw(cfg.test_seen_file(), "test_seen_path")?;
    let unseen = load_raw(cfg.test_unseen_file(), "test_unseen_path")?;
    let data = DataSplits {
        train: &train_set,
        test_seen: &seen,
        test_unseen: &unseen,
    };
    let result = sweep(&cfg.train, &attrs, data, param, &values).map_err(|e| match e {
        Error::InvalidParameter(m) | Error::Config { msg: m, .. } => CliError::Usage(m),
        other => CliError::Lib(other),
    })?;
    ensure_out_dir(cfg)?;
    let path = cfg.out_dir.join(format!("sweep_{param}.csv"));
    fs::write(&path, result.to_csv())?;
    write!(out, "{}", result.to_csv())?;
    let best = result.best_row();
    writeln!(
        err,
        "sweep: best {param}={} with A_S={:.4} A_U={:.4} A_H={:.4}; wrote {}",
        best.value,
        best.metrics.a_seen,
        best.metrics.a_unseen,
        best.metrics.a_harmonic,
        path.display()
    )?;
    Ok(())
}

pub fn cmd_cv(cfg: &RunConfig, grid: &[(String, String)], out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let mut spec = GridSpec::default();
    for (key, values) in grid {
        match key.as_str() {
            "tau" => spec.tau = parse_list(key, values)?,
            "q" => spec.q = parse_list(key, values)?,
            "batch_size" => spec.batch_size = parse_list(key, values)?,
            "hidden_size" => spec.hidden_size = parse_list(key, values)?,
            "activation" => spec.activation = parse_list::<Activation>(key, values)?,
            other => {
                return Err(CliError::Usage(format!(
                    "--grid supports tau, q, batch_size, hidden_size, activation; got `{other}`"
                )))
            }
        }
    }
    let configs = spec.expand(&cfg.train);
    let attrs = load_attrs(cfg)?;
    let train_set = load_raw(cfg.train_file(), "train_path")?;
    let cv = cross_validate(&configs, &attrs, &train_set, &cfg.val_split())?;
    let mut csv = String::from("index,q,tau,hidden_size,activation,batch_size,a_seen,a_unseen,a_harmonic\n");
    for (i, (c, m)) in configs.iter().zip(&cv.metrics).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            c.q, c.tau, c.hidden_size, c.activation, c.batch_size, m.a_seen, m.a_unseen, m.a_harmonic
        ));
    }
    ensure_out_dir(cfg)?;
    fs::write(cfg.out_dir.join("cv.csv"), &csv)?;
    write!(out, "{csv}")?;
    let b = &cv.best;
    writeln!(
        err,
        "cv: best #{} q={} tau={} hidden_size={} activation={} batch_size={} (validation A_H={:.4})",
        cv.best_index, b.q, b.tau, b.hidden_size, b.activation, b.batch_size, cv.metrics[cv.best_index].a_harmonic
    )?;
    Ok(())
}

pub fn cmd_gradcheck(cfg: &RunConfig, instances: Option<usize>, inject_bug: bool, out: &mut dyn Write) -> CliResult<()> {
    let gc = GradCheckConfig {
        seed: cfg.train.seed,
        instances: instances.unwrap_or(GradCheckConfig::default().instances),
        inject_fault: inject_bug,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&gc)?;
    for (act, e) in &report.per_activation {
        writeln!(out, "{act}: max_rel_error={e:e}")?;
    }
    writeln!(out, "max_rel_error={:e}", report.max_rel_error)?;
    if report.passes(GRADCHECK_TOLERANCE) {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "max relative gradient error {:e} exceeds {GRADCHECK_TOLERANCE:e}",
            report.max_rel_error
        )))
    }
}

pub fn cmd_dump_softlabels(cfg: &RunConfig, err: &mut dyn Write) -> CliResult<()> {
    let attrs = load_attrs(cfg)?;
    let table = build_table(&attrs, &cfg.train.soft_labels()?)?;
    ensure_out_dir(cfg)?;
    let path = cfg.out_dir.join("softlabels.csv");
    fs::write(&path, table.to_csv(&attrs))?;
    writeln!(
        err,
        "dump-softlabels: {} rows ({} q={} tau={}) -> {}",
        table.num_seen(),
        cfg.train.mode,
        cfg.train.q,
        cfg.train.tau,
        path.display()
    )?;
    Ok(())
}
