//! Command-line front end.
//!
//! Files written by `analyze` (all CSV with a header row):
//!
//! * `monthly_hist.csv`: `month,checkins`, one row per calendar month.
//! * `category_popularity.csv`: `category,month,share`, share of that month's
//!   check-ins for each of the most popular categories.
//! * `variance_extremes.csv`: `group,end,rank,owner,variance,total_count,shares`
//!   where `group` is `user` or `category`, `end` is `least` or `most`, and
//!   `shares` is the `;`-joined monthly share series.
//! * `single_multiple.csv`: `user_id,single,multiple` check-in counts.
//! * `correlations.json`: Spearman coefficients and the dataset summary.
//!
//! `train` writes `run-<r>/{model.ckpt,trace.csv,timings.csv}` per run and
//! appends one JSON line to `manifest.jsonl`. Run `r` (1-based) uses seed
//! `seed + r - 1` unless `--seeds` lists them explicitly.
//!
//! `evaluate` writes `report.json`, `report.txt` and, with `--per-user`,
//! `per_user.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    build_interactions, chronological_split, filter_min_activity, parse_checkins_from, Dataset, InputFormat,
    SplitDataset, SplitRatios,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, recommend, EvalOptions};
use crate::fsutil::write_atomic;
use crate::model::{Checkpoint, Normalizer};
use crate::temporal::{analysis_report, regularizer_vectors, AnalysisOptions, AnalysisReport};
use crate::train::{select_hyperparameters, train, Mode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jtcr", version, about = "Two-phase collaborative ranking for POI recommendation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Check-in file: user, POI, timestamp, latitude, longitude[, category].
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Field delimiter; inferred from the file extension when omitted.
    #[arg(long, global = true)]
    pub format: Option<InputFormat>,
    /// Drop users and POIs with fewer check-ins, repeatedly.
    #[arg(long, global = true, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_count: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset statistics and the series behind them.
    Analyze,
    Train(TrainArgs),
    Evaluate(EvaluateArgs),
    /// Print top-k POIs for the given users.
    Recommend(RecommendArgs),
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// TOML file with any training settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// joint, phase1, novar or nogeo.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// pair_count, positives, negatives or one.
    #[arg(long)]
    pub normalizer: Option<Normalizer>,
    #[arg(long)]
    pub neg_samples: Option<usize>,
    /// Restrict each user's irrelevant POIs to this radius around their visits.
    #[arg(long)]
    pub neighborhood_km: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Explicit per-run seeds; overrides --runs.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Candidate values for validation-based selection.
    #[arg(long, value_delimiter = ',')]
    pub grid_d: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub grid_gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid_lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid_alpha: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub include_train_pois: bool,
    #[arg(long)]
    pub per_user: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub users: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match thread_pool() {
        Ok(Some(pool)) => pool.install(|| dispatch(&cli)),
        Ok(None) => dispatch(&cli),
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var("JTCR_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("JTCR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Analyze => cmd_analyze(&cli.global),
        Command::Train(a) => cmd_train(&cli.global, a),
        Command::Evaluate(a) => cmd_evaluate(&cli.global, a),
        Command::Recommend(a) => cmd_recommend(&cli.global, a),
    }
}

struct Loaded {
    path: PathBuf,
    digest: String,
    dataset: Dataset,
}

fn load_input(g: &GlobalArgs) -> Result<Loaded> {
    let path = g
        .input
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--input is required".into()))?;
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let format = g.format.unwrap_or_else(|| infer_format(&path));
    let raw = parse_checkins_from(&bytes[..], format)?;
    let dataset = filter_min_activity(&raw, g.min_count as usize);
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no check-ins left after filtering {} with min count {}",
            path.display(),
            g.min_count
        )));
    }
    Ok(Loaded {
        digest: hex::encode(Sha256::digest(&bytes)),
        path,
        dataset,
    })
}

fn infer_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => InputFormat::Tsv,
        _ => InputFormat::Csv,
    }
}

fn out_path(g: &GlobalArgs, name: impl AsRef<Path>) -> Result<PathBuf> {
    std::fs::create_dir_all(&g.out_dir).map_err(|e| Error::io(&g.out_dir, e))?;
    Ok(g.out_dir.join(name))
}

fn csv_bytes<R, F>(header: &[&str], rows: R, mut fill: F) -> Result<Vec<u8>>
where
    R: IntoIterator,
    F: FnMut(R::Item) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(fill(row)).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn cmd_analyze(g: &GlobalArgs) -> Result<()> {
    let loaded = load_input(g)?;
    let report = analysis_report(&loaded.dataset, &AnalysisOptions::default());
    let files = analysis_files(&report)?;
    for (name, bytes) in &files {
        write_atomic(&out_path(g, name)?, bytes)?;
    }
    println!("{}", report.summary);
    Ok(())
}

fn analysis_files(report: &AnalysisReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let hist = csv_bytes(
        &["month", "checkins"],
        report.months.iter().zip(&report.monthly_totals),
        |(m, c)| vec![m.to_string(), c.to_string()],
    )?;
    let popularity = csv_bytes(
        &["category", "month", "share"],
        report
            .category_popularity
            .iter()
            .flat_map(|(cat, shares)| report.months.iter().zip(shares).map(move |(m, s)| (cat, m, s))),
        |(cat, m, s)| vec![cat.clone(), m.to_string(), s.to_string()],
    )?;
    let groups = [
        ("user", "least", &report.least_variant_users),
        ("user", "most", &report.most_variant_users),
        ("category", "least", &report.least_variant_categories),
        ("category", "most", &report.most_variant_categories),
    ];
    let extremes = csv_bytes(
        &["group", "end", "rank", "owner", "variance", "total_count", "shares"],
        groups
            .iter()
            .flat_map(|(group, end, list)| list.iter().enumerate().map(move |(r, e)| (*group, *end, r + 1, e))),
        |(group, end, rank, e)| {
            let shares: Vec<String> = e.shares.iter().map(f64::to_string).collect();
            vec![
                group.to_string(),
                end.to_string(),
                rank.to_string(),
                e.owner.clone(),
                e.variance.to_string(),
                e.total_count.to_string(),
                shares.join(";"),
            ]
        },
    )?;
    let mix = csv_bytes(&["user_id", "single", "multiple"], &report.user_mix, |u| {
        vec![u.user_id.clone(), u.single.to_string(), u.multiple.to_string()]
    })?;
    #[derive(Serialize)]
    struct CorrelationFile<'a> {
        #[serde(flatten)]
        correlations: &'a crate::temporal::Correlations,
        summary: &'a crate::temporal::DatasetSummary,
    }
    let mut json = serde_json::to_vec_pretty(&CorrelationFile {
        correlations: &report.correlations,
        summary: &report.summary,
    })?;
    json.push(b'\n');
    Ok(vec![
        ("monthly_hist.csv", hist),
        ("category_popularity.csv", popularity),
        ("variance_extremes.csv", extremes),
        ("single_multiple.csv", mix),
        ("correlations.json", json),
    ])
}

/// Defaults, then the TOML file, then flags.
pub fn resolve_config(g: &GlobalArgs, a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident <- $flag:expr),* $(,)?) => {
            $(if let Some(v) = $flag { cfg.$field = v; })*
        };
    }
    apply!(
        d <- a.d,
        gamma <- a.gamma,
        lambda <- a.lambda,
        alpha <- a.alpha,
        epsilon <- a.epsilon,
        max_iter <- a.max_iter,
        mode <- a.mode,
        normalizer <- a.normalizer,
        seed <- g.seed,
    );
    if a.neg_samples.is_some() {
        cfg.negative_samples = a.neg_samples;
    }
    if let Some(radius_km) = a.neighborhood_km {
        cfg.universe = crate::data::CandidateUniverse::PerUserNeighborhood { radius_km };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_seeds(cfg: &TrainConfig, a: &TrainArgs) -> Result<Vec<u64>> {
    if !a.seeds.is_empty() {
        return Ok(a.seeds.clone());
    }
    if a.runs == 0 {
        return Err(Error::InvalidArgument("--runs must be at least 1".into()));
    }
    Ok((0..a.runs as u64).map(|r| cfg.seed.wrapping_add(r)).collect())
}

fn grid(base: &TrainConfig, a: &TrainArgs) -> Vec<TrainConfig> {
    fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
        if values.is_empty() {
            vec![base]
        } else {
            values.to_vec()
        }
    }
    let mut out = Vec::new();
    for &d in &axis(&a.grid_d, base.d) {
        for &gamma in &axis(&a.grid_gamma, base.gamma) {
            for &lambda in &axis(&a.grid_lambda, base.lambda) {
                for &alpha in &axis(&a.grid_alpha, base.alpha) {
                    out.push(TrainConfig {
                        d,
                        gamma,
                        lambda,
                        alpha,
                        ..base.clone()
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub started_at: String,
    pub finished_at: String,
    pub config: TrainConfig,
    pub config_sha256: String,
    pub input: InputInfo,
    pub grid: Option<Vec<GridEntry>>,
    pub runs: Vec<RunArtifacts>,
}

#[derive(Debug, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub min_count: u64,
    pub split: SplitRatios,
}

#[derive(Debug, Serialize)]
pub struct GridEntry {
    pub d: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub validation_ndcg5: f64,
    pub selected: bool,
}

#[derive(Debug, Serialize)]
pub struct RunArtifacts {
    pub run: usize,
    pub seed: u64,
    pub checkpoint: String,
    pub checkpoint_sha256: String,
    pub trace: String,
    pub timings: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_theta: f64,
}

fn now_rfc3339() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .map(|t| t.to_rfc3339())
        .unwrap_or_default()
}

pub fn config_digest(cfg: &TrainConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(cfg)?)))
}

fn split_of(ds: &Dataset) -> Result<SplitDataset> {
    chronological_split(ds, SplitRatios::default())
}

fn cmd_train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let started_at = now_rfc3339();
    let mut cfg = resolve_config(g, a)?;
    let seeds = run_seeds(&cfg, a)?;
    let loaded = load_input(g)?;
    let split = split_of(&loaded.dataset)?;

    let candidates = grid(&cfg, a);
    let mut grid_log = None;
    if candidates.len() > 1 {
        let selection = select_hyperparameters(&candidates, &split)?;
        eprintln!(
            "selected d={} gamma={} lambda={} alpha={} (validation nDCG@5 {:.4})",
            selection.config.d,
            selection.config.gamma,
            selection.config.lambda,
            selection.config.alpha,
            selection.scores[selection.best]
        );
        grid_log = Some(
            candidates
                .iter()
                .zip(&selection.scores)
                .enumerate()
                .map(|(k, (c, &s))| GridEntry {
                    d: c.d,
                    gamma: c.gamma,
                    lambda: c.lambda,
                    alpha: c.alpha,
                    validation_ndcg5: s,
                    selected: k == selection.best,
                })
                .collect(),
        );
        cfg = selection.config;
    }

    let store = build_interactions(&split.train, cfg.universe)?;
    let geo = split.train.geo_index();
    let reg = regularizer_vectors(&split.train, cfg.lambda);
    let user_ids = loaded.dataset.user_ids().to_vec();
    let poi_ids: Vec<String> = loaded.dataset.poi_ids().map(str::to_owned).collect();

    let mut runs = Vec::with_capacity(seeds.len());
    for (r, &seed) in seeds.iter().enumerate() {
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let (model, trace) = train(&run_cfg, &store, &geo, &reg)?;
        let dir = out_path(g, format!("run-{}", r + 1))?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let ckpt = Checkpoint::new(model, user_ids.clone(), poi_ids.clone())?;
        let (ckpt_path, trace_path, timings_path) =
            (dir.join("model.ckpt"), dir.join("trace.csv"), dir.join("timings.csv"));
        ckpt.save(&ckpt_path)?;
        write_atomic(&trace_path, trace.to_csv().as_bytes())?;
        write_atomic(&timings_path, trace.timings_csv().as_bytes())?;
        let final_theta = trace.records.last().map_or(trace.initial.theta, |r| r.theta);
        eprintln!(
            "run {}: seed {seed}, {} iterations, theta {final_theta:.6}{}",
            r + 1,
            trace.iterations,
            if trace.converged { "" } else { " (not converged)" }
        );
        runs.push(RunArtifacts {
            run: r + 1,
            seed,
            checkpoint: ckpt_path.display().to_string(),
            checkpoint_sha256: ckpt.digest(),
            trace: trace_path.display().to_string(),
            timings: timings_path.display().to_string(),
            iterations: trace.iterations,
            converged: trace.converged,
            final_theta,
        });
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: now_rfc3339(),
        config_sha256: config_digest(&cfg)?,
        config: cfg,
        input: InputInfo {
            path: loaded.path.display().to_string(),
            sha256: loaded.digest,
            min_count: g.min_count,
            split: split.ratios,
        },
        grid: grid_log,
        runs,
    };
    append_manifest(&out_path(g, "manifest.jsonl")?, &manifest)
}

fn append_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        bytes.push(b'\n');
    }
    bytes.extend(serde_json::to_vec(manifest)?);
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn cmd_evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let loaded = load_input(g)?;
    let split = split_of(&loaded.dataset)?;
    let checkpoints = a
        .checkpoints
        .iter()
        .map(|p| {
            Checkpoint::load(p).and_then(|c| {
                c.check_compatible(&loaded.dataset)
                    .map_err(|e| Error::Incompatible(format!("{}: {e}", p.display())))?;
                Ok(c)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = EvalOptions {
        ks: a.k.clone(),
        include_train_pois: a.include_train_pois,
    };
    let report = evaluate(&checkpoints, &split, &opts)?;
    let table = report.to_table();
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    let per_user = if a.per_user {
        Some(report.per_user_csv(loaded.dataset.user_ids())?)
    } else {
        None
    };
    write_atomic(&out_path(g, "report.json")?, &json)?;
    write_atomic(&out_path(g, "report.txt")?, table.as_bytes())?;
    if let Some(bytes) = per_user {
        write_atomic(&out_path(g, "per_user.csv")?, &bytes)?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_recommend(g: &GlobalArgs, a: &RecommendArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidArgument("--k must be positive".into()));
    }
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    // With an input file, POIs visited in training are not recommended again.
    let train_visits: Option<Vec<Vec<(usize, u32)>>> = match &g.input {
        Some(_) => {
            let loaded = load_input(g)?;
            ckpt.check_compatible(&loaded.dataset)?;
            Some(split_of(&loaded.dataset)?.train.visit_counts())
        }
        None => None,
    };
    let index: BTreeMap<&str, usize> = ckpt.user_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let mut served = 0;
    let mut out = String::from("user_id\trank\tpoi_id\tscore\n");
    for user in &a.users {
        let Some(&i) = index.get(user.as_str()) else {
            eprintln!("warning: unknown user {user:?}, skipped");
            continue;
        };
        let excluded: Vec<usize> = train_visits
            .as_ref()
            .map(|v| v[i].iter().map(|&(j, _)| j).collect())
            .unwrap_or_default();
        for (rank, (j, score)) in recommend(&ckpt.model, i, &excluded, a.k)?.into_iter().enumerate() {
            out.push_str(&format!("{user}\t{}\t{}\t{score}\n", rank + 1, ckpt.poi_ids[j]));
        }
        served += 1;
    }
    if served == 0 {
        return Err(Error::Unknown {
            what: "user",
            key: a.users.join(","),
        });
    }
    print!("{out}");
    Ok(())
}
