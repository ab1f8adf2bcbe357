//! Command-line workbench over the library: exact enumeration, estimation
//! bias studies, training runs, noise sweeps, and the property-check suite,
//! all emitting deterministic CSV.
//!
//! Conventions shared by every subcommand:
//!
//! * the first output line is a `# schema: filab/<subcommand> v1` comment,
//!   followed by an ordinary CSV header row;
//! * floats carry 17 significant digits and infinities print as the exact
//!   token `inf`;
//! * rows are sorted by their leading key columns before writing, and all
//!   parallel fan-out reduces in key order, so a rerun with the same flags
//!   and seeds is byte-identical at any `--threads` value;
//! * wall-clock time goes to stderr, never into the CSV;
//! * exit codes: 0 success, 1 failed checks or runtime errors, 2 usage.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::divergence::{state_action_divergence, Divergence};
use crate::enumeration::{divergence_vs_noise_sweep, enumerate_bandit, enumerate_gridworld};
use crate::envs::{
    make_bandit, make_gridworld, DeterministicPolicyClass, EnvBundle, GridWorldSpec,
    BANDIT_POLICY_LABELS, DEFAULT_EPS0, DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_HORIZON,
};
use crate::error::FilabError;
use crate::estimation::{
    fit_discriminator, variational_estimate, Discriminator, SampleSet, SampleSource,
};
use crate::interactive::{run_dagger, run_interactive_dre, run_irkl_vim};
use crate::mdp::{sample_trajectory_with_rng, TabularPolicy, Trajectory};
use crate::verify::{run_all_checks, run_all_mutations, CHECK_NAMES};
use crate::vim::{behavior_cloning, mode_metrics, run_f_vim, ModeMetrics, VimConfig};

/// Offset between a training seed and the stream that draws the initial
/// policy, so the initialization and the run itself use unrelated streams.
pub const INIT_SEED_OFFSET: u64 = 1000;

/// Offset between a training seed and the stream that samples expert
/// demonstrations for behavior cloning.
const DEMO_SEED_OFFSET: u64 = 2_000_000;

/// Gradient steps and rate used when fitting each bias-study discriminator.
const BIAS_FIT_STEPS: usize = 200;
const BIAS_FIT_RATE: f64 = 0.1;

/// Fraction of lowest-estimate policies flagged by the bias study.
const BIAS_FLAG_QUANTILE: f64 = 0.01;

fn main_divergences() -> Vec<Divergence> {
    Divergence::ALL.to_vec()
}

/// Formats one numeric CSV field: 17 significant digits, `inf` for
/// infinities, never NaN.
fn fmt_float(x: f64) -> String {
    debug_assert!(!x.is_nan(), "CSV fields must be finite or infinite");
    if x.is_infinite() {
        if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Parser)]
#[command(
    name = "filab",
    version,
    about = "Imitation learning as f-divergence minimization on finite MDPs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every policy in the environment's class exactly and rank
    /// them per divergence.
    Enumerate(EnumerateArgs),
    /// Compare exact divergences against sample-based variational estimates
    /// for every enumerable policy.
    EstimateBias(EstimateBiasArgs),
    /// Train a policy per seed and report final divergences and mode
    /// metrics.
    Train(TrainArgs),
    /// Evaluate the bandit candidates across a grid of control-noise values.
    Sweep(SweepArgs),
    /// Run the property-check suite.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EnvChoice {
    Bandit,
    Grid,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoChoice {
    /// Variational min-max training of the selected divergences.
    Fvim,
    /// Interactive reverse-KL variational training.
    Irkl,
    /// Behavior cloning by likelihood ascent on expert demonstrations.
    Bc,
    /// Dataset aggregation with sampled expert labels.
    Dagger,
    /// Interactive density-ratio cost-sensitive classification.
    Idre,
}

impl AlgoChoice {
    fn token(self) -> &'static str {
        match self {
            AlgoChoice::Fvim => "fvim",
            AlgoChoice::Irkl => "irkl",
            AlgoChoice::Bc => "bc",
            AlgoChoice::Dagger => "dagger",
            AlgoChoice::Idre => "idre",
        }
    }
}

/// Flags shared by every subcommand. Each is optional here; defaults are
/// resolved per subcommand after the config file (if any) fills the gaps.
#[derive(Args, Clone, Default)]
struct SharedArgs {
    /// Environment to run on (default bandit).
    #[arg(long, value_enum)]
    env: Option<EnvChoice>,
    /// Comma-separated divergences, e.g. kl,rkl,js,tv (default all four).
    #[arg(long)]
    div: Option<String>,
    /// Bandit control noise in (0, 0.5).
    #[arg(long)]
    eps0: Option<f64>,
    /// Gridworld slip probability toward the center.
    #[arg(long)]
    eps1: Option<f64>,
    /// Gridworld lateral slip probability.
    #[arg(long)]
    eps2: Option<f64>,
    /// Gridworld horizon (the bandit always has horizon 1).
    #[arg(long)]
    horizon: Option<usize>,
    /// Training iterations (outer loop length).
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated seed list, e.g. 0,1,2 (default 0).
    #[arg(long)]
    seeds: Option<String>,
    /// Per-side sample budget; for train, the data drawn per iteration
    /// (rollouts, episodes, or demonstrations depending on the algorithm).
    #[arg(long)]
    samples: Option<usize>,
    /// Output CSV path (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel fan-out (default all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Plain-text key=value file whose entries fill flags left unset;
    /// explicit flags always win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Evaluate only mirror-canonical gridworld policies and copy values
    /// onto their reflections.
    #[arg(long)]
    prune: bool,
    /// How many top-ranked policies to emit per divergence (default: all
    /// for the bandit, 10 for the gridworld).
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct EstimateBiasArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Gradient steps when fitting each estimate's discriminator.
    #[arg(long)]
    fit_steps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Training algorithm (default fvim).
    #[arg(long, value_enum)]
    algo: Option<AlgoChoice>,
    /// Ratio clip floor for the interactive density-ratio algorithm.
    #[arg(long)]
    clip_floor: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// First control-noise value (default 0.01).
    #[arg(long)]
    eps0_start: Option<f64>,
    /// Last control-noise value, inclusive up to rounding (default 0.49).
    #[arg(long)]
    eps0_stop: Option<f64>,
    /// Grid step (default 0.01).
    #[arg(long)]
    eps0_step: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Run the deliberately broken check variants; a healthy build reports
    /// failures for all of them and exits nonzero.
    #[arg(long)]
    mutate: bool,
    /// Print the check names without running anything.
    #[arg(long)]
    list: bool,
}

/// A classified failure: usage problems exit 2, everything else exits 1.
#[derive(Debug)]
enum CliFailure {
    Usage(String),
    Runtime(String),
}

impl From<FilabError> for CliFailure {
    fn from(err: FilabError) -> Self {
        match err {
            FilabError::Input(_) => CliFailure::Usage(err.to_string()),
            _ => CliFailure::Runtime(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliFailure {
    fn from(err: std::io::Error) -> Self {
        CliFailure::Runtime(format!("io error: {err}"))
    }
}

type CliResult<T> = std::result::Result<T, CliFailure>;

/// Parses a key=value config file. Keys are case-insensitive with hyphens
/// normalized to underscores; `#` starts a comment; later entries override
/// earlier ones. Unknown keys are rejected.
fn load_config(path: &Path) -> CliResult<BTreeMap<String, String>> {
    const KNOWN: &[&str] = &[
        "env",
        "div",
        "eps0",
        "eps1",
        "eps2",
        "horizon",
        "iters",
        "seeds",
        "samples",
        "out",
        "threads",
        "algo",
        "top",
        "prune",
        "fit_steps",
        "clip_floor",
        "eps0_start",
        "eps0_stop",
        "eps0_step",
        "mutate",
        "list",
    ];
    let text = fs::read_to_string(path)
        .map_err(|e| CliFailure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliFailure::Usage(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if !KNOWN.contains(&key.as_str()) {
            return Err(CliFailure::Usage(format!(
                "unknown config key {key:?} on line {}",
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Fills one unset option from the config map, parsing with `FromStr`.
fn fill<T: FromStr>(
    slot: &mut Option<T>,
    map: &BTreeMap<String, String>,
    key: &str,
) -> CliResult<()>
where
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        if let Some(raw) = map.get(key) {
            let parsed = raw
                .parse::<T>()
                .map_err(|e| CliFailure::Usage(format!("config {key}={raw:?}: {e}")))?;
            *slot = Some(parsed);
        }
    }
    Ok(())
}

/// Turns a false boolean flag on when the config requests it.
fn fill_flag(slot: &mut bool, map: &BTreeMap<String, String>, key: &str) -> CliResult<()> {
    if !*slot {
        if let Some(raw) = map.get(key) {
            *slot = raw
                .parse::<bool>()
                .map_err(|e| CliFailure::Usage(format!("config {key}={raw:?}: {e}")))?;
        }
    }
    Ok(())
}

fn fill_value_enum<T: ValueEnum>(
    slot: &mut Option<T>,
    map: &BTreeMap<String, String>,
    key: &str,
) -> CliResult<()> {
    if slot.is_none() {
        if let Some(raw) = map.get(key) {
            let parsed = T::from_str(raw, true)
                .map_err(|e| CliFailure::Usage(format!("config {key}={raw:?}: {e}")))?;
            *slot = Some(parsed);
        }
    }
    Ok(())
}

fn merge_shared(shared: &mut SharedArgs, map: &BTreeMap<String, String>) -> CliResult<()> {
    fill_value_enum(&mut shared.env, map, "env")?;
    fill(&mut shared.div, map, "div")?;
    fill(&mut shared.eps0, map, "eps0")?;
    fill(&mut shared.eps1, map, "eps1")?;
    fill(&mut shared.eps2, map, "eps2")?;
    fill(&mut shared.horizon, map, "horizon")?;
    fill(&mut shared.iters, map, "iters")?;
    fill(&mut shared.seeds, map, "seeds")?;
    fill(&mut shared.samples, map, "samples")?;
    fill(&mut shared.out, map, "out")?;
    fill(&mut shared.threads, map, "threads")?;
    Ok(())
}

/// Parses the comma-separated divergence list into canonical order without
/// duplicates; `None` means all four.
fn parse_divergences(spec: Option<&str>) -> CliResult<Vec<Divergence>> {
    let Some(spec) = spec else {
        return Ok(main_divergences());
    };
    let mut wanted = [false; 4];
    for token in spec.split(',') {
        if token.trim().is_empty() {
            continue;
        }
        let div = Divergence::from_str(token).map_err(CliFailure::from)?;
        wanted[Divergence::ALL.iter().position(|&d| d == div).expect("listed")] = true;
    }
    let divs: Vec<Divergence> = Divergence::ALL
        .iter()
        .copied()
        .zip(wanted)
        .filter_map(|(d, w)| w.then_some(d))
        .collect();
    if divs.is_empty() {
        return Err(CliFailure::Usage(
            "divergence list is empty; expected tokens from kl,rkl,js,tv".into(),
        ));
    }
    Ok(divs)
}

fn parse_seeds(spec: Option<&str>) -> CliResult<Vec<u64>> {
    let Some(spec) = spec else {
        return Ok(vec![0]);
    };
    let mut seeds = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        seeds.push(
            token
                .parse::<u64>()
                .map_err(|e| CliFailure::Usage(format!("bad seed {token:?}: {e}")))?,
        );
    }
    if seeds.is_empty() {
        return Err(CliFailure::Usage("seed list is empty".into()));
    }
    Ok(seeds)
}

/// Resolved environment: the bundle plus whichever policy index applies.
struct EnvSetup {
    bundle: EnvBundle,
    candidates: Option<Vec<TabularPolicy>>,
    class: Option<DeterministicPolicyClass>,
    spec: Option<GridWorldSpec>,
    token: &'static str,
}

impl EnvSetup {
    fn policy_count(&self) -> usize {
        match (&self.candidates, &self.class) {
            (Some(c), _) => c.len(),
            (_, Some(class)) => class.size(),
            _ => unreachable!("one policy source is always present"),
        }
    }

    fn policy(&self, id: usize) -> TabularPolicy {
        match (&self.candidates, &self.class) {
            (Some(c), _) => c[id].clone(),
            (_, Some(class)) => class.policy(id),
            _ => unreachable!("one policy source is always present"),
        }
    }

    fn label(&self, id: usize) -> String {
        match (&self.candidates, &self.class) {
            (Some(_), _) => BANDIT_POLICY_LABELS[id].to_string(),
            (_, Some(class)) => (0..class.n_states)
                .map(|s| char::from(b'0' + class.action(id, s) as u8))
                .collect(),
            _ => unreachable!("one policy source is always present"),
        }
    }
}

fn build_env(shared: &SharedArgs) -> CliResult<EnvSetup> {
    let choice = shared.env.unwrap_or(EnvChoice::Bandit);
    match choice {
        EnvChoice::Bandit => {
            let eps0 = shared.eps0.unwrap_or(DEFAULT_EPS0);
            let (bundle, candidates) = make_bandit(eps0)?;
            Ok(EnvSetup {
                bundle,
                candidates: Some(candidates),
                class: None,
                spec: None,
                token: "bandit",
            })
        }
        EnvChoice::Grid => {
            let eps1 = shared.eps1.unwrap_or(DEFAULT_EPS1);
            let eps2 = shared.eps2.unwrap_or(DEFAULT_EPS2);
            let horizon = shared.horizon.unwrap_or(DEFAULT_HORIZON);
            let spec = GridWorldSpec::new(eps1, eps2, horizon)?;
            let (bundle, class) = make_gridworld(eps1, eps2, horizon)?;
            Ok(EnvSetup {
                bundle,
                candidates: None,
                class: Some(class),
                spec: Some(spec),
                token: "grid",
            })
        }
    }
}

fn init_thread_pool(threads: Option<usize>) {
    if let Some(n) = threads {
        if n > 0 {
            // Building the global pool can only happen once per process;
            // later calls keep whatever pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// An assembled CSV document: schema comment, header, typed-key rows.
struct CsvDoc {
    schema: String,
    header: Vec<&'static str>,
    rows: Vec<(Vec<u64>, Vec<String>)>,
}

impl CsvDoc {
    fn new(subcommand: &str, header: &[&'static str]) -> Self {
        Self {
            schema: format!("# schema: filab/{subcommand} v1"),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, key: Vec<u64>, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push((key, row));
    }

    /// Serializes to bytes after sorting rows by key, so the output is
    /// independent of assembly order.
    fn into_bytes(mut self) -> CliResult<Vec<u8>> {
        self.rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.schema)?;
        let mut writer = csv::Writer::from_writer(buf);
        writer
            .write_record(&self.header)
            .map_err(|e| CliFailure::Runtime(format!("csv write failed: {e}")))?;
        for (_, row) in &self.rows {
            writer
                .write_record(row)
                .map_err(|e| CliFailure::Runtime(format!("csv write failed: {e}")))?;
        }
        writer
            .into_inner()
            .map_err(|e| CliFailure::Runtime(format!("csv flush failed: {e}")))
    }
}

fn write_output(doc: CsvDoc, out: Option<&Path>) -> CliResult<()> {
    let bytes = doc.into_bytes()?;
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliFailure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// Orders total f64 keys inside the integer sort tuple: finite values by
/// magnitude-preserving bit tricks, with +inf last.
fn sort_key_f64(x: f64) -> u64 {
    let bits = x.to_bits() as i64;
    let flipped = if bits < 0 { !bits } else { bits | i64::MIN };
    (flipped as u64) ^ (1u64 << 63)
}

fn metrics_fields(metrics: ModeMetrics) -> [String; 3] {
    [
        fmt_float(metrics.collapse),
        fmt_float(metrics.cover),
        fmt_float(metrics.unsafe_mass),
    ]
}

fn cmd_enumerate(mut args: EnumerateArgs) -> CliResult<ExitCode> {
    if let Some(path) = args.shared.config.clone() {
        let map = load_config(&path)?;
        merge_shared(&mut args.shared, &map)?;
        fill_flag(&mut args.prune, &map, "prune")?;
        fill(&mut args.top, &map, "top")?;
    }
    init_thread_pool(args.shared.threads);
    let started = Instant::now();
    let divs = parse_divergences(args.shared.div.as_deref())?;
    let setup = build_env(&args.shared)?;
    let result = match &setup.spec {
        None => enumerate_bandit(args.shared.eps0.unwrap_or(DEFAULT_EPS0), &divs)?,
        Some(spec) => enumerate_gridworld(spec, &divs, args.prune)?,
    };
    let top = args
        .top
        .unwrap_or(if setup.spec.is_none() { 3 } else { 10 })
        .min(setup.policy_count());

    let mut doc = CsvDoc::new(
        "enumerate",
        &[
            "experiment",
            "divergence",
            "rank",
            "policy_id",
            "label",
            "true_value",
            "collapse_score",
            "cover_score",
            "unsafe_mass",
        ],
    );
    let experiment = format!("enumerate:{}", setup.token);
    for (d, &div) in result.divergences.iter().enumerate() {
        for (rank, &id) in result.rankings[d].iter().take(top).enumerate() {
            let metrics = mode_metrics(&setup.bundle, &setup.policy(id));
            let [collapse, cover, unsafe_mass] = metrics_fields(metrics);
            doc.push(
                vec![d as u64, rank as u64],
                vec![
                    experiment.clone(),
                    div.name().to_string(),
                    rank.to_string(),
                    id.to_string(),
                    setup.label(id),
                    fmt_float(result.value(d, id)),
                    collapse,
                    cover,
                    unsafe_mass,
                ],
            );
        }
        eprintln!(
            "{}: argmin {} ({}) value {}",
            div.name(),
            result.argmin[d],
            setup.label(result.argmin[d]),
            fmt_float(result.value(d, result.argmin[d]))
        );
    }
    write_output(doc, args.shared.out.as_deref())?;
    eprintln!("wall_ms {}", started.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

/// Samples enough whole trajectories to cover `budget` state-action pairs.
fn sample_pairs(
    mdp: &crate::mdp::FiniteMdp,
    policy: &TabularPolicy,
    budget: usize,
    source: SampleSource,
    rng: &mut ChaCha8Rng,
) -> SampleSet {
    let per_traj = mdp.horizon().max(1);
    let count = budget.div_ceil(per_traj);
    let trajectories: Vec<Trajectory> = (0..count)
        .map(|_| sample_trajectory_with_rng(mdp, policy, rng))
        .collect();
    SampleSet::from_trajectories(&trajectories, mdp.n_states(), mdp.n_actions(), source)
}

fn cmd_estimate_bias(mut args: EstimateBiasArgs) -> CliResult<ExitCode> {
    if let Some(path) = args.shared.config.clone() {
        let map = load_config(&path)?;
        merge_shared(&mut args.shared, &map)?;
        fill(&mut args.fit_steps, &map, "fit_steps")?;
    }
    init_thread_pool(args.shared.threads);
    let started = Instant::now();
    let divs = parse_divergences(args.shared.div.as_deref())?;
    let seeds = parse_seeds(args.shared.seeds.as_deref())?;
    let base_seed = seeds[0];
    let samples = args.shared.samples.unwrap_or(200).max(1);
    let fit_steps = args.fit_steps.unwrap_or(BIAS_FIT_STEPS);
    let setup = build_env(&args.shared)?;
    let mdp = &setup.bundle.mdp;
    let expert = &setup.bundle.expert.policy;
    let n = setup.policy_count();

    // One unit per policy: draw both sample sets once, then fit and score
    // every requested divergence on them.
    let units: Vec<(usize, Vec<(f64, f64)>)> = (0..n)
        .into_par_iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                base_seed ^ (id as u64).wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1),
            );
            let candidate = setup.policy(id);
            let expert_set = sample_pairs(mdp, expert, samples, SampleSource::Expert, &mut rng);
            let learner_set =
                sample_pairs(mdp, &candidate, samples, SampleSource::Learner, &mut rng);
            let scores = divs
                .iter()
                .map(|&div| {
                    let true_value = state_action_divergence(div, mdp, expert, &candidate)?;
                    let fitted = fit_discriminator(
                        &expert_set,
                        &learner_set,
                        div,
                        fit_steps,
                        BIAS_FIT_RATE,
                        Discriminator::zeros(mdp.n_states(), mdp.n_actions()),
                    )?;
                    let estimate = variational_estimate(&expert_set, &learner_set, &fitted, div)?;
                    Ok((true_value, estimate))
                })
                .collect::<crate::Result<Vec<(f64, f64)>>>()?;
            Ok((id, scores))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let mut doc = CsvDoc::new(
        "estimate-bias",
        &[
            "experiment",
            "divergence",
            "policy_id",
            "label",
            "true_value",
            "estimate",
            "true_value_norm",
            "estimate_norm",
            "flagged",
        ],
    );
    let experiment = format!("estimate-bias:{}", setup.token);
    let flag_count = ((n as f64 * BIAS_FLAG_QUANTILE).ceil() as usize).clamp(1, n);
    for (d, &div) in divs.iter().enumerate() {
        let column: Vec<(usize, f64, f64)> = units
            .iter()
            .map(|(id, scores)| (*id, scores[d].0, scores[d].1))
            .collect();
        // Min-max normalization over the finite entries of each column.
        let norm = |values: Vec<f64>| -> Box<dyn Fn(f64) -> f64> {
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Box::new(move |v: f64| {
                if !v.is_finite() || finite.is_empty() {
                    v
                } else if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
        };
        let norm_true = norm(column.iter().map(|r| r.1).collect());
        let norm_est = norm(column.iter().map(|r| r.2).collect());
        let mut by_estimate: Vec<usize> = (0..column.len()).collect();
        by_estimate.sort_by(|&a, &b| {
            column[a]
                .2
                .total_cmp(&column[b].2)
                .then(column[a].0.cmp(&column[b].0))
        });
        let flagged: Vec<bool> = {
            let mut f = vec![false; column.len()];
            for &i in by_estimate.iter().take(flag_count) {
                f[i] = true;
            }
            f
        };
        let mut gap_sum = 0.0;
        for (i, &(id, true_value, estimate)) in column.iter().enumerate() {
            if flagged[i] {
                gap_sum += true_value - estimate;
            }
            doc.push(
                vec![d as u64, id as u64],
                vec![
                    experiment.clone(),
                    div.name().to_string(),
                    id.to_string(),
                    setup.label(id),
                    fmt_float(true_value),
                    fmt_float(estimate),
                    fmt_float(norm_true(true_value)),
                    fmt_float(norm_est(estimate)),
                    (flagged[i] as u8).to_string(),
                ],
            );
        }
        eprintln!(
            "{}: flagged {} of {} policies, mean (true - estimate) among flagged = {}",
            div.name(),
            flag_count,
            column.len(),
            fmt_float(gap_sum / flag_count as f64)
        );
    }

    // The underestimation story: the flagged sets under KL and JS should
    // undershoot harder than under reverse KL. Reported, not enforced.
    let mean_gap = |target: Divergence| -> Option<f64> {
        let d = divs.iter().position(|&x| x == target)?;
        let mut by_estimate: Vec<&(usize, Vec<(f64, f64)>)> = units.iter().collect();
        by_estimate.sort_by(|a, b| a.1[d].1.total_cmp(&b.1[d].1).then(a.0.cmp(&b.0)));
        let sum: f64 = by_estimate
            .iter()
            .take(flag_count)
            .map(|(_, scores)| scores[d].0 - scores[d].1)
            .sum();
        Some(sum / flag_count as f64)
    };
    if let (Some(kl), Some(js), Some(rkl)) = (
        mean_gap(Divergence::Kl),
        mean_gap(Divergence::Js),
        mean_gap(Divergence::Rkl),
    ) {
        if !(kl > rkl) || !(js > rkl) {
            eprintln!(
                "warning: flagged-set underestimation gaps (kl {}, js {}, rkl {}) \
                 do not show kl and js exceeding rkl",
                fmt_float(kl),
                fmt_float(js),
                fmt_float(rkl)
            );
        }
    }
    write_output(doc, args.shared.out.as_deref())?;
    eprintln!("wall_ms {}", started.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

/// Per-seed training summary shared by all five algorithms.
struct TrainRow {
    divergence: Divergence,
    seed: u64,
    iterations: usize,
    true_value: f64,
    estimate: f64,
    metrics: ModeMetrics,
}

fn train_one(
    setup: &EnvSetup,
    algo: AlgoChoice,
    div: Divergence,
    seed: u64,
    iters: usize,
    samples: Option<usize>,
    clip_floor: f64,
) -> crate::Result<TrainRow> {
    let bundle = &setup.bundle;
    let mdp = &bundle.mdp;
    let expert = &bundle.expert;
    match algo {
        AlgoChoice::Fvim => {
            let mut config = VimConfig::new(div, seed);
            config.iterations = iters;
            if let Some(s) = samples {
                config.demo_count = s.max(1);
            }
            let mut init_rng = ChaCha8Rng::seed_from_u64(INIT_SEED_OFFSET.wrapping_add(seed));
            let init = bundle.fresh_policy(&mut init_rng);
            let out = run_f_vim(bundle, &init, &config)?;
            let policy = out.policy.to_tabular();
            Ok(TrainRow {
                divergence: div,
                seed,
                iterations: iters,
                true_value: state_action_divergence(div, mdp, &expert.policy, &policy)?,
                estimate: out
                    .history
                    .records
                    .last()
                    .map_or(f64::INFINITY, |r| r.objective),
                metrics: mode_metrics(bundle, &policy),
            })
        }
        AlgoChoice::Irkl => {
            let mut config = VimConfig::new(Divergence::Rkl, seed);
            config.iterations = iters;
            if let Some(s) = samples {
                config.batch_size = s.max(1);
            }
            let out = run_irkl_vim(bundle, expert, &config)?;
            let policy = out.policy.to_tabular();
            Ok(TrainRow {
                divergence: Divergence::Rkl,
                seed,
                iterations: iters,
                true_value: state_action_divergence(
                    Divergence::Rkl,
                    mdp,
                    &expert.policy,
                    &policy,
                )?,
                estimate: out
                    .history
                    .records
                    .last()
                    .map_or(f64::INFINITY, |r| r.objective),
                metrics: mode_metrics(bundle, &policy),
            })
        }
        AlgoChoice::Bc => {
            let demo_count = samples.unwrap_or(500).max(1);
            let mut demo_rng = ChaCha8Rng::seed_from_u64(DEMO_SEED_OFFSET.wrapping_add(seed));
            let demos: Vec<Trajectory> = (0..demo_count)
                .map(|_| sample_trajectory_with_rng(mdp, &expert.policy, &mut demo_rng))
                .collect();
            let policy = behavior_cloning(bundle, &demos, iters, 0.1, seed)?.to_tabular();
            let mut nll = 0.0;
            let mut pairs = 0usize;
            for traj in &demos {
                for t in 0..traj.actions.len() {
                    nll -= policy.prob(traj.states[t], traj.actions[t]).ln();
                    pairs += 1;
                }
            }
            Ok(TrainRow {
                divergence: Divergence::Kl,
                seed,
                iterations: iters,
                true_value: state_action_divergence(
                    Divergence::Kl,
                    mdp,
                    &expert.policy,
                    &policy,
                )?,
                estimate: nll / pairs.max(1) as f64,
                metrics: mode_metrics(bundle, &policy),
            })
        }
        AlgoChoice::Dagger => {
            let rollouts = samples.unwrap_or(32).max(1);
            let (best, report) = run_dagger(bundle, expert, iters, rollouts, seed)?;
            Ok(TrainRow {
                divergence: Divergence::Kl,
                seed,
                iterations: report.best_iteration,
                true_value: state_action_divergence(
                    Divergence::Kl,
                    mdp,
                    &expert.policy,
                    &best,
                )?,
                estimate: report.records.last().map_or(f64::INFINITY, |r| r.exact_kl),
                metrics: mode_metrics(bundle, &best),
            })
        }
        AlgoChoice::Idre => {
            let episodes = samples.unwrap_or(30).max(1);
            let (best, report) = run_interactive_dre(bundle, expert, iters, episodes, clip_floor, seed)?;
            Ok(TrainRow {
                divergence: Divergence::Rkl,
                seed,
                iterations: report.best_iteration,
                true_value: state_action_divergence(
                    Divergence::Rkl,
                    mdp,
                    &expert.policy,
                    &best,
                )?,
                estimate: report.records.last().map_or(f64::INFINITY, |r| r.exact_rkl),
                metrics: mode_metrics(bundle, &best),
            })
        }
    }
}

fn cmd_train(mut args: TrainArgs) -> CliResult<ExitCode> {
    if let Some(path) = args.shared.config.clone() {
        let map = load_config(&path)?;
        merge_shared(&mut args.shared, &map)?;
        fill_value_enum(&mut args.algo, &map, "algo")?;
        fill(&mut args.clip_floor, &map, "clip_floor")?;
    }
    init_thread_pool(args.shared.threads);
    let started = Instant::now();
    let algo = args.algo.unwrap_or(AlgoChoice::Fvim);
    let seeds = parse_seeds(args.shared.seeds.as_deref())?;
    let clip_floor = args.clip_floor.unwrap_or(0.05);
    let iters = args.shared.iters.unwrap_or(match algo {
        AlgoChoice::Fvim | AlgoChoice::Irkl | AlgoChoice::Bc => 300,
        AlgoChoice::Dagger | AlgoChoice::Idre => 10,
    });
    // Only the variational min-max trainer is divergence-generic; the
    // others carry their own objective and report under its name.
    let divs = match algo {
        AlgoChoice::Fvim => parse_divergences(args.shared.div.as_deref())?,
        AlgoChoice::Irkl | AlgoChoice::Idre => vec![Divergence::Rkl],
        AlgoChoice::Bc | AlgoChoice::Dagger => vec![Divergence::Kl],
    };
    let setup = build_env(&args.shared)?;

    let mut jobs: Vec<(usize, Divergence, u64)> = Vec::new();
    for (d, &div) in divs.iter().enumerate() {
        for &seed in &seeds {
            jobs.push((d, div, seed));
        }
    }
    let rows: Vec<(usize, TrainRow)> = jobs
        .into_par_iter()
        .map(|(d, div, seed)| {
            let row = train_one(
                &setup,
                algo,
                div,
                seed,
                iters,
                args.shared.samples,
                clip_floor,
            )?;
            Ok((d, row))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let mut doc = CsvDoc::new(
        "train",
        &[
            "experiment",
            "algo",
            "divergence",
            "seed",
            "iterations",
            "true_value",
            "estimate",
            "collapse_score",
            "cover_score",
            "unsafe_mass",
        ],
    );
    let experiment = format!("train:{}", setup.token);
    for (d, row) in rows {
        let [collapse, cover, unsafe_mass] = metrics_fields(row.metrics);
        doc.push(
            vec![d as u64, row.seed],
            vec![
                experiment.clone(),
                algo.token().to_string(),
                row.divergence.name().to_string(),
                row.seed.to_string(),
                row.iterations.to_string(),
                fmt_float(row.true_value),
                fmt_float(row.estimate),
                collapse,
                cover,
                unsafe_mass,
            ],
        );
    }
    write_output(doc, args.shared.out.as_deref())?;
    eprintln!("wall_ms {}", started.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(mut args: SweepArgs) -> CliResult<ExitCode> {
    if let Some(path) = args.shared.config.clone() {
        let map = load_config(&path)?;
        merge_shared(&mut args.shared, &map)?;
        fill(&mut args.eps0_start, &map, "eps0_start")?;
        fill(&mut args.eps0_stop, &map, "eps0_stop")?;
        fill(&mut args.eps0_step, &map, "eps0_step")?;
    }
    if args.shared.env == Some(EnvChoice::Grid) {
        return Err(CliFailure::Usage(
            "the noise sweep runs on the bandit only".into(),
        ));
    }
    init_thread_pool(args.shared.threads);
    let started = Instant::now();
    let divs = parse_divergences(args.shared.div.as_deref())?;
    let start = args.eps0_start.unwrap_or(0.01);
    let stop = args.eps0_stop.unwrap_or(0.49);
    let step = args.eps0_step.unwrap_or(0.01);
    if !(step > 0.0) || !step.is_finite() {
        return Err(CliFailure::Usage(format!(
            "eps0-step must be positive, got {step}"
        )));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let eps0 = start + k as f64 * step;
        if eps0 > stop + 1e-12 {
            break;
        }
        grid.push(eps0);
        k += 1;
    }
    if grid.is_empty() {
        return Err(CliFailure::Usage(format!(
            "empty noise grid: start {start}, stop {stop}, step {step}"
        )));
    }
    let rows = divergence_vs_noise_sweep(&grid, &divs)?;

    let mut doc = CsvDoc::new(
        "sweep",
        &[
            "experiment",
            "divergence",
            "epsilon0",
            "value_a",
            "value_b",
            "value_m",
            "argmin_label",
        ],
    );
    for row in rows {
        let d = divs
            .iter()
            .position(|&x| x == row.divergence)
            .expect("sweep returns requested divergences");
        doc.push(
            vec![d as u64, sort_key_f64(row.epsilon0)],
            vec![
                "sweep:bandit".to_string(),
                row.divergence.name().to_string(),
                fmt_float(row.epsilon0),
                fmt_float(row.value_a),
                fmt_float(row.value_b),
                fmt_float(row.value_m),
                row.argmin_label.to_string(),
            ],
        );
    }
    write_output(doc, args.shared.out.as_deref())?;
    eprintln!("wall_ms {}", started.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(mut args: VerifyArgs) -> CliResult<ExitCode> {
    if let Some(path) = args.shared.config.clone() {
        let map = load_config(&path)?;
        merge_shared(&mut args.shared, &map)?;
        fill_flag(&mut args.mutate, &map, "mutate")?;
        fill_flag(&mut args.list, &map, "list")?;
    }
    if args.list {
        for name in CHECK_NAMES {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let started = Instant::now();
    let seed = parse_seeds(args.shared.seeds.as_deref())?[0];
    let reports = if args.mutate {
        run_all_mutations(seed)
    } else {
        run_all_checks(seed)
    };
    let mut doc = CsvDoc::new(
        "verify",
        &[
            "experiment",
            "check",
            "passed",
            "instances",
            "failures",
            "max_violation",
        ],
    );
    let mut all_passed = true;
    for (i, report) in reports.iter().enumerate() {
        let status = if report.passed() { "PASS" } else { "FAIL" };
        all_passed &= report.passed();
        println!(
            "check {}: {status} ({} instances, max violation {})",
            report.name,
            report.instances,
            fmt_float(report.max_violation)
        );
        for failure in report.failures.iter().take(3) {
            println!("  counterexample: {failure}");
        }
        if report.failures.len() > 3 {
            println!("  ... and {} more", report.failures.len() - 3);
        }
        doc.push(
            vec![i as u64],
            vec![
                "verify".to_string(),
                report.name.clone(),
                (report.passed() as u8).to_string(),
                report.instances.to_string(),
                report.failures.len().to_string(),
                fmt_float(report.max_violation),
            ],
        );
    }
    if let Some(path) = args.shared.out.as_deref() {
        write_output(doc, Some(path))?;
    }
    eprintln!("wall_ms {}", started.elapsed().as_millis());
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.cmd {
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::EstimateBias(args) => cmd_estimate_bias(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

/// Parses the process arguments and dispatches. Clap itself exits with
/// code 2 on malformed flags.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliFailure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliFailure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
