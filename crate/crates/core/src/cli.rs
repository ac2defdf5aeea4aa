//! Subcommand implementations behind the command-line binary.
//!
//! Commands write their tabular results as CSV, either to standard output
//! (oracle, jra, eval) or into the run's output directory (train, sweep).
//! Every command is deterministic given its inputs and seeds, including the
//! bytes of every file it writes.

use std::fmt::Write as _;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigFileError, RunConfig};
use crate::env::{generate_instance, NetworkInstance};
use crate::jra::{self, ChannelPair, JraError};
use crate::oracle::{self, OracleError};
use crate::policy::{self, PolicyError, PolicyParameters, SelectMode};
use crate::seeds;
use crate::trainer::{self, TrainError};

/// Exit codes shared by every subcommand.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_SEARCH_BUDGET: i32 = 3;

/// Command failures, each mapping to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigFileError),
    Io(String),
    Train(TrainError),
    Policy(PolicyError),
    Oracle(OracleError),
    Jra(JraError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Oracle(OracleError::BudgetExceeded { .. })
            | CliError::Oracle(OracleError::Overflow) => EXIT_SEARCH_BUDGET,
            _ => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{}", msg),
            CliError::Config(e) => write!(f, "{}", e),
            CliError::Io(msg) => write!(f, "{}", msg),
            CliError::Train(e) => write!(f, "{}", e),
            CliError::Policy(e) => write!(f, "{}", e),
            CliError::Oracle(e) => write!(f, "{}", e),
            CliError::Jra(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigFileError> for CliError {
    fn from(e: ConfigFileError) -> Self {
        CliError::Config(e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::Train(e)
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Policy(e)
    }
}

fn write_file(path: &Path, content: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))
}

/// Trains a policy and writes `metrics.csv`, `validation.csv` and
/// `model.bin` into the output directory.
///
/// Returns exit code 0 when the run converged, 2 when it hit the episode cap
/// first.
pub fn cmd_train(config: &RunConfig) -> Result<i32, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {}", config.output_dir.display(), e)))?;
    let outcome = trainer::train(&config.env, &config.arch, &config.train, config.master_seed)?;
    write_file(
        &config.output_dir.join("metrics.csv"),
        outcome.metrics.episodes_csv().as_bytes(),
    )?;
    write_file(
        &config.output_dir.join("validation.csv"),
        outcome.metrics.validation_csv().as_bytes(),
    )?;
    outcome
        .params
        .save(&config.output_dir.join("model.bin"))
        .map_err(CliError::Policy)?;
    eprintln!(
        "trained {} episodes, converged={}, validation_available={}, wall {:.1}s, outputs in {}",
        outcome.metrics.episodes_run,
        outcome.metrics.converged,
        outcome.metrics.validation_available,
        outcome.metrics.wall_s,
        config.output_dir.display()
    );
    Ok(if outcome.metrics.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Uniform random full assignment: a user shuffle folded into channel pairs.
fn random_assignment(n_users: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut users: Vec<usize> = (0..n_users).collect();
    for i in 0..n_users - 1 {
        let j = rng.random_range(i..n_users);
        users.swap(i, j);
    }
    let mut assignment = vec![0; n_users];
    for (slot, &user) in users.iter().enumerate() {
        assignment[user] = slot / 2;
    }
    assignment
}

/// How many random assignments the eval baseline averages over.
pub const EVAL_RANDOM_DRAWS: usize = 100;

/// Mean sum rate of uniform random assignments, skipping infeasible draws.
fn random_channel_mean(
    instance: &NetworkInstance,
    config: &RunConfig,
    draw_seed: u64,
) -> Result<Option<f64>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    let mut total = 0.0;
    let mut feasible = 0usize;
    for _ in 0..EVAL_RANDOM_DRAWS {
        let assignment = random_assignment(instance.n_users, &mut rng);
        match jra::evaluate_assignment(instance, &assignment, &config.env) {
            Ok(alloc) => {
                total += alloc.sum_rate;
                feasible += 1;
            }
            Err(JraError::Infeasible { .. }) => {}
            Err(other) => return Err(CliError::Jra(other)),
        }
    }
    Ok((feasible > 0).then(|| total / feasible as f64))
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Greedy sum rate of a policy on one instance, zero when infeasible.
pub fn greedy_rate(
    params: &PolicyParameters,
    instance: &Arc<NetworkInstance>,
    config: &RunConfig,
) -> Result<f64, CliError> {
    let roll = policy::rollout(params, instance, SelectMode::Greedy, 0)?;
    let assignment = trainer::assignment_from_actions(instance.n_users, &roll.actions);
    match jra::evaluate_assignment(instance, &assignment, &config.env) {
        Ok(alloc) => Ok(alloc.sum_rate),
        Err(JraError::Infeasible { .. }) => Ok(0.0),
        Err(other) => Err(CliError::Jra(other)),
    }
}

/// Grades a saved model on held-out seeds against random assignment and
/// exhaustive search; writes one CSV row per seed.
///
/// When the assignment space is over the search cap the ES columns stay
/// empty and only the model and random-assignment rates are reported.
pub fn cmd_eval(
    model_path: &Path,
    seeds_list: &[u64],
    config: &RunConfig,
    out: &mut dyn IoWrite,
) -> Result<i32, CliError> {
    if seeds_list.is_empty() {
        return Err(CliError::Usage("eval needs at least one --seeds entry".into()));
    }
    config.validate()?;
    let params = PolicyParameters::load(model_path)?;
    if (params.arch.n_users, params.arch.n_channels, params.arch.n_features)
        != (config.env.n_users, config.env.n_channels, config.env.n_features)
    {
        return Err(CliError::Usage(format!(
            "model is {}x{}x{} but the config describes {}x{}x{}; pass the run's config",
            params.arch.n_users,
            params.arch.n_channels,
            params.arch.n_features,
            config.env.n_users,
            config.env.n_channels,
            config.env.n_features
        )));
    }

    let mut csv = String::from("seed,r_drl,r_random_mean,r_max,r_min,error\n");
    for &seed in seeds_list {
        let instance = Arc::new(generate_instance(&config.env, seed));
        let r_drl = greedy_rate(&params, &instance, config)?;
        let random_mean =
            random_channel_mean(&instance, config, seeds::derive(seed, seeds::STREAM_EVAL, 0))?;
        let (r_max, r_min) = match oracle::search(&instance, &config.env) {
            Ok(result) => (Some(result.r_max), Some(result.r_min)),
            Err(OracleError::BudgetExceeded { .. }) | Err(OracleError::AllInfeasible) => {
                (None, None)
            }
            Err(other) => return Err(CliError::Oracle(other)),
        };
        let error = match (r_max, r_min) {
            (Some(max), Some(min)) => Some(trainer::error_rate(max, min, r_drl)),
            _ => None,
        };
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            seed,
            r_drl,
            fmt_opt(random_mean),
            fmt_opt(r_max),
            fmt_opt(r_min),
            fmt_opt(error)
        )
        .expect("string write");
    }
    out.write_all(csv.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Runs exhaustive search per seed and writes the extrema as CSV.
pub fn cmd_oracle(
    seeds_list: &[u64],
    config: &RunConfig,
    out: &mut dyn IoWrite,
) -> Result<i32, CliError> {
    if seeds_list.is_empty() {
        return Err(CliError::Usage("oracle needs at least one --seeds entry".into()));
    }
    config.validate()?;
    let mut csv = String::from("seed,n,k,p_t,r_max,r_min,n_evaluated,n_infeasible\n");
    for &seed in seeds_list {
        let instance = generate_instance(&config.env, seed);
        let row = match oracle::search(&instance, &config.env) {
            Ok(r) => format!(
                "{},{},{},{},{},{},{},{}\n",
                seed,
                config.env.n_users,
                config.env.n_channels,
                config.env.p_t_w,
                r.r_max,
                r.r_min,
                r.n_evaluated,
                r.n_infeasible
            ),
            Err(OracleError::AllInfeasible) => {
                let count = oracle::assignment_count(config.env.n_users)
                    .map_err(CliError::Oracle)?;
                format!(
                    "{},{},{},{},,,0,{}\n",
                    seed, config.env.n_users, config.env.n_channels, config.env.p_t_w, count
                )
            }
            Err(err) => return Err(CliError::Oracle(err)),
        };
        csv.push_str(&row);
    }
    out.write_all(csv.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Parses the channel-pair table fed to the jra subcommand.
///
/// Expected header `gamma1,gamma2,a1,a2`, one channel per row. Users are
/// numbered 2k and 2k+1 per row for reporting purposes.
pub fn parse_pairs_csv(text: &str) -> Result<Vec<ChannelPair>, CliError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, raw)) if raw.trim().is_empty() => continue,
            Some((_, raw)) => break raw.trim(),
            None => return Err(CliError::Usage("pairs file is empty".into())),
        }
    };
    if header != "gamma1,gamma2,a1,a2" {
        return Err(CliError::Usage(format!(
            "pairs file must start with header gamma1,gamma2,a1,a2, got {:?}",
            header
        )));
    }
    let mut pairs = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(CliError::Usage(format!(
                "pairs line {}: expected 4 fields, got {}",
                idx + 1,
                fields.len()
            )));
        }
        let values = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Usage(format!("pairs line {}: {}", idx + 1, e)))?;
        let row = pairs.len();
        pairs.push(
            ChannelPair::new(2 * row, values[0], values[2], 2 * row + 1, values[1], values[3])
                .map_err(CliError::Jra)?,
        );
    }
    if pairs.is_empty() {
        return Err(CliError::Usage("pairs file holds no channel rows".into()));
    }
    Ok(pairs)
}

/// Allocates power for an explicit pair table and prints the allocation.
pub fn cmd_jra(
    pairs_path: &Path,
    p_t: f64,
    b_c_hz: f64,
    out: &mut dyn IoWrite,
) -> Result<i32, CliError> {
    if !(p_t > 0.0) || !(b_c_hz > 0.0) {
        return Err(CliError::Usage(format!(
            "p_t {} and b_c {} must both be positive",
            p_t, b_c_hz
        )));
    }
    let text = std::fs::read_to_string(pairs_path)
        .map_err(|e| CliError::Io(format!("{}: {}", pairs_path.display(), e)))?;
    let pairs = parse_pairs_csv(&text)?;
    let alloc = jra::allocate(&pairs, p_t, b_c_hz).map_err(CliError::Jra)?;
    out.write_all(alloc.to_csv().as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Experiment axes a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    LearningRate,
    BatchSize,
    NFeatures,
    Architecture,
    PT,
    NUsers,
    RMin,
    ReplayOnOff,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "learning_rate" => SweepAxis::LearningRate,
            "batch_size" => SweepAxis::BatchSize,
            "n_features" => SweepAxis::NFeatures,
            "architecture" => SweepAxis::Architecture,
            "p_t" => SweepAxis::PT,
            "n_users" => SweepAxis::NUsers,
            "r_min" => SweepAxis::RMin,
            "replay_on_off" => SweepAxis::ReplayOnOff,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep axis {:?}; axes: learning_rate, batch_size, n_features, \
                     architecture, p_t, n_users, r_min, replay_on_off",
                    other
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::LearningRate => "learning_rate",
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::NFeatures => "n_features",
            SweepAxis::Architecture => "architecture",
            SweepAxis::PT => "p_t",
            SweepAxis::NUsers => "n_users",
            SweepAxis::RMin => "r_min",
            SweepAxis::ReplayOnOff => "replay_on_off",
        }
    }
}

/// One sweep request: an axis, its values, and repeats per value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub repeats: usize,
}

/// Applies one axis value onto a run config.
pub fn apply_axis_value(
    config: &mut RunConfig,
    axis: SweepAxis,
    value: &str,
) -> Result<(), CliError> {
    let bad = |msg: String| CliError::Usage(msg);
    match axis {
        SweepAxis::LearningRate => {
            config.train.learning_rate = value
                .parse::<f64>()
                .map_err(|_| bad(format!("learning_rate value {:?} is not a number", value)))?;
        }
        SweepAxis::BatchSize => {
            config.train.batch_size = value
                .parse::<usize>()
                .map_err(|_| bad(format!("batch_size value {:?} is not an integer", value)))?;
        }
        SweepAxis::NFeatures => {
            config.env.n_features = value
                .parse::<usize>()
                .map_err(|_| bad(format!("n_features value {:?} is not an integer", value)))?;
            config.rebuild_arch();
        }
        SweepAxis::Architecture => {
            let sizes = value
                .split('x')
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| {
                    bad(format!(
                        "architecture value {:?} must be widths like 128x128",
                        value
                    ))
                })?;
            config.arch.hidden_sizes = sizes;
        }
        SweepAxis::PT => {
            config.env.p_t_w = value
                .parse::<f64>()
                .map_err(|_| bad(format!("p_t value {:?} is not a number", value)))?;
        }
        SweepAxis::NUsers => {
            let n = value
                .parse::<usize>()
                .map_err(|_| bad(format!("n_users value {:?} is not an integer", value)))?;
            config.env.n_users = n;
            config.env.n_channels = n / 2;
            config.rebuild_arch();
        }
        SweepAxis::RMin => {
            config.env.r_min_bps_hz = value
                .parse::<f64>()
                .map_err(|_| bad(format!("r_min value {:?} is not a number", value)))?;
        }
        SweepAxis::ReplayOnOff => {
            config.train.replay_enabled = match value {
                "on" => true,
                "off" => false,
                other => return Err(bad(format!("replay value {:?} must be on or off", other))),
            };
        }
    }
    Ok(())
}

/// Held-out seeds shared by every run of one sweep, so rates are comparable
/// across axis values.
pub fn sweep_eval_seeds(master_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| seeds::derive(master_seed, seeds::STREAM_EVAL, i))
        .collect()
}

const SWEEP_EVAL_SEEDS: usize = 5;

/// Trains the cross product of values and repeats, evaluates each run on a
/// shared held-out set, and writes `sweep.csv` plus per-run outputs.
///
/// A failed run becomes a CSV row with its error in the status column; the
/// sweep keeps going. The `wall_s` column is a placeholder zero to keep the
/// file byte-reproducible; real durations go to stderr.
pub fn cmd_sweep(spec: &SweepSpec, base: &RunConfig) -> Result<i32, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --values entry".into()));
    }
    if spec.repeats == 0 {
        return Err(CliError::Usage("sweep repeats must be at least 1".into()));
    }
    std::fs::create_dir_all(&base.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {}", base.output_dir.display(), e)))?;
    let eval_seeds = sweep_eval_seeds(base.master_seed, SWEEP_EVAL_SEEDS);

    let mut csv = String::from(
        "axis,value,repeat,master_seed,status,converged,episodes,wall_s,mean_eval_rate_bps,mean_val_error,max_val_error\n",
    );
    for (value_idx, value) in spec.values.iter().enumerate() {
        for repeat in 0..spec.repeats {
            let run_seed = seeds::derive(
                base.master_seed,
                seeds::STREAM_SWEEP,
                (value_idx * spec.repeats + repeat) as u64,
            );
            let row = run_sweep_cell(spec, base, value, repeat, run_seed, &eval_seeds);
            csv.push_str(&row);
            eprint!("{}", row);
        }
    }
    write_file(&base.output_dir.join("sweep.csv"), csv.as_bytes())?;
    eprintln!("sweep results in {}", base.output_dir.join("sweep.csv").display());
    Ok(EXIT_OK)
}

fn run_sweep_cell(
    spec: &SweepSpec,
    base: &RunConfig,
    value: &str,
    repeat: usize,
    run_seed: u64,
    eval_seeds: &[u64],
) -> String {
    let prefix = format!("{},{},{},{}", spec.axis.as_str(), value, repeat, run_seed);
    let err_row = |msg: String| {
        format!("{},error: {},false,0,0,,,\n", prefix, msg.replace(',', ";").replace('\n', " "))
    };
    let mut config = base.clone();
    config.master_seed = run_seed;
    config.output_dir = base
        .output_dir
        .join("runs")
        .join(format!("{}_{}_rep{}", spec.axis.as_str(), value.replace('/', "-"), repeat));
    if let Err(e) = apply_axis_value(&mut config, spec.axis, value) {
        return err_row(e.to_string());
    }
    if let Err(e) = config.validate() {
        return err_row(e.to_string());
    }
    if let Err(e) = std::fs::create_dir_all(&config.output_dir) {
        return err_row(format!("{}: {}", config.output_dir.display(), e));
    }

    let outcome = match trainer::train(&config.env, &config.arch, &config.train, run_seed) {
        Ok(o) => o,
        Err(e) => return err_row(e.to_string()),
    };
    let mut write_err = None;
    for (name, content) in [
        ("metrics.csv", outcome.metrics.episodes_csv()),
        ("validation.csv", outcome.metrics.validation_csv()),
    ] {
        if let Err(e) = std::fs::write(config.output_dir.join(name), content) {
            write_err = Some(e.to_string());
        }
    }
    if let Err(e) = outcome.params.save(&config.output_dir.join("model.bin")) {
        write_err = Some(e.to_string());
    }
    if let Some(e) = write_err {
        return err_row(e);
    }

    let mut rates = Vec::with_capacity(eval_seeds.len());
    for &seed in eval_seeds {
        let instance = Arc::new(generate_instance(&config.env, seed));
        match greedy_rate(&outcome.params, &instance, &config) {
            Ok(rate) => rates.push(rate),
            Err(e) => return err_row(e.to_string()),
        }
    }
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;

    let last_val_episode = outcome.metrics.validations.last().map(|r| r.episode);
    let (mean_err, max_err) = match last_val_episode {
        Some(ep) => {
            let errs: Vec<f64> = outcome
                .metrics
                .validations
                .iter()
                .filter(|r| r.episode == ep)
                .map(|r| r.error)
                .collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let max = errs.iter().copied().fold(f64::MIN, f64::max);
            (Some(mean), Some(max))
        }
        None => (None, None),
    };

    format!(
        "{},ok,{},{},0,{},{},{}\n",
        prefix,
        outcome.metrics.converged,
        outcome.metrics.episodes_run,
        mean_rate,
        fmt_opt(mean_err),
        fmt_opt(max_err)
    )
}

/// Instance CSV dump for one or more seeds, a debugging helper for the
/// oracle and jra commands.
pub fn instances_csv(config: &RunConfig, seeds_list: &[u64]) -> String {
    let mut out = String::new();
    for (idx, &seed) in seeds_list.iter().enumerate() {
        let csv = generate_instance(&config.env, seed).to_csv();
        if idx == 0 {
            out.push_str(&csv);
        } else {
            // Skip the repeated header.
            if let Some(pos) = csv.find('\n') {
                out.push_str(&csv[pos + 1..]);
            }
        }
    }
    out
}

/// Loads the run config for a command: file if given, defaults otherwise,
/// then CLI overrides.
pub fn resolve_config(
    config_path: Option<&Path>,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let mut config = match config_path {
        Some(path) => crate::config::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }
    if let Some(out) = out_override {
        config.output_dir = PathBuf::from(out);
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_assignments_are_valid_and_cover_the_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            let a = random_assignment(4, &mut rng);
            let mut counts = [0usize; 2];
            for &c in &a {
                counts[c] += 1;
            }
            assert_eq!(counts, [2, 2]);
            seen.insert(a);
        }
        assert_eq!(seen.len(), 6, "all N=4 assignments reachable");
    }

    #[test]
    fn pairs_csv_parses_and_validates() {
        let pairs = parse_pairs_csv("gamma1,gamma2,a1,a2\n6e5,1e4,4,4\n2e5,9e4,4,4\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].gamma1, 6e5);
        assert_eq!((pairs[1].user1, pairs[1].user2), (2, 3));

        assert!(matches!(
            parse_pairs_csv("wrong,header\n"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_pairs_csv("gamma1,gamma2,a1,a2\n1,2\n"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_pairs_csv("gamma1,gamma2,a1,a2\n"),
            Err(CliError::Usage(_))
        ));
        // Rate factors below 2 are a pair-level error.
        assert!(matches!(
            parse_pairs_csv("gamma1,gamma2,a1,a2\n6e5,1e4,1.5,4\n"),
            Err(CliError::Jra(_))
        ));
    }

    #[test]
    fn axis_values_apply_onto_the_config() {
        let mut cfg = RunConfig::default();
        apply_axis_value(&mut cfg, SweepAxis::NUsers, "8").unwrap();
        assert_eq!(cfg.env.n_users, 8);
        assert_eq!(cfg.env.n_channels, 4);
        assert_eq!(cfg.arch.n_users, 8);

        apply_axis_value(&mut cfg, SweepAxis::Architecture, "64x32").unwrap();
        assert_eq!(cfg.arch.hidden_sizes, vec![64, 32]);

        apply_axis_value(&mut cfg, SweepAxis::ReplayOnOff, "off").unwrap();
        assert!(!cfg.train.replay_enabled);

        assert!(apply_axis_value(&mut cfg, SweepAxis::ReplayOnOff, "maybe").is_err());
        assert!(apply_axis_value(&mut cfg, SweepAxis::PT, "lots").is_err());
        assert!(SweepAxis::parse("nonsense").is_err());
        assert_eq!(SweepAxis::parse("p_t").unwrap(), SweepAxis::PT);
    }

    #[test]
    fn exit_codes_match_the_contract() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::Oracle(OracleError::BudgetExceeded { count: 10, cap: 5 }).exit_code(),
            EXIT_SEARCH_BUDGET
        );
        assert_eq!(CliError::Oracle(OracleError::AllInfeasible).exit_code(), EXIT_USAGE);
    }
}
