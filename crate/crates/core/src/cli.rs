//! Command-line front end. `main.rs` only parses arguments and maps the
//! returned error to an exit code.
//!
//! Exit codes: 0 success, 1 internal or numerical failure, 2 usage or
//! configuration error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use crate::calibration::{generate_targets, truth_csv, GenOptions, PosteriorProblem};
use crate::config::{parse_composition, parse_problem, serialize_problem, ProblemConfig, TargetEntry};
use crate::diagnostics::{self, Samples};
use crate::kinetics::{production_rates, GasState};
use crate::mechanism::{parse_mechanism, Mechanism, ONE_ATM};
use crate::propagation::{self, ThinningSpec};
use crate::reactor::{integrate, simulate_case};
use crate::sampler::{self, hex_digest, partial_path, Chain, ChainConfig, SamplerConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "kincal", version, about = "Bayesian calibration of H2/O2 kinetics")]
pub struct Cli {
    /// Maximum number of concurrent posterior evaluations or simulations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Increase log verbosity (repeatable). Logs go to stderr.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Per-reaction kf, kr and net rate at one state, as CSV on stdout.
    Rates(RatesArgs),
    /// Integrate one case; trajectory CSV to a file, observable to stdout.
    Simulate(SimulateArgs),
    /// Simulate cases with the baseline mechanism and write noisy targets.
    GenTargets(GenTargetsArgs),
    /// Run the ensemble sampler on a problem file.
    Sample(SampleArgs),
    /// Autocorrelation, summaries and histograms of a chain.
    Diagnose(DiagnoseArgs),
    /// Run thinned posterior samples through a prediction case.
    Propagate(PropagateArgs),
    /// Write one mechanism file per thinned posterior sample.
    ExportCalibrations(ExportArgs),
    /// Chain file utilities.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum ChainCommand {
    /// Convert a chain file to CSV.
    Export(ChainExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    /// Mechanism file (bundled baseline when omitted).
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    /// Temperature in K.
    #[arg(long)]
    pub temperature: f64,
    /// Pressure in atm, used with --x.
    #[arg(long, default_value_t = 1.0)]
    pub pressure: f64,
    /// Mole fractions, e.g. H2:0.3,O2:0.15,N2:0.55.
    #[arg(long, conflicts_with = "conc")]
    pub x: Option<String>,
    /// Concentrations in mol/cm^3, e.g. H2:1e-5. All zero when neither
    /// --x nor --conc is given.
    #[arg(long)]
    pub conc: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Case file (targets grammar).
    #[arg(long)]
    pub case: PathBuf,
    /// Target label when the case file holds several.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    /// Trajectory CSV path.
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenTargetsArgs {
    /// Problem or case file whose targets need data.
    #[arg(long)]
    pub cases: PathBuf,
    /// Output problem file; `<out>.truth.csv` receives noiseless values.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative sigma for targets without one.
    #[arg(long, default_value_t = 0.1)]
    pub sigma_rel: f64,
    /// Noise multiplier; 0 writes the simulated values exactly.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Chain file to write; checkpoints go to `<out>.partial`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[arg(long)]
    pub sweeps: Option<u64>,
    #[arg(long)]
    pub walkers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub thin_store: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Continue from `<out>.partial` or `<out>` if present.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Records to discard (default: half).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Maximum lag (default: min(1000, window/5)).
    #[arg(long)]
    pub smax: Option<usize>,
    /// 1-based parameter ids for histogram output, e.g. 2,4,7.
    #[arg(long, value_delimiter = ',')]
    pub triangle: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// Also report integrated autocorrelation times.
    #[arg(long)]
    pub iat: bool,
    /// Window constant for the integrated time.
    #[arg(long, default_value_t = 5.0)]
    pub iat_window: f64,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ThinArgs {
    /// Picks per walker.
    #[arg(long, default_value_t = 9)]
    pub picks: usize,
    /// First sweep (default: half the chain).
    #[arg(long)]
    pub start: Option<u64>,
    /// Sweeps between picks (default: uniform over the rest of the chain).
    #[arg(long)]
    pub stride: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct PropagateArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Problem file that produced the chain (mechanism and active map).
    #[arg(long)]
    pub problem: PathBuf,
    /// Prediction case file.
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[command(flatten)]
    pub thin: ThinArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[command(flatten)]
    pub thin: ThinArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ChainExportArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files written under `.partial` names and renamed together on success.
#[derive(Default)]
struct Outputs {
    pending: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let tmp = partial_path(path);
        fs::write(&tmp, contents).map_err(|e| failure(format!("{}: {e}", tmp.display())))?;
        self.pending.push((tmp, path.to_path_buf()));
        Ok(())
    }

    fn commit(self) -> Result<(), CliError> {
        for (tmp, path) in self.pending {
            fs::rename(&tmp, &path).map_err(|e| failure(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
struct InputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a Cli,
    inputs: &'a [InputFile],
    config_hash: String,
    seed: Option<u64>,
    kincal_version: &'static str,
}

fn read_input(path: &Path, inputs: &mut Vec<InputFile>) -> Result<String, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    inputs.push(InputFile {
        path: path.display().to_string(),
        sha256: hex_digest(text.as_bytes()),
    });
    Ok(text)
}

/// Digest of the invocation and the content of every input it read.
pub fn config_hash(cli: &Cli, inputs_sha: &[String]) -> String {
    let mut bytes = serde_json::to_vec(cli).expect("arguments serialise");
    for s in inputs_sha {
        bytes.push(0);
        bytes.extend_from_slice(s.as_bytes());
    }
    hex_digest(&bytes)
}

fn manifest_json(cli: &Cli, inputs: &[InputFile], seed: Option<u64>) -> String {
    let shas: Vec<String> = inputs.iter().map(|i| i.sha256.clone()).collect();
    let m = Manifest {
        command: cli,
        inputs,
        config_hash: config_hash(cli, &shas),
        seed,
        kincal_version: crate::VERSION,
    };
    serde_json::to_string_pretty(&m).expect("manifest serialises")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_mechanism(
    flag: Option<&Path>,
    from_config: Option<(&str, &Path)>,
    inputs: &mut Vec<InputFile>,
) -> Result<(Mechanism, String), CliError> {
    let path = match (flag, from_config) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some((rel, base))) => Some(base.parent().unwrap_or(Path::new(".")).join(rel)),
        (None, None) => None,
    };
    let text = match &path {
        Some(p) => read_input(p, inputs)?,
        None => Mechanism::baseline_text().to_string(),
    };
    let mech = parse_mechanism(&text).map_err(|e| {
        usage(format!(
            "{}: {e}",
            path.as_ref().map_or("baseline".into(), |p| p.display().to_string())
        ))
    })?;
    Ok((mech, text))
}

fn load_config(path: &Path, inputs: &mut Vec<InputFile>) -> Result<(ProblemConfig, String), CliError> {
    let text = read_input(path, inputs)?;
    let cfg = parse_problem(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

fn load_problem(
    path: &Path,
    mechanism: Option<&Path>,
    inputs: &mut Vec<InputFile>,
) -> Result<(ProblemConfig, PosteriorProblem, String), CliError> {
    let (cfg, text) = load_config(path, inputs)?;
    let (mech, mech_text) = load_mechanism(
        mechanism,
        cfg.mechanism.as_deref().map(|m| (m, path)),
        inputs,
    )?;
    let problem = PosteriorProblem::from_config(mech, &cfg).map_err(usage)?;
    let digest = hex_digest(format!("{text}\0{mech_text}").as_bytes());
    Ok((cfg, problem, digest))
}

fn pick_target<'a>(cfg: &'a ProblemConfig, label: Option<&str>, path: &Path) -> Result<&'a TargetEntry, CliError> {
    match label {
        Some(l) => cfg
            .targets
            .iter()
            .find(|t| t.label == l)
            .ok_or_else(|| usage(format!("{}: no target labelled '{l}'", path.display()))),
        None => match cfg.targets.as_slice() {
            [one] => Ok(one),
            [] => Err(usage(format!("{}: no targets defined", path.display()))),
            _ => Err(usage(format!(
                "{}: several targets defined; choose one with --target",
                path.display()
            ))),
        },
    }
}

fn species_values(mech: &Mechanism, text: &str) -> Result<Vec<f64>, CliError> {
    let pairs = parse_composition(text).ok_or_else(|| usage(format!("invalid composition '{text}'")))?;
    let mut v = vec![0.0; mech.n_species()];
    for (sp, x) in pairs {
        let i = mech
            .species_index(&sp)
            .ok_or_else(|| usage(format!("unknown species '{sp}'")))?;
        if x < 0.0 {
            return Err(usage(format!("negative amount for '{sp}'")));
        }
        v[i] += x;
    }
    Ok(v)
}

fn cmd_rates(args: &RatesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (mech, _) = load_mechanism(args.mechanism.as_deref(), None, &mut inputs)?;
    if !(args.temperature > 0.0 && args.pressure > 0.0) {
        return Err(usage("temperature and pressure must be positive"));
    }
    let state = match (&args.x, &args.conc) {
        (Some(x), _) => {
            let mut x = species_values(&mech, x)?;
            let sum: f64 = x.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                log::warn!("mole fractions sum to {sum}; normalising");
                x.iter_mut().for_each(|v| *v /= sum);
            }
            GasState::from_mole_fractions(args.temperature, args.pressure * ONE_ATM, &x)
        }
        (None, Some(c)) => GasState::new(args.temperature, species_values(&mech, c)?),
        (None, None) => GasState::new(args.temperature, vec![0.0; mech.n_species()]),
    };
    for s in &mech.species {
        s.thermo_props(args.temperature).map_err(usage)?;
    }
    let ev = production_rates(&mech, &state);
    let mut s = String::from("id,kf,kr,q\n");
    for (i, r) in mech.reactions.iter().enumerate() {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", r.id, ev.kf[i], ev.kr[i], ev.net_rates[i]));
    }
    out.write_all(s.as_bytes()).map_err(failure)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (cfg, _) = load_config(&args.case, &mut inputs)?;
    let target = pick_target(&cfg, args.target.as_deref(), &args.case)?;
    let (mech, _) = load_mechanism(
        args.mechanism.as_deref(),
        cfg.mechanism.as_deref().map(|m| (m, args.case.as_path())),
        &mut inputs,
    )?;
    target.case.validate(&mech).map_err(usage)?;
    let traj = integrate(&mech, &target.case, &cfg.integrator).map_err(usage)?;
    let mut csv = String::from("t,T,p");
    for s in &traj.species {
        csv.push_str(&format!(",Y_{s}"));
    }
    csv.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.states) {
        csv.push_str(&format!("{t:e},{:e},{:e}", y[0], traj.pressure_of(y) / ONE_ATM));
        for v in &y[1..] {
            csv.push_str(&format!(",{v:e}"));
        }
        csv.push('\n');
    }
    let mut outputs = Outputs::default();
    outputs.write(&args.out, csv)?;
    outputs.write(&sibling(&args.out, ".manifest.json"), manifest_json(cli, &inputs, None))?;
    let value = simulate_case(&mech, &target.case, &cfg.integrator);
    outputs.commit()?;
    match value {
        Ok(v) => writeln!(out, "{v:e}").map_err(failure),
        Err(e) => Err(failure(format!("target '{}': {e}", target.label))),
    }
}

fn cmd_gen_targets(cli: &Cli, args: &GenTargetsArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (mut cfg, _) = load_config(&args.cases, &mut inputs)?;
    if cfg.targets.is_empty() {
        return Err(usage(format!("{}: no targets defined", args.cases.display())));
    }
    if !(args.sigma_rel >= 0.0 && args.noise_scale >= 0.0) {
        return Err(usage("sigma-rel and noise-scale must be non-negative"));
    }
    let (mech, _) = load_mechanism(
        args.mechanism.as_deref(),
        cfg.mechanism.as_deref().map(|m| (m, args.cases.as_path())),
        &mut inputs,
    )?;
    for t in &cfg.targets {
        t.case
            .validate(&mech)
            .map_err(|e| usage(format!("target '{}': {e}", t.label)))?;
    }
    let opts = GenOptions {
        sigma_rel: args.sigma_rel,
        noise_scale: args.noise_scale,
        seed: args.seed,
    };
    let generated = generate_targets(&mech, &cfg.targets, &cfg.integrator, &opts).map_err(failure)?;
    cfg.targets = generated.iter().map(|g| g.entry.clone()).collect();
    let mut outputs = Outputs::default();
    outputs.write(&args.out, serialize_problem(&cfg))?;
    outputs.write(&sibling(&args.out, ".truth.csv"), truth_csv(&generated))?;
    outputs.write(
        &sibling(&args.out, ".manifest.json"),
        manifest_json(cli, &inputs, Some(args.seed)),
    )?;
    outputs.commit()
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (cfg, problem, problem_hash) = load_problem(&args.problem, args.mechanism.as_deref(), &mut inputs)?;
    let s = &cfg.sampler;
    let sampler_cfg = SamplerConfig {
        a: args.a.unwrap_or(s.a),
        walkers: args.walkers.unwrap_or(s.walkers),
        sweeps: args.sweeps.unwrap_or(s.sweeps),
        seed: args.seed.unwrap_or(s.seed),
        thin_store: args.thin_store.unwrap_or(s.thin_store),
        checkpoint_every: args.checkpoint_every.unwrap_or(s.checkpoint_every),
    };
    sampler_cfg.validate(problem.dim()).map_err(usage)?;
    let chain_cfg = ChainConfig {
        sampler: sampler_cfg.clone(),
        problem_hash,
        param_names: problem.map.names(),
        prior_means: problem.prior.means(),
        crate_version: crate::VERSION.to_string(),
    };
    let checkpoint = partial_path(&args.out);
    let existing = [&checkpoint, &args.out]
        .into_iter()
        .find(|p| args.resume && p.exists());
    let chain = match existing {
        Some(path) => {
            log::info!("resuming from {}", path.display());
            let chain = Chain::load(path).map_err(usage)?;
            sampler::resume(&problem, chain, &chain_cfg, Some(&checkpoint)).map_err(|e| match e {
                sampler::SamplerError::Mismatch(_) | sampler::SamplerError::Config(_) => usage(e),
                _ => failure(e),
            })?
        }
        None => {
            let init = sampler::init_ensemble(&problem.prior, sampler_cfg.walkers, sampler_cfg.seed, &problem)
                .map_err(failure)?;
            sampler::run(&problem, init, chain_cfg, Some(&checkpoint)).map_err(failure)?
        }
    };
    chain.save(&args.out).map_err(failure)?;
    let _ = fs::remove_file(&checkpoint);
    let acc = chain.acceptance_fraction();
    log::info!(
        "done: {} sweeps, mean acceptance {:.3}, {} of {} likelihood evaluations failed",
        chain.last_sweep(),
        acc.iter().sum::<f64>() / acc.len() as f64,
        problem.failures(),
        problem.evaluations()
    );
    let mut outputs = Outputs::default();
    outputs.write(
        &sibling(&args.out, ".manifest.json"),
        manifest_json(cli, &inputs, Some(sampler_cfg.seed)),
    )?;
    outputs.commit()
}

fn load_chain(path: &Path, inputs: &mut Vec<InputFile>) -> Result<Chain, CliError> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    inputs.push(InputFile {
        path: path.display().to_string(),
        sha256: hex_digest(&bytes),
    });
    Chain::read_from(&bytes[..]).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_diagnose(cli: &Cli, args: &DiagnoseArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let chain = load_chain(&args.chain, &mut inputs)?;
    let samples = Samples::from_chain(&chain);
    let burn_in = args.burn_in.unwrap_or(diagnostics::default_burn_in(samples.records));
    let s_max = args
        .smax
        .unwrap_or(diagnostics::default_s_max(samples.records, burn_in));
    let names = &chain.config.param_names;
    let ac = diagnostics::autocovariance(&samples, burn_in, s_max).map_err(usage)?;
    let summary = diagnostics::summarize(&samples, burn_in).map_err(usage)?;
    let iat: Option<Vec<Option<f64>>> = args.iat.then(|| {
        ac.params
            .iter()
            .map(|p| {
                p.rho
                    .as_ref()
                    .and_then(|r| diagnostics::integrated_time(r, args.iat_window))
            })
            .collect()
    });
    fs::create_dir_all(&args.out).map_err(failure)?;
    let mut outputs = Outputs::default();
    outputs.write(&args.out.join("autocorr.csv"), diagnostics::autocorr_csv(&ac, names))?;
    outputs.write(
        &args.out.join("summary.csv"),
        diagnostics::summary_csv(&summary, names, iat.as_deref()),
    )?;
    outputs.write(
        &args.out.join("covariance.csv"),
        diagnostics::matrix_csv(&summary.covariance, names),
    )?;
    outputs.write(
        &args.out.join("correlation.csv"),
        diagnostics::matrix_csv(&summary.correlation, names),
    )?;
    let mut acc = String::from("walker,acceptance\n");
    for (k, a) in chain.acceptance_fraction().iter().enumerate() {
        acc.push_str(&format!("{k},{a:e}\n"));
    }
    outputs.write(&args.out.join("acceptance.csv"), acc)?;
    if !args.triangle.is_empty() {
        if args.triangle.contains(&0) {
            return Err(usage("--triangle ids are 1-based"));
        }
        let subset: Vec<usize> = args.triangle.iter().map(|i| i - 1).collect();
        let grid = diagnostics::triangle_data(&samples, burn_in, &subset, args.bins, &chain.config.prior_means)
            .map_err(usage)?;
        for (a, id) in args.triangle.iter().enumerate() {
            outputs.write(
                &args.out.join(format!("hist1d_{id}.csv")),
                diagnostics::hist1d_csv(&grid, a),
            )?;
        }
        for (p, ((a, b), _)) in grid.hist2d.iter().enumerate() {
            outputs.write(
                &args
                    .out
                    .join(format!("hist2d_{}_{}.csv", args.triangle[*a], args.triangle[*b])),
                diagnostics::hist2d_csv(&grid, p),
            )?;
        }
    }
    outputs.write(&args.out.join("manifest.json"), manifest_json(cli, &inputs, None))?;
    outputs.commit()
}

fn thinning(chain: &Chain, t: &ThinArgs) -> Result<Vec<propagation::ThinnedSample>, CliError> {
    let default = ThinningSpec::second_half(chain.last_sweep(), t.picks).map_err(usage)?;
    let spec = ThinningSpec {
        picks: t.picks,
        start: t.start.unwrap_or(default.start),
        stride: t.stride.unwrap_or(default.stride),
    };
    propagation::thin(chain, &spec).map_err(usage)
}

fn chain_and_problem(
    chain: &Path,
    problem: &Path,
    mechanism: Option<&Path>,
    inputs: &mut Vec<InputFile>,
) -> Result<(Chain, PosteriorProblem), CliError> {
    let chain = load_chain(chain, inputs)?;
    let (_, problem, digest) = load_problem(problem, mechanism, inputs)?;
    if chain.config.param_names != problem.map.names() {
        return Err(usage("chain parameters do not match the problem's active map"));
    }
    if chain.config.problem_hash != digest {
        log::warn!("problem or mechanism differs from the one that produced the chain");
    }
    Ok((chain, problem))
}

fn cmd_propagate(cli: &Cli, args: &PropagateArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (chain, problem) =
        chain_and_problem(&args.chain, &args.problem, args.mechanism.as_deref(), &mut inputs)?;
    let (case_cfg, _) = load_config(&args.case, &mut inputs)?;
    let target = pick_target(&case_cfg, args.target.as_deref(), &args.case)?;
    target.case.validate(&problem.mechanism).map_err(usage)?;
    let samples = thinning(&chain, &args.thin)?;
    let result = propagation::propagate(
        &samples,
        &target.case,
        &problem.mechanism,
        &problem.map,
        &case_cfg.integrator,
    )
    .map_err(failure)?;
    if result.failures > 0 {
        log::warn!("{} of {} samples failed", result.failures, samples.len());
    }
    fs::create_dir_all(&args.out).map_err(failure)?;
    let mut outputs = Outputs::default();
    outputs.write(
        &args.out.join("samples.csv"),
        propagation::samples_csv(&result, &problem.map.names()),
    )?;
    outputs.write(&args.out.join("summary.csv"), propagation::summary_csv(&result))?;
    outputs.write(&args.out.join("hist.csv"), propagation::hist_csv(&result))?;
    outputs.write(&args.out.join("manifest.json"), manifest_json(cli, &inputs, None))?;
    outputs.commit()
}

fn cmd_export(cli: &Cli, args: &ExportArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let (chain, problem) =
        chain_and_problem(&args.chain, &args.problem, args.mechanism.as_deref(), &mut inputs)?;
    let samples = thinning(&chain, &args.thin)?;
    propagation::export_calibrations(&args.out, &problem.mechanism, &problem.map, &samples)
        .map_err(failure)?;
    let mut outputs = Outputs::default();
    outputs.write(&args.out.join("manifest.json"), manifest_json(cli, &inputs, None))?;
    outputs.commit()
}

fn cmd_chain_export(args: &ChainExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let chain = load_chain(&args.chain, &mut Vec::new())?;
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            chain.write_csv(&mut buf).map_err(failure)?;
            let mut outputs = Outputs::default();
            outputs.write(path, buf)?;
            outputs.commit()
        }
        None => chain.write_csv(out).map_err(failure),
    }
}

/// Runs a parsed command, writing stdout data to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Rates(a) => cmd_rates(a, out),
        Command::Simulate(a) => cmd_simulate(cli, a, out),
        Command::GenTargets(a) => cmd_gen_targets(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Diagnose(a) => cmd_diagnose(cli, a),
        Command::Propagate(a) => cmd_propagate(cli, a),
        Command::ExportCalibrations(a) => cmd_export(cli, a),
        Command::Chain {
            command: ChainCommand::Export(a),
        } => cmd_chain_export(a, out),
    }
}

/// Parses `argv`, configures logging and the thread pool, runs, and
/// returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
