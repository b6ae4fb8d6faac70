//! Argument definitions and command dispatch for the `dgor` binary.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dgor_core::{
    embedding_design, find_optimal_in_data, generate_trial, run_study_with, ContinuousDataset,
    Correction, Execution, RateSource, RegimeClass, RegimeSpec, ScenarioRegimes, SmartDataset,
    SmartTruth, StudyScenario,
};

use crate::api::{
    self, CoordsRequest, DgorRequest, EstimateMethod, LabeledPmf, RegimeInput, SampleSizeRequest,
};
use crate::error::{CliError, Result};
use crate::ingest::ingest_stard_like;
use crate::output::{render, Format};

#[derive(Debug, Parser)]
#[command(name = "dgor", version, about = "Dynamic generalized odds ratios for SMART designs")]
pub struct Cli {
    /// Output format for structured results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact dGOR of two regimes, with Wald inference when --n is given.
    Compute(ComputeArgs),
    /// Estimate a dGOR from trial data.
    Estimate(EstimateArgs),
    /// Total sample size from an effect size or from regime models.
    Samplesize(SampleSizeArgs),
    /// Monte Carlo replication study, or one simulated trial with --dataset.
    Simulate(SimulateArgs),
    /// Sequential search for the best regime of a class.
    Policy(PolicyArgs),
    /// Barycentric coordinates of three-category pmfs.
    Coords(CoordsArgs),
    /// Convert per-stage quality-of-life scores into a three-category dataset.
    Ingest(IngestArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

/// Two-stage regime models given inline.
///
/// Shared path (`--shared`): `--gamma` and `--resp` describe the common
/// first stage, `--nonresp1` the reference regime `(A, E)` and `--nonresp2`
/// the compared regime `(A, F)`.
///
/// Distinct path (default): regime 1 is the reference `(A, E)` with
/// `--gamma1/--resp1/--nonresp1`, regime 2 the compared `(B, E)` with
/// `--gamma2/--resp2/--nonresp2`. `--gamma` and `--resp` fill in either side.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, conflicts_with = "distinct")]
    pub shared: bool,
    #[arg(long)]
    pub distinct: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub resp: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub resp1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nonresp1: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub resp2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nonresp2: Option<Vec<f64>>,
}

fn required<T: Clone>(value: &Option<T>, fallback: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

impl ModelArgs {
    fn any(&self) -> bool {
        self.gamma.is_some()
            || self.gamma1.is_some()
            || self.gamma2.is_some()
            || self.resp.is_some()
            || self.resp1.is_some()
            || self.resp2.is_some()
            || self.nonresp1.is_some()
            || self.nonresp2.is_some()
    }

    /// `(g', g)` inputs.
    pub fn regimes(&self) -> Result<(RegimeInput, RegimeInput)> {
        let side = |gamma: &Option<f64>, resp: &Option<Vec<f64>>, nonresp: &Option<Vec<f64>>, i: u8| {
            Ok::<_, CliError>(RegimeInput {
                stage1: None,
                stage2: None,
                response_rate: required(gamma, &self.gamma, &format!("gamma{i}"))?,
                responder_pmf: required(resp, &self.resp, &format!("resp{i}"))?,
                nonresponder_pmf: required(nonresp, &None, &format!("nonresp{i}"))?,
            })
        };
        if self.shared {
            if self.gamma1.is_some() || self.gamma2.is_some() || self.resp1.is_some() || self.resp2.is_some() {
                return Err(CliError::Usage(
                    "--shared takes --gamma and --resp; per-regime rates and responder pmfs are for --distinct".into(),
                ));
            }
            Ok((
                side(&None, &None, &self.nonresp1, 1)?,
                side(&None, &None, &self.nonresp2, 2)?,
            ))
        } else {
            Ok((
                side(&self.gamma1, &self.resp1, &self.nonresp1, 1)?,
                side(&self.gamma2, &self.resp2, &self.nonresp2, 2)?,
            ))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Scenario file whose regimes are compared instead of inline flags.
    #[arg(long, conflicts_with_all = ["gamma", "gamma1", "gamma2", "resp", "resp1", "resp2", "nonresp1", "nonresp2"])]
    pub scenario: Option<PathBuf>,
    /// Total trial size for the Wald interval and test.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = api::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Plugin,
    Concordance,
    ConcordanceObserved,
    Ustat,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// CSV with `patient_id,stage1,responder,stage2,outcome`.
    #[arg(long)]
    pub data: PathBuf,
    /// The data holds per-stage scores (`y1,y2`) to be combined first.
    #[arg(long, conflicts_with = "continuous")]
    pub stard: bool,
    /// Outcomes are real-valued; implies `--method ustat`.
    #[arg(long)]
    pub continuous: bool,
    /// Number of outcome categories; defaults to the largest observed.
    #[arg(long)]
    pub categories: Option<usize>,
    /// Compared regime as `STAGE1,STAGE2`.
    #[arg(long)]
    pub g: String,
    /// Reference regime as `STAGE1,STAGE2`.
    #[arg(long)]
    pub gprime: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Plugin)]
    pub method: MethodArg,
    /// Fixed response rates for the U-statistic, e.g. `A=0.3,B=0.4`.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<String>>,
    #[arg(long, default_value_t = api::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SampleSizeArgs {
    /// Standardized effect size `log η / σ_log`.
    #[arg(long, allow_hyphen_values = true)]
    pub es: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = api::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = api::DEFAULT_POWER)]
    pub power: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Trial size per replication; defaults to the planned size.
    #[arg(long)]
    pub n: Option<u64>,
    /// Run replications on one thread.
    #[arg(long)]
    pub serial: bool,
    /// Write one simulated trial of this many patients as CSV instead.
    #[arg(long)]
    pub dataset: Option<usize>,
    /// Output file for --dataset (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    Bonferroni,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub stard: bool,
    #[arg(long)]
    pub categories: Option<usize>,
    /// Candidate regime `STAGE1,STAGE2`, tested in the order given.
    #[arg(long = "regime", required = true)]
    pub regimes: Vec<String>,
    #[arg(long, default_value_t = api::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CorrectionArg::Bonferroni)]
    pub correction: CorrectionArg,
}

#[derive(Debug, Clone, Args)]
pub struct CoordsArgs {
    /// `LABEL=p1,p2,p3`; repeatable.
    #[arg(long = "pmf")]
    pub pmfs: Vec<String>,
    /// JSON file in the `/api/v1/coords` request format.
    #[arg(long, conflicts_with = "pmfs")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// CSV with `patient_id,stage1,responder,stage2,y1,y2`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn read_scenario(path: &Path) -> Result<StudyScenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let scenario: StudyScenario = serde_json::from_str(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

fn parse_regime(raw: &str) -> Result<RegimeSpec> {
    match raw.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a, b] if !a.is_empty() && !b.is_empty() => Ok(RegimeSpec::new(a, b)),
        _ => Err(CliError::Usage(format!(
            "regime {raw:?} must be STAGE1,STAGE2"
        ))),
    }
}

fn parse_rates(raw: &[String]) -> Result<RateSource> {
    let rates = raw
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("rate {item:?} must be TREATMENT=VALUE")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("rate {item:?} is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect::<Result<_>>()?;
    Ok(RateSource::Fixed(rates))
}

fn read_dataset(path: &Path, stard: bool, categories: Option<usize>) -> Result<SmartDataset> {
    let reader = open(path)?;
    if stard {
        ingest_stard_like(reader, None)
    } else {
        Ok(SmartDataset::read_csv(reader, None, categories)?)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<String> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::io(p, e))?;
            Ok(String::new())
        }
        None => Ok(text.to_string()),
    }
}

fn dataset_csv(data: &SmartDataset) -> Result<String> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

/// Runs a parsed command and returns what goes to stdout. `serve` blocks.
pub fn run(cli: &Cli) -> Result<String> {
    let format = cli.format;
    match &cli.command {
        Command::Compute(args) => {
            if let Some(path) = &args.scenario {
                let scenario = read_scenario(path)?;
                let response = match &scenario.regimes {
                    ScenarioRegimes::TwoStage([gp, g]) => api::compute(&DgorRequest {
                        gprime: gp.into(),
                        g: g.into(),
                        shared: scenario.shared,
                        n: args.n,
                        alpha: args.alpha,
                    })?,
                    ScenarioRegimes::KStage([gp, g]) => {
                        api::compute_kstage(g, gp, args.n, args.alpha)?
                    }
                };
                return render(&response, format);
            }
            let (gprime, g) = args.model.regimes()?;
            let req = DgorRequest {
                gprime,
                g,
                shared: args.model.shared,
                n: args.n,
                alpha: args.alpha,
            };
            render(&api::compute(&req)?, format)
        }
        Command::Samplesize(args) => {
            let req = match (args.es, args.model.any()) {
                (Some(_), true) => {
                    return Err(CliError::Usage(
                        "give either --es or regime model flags, not both".into(),
                    ))
                }
                (Some(es), false) => SampleSizeRequest {
                    es: Some(es),
                    gprime: None,
                    g: None,
                    shared: false,
                    alpha: args.alpha,
                    power: args.power,
                },
                (None, _) => {
                    let (gprime, g) = args.model.regimes()?;
                    SampleSizeRequest {
                        es: None,
                        gprime: Some(gprime),
                        g: Some(g),
                        shared: args.model.shared,
                        alpha: args.alpha,
                        power: args.power,
                    }
                }
            };
            render(&api::samplesize(&req)?, format)
        }
        Command::Estimate(args) => {
            let g = parse_regime(&args.g)?;
            let gprime = parse_regime(&args.gprime)?;
            if args.continuous || args.method == MethodArg::Ustat {
                if !args.continuous {
                    return Err(CliError::Usage("--method ustat needs --continuous data".into()));
                }
                let data = ContinuousDataset::read_csv(open(&args.data)?)?;
                let rates = match &args.rates {
                    Some(raw) => parse_rates(raw)?,
                    None => RateSource::Observed,
                };
                return render(&api::estimate_ustat(&data, &g, &gprime, &rates)?, format);
            }
            let data = read_dataset(&args.data, args.stard, args.categories)?;
            let method = match args.method {
                MethodArg::Plugin => EstimateMethod::Plugin,
                MethodArg::Concordance => EstimateMethod::Concordance,
                MethodArg::ConcordanceObserved => EstimateMethod::ConcordanceObserved,
                MethodArg::Ustat => unreachable!("handled above"),
            };
            render(&api::estimate(&data, &g, &gprime, method, args.alpha)?, format)
        }
        Command::Simulate(args) => {
            let mut scenario = read_scenario(&args.scenario)?;
            if let Some(seed) = args.seed {
                scenario.seed = seed;
            }
            if let Some(reps) = args.replications {
                scenario.replications = reps;
            }
            if args.n.is_some() {
                scenario.n_override = args.n;
            }
            if let Some(n) = args.dataset {
                let ScenarioRegimes::TwoStage([gp, g]) = &scenario.regimes else {
                    return Err(CliError::Usage(
                        "--dataset needs a two-stage scenario".into(),
                    ));
                };
                let design = scenario
                    .design
                    .clone()
                    .unwrap_or_else(|| embedding_design(g, gp));
                let truth = SmartTruth::from_regimes(&design, &[gp, g])?;
                let data = generate_trial(&truth, n, scenario.seed)?;
                return write_output(args.out.as_deref(), &dataset_csv(&data)?);
            }
            let execution = if args.serial {
                Execution::Serial
            } else {
                Execution::Parallel
            };
            let report = run_study_with(&scenario, execution)?;
            write_output(args.out.as_deref(), &render(&report, format)?)
        }
        Command::Policy(args) => {
            let data = read_dataset(&args.data, args.stard, args.categories)?;
            let members = args
                .regimes
                .iter()
                .map(|r| parse_regime(r))
                .collect::<Result<Vec<_>>>()?;
            let correction = match args.correction {
                CorrectionArg::Bonferroni => Correction::Bonferroni,
                CorrectionArg::None => Correction::None,
            };
            let class = RegimeClass::new(members, args.alpha, correction)?;
            render(&find_optimal_in_data(&class, &data)?, format)
        }
        Command::Coords(args) => {
            let req = match &args.input {
                Some(path) => serde_json::from_reader(open(path)?)?,
                None => {
                    if args.pmfs.is_empty() {
                        return Err(CliError::Usage("give --pmf or --input".into()));
                    }
                    CoordsRequest {
                        pmfs: args.pmfs.iter().map(|s| parse_labeled_pmf(s)).collect::<Result<_>>()?,
                    }
                }
            };
            render(&api::coords(&req)?, format)
        }
        Command::Ingest(args) => {
            let data = ingest_stard_like(open(&args.input)?, None)?;
            write_output(args.output.as_deref(), &dataset_csv(&data)?)
        }
        Command::Serve(args) => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io("<runtime>", e))?;
            runtime.block_on(crate::server::serve(&args.bind))?;
            Ok(String::new())
        }
    }
}

fn parse_labeled_pmf(raw: &str) -> Result<LabeledPmf> {
    let (label, values) = match raw.split_once('=') {
        Some((l, v)) => (Some(l.trim().to_string()), v),
        None => (None, raw),
    };
    let pmf = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("pmf entry {v:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    Ok(LabeledPmf { label, pmf })
}

/// Parses `args`, runs the command and writes its output to `out`.
pub fn main_with<I, T>(args: I, out: &mut impl Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = run(&cli)?;
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}
