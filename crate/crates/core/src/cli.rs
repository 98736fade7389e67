//! Command-line front end: configuration, orchestration and report emission.
//!
//! Every subcommand reads an optional JSON config (`--config`), applies flag
//! overrides, runs one experiment and writes a report as CSV or JSON. CSV
//! files written to disk get a `<out>.meta.json` sidecar with the provenance
//! and summary that do not fit a flat table.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleSpec;
use crate::entropy::{
    ball_log_volume, ball_log_volume_limit, default_delta, dt_equality_report, selfadjoint_entropy, DtEqualityParams,
    DtRow, EntropyReport,
};
use crate::error::{Error, Result};
use crate::measures::{empirical_log_energy, moment_distance, MeasureSpec};
use crate::microstates::{hit_rate, regularization_sweep, vol_d_log_weight, MicrostateSpec, SweepRow};
use crate::models::{target_table, McParams, OperatorModel};
use crate::report::{ext_f64, fmt_f64, write_output, CsvRow, ExperimentReport, RunMeta};
use crate::schur::schur_decompose;
use crate::seed::Seed;
use crate::spectral::{eigenvalues, fk_determinant, offdiag_from_spectrum, operator_norm, EmpiricalSpectrum};
use crate::svg;

#[derive(Parser, Debug)]
#[command(name = "freeent", version, about = "Random matrix microstates, Brown measures and free entropy bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample one matrix and write its eigenvalues (`re,im` per row).
    Sample(CommonArgs),
    /// Spectral statistics of one sampled matrix.
    Spectrum(CommonArgs),
    /// Moment distance of perturbed spectra to a reference measure over a grid of t.
    Regularize(CommonArgs),
    /// Microstate hit rates of an ensemble against a model's moments.
    Microstate(CommonArgs),
    /// Closed-form entropy values for a Brown measure and offdiagonality.
    EntropyBound(CommonArgs),
    /// Upper bound, hit rates and lower-bound diagnostics for DT(nu, o).
    DtVerify(CommonArgs),
    /// Schur decomposition of a sample and statistics of its triangular part.
    SchurCheck(CommonArgs),
    /// Normalized log-volumes of the offdiagonal balls and their limit.
    BallVolume(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Spectrum(_) => "spectrum",
            Command::Regularize(_) => "regularize",
            Command::Microstate(_) => "microstate",
            Command::EntropyBound(_) => "entropy-bound",
            Command::DtVerify(_) => "dt-verify",
            Command::SchurCheck(_) => "schur-check",
            Command::BallVolume(_) => "ball-volume",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Sample(a)
            | Command::Spectrum(a)
            | Command::Regularize(a)
            | Command::Microstate(a)
            | Command::EntropyBound(a)
            | Command::DtVerify(a)
            | Command::SchurCheck(a)
            | Command::BallVolume(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by all subcommands; each one overrides the config field of
/// the same name. Flags a subcommand has no use for are ignored.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent or `-`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Ensemble as inline JSON, e.g. '{"kind":"ginibre","dim":500}'.
    #[arg(long)]
    pub ensemble: Option<String>,
    /// Reference measure as inline JSON, e.g. '{"kind":"uniform_disk","radius":1}'.
    #[arg(long)]
    pub measure: Option<String>,
    /// Operator model as inline JSON, e.g. '{"kind":"circular"}'.
    #[arg(long)]
    pub model: Option<String>,
    /// Overrides the ensemble dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated dimension grid.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Comma-separated perturbation scales.
    #[arg(long = "t-grid", value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Moment order of the eigenvalue comparison.
    #[arg(long)]
    pub l: Option<usize>,
    /// Offdiagonality `o`.
    #[arg(long)]
    pub od: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// SVG output (a file, or a directory for `regularize`).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Microstate parameters as written in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostateParams {
    pub radius: Option<f64>,
    pub k: Option<usize>,
    pub eps: Option<f64>,
    #[serde(default)]
    pub improved: Option<ImprovedParams>,
    #[serde(default = "default_true")]
    pub inflate_by_stderr: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImprovedParams {
    pub l: usize,
    pub theta: f64,
    /// Defaults to the model's Brown measure.
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dim: Option<usize>,
    pub trials: Option<usize>,
}

/// One JSON document describing a run. Every field is optional here; each
/// subcommand reports the fields it needs but did not get.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub ensemble: Option<EnsembleSpec>,
    pub model: Option<OperatorModel>,
    pub measure: Option<MeasureSpec>,
    pub od: Option<f64>,
    pub microstate: Option<MicrostateParams>,
    pub mc: Option<McConfig>,
    pub dims: Option<Vec<usize>>,
    pub t_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub l: Option<usize>,
    pub delta: Option<f64>,
    pub svg: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })
    }

    /// Config file (if any) with the flags applied on top.
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig> {
        let mut cfg = match &args.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let inline = |text: &Option<String>, field: &str| -> Result<Option<serde_json::Value>> {
            text.as_ref()
                .map(|t| {
                    serde_json::from_str(t).map_err(|source| Error::Json { context: format!("--{field}"), source })
                })
                .transpose()
        };
        if let Some(v) = inline(&args.ensemble, "ensemble")? {
            cfg.ensemble = Some(parse_value(v, "--ensemble")?);
        }
        if let Some(v) = inline(&args.measure, "measure")? {
            cfg.measure = Some(parse_value(v, "--measure")?);
        }
        if let Some(v) = inline(&args.model, "model")? {
            cfg.model = Some(parse_value(v, "--model")?);
        }
        if let Some(n) = args.dim {
            let e = cfg.ensemble.take().ok_or_else(|| Error::param("ensemble", "--dim needs an ensemble"))?;
            cfg.ensemble = Some(e.with_dim(n));
        }
        macro_rules! set {
            ($($f:ident),*) => {$(if args.$f.is_some() { cfg.$f = args.$f.clone(); })*};
        }
        set!(seed, dims, t_grid, trials, l, od, delta, svg, out, format);
        Ok(cfg)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn ensemble(&self) -> Result<EnsembleSpec> {
        let e = self.ensemble.clone().ok_or_else(|| missing("ensemble"))?;
        e.validate()?;
        Ok(e)
    }

    fn model(&self) -> Result<OperatorModel> {
        let m = self.model.clone().ok_or_else(|| missing("model"))?;
        m.validate()?;
        Ok(m)
    }

    /// The explicit measure, else the Brown measure of the model.
    fn reference_measure(&self) -> Result<MeasureSpec> {
        let m = match (&self.measure, &self.model) {
            (Some(m), _) => m.clone(),
            (None, Some(model)) => model.descriptor().0,
            (None, None) => return Err(missing("measure")),
        };
        m.validate()?;
        Ok(m)
    }

    fn trials(&self, default: usize) -> Result<usize> {
        let t = self.trials.unwrap_or(default);
        if t == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(t)
    }

    fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

fn parse_value<T: serde::de::DeserializeOwned>(v: serde_json::Value, context: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|source| Error::Json { context: context.into(), source })
}

fn missing(field: &str) -> Error {
    Error::param(field, "is required (set it in the config or by flag)")
}

/// Process exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli.command.args())?;
    let name = cli.command.name();
    match &cli.command {
        Command::Sample(_) => cmd_sample(&cfg, name),
        Command::Spectrum(_) => cmd_spectrum(&cfg, name),
        Command::Regularize(_) => cmd_regularize(&cfg, name),
        Command::Microstate(_) => cmd_microstate(&cfg, name),
        Command::EntropyBound(_) => cmd_entropy(&cfg, name),
        Command::DtVerify(_) => cmd_dt_verify(&cfg, name),
        Command::SchurCheck(_) => cmd_schur_check(&cfg, name),
        Command::BallVolume(_) => cmd_ball_volume(&cfg, name),
    }
}

/// Writes the report in the configured format. Console output is the report
/// itself when there is no output file, else the `human` summary.
fn emit<I, R, S>(cfg: &RunConfig, report: &ExperimentReport<I, R, S>, human: &str) -> Result<()>
where
    I: Serialize + serde::de::DeserializeOwned,
    R: Serialize + serde::de::DeserializeOwned + CsvRow,
    S: Serialize + serde::de::DeserializeOwned,
{
    let to_file = cfg.out.as_ref().filter(|p| p.as_os_str() != "-");
    match cfg.format() {
        Format::Json => write_output(cfg.out.as_deref(), &report.to_json()?)?,
        Format::Csv => {
            write_output(cfg.out.as_deref(), &report.to_csv()?)?;
            if let Some(path) = to_file {
                let sidecar = ExperimentReport::<&I, R, &S> {
                    meta: report.meta.clone(),
                    inputs: &report.inputs,
                    rows: Vec::new(),
                    summary: &report.summary,
                };
                let text = serde_json::to_string_pretty(&sidecar)
                    .map_err(|source| Error::Json { context: "sidecar".into(), source })?;
                let mut meta_path = path.as_os_str().to_owned();
                meta_path.push(".meta.json");
                write_output(Some(Path::new(&meta_path)), &(text + "\n"))?;
            }
        }
    }
    if to_file.is_some() && !human.is_empty() {
        print!("{human}");
    }
    Ok(())
}

fn write_svg(path: &Path, text: &str) -> Result<()> {
    write_output(Some(path), text)
}

/// Aligned two-column table.
fn table(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub re: f64,
    pub im: f64,
}

impl CsvRow for EigenRow {
    fn header() -> Vec<&'static str> {
        vec!["re", "im"]
    }
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.re), fmt_f64(self.im)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleInputs {
    pub ensemble: EnsembleSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub dim: usize,
    pub mean_abs_sqr: f64,
    pub spectral_radius: f64,
}

fn cmd_sample(cfg: &RunConfig, name: &str) -> Result<()> {
    let ensemble = cfg.ensemble()?;
    let m = ensemble.sample(&Seed::new(cfg.seed()))?;
    let spectrum = eigenvalues(&m)?;
    if let Some(path) = &cfg.svg {
        write_svg(path, &svg::scatter(spectrum.points(), &format!("eigenvalues, N = {}", m.dim())))?;
    }
    let summary = SampleSummary {
        dim: m.dim(),
        mean_abs_sqr: spectrum.mean_abs_sqr(),
        spectral_radius: spectrum.spectral_radius(),
    };
    let human = format!("{} eigenvalues, mean |lambda|^2 = {}\n", summary.dim, fmt_f64(summary.mean_abs_sqr));
    let report = ExperimentReport {
        meta: RunMeta::new(name, Some(cfg.seed())),
        inputs: EnsembleInputs { ensemble },
        rows: spectrum.points().iter().map(|z| EigenRow { re: z.re, im: z.im }).collect(),
        summary,
    };
    emit(cfg, &report, &human)
}

/// A named scalar; `-inf` allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub name: String,
    #[serde(with = "ext_f64")]
    pub value: f64,
}

impl StatRow {
    fn new(name: &str, value: f64) -> Self {
        StatRow { name: name.into(), value }
    }
}

impl CsvRow for StatRow {
    fn header() -> Vec<&'static str> {
        vec!["name", "value"]
    }
    fn fields(&self) -> Vec<String> {
        vec![self.name.clone(), fmt_f64(self.value)]
    }
}

fn stats_table(rows: &[StatRow]) -> String {
    table(&rows.iter().map(|r| (r.name.clone(), fmt_f64(r.value))).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInputs {
    pub ensemble: EnsembleSpec,
    pub measure: Option<MeasureSpec>,
    pub l: usize,
}

fn cmd_spectrum(cfg: &RunConfig, name: &str) -> Result<()> {
    let ensemble = cfg.ensemble()?;
    let measure = match (&cfg.measure, &cfg.model) {
        (None, None) => None,
        _ => Some(cfg.reference_measure()?),
    };
    let l = cfg.l.unwrap_or(2);
    let m = ensemble.sample(&Seed::new(cfg.seed()))?;
    let spectrum = eigenvalues(&m)?;
    let n = m.dim();
    let mut rows = vec![
        StatRow::new("dim", n as f64),
        StatRow::new("mean_abs_sqr", spectrum.mean_abs_sqr()),
        StatRow::new("spectral_radius", spectrum.spectral_radius()),
        StatRow::new("operator_norm", operator_norm(&m)),
        StatRow::new("fk_determinant", fk_determinant(&m)),
        StatRow::new("offdiag_second_moment", offdiag_from_spectrum(&m, &spectrum)),
        StatRow::new("trace_mm_star", m.frobenius_norm_sqr() / n as f64),
    ];
    if n >= 2 {
        rows.push(StatRow::new("empirical_log_energy", empirical_log_energy(spectrum.points())?));
    }
    if let Some(mu) = &measure {
        rows.push(StatRow::new("moment_distance", moment_distance(&MeasureSpec::from_spectrum(&spectrum), mu, l)));
        rows.push(StatRow::new("reference_log_energy", mu.log_energy().value));
    }
    if let Some(path) = &cfg.svg {
        write_svg(path, &svg::scatter(spectrum.points(), &format!("eigenvalues, N = {n}")))?;
    }
    let human = stats_table(&rows);
    let report = ExperimentReport {
        meta: RunMeta::new(name, Some(cfg.seed())),
        inputs: SpectrumInputs { ensemble, measure, l },
        rows,
        summary: (),
    };
    emit(cfg, &report, &human)
}

impl CsvRow for SweepRow {
    fn header() -> Vec<&'static str> {
        vec!["t", "mean_distance", "std", "trials"]
    }
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), fmt_f64(self.mean_distance), fmt_f64(self.std), self.trials.to_string()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepInputs {
    pub base: EnsembleSpec,
    pub t_grid: Vec<f64>,
    pub measure: MeasureSpec,
    pub l: usize,
    pub trials: usize,
}

fn cmd_regularize(cfg: &RunConfig, name: &str) -> Result<()> {
    let base = cfg.ensemble()?;
    let t_grid = cfg.t_grid.clone().ok_or_else(|| missing("t_grid"))?;
    let measure = cfg.reference_measure()?;
    let l = cfg.l.unwrap_or(2);
    let trials = cfg.trials(10)?;
    let seed = Seed::new(cfg.seed());
    let rows = regularization_sweep(&base, &t_grid, &measure, l, trials, &seed)?;
    if let Some(dir) = &cfg.svg {
        let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.mean_distance)).collect();
        write_svg(&dir.join("distance.svg"), &svg::line_plot(&curve, "mean moment distance vs t", true))?;
        for (i, &t) in t_grid.iter().enumerate() {
            let ensemble = EnsembleSpec::Perturbed { base: Box::new(base.clone()), scale: t };
            let spectrum = eigenvalues(&ensemble.sample(&seed.trial(0))?)?;
            let title = format!("t = {}, trial 0", fmt_f64(t));
            write_svg(&dir.join(format!("t{i:02}.svg")), &svg::scatter(spectrum.points(), &title))?;
        }
    }
    let human = rows
        .iter()
        .map(|r| {
            format!("t = {:<10} mean distance {} (std {})\n", fmt_f64(r.t), fmt_f64(r.mean_distance), fmt_f64(r.std))
        })
        .collect::<String>();
    let report = ExperimentReport {
        meta: RunMeta::new(name, Some(cfg.seed())),
        inputs: SweepInputs { base, t_grid, measure, l, trials },
        rows,
        summary: (),
    };
    emit(cfg, &report, &human)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRow {
    pub dim: usize,
    pub hits: usize,
    pub trials: usize,
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CsvRow for HitRow {
    fn header() -> Vec<&'static str> {
        vec!["dim", "hits", "trials", "fraction", "lower", "upper"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.dim.to_string(),
            self.hits.to_string(),
            self.trials.to_string(),
            fmt_f64(self.fraction),
            fmt_f64(self.lower),
            fmt_f64(self.upper),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostateInputs {
    pub ensemble: EnsembleSpec,
    pub model: OperatorModel,
    pub microstate: MicrostateSpec,
    pub dims: Vec<usize>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostateSummary {
    pub improved: bool,
    pub max_target_stderr: f64,
}

/// Builds the microstate spec of `model` from config parameters, with DT
/// targets sampled at `mc`.
fn microstate_spec(cfg: &RunConfig, model: &OperatorModel, mc: Option<&McParams>) -> Result<MicrostateSpec> {
    let p = cfg.microstate.clone().ok_or_else(|| missing("microstate"))?;
    let k = p.k.ok_or_else(|| missing("microstate.k"))?;
    let radius = p.radius.ok_or_else(|| missing("microstate.radius"))?;
    let eps = p.eps.ok_or_else(|| missing("microstate.eps"))?;
    let targets = target_table(model, k, mc)?;
    let mut spec = MicrostateSpec::new(radius, k, eps, targets);
    spec.inflate_by_stderr = p.inflate_by_stderr;
    if let Some(imp) = p.improved {
        let measure = imp.measure.unwrap_or_else(|| model.descriptor().0);
        spec = spec.with_brown(imp.l, imp.theta, measure);
    }
    spec.validate()?;
    Ok(spec)
}

fn mc_params(cfg: &RunConfig, default_dim: usize, seed: &Seed) -> McParams {
    let mc = cfg.mc.clone().unwrap_or_default();
    McParams { dim: mc.dim.unwrap_or(default_dim), trials: mc.trials.unwrap_or(50), seed: seed.derive("targets") }
}

fn cmd_microstate(cfg: &RunConfig, name: &str) -> Result<()> {
    let ensemble = cfg.ensemble()?;
    let model = cfg.model()?;
    let dims = cfg.dims.clone().unwrap_or_else(|| vec![ensemble.dim()]);
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::param("dims", "need at least one positive dimension"));
    }
    let trials = cfg.trials(100)?;
    let seed = Seed::new(cfg.seed());
    let mc = mc_params(cfg, *dims.iter().max().expect("nonempty"), &seed);
    let spec = microstate_spec(cfg, &model, Some(&mc))?;
    let rows = dims
        .iter()
        .map(|&n| {
            let hr = hit_rate(&ensemble.with_dim(n), &spec, trials, &seed.derive(format!("dim.{n}")))?;
            Ok(HitRow {
                dim: n,
                hits: hr.hits,
                trials: hr.trials,
                fraction: hr.fraction,
                lower: hr.lower,
                upper: hr.upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let human = rows
        .iter()
        .map(|r| {
            format!("N = {:<6} hit rate {} [{}, {}]\n", r.dim, fmt_f64(r.fraction), fmt_f64(r.lower), fmt_f64(r.upper))
        })
        .collect::<String>();
    let summary = MicrostateSummary { improved: spec.improved.is_some(), max_target_stderr: spec.targets.max_stderr() };
    let report = ExperimentReport {
        meta: RunMeta::new(name, Some(cfg.seed())),
        inputs: MicrostateInputs { ensemble, model, microstate: spec, dims, trials },
        rows,
        summary,
    };
    emit(cfg, &report, &human)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyInputs {
    pub measure: MeasureSpec,
    pub od: f64,
}

/// Measure and offdiagonality from `measure` + `od`, or from a model.
fn measure_and_od(cfg: &RunConfig) -> Result<(MeasureSpec, f64)> {
    let (measure, od) = match (&cfg.measure, &cfg.model) {
        (Some(m), _) => (m.clone(), cfg.od.ok_or_else(|| missing("od"))?),
        (None, Some(model)) => {
            model.validate()?;
            let (m, o) = model.descriptor();
            (m, cfg.od.unwrap_or(o))
        }
        (None, None) => return Err(missing("measure")),
    };
    measure.validate()?;
    if !(od.is_finite() && od >= 0.0) {
        return Err(Error::param("od", format!("must be finite and >= 0, got {od}")));
    }
    Ok((measure, od))
}

fn entropy_rows(r: &EntropyReport) -> Vec<StatRow> {
    let mut rows = vec![
        StatRow::new("log_energy", r.log_energy),
        StatRow::new("log_energy_error", r.log_energy_error),
        StatRow::new("od", r.od),
        StatRow::new("diagonal_entropy", r.diagonal_entropy),
        StatRow::new("upper_bound", r.upper_bound),
        StatRow::new("variance_bound", r.variance_bound),
        StatRow::new("variance_bound_squared", r.variance_bound_squared),
    ];
    if let Ok(v) = selfadjoint_entropy(&r.measure) {
        rows.push(StatRow::new("selfadjoint_entropy", v));
    }
    rows
}

fn cmd_entropy(cfg: &RunConfig, name: &str) -> Result<()> {
    let (measure, od) = measure_and_od(cfg)?;
    let summary = EntropyReport::new(&measure, od)?;
    let rows = entropy_rows(&summary);
    let human = stats_table(&rows);
    let report =
        ExperimentReport { meta: RunMeta::new(name, None), inputs: EntropyInputs { measure, od }, rows, summary };
    if cfg.out.as_ref().is_none_or(|p| p.as_os_str() == "-") && cfg.format.is_none() {
        print!("{human}");
        return Ok(());
    }
    emit(cfg, &report, &human)
}

impl CsvRow for DtRow {
    fn header() -> Vec<&'static str> {
        vec!["dim", "hits", "trials", "hit_rate", "hit_rate_lower", "hit_rate_upper", "ball_log_volume", "lower_bound"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.dim.to_string(),
            self.hits.to_string(),
            self.trials.to_string(),
            fmt_f64(self.hit_rate),
            fmt_f64(self.hit_rate_lower),
            fmt_f64(self.hit_rate_upper),
            fmt_f64(self.ball_log_volume),
            fmt_f64(self.lower_bound),
        ]
    }
}

fn cmd_dt_verify(cfg: &RunConfig, name: &str) -> Result<()> {
    let (measure, offdiag) = measure_and_od(cfg)?;
    let p = cfg.microstate.clone();
    let dims = cfg.dims.clone().unwrap_or_else(|| vec![100, 200, 400]);
    let mc = cfg.mc.clone().unwrap_or_default();
    let params = DtEqualityParams {
        measure,
        offdiag,
        k: p.as_ref().and_then(|p| p.k).unwrap_or(2),
        eps: p.as_ref().and_then(|p| p.eps).unwrap_or(0.1),
        radius: p.as_ref().and_then(|p| p.radius),
        trials: cfg.trials(50)?,
        delta: cfg.delta.unwrap_or_else(default_delta),
        target_dim: mc.dim,
        target_trials: mc.trials.unwrap_or(50),
        seed: cfg.seed(),
        dims,
    };
    let mut summary = dt_equality_report(&params)?;
    let rows = summary.dt.as_mut().map(|d| std::mem::take(&mut d.rows)).unwrap_or_default();
    let mut human_rows: Vec<(String, String)> = vec![
        ("upper_bound".into(), fmt_f64(summary.upper_bound)),
        ("diagonal_entropy".into(), fmt_f64(summary.diagonal_entropy)),
        ("limit_lower_bound".into(), fmt_f64(summary.dt.as_ref().map_or(f64::NAN, |d| d.limit_lower_bound))),
    ];
    for r in &rows {
        human_rows.push((format!("N = {} hit rate", r.dim), fmt_f64(r.hit_rate)));
        human_rows.push((format!("N = {} lower bound", r.dim), fmt_f64(r.lower_bound)));
    }
    let human = table(&human_rows);
    let report = ExperimentReport { meta: RunMeta::new(name, Some(cfg.seed())), inputs: params, rows, summary };
    emit(cfg, &report, &human)
}

/// Statistics of a Schur decomposition of one sample.
pub fn schur_statistics(m: &crate::matrix::ComplexMatrix) -> Result<Vec<StatRow>> {
    let n = m.dim();
    let schur = schur_decompose(m)?;
    let upper: Vec<Complex64> = (0..n).flat_map(|i| schur.strict_upper.row(i)[i + 1..].to_vec()).collect();
    let variance = |xs: &[f64]| {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
    };
    let re: Vec<f64> = upper.iter().map(|z| z.re).collect();
    let im: Vec<f64> = upper.iter().map(|z| z.im).collect();
    let expected = 0.5 / n as f64;
    let spectrum = EmpiricalSpectrum::new(schur.diagonal.clone())?;
    let mut rows = vec![
        StatRow::new("dim", n as f64),
        StatRow::new("residual", schur.residual(m)),
        StatRow::new("unitarity_defect", schur.unitary.unitarity_defect()),
        StatRow::new("expected_entry_variance", expected),
    ];
    if upper.len() >= 2 {
        let (vr, vi) = (variance(&re), variance(&im));
        rows.push(StatRow::new("strict_upper_re_variance", vr));
        rows.push(StatRow::new("strict_upper_im_variance", vi));
        rows.push(StatRow::new("re_variance_rel_error", (vr - expected).abs() / expected));
    }
    rows.push(StatRow::new("eigenvalue_mean_abs_sqr", spectrum.mean_abs_sqr()));
    rows.push(StatRow::new("vol_d_log_weight", vol_d_log_weight(&schur.diagonal)));
    Ok(rows)
}

fn cmd_schur_check(cfg: &RunConfig, name: &str) -> Result<()> {
    let ensemble = cfg.ensemble()?;
    let m = ensemble.sample(&Seed::new(cfg.seed()))?;
    let rows = schur_statistics(&m)?;
    let human = stats_table(&rows);
    let report = ExperimentReport {
        meta: RunMeta::new(name, Some(cfg.seed())),
        inputs: EnsembleInputs { ensemble },
        rows,
        summary: (),
    };
    emit(cfg, &report, &human)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRow {
    pub dim: usize,
    pub value: f64,
    pub limit: f64,
    pub gap: f64,
}

impl CsvRow for BallRow {
    fn header() -> Vec<&'static str> {
        vec!["dim", "value", "limit", "gap"]
    }
    fn fields(&self) -> Vec<String> {
        vec![self.dim.to_string(), fmt_f64(self.value), fmt_f64(self.limit), fmt_f64(self.gap)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallInputs {
    pub dims: Vec<usize>,
    pub od: f64,
}

pub fn ball_rows(dims: &[usize], o: f64) -> Result<Vec<BallRow>> {
    let limit = ball_log_volume_limit(o)?;
    dims.iter()
        .map(|&n| {
            let value = ball_log_volume(n, o)?;
            Ok(BallRow { dim: n, value, limit, gap: value - limit })
        })
        .collect()
}

fn cmd_ball_volume(cfg: &RunConfig, name: &str) -> Result<()> {
    let dims = cfg.dims.clone().unwrap_or_else(|| vec![50, 100, 200]);
    let od = cfg.od.unwrap_or(1.0);
    let rows = ball_rows(&dims, od)?;
    let human = rows
        .iter()
        .map(|r| {
            format!("N = {:<6} {} (limit {}, gap {})\n", r.dim, fmt_f64(r.value), fmt_f64(r.limit), fmt_f64(r.gap))
        })
        .collect::<String>();
    let report =
        ExperimentReport { meta: RunMeta::new(name, None), inputs: BallInputs { dims, od }, rows, summary: () };
    emit(cfg, &report, &human)
}
