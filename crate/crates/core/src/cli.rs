//! Command-line front end: `fit`, `simulate` and `validate`.
//!
//! Exit codes: 0 success, 1 I/O or file-format error, 2 model or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{
    load_csv, validate, AuxKind, AuxScale, ColumnSpec, DeltaSource, FitConfig, Link, Transform,
    VarianceMethod, WorkingVariance,
};
use crate::error::{Error, Result};
use crate::numerics::RootSolveOptions;
use crate::primary::{fit, FitOutput};
use crate::simulation::{
    preset, run_mc, ErrorKind, MCReport, Method, ScenarioConfig, ScenarioFile,
};

#[derive(Debug, Parser)]
#[command(
    name = "dlreg",
    version,
    about = "Regression with a covariate censored at a detection limit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the two-component model to a CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo scenario or a built-in preset.
    Simulate(SimulateArgs),
    /// Check a CSV file without fitting.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkArg {
    Identity,
    Logit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AuxArg {
    Parametric,
    Semiparametric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    Negate,
    Negexp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VarianceArg {
    Known,
    Theorem1,
    Sscf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ErrorKindArg {
    Normal,
    CenteredChisq,
}

#[derive(Debug, Args)]
pub struct Columns {
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub y: String,
    /// Censored covariate column.
    #[arg(long)]
    pub x: String,
    /// Detection limit: a number or the name of a constant column.
    #[arg(long)]
    pub delta: String,
    /// Uncensored covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub u: Vec<String>,
    /// Surrogates for the censored covariate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    /// Optional 0/1 column marking rows whose covariate was observed.
    #[arg(long)]
    pub observed: Option<String>,
}

impl Columns {
    fn spec(&self) -> ColumnSpec {
        let delta = match self.delta.trim().parse::<f64>() {
            Ok(v) => DeltaSource::Value(v),
            Err(_) => DeltaSource::Column(self.delta.clone()),
        };
        ColumnSpec {
            y: self.y.clone(),
            x: self.x.clone(),
            delta,
            u: self.u.clone(),
            z: self.z.clone(),
            observed: self.observed.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub columns: Columns,
    #[arg(long, value_enum, default_value = "identity")]
    pub link: LinkArg,
    #[arg(long, value_enum, default_value = "parametric")]
    pub aux: AuxArg,
    /// Scale on which the parametric auxiliary model is normal.
    #[arg(long, value_enum, default_value = "linear")]
    pub aux_scale: ScaleArg,
    /// Required with the semiparametric auxiliary model.
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    /// Defaults to theorem1 (parametric) or sscf (semiparametric).
    #[arg(long, value_enum)]
    pub variance: Option<VarianceArg>,
    /// Upper end of the residual window on the transformed scale.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Use the literal jump sum without dividing by the window mass.
    #[arg(long)]
    pub no_normalize_htilde: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write JSON here; the table still goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Also emit the auxiliary fit as JSON.
    #[arg(long)]
    pub dump_aux: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// table1, table2 or table3.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub mc_reps: Option<usize>,
    /// Target fraction of censored covariate values.
    #[arg(long)]
    pub missing: Option<f64>,
    #[arg(long, value_enum)]
    pub error_kind: Option<ErrorKindArg>,
    #[arg(long = "sigma2-x")]
    pub sigma2_x: Option<f64>,
    /// Methods to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replicates.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub columns: Columns,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

fn fit_config(a: &FitArgs) -> FitConfig {
    let auxiliary = match a.aux {
        AuxArg::Parametric => AuxKind::ParametricNormal,
        AuxArg::Semiparametric => AuxKind::SemiparametricAft,
    };
    let link = match a.link {
        LinkArg::Identity => Link::Identity,
        LinkArg::Logit => Link::Logit,
    };
    let variance = match a.variance {
        Some(VarianceArg::Known) => VarianceMethod::KnownEta,
        Some(VarianceArg::Theorem1) => VarianceMethod::Theorem1,
        Some(VarianceArg::Sscf) => VarianceMethod::Sscf,
        None if auxiliary == AuxKind::SemiparametricAft => VarianceMethod::Sscf,
        None => VarianceMethod::Theorem1,
    };
    FitConfig {
        link,
        working_variance: match link {
            Link::Identity => WorkingVariance::Constant,
            Link::Logit => WorkingVariance::Bernoulli,
        },
        auxiliary,
        aux_scale: match a.aux_scale {
            ScaleArg::Linear => AuxScale::Linear,
            ScaleArg::Log => AuxScale::Log,
        },
        transform: a.transform.map(|t| match t {
            TransformArg::Negate => Transform::Negate,
            TransformArg::Negexp => Transform::NegExp,
        }),
        tau_override: a.tau,
        normalize_htilde: !a.no_normalize_htilde,
        variance,
        seed: a.seed,
    }
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let spec = a.columns.spec();
    let d = load_csv(&a.columns.input, &spec)?;
    let cfg = fit_config(a);
    let FitOutput { primary, auxiliary } = fit(&d, &cfg, &RootSolveOptions::default())?;
    let mut names = vec!["intercept".to_string(), spec.x.clone()];
    names.extend(spec.u.iter().cloned());
    let primary = primary.with_names(names)?;

    let json = primary.to_json();
    let aux_json = auxiliary.to_json();
    match &a.out {
        Some(path) => {
            write_file(path, &(json + "\n"))?;
            if a.dump_aux {
                write_file(&path.with_extension("aux.json"), &(aux_json + "\n"))?;
            }
            write!(out, "{}", primary.render_table()).map_err(stdout_err)?;
        }
        None => {
            match a.format {
                Format::Json => writeln!(out, "{json}"),
                Format::Table => write!(out, "{}", primary.render_table()),
            }
            .map_err(stdout_err)?;
            if a.dump_aux {
                writeln!(out, "{aux_json}").map_err(stdout_err)?;
            }
        }
    }
    if !primary.converged {
        return Err(Error::GeeNotConverged);
    }
    Ok(())
}

fn scenarios(a: &SimulateArgs) -> Result<Vec<ScenarioConfig>> {
    let mut cells = match (&a.preset, &a.config) {
        (Some(p), _) => preset(p)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let json = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"));
            vec![ScenarioFile::parse(&text, json)?.into_config()?]
        }
        (None, None) => return Err(Error::Config("simulate needs --preset or --config".into())),
    };
    let methods = a
        .methods
        .iter()
        .map(|m| Method::parse(m.trim()))
        .collect::<Result<Vec<_>>>()?;
    for c in &mut cells {
        if let Some(n) = a.n {
            c.n = n;
        }
        if let Some(m) = a.mc_reps {
            c.mc_reps = m;
        }
        if let Some(m) = a.missing {
            c.target_missing_frac = m;
        }
        if let Some(e) = a.error_kind {
            c.error_kind = match e {
                ErrorKindArg::Normal => ErrorKind::Normal,
                ErrorKindArg::CenteredChisq => ErrorKind::CenteredChisq,
            };
        }
        if let Some(s) = a.sigma2_x {
            c.sigma2_x = s;
        }
        if let Some(s) = a.seed {
            c.seed = s;
        }
        if !methods.is_empty() {
            c.methods = methods.clone();
        }
        c.validate()?;
    }
    // overrides can collapse grid dimensions
    let mut unique: Vec<ScenarioConfig> = Vec::with_capacity(cells.len());
    for c in cells {
        if !unique.contains(&c) {
            unique.push(c);
        }
    }
    Ok(unique)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let cells = scenarios(a)?;
    let reports = cells
        .iter()
        .map(|c| run_mc(c, a.jobs))
        .collect::<Result<Vec<MCReport>>>()?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    let tables: String = reports
        .iter()
        .map(MCReport::render_table)
        .collect::<Vec<_>>()
        .join("\n");
    match (&a.out, a.format) {
        (Some(path), _) => {
            write_file(path, &(json + "\n"))?;
            write!(out, "{tables}")
        }
        (None, Format::Json) => writeln!(out, "{json}"),
        (None, Format::Table) => write!(out, "{tables}"),
    }
    .map_err(stdout_err)
}

/// Returns whether the file is clean.
fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<bool> {
    let d = load_csv(&a.columns.input, &a.columns.spec())?;
    let violations = validate(&d);
    match a.format {
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&violations).expect("violations serialize")
        ),
        Format::Table => violations.iter().try_for_each(|v| writeln!(out, "{v}")),
    }
    .map_err(stdout_err)?;
    Ok(violations.is_empty())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, out).map(|_| true),
        Command::Simulate(a) => cmd_simulate(a, out).map(|_| true),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
