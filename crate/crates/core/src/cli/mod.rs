//! Command-line driver: `calibrate`, `extract`, `compare`, `evaluate` and
//! `synth`. The binary is a thin wrapper around [`run`].

mod config;
mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{dpsu_all, dpsu_even, dpsu_even_params, dpsu_single};
use crate::corpus::{load_corpus, synth_corpus, write_jsonl, Corpus, CorpusFormat, SynthParams};
use crate::error::{invalid, Error, Result};
use crate::eval::{evaluate, ComparisonRow, ComparisonTable};
use crate::extraction::{dpne_extract, Mode, PruningRule};

pub use config::RunConfig;
pub use output::{level_file, read_result, render_level, write_result, RunReport, UNSAFE_STAMP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::ValidSetTooLarge { .. } | Error::Json(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Malformed { .. } | Error::DuplicateUser { .. } => EXIT_IO,
        Error::SamplerExhausted { .. } | Error::Invariant(_) => EXIT_INVARIANT,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dpne",
    version,
    about = "User-level differentially private n-gram extraction"
)]
pub struct Cli {
    /// Worker threads (0 = one per core). Never changes the output.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the noise schedule for a privacy target.
    Calibrate(RunArgs),
    /// Extract n-grams and write per-level files, report.json and config.json.
    Extract(RunArgs),
    /// Run several methods under the same seed and tabulate counts per length.
    Compare(CompareArgs),
    /// Coverage and spurious audit of a finished run against its corpus.
    Evaluate(EvaluateArgs),
    /// Write a synthetic Zipfian corpus in jsonl_text layout.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ReportFormat {
    Json,
    #[default]
    Table,
    Csv,
}

/// Run parameters. Flags override values loaded with `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Start from a saved config.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// jsonl_text or sequence_lines
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Longest n-gram length T.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Contribution cap for every level.
    #[arg(long, conflicts_with = "caps")]
    pub delta0: Option<usize>,
    /// Per-level contribution caps, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub caps: Option<Vec<usize>>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Noise decay c, with σₖ = c·σₖ₋₁.
    #[arg(long)]
    pub decay: Option<f64>,
    /// Validity-estimation probe rate p.
    #[arg(long)]
    pub sample_p: Option<f64>,
    /// both or single
    #[arg(long)]
    pub prune: Option<PruningRule>,
    /// reference or scalable
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lowercase: bool,
    /// Refuse explicit candidate sets above this many pairs.
    #[arg(long)]
    pub valid_set_limit: Option<u64>,
    /// Allow options that void the privacy guarantee.
    #[arg(long)]
    pub unsafe_no_privacy: bool,
    /// σ = 0 at every level.
    #[arg(long)]
    pub noiseless: bool,
    /// ρ₁ for --noiseless runs (default 0).
    #[arg(long)]
    pub debug_rho: Option<f64>,
    /// Add a 0/1 spurious column to gram files.
    #[arg(long)]
    pub mark_spurious: bool,
    #[arg(long, value_enum, default_value_t)]
    pub report_format: ReportFormat,
}

impl RunArgs {
    /// The base config (file or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        take!(
            format,
            epsilon,
            delta,
            max_len,
            eta,
            decay,
            prune,
            mode,
            seed,
            valid_set_limit,
            caps
        );
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        if let Some(d) = self.delta0 {
            c.caps = vec![d];
        }
        if self.sample_p.is_some() {
            c.sample_p = self.sample_p;
        }
        if self.debug_rho.is_some() {
            c.debug_rho = self.debug_rho;
        }
        c.lowercase |= self.lowercase;
        c.unsafe_no_privacy |= self.unsafe_no_privacy;
        c.noiseless |= self.noiseless;
        c.mark_spurious |= self.mark_spurious;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Dpne,
    DpsuAll,
    DpsuEven,
    DpsuSingle,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Methods to run, comma separated.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "dpne,dpsu-all,dpsu-even,dpsu-single"
    )]
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory written by `extract`.
    #[arg(long)]
    pub result: PathBuf,
    /// Corpus to audit against; defaults to the run's own input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    /// Minimum user counts K, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    pub k_list: Vec<u32>,
    /// Where to write eval.json and the CSV series; defaults to --result.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub report_format: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_users: usize,
    #[arg(long, default_value_t = 100)]
    pub tokens_per_user: usize,
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 1.1)]
    pub zipf_exponent: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Calibrate(a) => cmd_calibrate(&a.resolve()?, a.report_format),
        Command::Extract(a) => cmd_extract(&a.resolve()?, a.report_format),
        Command::Compare(a) => cmd_compare(&a.run.resolve()?, &a.methods, a.run.report_format),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn echo(config: &RunConfig) {
    eprint!("config: {}", config.to_json());
    if config.unsafe_no_privacy {
        eprintln!("{UNSAFE_STAMP}");
    }
}

fn load(config: &RunConfig) -> Result<Corpus> {
    load_corpus(config.input()?, config.format, config.lowercase)
}

pub fn cmd_calibrate(config: &RunConfig, format: ReportFormat) -> Result<String> {
    echo(config);
    let s = config.schedule()?;
    let residual = s.composition_residual();
    Ok(match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(&s)?;
            v["composition_residual"] = residual.into();
            let mut out = serde_json::to_string_pretty(&v)?;
            out.push('\n');
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("k,sigma,cap\n");
            for k in 1..=s.max_len {
                out.push_str(&format!("{k},{},{}\n", s.sigma(k), s.cap(k)));
            }
            out
        }
        ReportFormat::Table => {
            let mut out = format!("sigma_star  {}\n", s.sigma_star);
            for k in 1..=s.max_len {
                out.push_str(&format!("sigma_{k:<4} {}\n", s.sigma(k)));
            }
            out.push_str(&format!("rho_1       {}\n", s.rho1));
            out.push_str(&format!("residual    {residual:e}\n"));
            out
        }
    })
}

pub fn cmd_extract(config: &RunConfig, format: ReportFormat) -> Result<String> {
    echo(config);
    let dir = config.output()?.to_owned();
    let schedule = config.schedule()?;
    let corpus = load(config)?;
    let result = dpne_extract(&corpus, &schedule, &config.extract_options())?;
    if config.noiseless && config.debug_rho.unwrap_or(0.0) <= 0.0 {
        // with σ = 0 and ρ = 0 every held gram passes; anything else is a bug
        for level in &result.levels {
            if !level.injected.is_empty() {
                return Err(Error::Invariant(format!(
                    "noiseless level {} injected grams",
                    level.k
                )));
            }
        }
    }
    let report = write_result(&dir, corpus.tokens(), &result, &schedule, config)?;
    let mut table = ComparisonTable::new(result.max_len());
    table.push(ComparisonRow::full(&result.method, result.counts()));
    render(format, &report, &table)
}

fn render<T: serde::Serialize>(
    format: ReportFormat,
    json: &T,
    table: &ComparisonTable,
) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(json)?;
            s.push('\n');
            s
        }
        ReportFormat::Table => table.to_table(),
        ReportFormat::Csv => table.to_csv(),
    })
}

pub fn cmd_compare(config: &RunConfig, methods: &[Method], format: ReportFormat) -> Result<String> {
    echo(config);
    if config.noiseless {
        return Err(invalid(
            "compare runs private methods only; drop --noiseless",
        ));
    }
    let corpus = load(config)?;
    let target = config.target()?;
    let t = config.max_len;
    let mut table = ComparisonTable::new(t);
    for m in methods {
        let row = match m {
            Method::Dpne => {
                let r = dpne_extract(&corpus, &config.schedule()?, &config.extract_options())?;
                ComparisonRow::full("dpne", r.counts())
            }
            Method::DpsuAll => {
                let r = dpsu_all(&corpus, target, t, config.delta0()?, config.seed)?;
                ComparisonRow::full("dpsu_all", r.counts())
            }
            Method::DpsuEven => {
                let r = dpsu_even(&corpus, target, t, config.delta0()?, config.seed)?;
                ComparisonRow::full("dpsu_even", r.counts())
            }
            Method::DpsuSingle => {
                let d0 = config.delta0()?;
                let counts = (1..=t)
                    .map(|k| dpsu_single(&corpus, target, k, d0, config.seed).map(|l| l.len()))
                    .collect::<Result<Vec<_>>>()?;
                ComparisonRow::separate("dpsu_single", counts)
            }
        };
        table.push(row);
    }
    if let Some(dir) = &config.output {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("compare.csv"), &table.to_csv())?;
        let mut json = serde_json::to_value(&table)?;
        if methods.contains(&Method::DpsuEven) {
            let (sigma, rho) = dpsu_even_params(target, t, config.delta0()?)?;
            json["dpsu_even"] = serde_json::json!({
                "sigma": sigma,
                "rho": rho,
                "delta_split": "even: each length gets delta/T inside its threshold",
            });
        }
        write(
            &dir.join("compare.json"),
            &(serde_json::to_string_pretty(&json)? + "\n"),
        )?;
        write(&dir.join("config.json"), &config.to_json())?;
    }
    render(format, &table, &table)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let run_config = RunConfig::load(&args.result.join("config.json"))?;
    let input = args.input.clone().or(run_config.input.clone());
    let input = input
        .ok_or_else(|| invalid("no corpus given (--input) and none recorded in config.json"))?;
    let format = args.format.unwrap_or(run_config.format);
    let mut corpus = load_corpus(&input, format, run_config.lowercase)?;
    let (result, report) = read_result(&args.result, corpus.tokens_mut())?;
    let params = serde_json::to_value(&run_config)?;
    let eval = evaluate(&result, &corpus, &args.k_list, params);
    if eval.counts != report.counts {
        return Err(Error::Invariant(
            "gram files disagree with report.json counts".into(),
        ));
    }

    let dir = args.output.as_deref().unwrap_or(&args.result);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stamp = if report.unsafe_no_privacy {
        format!("{UNSAFE_STAMP}\n")
    } else {
        String::new()
    };
    write(
        &dir.join("eval.json"),
        &(serde_json::to_string_pretty(&eval)? + "\n"),
    )?;
    write(
        &dir.join("coverage.csv"),
        &(stamp.clone() + &eval.coverage_csv()),
    )?;
    write(&dir.join("levels.csv"), &(stamp + &eval.levels_csv()))?;

    Ok(match args.report_format {
        ReportFormat::Json => serde_json::to_string_pretty(&eval)? + "\n",
        ReportFormat::Table => eval.to_table(),
        ReportFormat::Csv => eval.coverage_csv(),
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let params = SynthParams {
        n_users: args.n_users,
        tokens_per_user: args.tokens_per_user,
        vocab_size: args.vocab_size,
        zipf_exponent: args.zipf_exponent,
        seed: args.seed,
    };
    let corpus = synth_corpus(&params)?;
    let mut buf = Vec::new();
    write_jsonl(&corpus, &mut buf).map_err(|e| Error::io(&args.output, e))?;
    fs::write(&args.output, buf).map_err(|e| Error::io(&args.output, e))?;
    Ok(format!(
        "wrote {} users to {}\n",
        corpus.len(),
        args.output.display()
    ))
}
