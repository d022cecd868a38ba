//! `istbc` command-line front end: code construction dumps, code metrics and
//! CER simulation.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use istbc::metrics::min_trace_search;
use istbc::metrics::DEFAULT_TRACE_NODE_BUDGET;
use istbc::*;
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "istbc", version, about = "Integer space-time block code toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the dispersion basis and entry range of a design.
    Design(DesignArgs),
    /// Code metrics: PAPR, difference spectrum or minimum trace.
    Analyze {
        #[command(subcommand)]
        which: Analysis,
    },
    /// Monte Carlo codeword error rate over an SNR or PSNR grid.
    Simulate(Box<SimulateArgs>),
}

#[derive(Args, Clone)]
struct CodeArgs {
    /// ic, alamouti or golden.
    #[arg(long, default_value = "ic")]
    code: String,
    /// Transmit antennas (2 for alamouti and golden).
    #[arg(short = 'n', default_value_t = 2)]
    n: usize,
    /// Bits per QAM symbol (2, 4, 6, ...).
    #[arg(short = 'm', default_value_t = 2)]
    m: u32,
}

impl CodeArgs {
    fn build(&self) -> Result<(DesignId, LinearDesign, Constellation)> {
        let id = DesignId::from_str(&self.code)?;
        let constellation = make_qam(self.m)?;
        Ok((id, id.build(self.n, self.m)?, constellation))
    }
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Emit JSON including the basis matrices.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Analysis {
    /// Peak-to-average power ratio of the transmitted entries.
    Papr {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Determinant and trace statistics of codeword differences.
    Spectrum {
        #[command(flatten)]
        code: CodeArgs,
        /// Permit enumerations up to 2^32 difference matrices.
        #[arg(long)]
        allow_long: bool,
        /// Sample this many codeword pairs instead of enumerating.
        #[arg(long)]
        sampled: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Normalized minimum trace of the integer code.
    Trace {
        #[command(flatten)]
        code: CodeArgs,
        /// Search node budget.
        #[arg(long, default_value_t = DEFAULT_TRACE_NODE_BUDGET)]
        node_budget: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Run file with `key = value` lines named after the simulation fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    code: Option<String>,
    #[arg(short = 'n')]
    n: Option<usize>,
    #[arg(short = 'm')]
    m: Option<u32>,
    /// Grid in dB: start:step:stop or a comma list.
    #[arg(long)]
    snr: Option<String>,
    /// snr or psnr.
    #[arg(long)]
    axis: Option<String>,
    /// sphere or exhaustive.
    #[arg(long)]
    decoder: Option<String>,
    /// exact or q=<bits>.
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_trials: Option<u64>,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Also run quantized encoders with these bit widths, e.g. 3,4,6.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<u32>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "ISTBC_WORKERS")]
    workers: Option<usize>,
    /// Output prefix; writes PREFIX.csv, PREFIX.json and PREFIX.manifest.json.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    parameters: &'a SimConfig,
    sweep: &'a [u32],
    seed: u64,
    tool_version: &'a str,
    workers: Option<usize>,
    outputs: Vec<String>,
    created_unix: u64,
}

enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(a) => cmd_design(&a),
        Command::Analyze { which } => cmd_analyze(which),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_budget() { 3 } else { 2 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_design(a: &DesignArgs) -> CmdResult {
    let (id, design, constellation) = a.code.build()?;
    let mut info = BTreeMap::new();
    info.insert("code", json!(id.to_string()));
    info.insert("name", json!(design.name()));
    info.insert("n", json!(design.n()));
    info.insert("m", json!(constellation.m()));
    info.insert("exact_integer", json!(design.exact_integer()));
    info.insert("real_dimensions", json!(design.k_real()));
    if let DesignKind::Integer { m, alpha } = design.kind() {
        let bits = (m as usize * design.n() / 2) as u32;
        info.insert("alpha", json!(alpha));
        info.insert("d", json!((1u64 << bits) - 1));
        info.insert("bits", json!(min_bits_integer_code(design.n(), m)?));
    }
    if a.json {
        let basis: Vec<Vec<Vec<[f64; 2]>>> = design
            .basis()
            .iter()
            .map(|b| b.rows().iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect())
            .collect();
        info.insert("basis", json!(basis));
        print_json(&info);
    } else {
        for (k, v) in &info {
            println!("{k}: {}", v.to_string().trim_matches('"'));
        }
    }
    Ok(())
}

fn papr_note(design: &LinearDesign) -> Option<&'static str> {
    match (design.kind(), design.n()) {
        (DesignKind::Integer { m: 2, .. }, 4) => {
            Some("published tables list 4.22 dB here; the exact value 4.228 dB rounds to 4.23")
        }
        (DesignKind::Integer { m: 6, .. }, 4) => {
            Some("published tables list 5.59 dB here; the M^n-QAM closed form gives 4.77 dB")
        }
        _ => None,
    }
}

fn cmd_analyze(which: Analysis) -> CmdResult {
    match which {
        Analysis::Papr { code, format } => {
            let (id, design, constellation) = code.build()?;
            let p = code_papr(&design, &constellation)?;
            let note = papr_note(&design);
            match format {
                Format::Json => print_json(&json!({
                    "code": id.to_string(),
                    "n": design.n(),
                    "m": constellation.m(),
                    "papr_ratio": p.ratio,
                    "papr_db": p.db,
                    "papr_db_rounded": format!("{:.2}", p.db),
                    "method": p.method,
                    "note": note,
                })),
                Format::Csv => {
                    println!("code,n,m,papr_ratio,papr_db,note");
                    println!(
                        "{id},{},{},{},{},{}",
                        design.n(),
                        constellation.m(),
                        p.ratio,
                        p.db,
                        note.unwrap_or("")
                    );
                }
            }
        }
        Analysis::Spectrum {
            code,
            allow_long,
            sampled,
            seed,
            format,
        } => {
            let (_, design, constellation) = code.build()?;
            let mode = match sampled {
                Some(budget) => SpectrumMode::Sampled { budget, seed },
                None => SpectrumMode::Exhaustive { allow_long },
            };
            let s = difference_spectrum(&design, &constellation, mode)?;
            match format {
                Format::Json => print_json(&s),
                Format::Csv => {
                    println!("{}", DifferenceSpectrum::CSV_HEADER);
                    println!("{}", s.to_csv_row());
                }
            }
        }
        Analysis::Trace {
            code,
            node_budget,
            format,
        } => {
            let (_, design, constellation) = code.build()?;
            let t = min_trace_search(&design, &constellation, node_budget)?;
            match format {
                Format::Json => print_json(&json!({
                    "n": design.n(),
                    "m": constellation.m(),
                    "raw_min_trace": t.raw,
                    "normalized_min_trace": t.normalized,
                    "argmin": t.argmin,
                    "nodes": t.nodes,
                })),
                Format::Csv => {
                    println!("n,m,raw_min_trace,normalized_min_trace,nodes");
                    println!(
                        "{},{},{},{},{}",
                        design.n(),
                        constellation.m(),
                        t.raw,
                        t.normalized,
                        t.nodes
                    );
                }
            }
        }
    }
    Ok(())
}

fn pick<T: FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("bad value {v:?} for {key}"))),
    }
}

fn sim_config(a: &SimulateArgs) -> Result<SimConfig> {
    let file = match &a.config {
        Some(p) => config::read_config(p)?,
        None => BTreeMap::new(),
    };
    let design = match pick(a.code.clone(), &file, "design")? {
        Some(s) => DesignId::from_str(&s)?,
        None => DesignId::Integer,
    };
    let n = pick(a.n, &file, "n")?.unwrap_or(2);
    let m = pick(a.m, &file, "m")?.unwrap_or(2);
    let grid = pick(a.snr.clone(), &file, "snr_db")?
        .ok_or_else(|| Error::InvalidParameter("an SNR grid is required (--snr or snr_db)".into()))?;
    let mut cfg = SimConfig::new(design, n, m, config::parse_grid(&grid)?);
    if let Some(s) = pick(a.axis.clone(), &file, "axis")? {
        cfg.axis = Axis::from_str(&s)?;
    }
    if let Some(s) = pick(a.decoder.clone(), &file, "decoder")? {
        cfg.decoder = DecoderKind::from_str(&s)?;
    }
    if let Some(s) = pick(a.encoder.clone(), &file, "encoder")? {
        cfg.encoder = EncoderKind::from_str(&s)?;
    }
    if let Some(v) = pick(a.seed, &file, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = pick(a.max_trials, &file, "max_trials")? {
        cfg.max_trials = v;
    }
    if let Some(v) = pick(a.target_errors, &file, "target_errors")? {
        cfg.target_errors = v;
    }
    if let Some(v) = pick(a.confidence, &file, "confidence")? {
        cfg.confidence = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &SimConfig, workers: Option<usize>) -> Result<SimResult> {
    match workers {
        Some(w) => run_cer_with_workers(cfg, w),
        None => run_cer(cfg),
    }
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let cfg = sim_config(a)?;
    if a.workers == Some(0) {
        return Err(Error::InvalidParameter("--workers must be at least 1".into()).into());
    }
    let mut curves = vec![(String::new(), run(&cfg, a.workers)?)];
    for &q in &a.sweep {
        let mut c = cfg.clone();
        c.encoder = EncoderKind::Quantized { q };
        curves.push((format!("-q{q}"), run(&c, a.workers)?));
    }

    let Some(prefix) = &a.out else {
        for (i, (_, r)) in curves.iter().enumerate() {
            if i > 0 {
                println!();
            }
            print!("{}", r.to_csv());
        }
        return Ok(());
    };
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut outputs = Vec::new();
    for (tag, r) in &curves {
        let csv = with_suffix(prefix, &format!("{tag}.csv"));
        let js = with_suffix(prefix, &format!("{tag}.json"));
        write_file(&csv, &r.to_csv())?;
        write_file(&js, &(serde_json::to_string_pretty(r).expect("serializable") + "\n"))?;
        outputs.push(csv.display().to_string());
        outputs.push(js.display().to_string());
    }
    let manifest = RunManifest {
        subcommand: "simulate",
        parameters: &cfg,
        sweep: &a.sweep,
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        workers: a.workers,
        outputs,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_file(
        &with_suffix(prefix, ".manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("serializable") + "\n"),
    )?;
    for (_, r) in &curves {
        eprintln!(
            "{} {} ({}): {} points, eta {:.3} dB",
            r.config.design,
            r.config.encoder,
            r.config.axis,
            r.points.len(),
            r.eta_db
        );
    }
    Ok(())
}
