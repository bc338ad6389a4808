//! Command-line front end for pairwise Ising graph recovery.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ising_select::classifier::{decision_table, write_decision_table};
use ising_select::data::ingest;
use ising_select::pipeline::{
    parse_correction, rolling_windows, run_recover, run_synthetic_benchmark, write_benchmark_csv, write_recovery,
    write_rolling, BenchmarkConfig, Method, PriorMode, RecoveryConfig, Sampler,
};
use ising_select::plm::constant_nodes;
use ising_select::synth::{CouplingMode, TopologySpec, DEFAULT_BURN_IN, DEFAULT_DILUTION, DEFAULT_THIN};
use ising_select::timeseries::windowed_correlations;
use ising_select::{Correction, Encoding, Error, Result, SampleMatrix};

#[derive(Parser, Debug)]
#[command(name = "ising-select", version, about = "Sparse Ising graph recovery by pairwise Bayesian model selection")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ISING_SELECT_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recover the graph of a sample matrix.
    Recover(RecoverArgs),
    /// Recover a graph on each rolling window.
    Windows(WindowArgs),
    /// Windowed equal-time and delayed correlations.
    Corr(CorrArgs),
    /// Synthetic benchmark against known graphs.
    Bench(BenchArgs),
    /// Export the classifier over every count tuple of one sample size.
    Table(TableArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodingArg {
    Pm1,
    #[value(name = "01")]
    ZeroOne,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Pm1 => Encoding::Pm1,
            EncodingArg::ZeroOne => Encoding::ZeroOne,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file, one sample per row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pm1")]
    encoding: EncodingArg,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// flat, fixed=E, selfcon=E0 or ndep=RG.
    #[arg(long, default_value = "flat", value_parser = parse_prior)]
    prior: PriorMode,
    /// none, avg, min or prod.
    #[arg(long = "correct", default_value = "none", value_parser = parse_correct)]
    correction: CorrectionArg,
    /// Recorded in the run metadata.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct WindowArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Window length in samples.
    #[arg(long)]
    window: usize,
    /// Offset between window starts; defaults to the window length.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CorrArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    window: usize,
    #[arg(long)]
    stride: Option<usize>,
    /// Comma-separated lags.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    tau: Vec<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// dimers, star, er=C, grid or diluted[=P].
    #[arg(long)]
    topology: String,
    /// Number of nodes, or the side length for lattices.
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long, value_enum, default_value = "bimodal")]
    coupling: CouplingArg,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    samples: Vec<usize>,
    /// Number of realisations, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated methods: ms:PRIOR[:CORRECTION] with PRIOR a prior
    /// mode or `true`, and plm[:FRACTION].
    #[arg(long, value_delimiter = ',', default_value = "ms:selfcon=1,plm", value_parser = parse_method)]
    methods: Vec<Method>,
    /// Keep only this many randomly chosen nodes.
    #[arg(long)]
    visible: Option<usize>,
    #[arg(long, value_enum, default_value = "gibbs")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_THIN)]
    thin: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CouplingArg {
    Bimodal,
    Ferro,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    Gibbs,
    Exact,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Sample size N.
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_prior(s: &str) -> Result<PriorMode> {
    s.parse()
}

#[derive(Clone, Copy, Debug)]
struct CorrectionArg(Option<Correction>);

fn parse_correct(s: &str) -> Result<CorrectionArg> {
    parse_correction(s).map(CorrectionArg)
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse()
}

fn parse_topology(s: &str, nodes: usize) -> Result<TopologySpec> {
    let (kind, arg) = match s.split_once('=') {
        Some((k, v)) => {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidInput(format!("topology parameter '{v}' is not a number")))?;
            (k, Some(v))
        }
        None => (s, None),
    };
    match (kind, arg) {
        ("dimers", None) => Ok(TopologySpec::Dimers { n: nodes }),
        ("star", None) => Ok(TopologySpec::Star { n: nodes }),
        ("er", Some(c)) => Ok(TopologySpec::ErdosRenyi { n: nodes, c }),
        ("grid", None) => Ok(TopologySpec::Grid2d { side: nodes }),
        ("diluted", p) => Ok(TopologySpec::DilutedGrid {
            side: nodes,
            p: p.unwrap_or(DEFAULT_DILUTION),
        }),
        _ => Err(Error::InvalidInput(format!(
            "unknown topology '{s}', expected dimers, star, er=C, grid or diluted[=P]"
        ))),
    }
}

fn load(input: &InputArgs) -> Result<SampleMatrix> {
    let data = ingest(&input.input, input.encoding.into())?;
    let fixed = constant_nodes(&data);
    if !fixed.is_empty() {
        eprintln!("warning: columns {fixed:?} are constant");
    }
    Ok(data)
}

fn config(m: &MethodArgs, window: Option<usize>, stride: Option<usize>) -> RecoveryConfig {
    RecoveryConfig {
        prior: m.prior,
        correction: m.correction.0,
        window,
        stride,
        seed: m.seed,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn recover(a: &RecoverArgs) -> Result<()> {
    let data = load(&a.input)?;
    let out = run_recover(&config(&a.method, None, None), &data)?;
    write_recovery(&out, &a.out)?;
    let md = &out.metadata;
    if md.self_consistent_converged == Some(false) {
        eprintln!("warning: self-consistent prior did not converge");
    }
    println!("{} edges, epsilon {}, r {}", md.n_edges, md.epsilon, md.bond_ratio);
    Ok(())
}

fn windows(a: &WindowArgs) -> Result<()> {
    let data = load(&a.input)?;
    let stride = a.stride.unwrap_or(a.window);
    let cfg = config(&a.method, Some(a.window), Some(stride));
    cfg.validate()?;
    let res = rolling_windows(&data, a.window, stride, &cfg)?;
    write_rolling(&res, &a.out)?;
    println!("{} windows", res.starts.len());
    Ok(())
}

fn corr(a: &CorrArgs) -> Result<()> {
    let data = load(&a.input)?;
    let stats = windowed_correlations(&data, a.window, &a.tau, a.stride.unwrap_or(a.window))?;
    let mut w = create(&a.out, "corr_rms.csv")?;
    writeln!(w, "start,kind,tau,c_diag,c_off")?;
    for win in &stats.windows {
        let (d, o) = win.connected_rms;
        writeln!(w, "{},connected,0,{:.16e},{:.16e}", win.start, d, o)?;
        for (tau, (d, o)) in stats.taus.iter().zip(&win.delayed_rms) {
            writeln!(w, "{},delayed,{},{:.16e},{:.16e}", win.start, tau, d, o)?;
        }
    }
    w.flush()?;
    let mut w = create(&a.out, "corr.json")?;
    serde_json::to_writer(&mut w, &stats).map_err(Error::from)?;
    w.flush()?;
    println!("{} windows", stats.windows.len());
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let coupling = match a.coupling {
        CouplingArg::Bimodal => CouplingMode::Bimodal { beta: a.beta },
        CouplingArg::Ferro => CouplingMode::Ferromagnetic { beta: a.beta },
    };
    let sampler = match a.sampler {
        SamplerArg::Gibbs => Sampler::Gibbs {
            burn_in: a.burn_in,
            thin: a.thin,
        },
        SamplerArg::Exact => Sampler::Exact,
    };
    let cfg = BenchmarkConfig {
        topology: parse_topology(&a.topology, a.nodes)?,
        coupling,
        sample_sizes: a.samples.clone(),
        seeds: (a.seed..a.seed + a.runs).collect(),
        methods: a.methods.clone(),
        visible: a.visible,
        sampler,
    };
    let rows = run_synthetic_benchmark(&cfg)?;
    write_benchmark_csv(&rows, create(&a.out, "metrics.csv")?)?;
    println!("{} rows", rows.len());
    Ok(())
}

fn table(a: &TableArgs) -> Result<()> {
    let rows = decision_table(a.samples)?;
    write_decision_table(&rows, create(&a.out, &format!("table_N{}.csv", a.samples))?)?;
    println!("{} rows", rows.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::InvalidInput("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match &cli.command {
        Command::Recover(a) => recover(a),
        Command::Windows(a) => windows(a),
        Command::Corr(a) => corr(a),
        Command::Bench(a) => bench(a),
        Command::Table(a) => table(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
