mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyc_core::boolnet::{
    build_tpm, causal_emergence, coarse_grain, effective_information, parse_network,
    search_partitions, EiReport, Partition, SearchMode, SearchResult,
};
use polyc_core::config::{load_config, RunConfig};
use polyc_core::evolve::{run_evolution, EaParams, EvolutionResult, GenerationStats, Termination};
use polyc_core::logic_eval::{evaluate_truth_table, parse_targets, GateReport};
use polyc_core::memory_screen::{
    random_controls, screen_network, ControlSummary, Protocol, ScreenReport,
};
use polyc_core::signal::{goertzel, SpectralReading};
use polyc_core::substrate::{simulate, Genome};
use serde::{Deserialize, Serialize};

use output::{
    load_genome, read_text, read_trace_csv, write_json, write_trace_csv, Tool, TraceTable,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<polyc_core::Error> for CliError {
    fn from(e: polyc_core::Error) -> Self {
        use polyc_core::Error as E;
        match e {
            E::Blowup { .. } | E::AttractorBudget { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "polyc",
    version,
    about = "Granular logic-gate evolution and Boolean network analysis"
)]
struct Cli {
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true, env = "POLYC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration JSON; absent fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, CliError> {
        let cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default().resolved(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one input row and write the output and input speed trace.
    Sim {
        #[command(flatten)]
        config: ConfigArg,
        /// Genome JSON (default: all-soft default template).
        #[arg(long)]
        genome: Option<PathBuf>,
        /// Input bits, e.g. `11` or `01`.
        #[arg(long, default_value = "11")]
        bits: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Amplitude and phase of each column of a trace CSV.
    Spectrum {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated frequencies (default: f1 and f2 of the config).
        #[arg(long, value_delimiter = ',')]
        freqs: Option<Vec<f64>>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truth-table report for a genome.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        genome: PathBuf,
        /// Gate targets, e.g. `and@1,xor@2`.
        #[arg(long)]
        targets: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve stiffness classes toward the gate targets.
    Evolve {
        #[command(flatten)]
        config: ConfigArg,
        /// Template genome fixing shape and designated particles.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        targets: String,
        /// EA parameter JSON; absent fields take defaults.
        #[arg(long)]
        ea: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        /// Stop once the best fitness exceeds this.
        #[arg(long)]
        target_fitness: Option<f64>,
        /// Best-genome JSON.
        #[arg(long)]
        best: PathBuf,
        /// Per-generation CSV.
        #[arg(long)]
        log: PathBuf,
        /// Gate report JSON of the best genome.
        #[arg(long)]
        report: PathBuf,
    },
    /// Effective information and causal emergence of a Boolean network.
    Ce {
        #[arg(long)]
        network: PathBuf,
        /// JSON array of macro ids, one per micro state.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Search for the partition maximizing causal emergence.
        #[arg(long)]
        search: bool,
        #[arg(long)]
        mode: Option<SearchMode>,
        /// Cap on candidate partitions scored.
        #[arg(long)]
        budget: Option<usize>,
        /// Micro TPM as CSV.
        #[arg(long)]
        tpm_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Screen all node triplets for associative conditioning.
    Screen {
        #[arg(long)]
        network: PathBuf,
        /// Protocol JSON overriding defaults.
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// Number of randomized control networks.
        #[arg(long, default_value_t = 0)]
        controls: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the tool version.
    Version,
}

fn parse_bits(s: &str) -> Result<[bool; 2], CliError> {
    let bits: Vec<char> = s.chars().filter(|c| *c != ',').collect();
    match bits.as_slice() {
        [a, b] if "01".contains(*a) && "01".contains(*b) => Ok([*a == '1', *b == '1']),
        _ => Err(CliError::Usage(format!(
            "--bits expects two binary digits, got {s:?}"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct EvalOutput {
    tool: Tool,
    config: RunConfig,
    genome: Genome,
    report: GateReport,
}

#[derive(Serialize, Deserialize)]
struct BestGenomeOutput {
    tool: Tool,
    config: RunConfig,
    ea: EaParams,
    best_fitness: f64,
    terminated_by: Termination,
    evaluations: usize,
    simulations: usize,
    genome: Genome,
}

#[derive(Serialize, Deserialize)]
struct ColumnSpectrum {
    column: String,
    readings: Vec<SpectralReading>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumOutput {
    tool: Tool,
    config: RunConfig,
    trace: String,
    dt: f64,
    samples: usize,
    columns: Vec<ColumnSpectrum>,
}

#[derive(Serialize, Deserialize)]
struct CeSettings {
    network: String,
    partition: Option<String>,
    search: bool,
    mode: Option<SearchMode>,
    budget: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CeOutput {
    tool: Tool,
    config: CeSettings,
    nodes: usize,
    micro: EiReport,
    macro_ei: Option<EiReport>,
    causal_emergence: Option<f64>,
    partition: Option<Partition>,
    search: Option<SearchResult>,
}

#[derive(Serialize, Deserialize)]
struct ScreenSettings {
    network: String,
    protocol: Protocol,
    controls: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScreenOutput {
    tool: Tool,
    config: ScreenSettings,
    report: ScreenReport,
    controls: Option<ControlSummary>,
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Version => {
            println!("polyc {}", output::VERSION);
        }
        Command::Sim {
            config,
            genome,
            bits,
            out,
        } => {
            let cfg = config.load()?;
            let bits = parse_bits(&bits)?;
            let genome = match genome {
                Some(p) => load_genome(&p)?,
                None => Genome::default_template(),
            };
            let trace = simulate(&genome, &cfg, bits)?;
            let t0 = cfg.transient_steps();
            let table = TraceTable {
                time: (0..trace.len())
                    .map(|k| (t0 + k + 1) as f64 * trace.dt)
                    .collect(),
                columns: trace
                    .recorded_ids
                    .iter()
                    .map(|&id| Ok((format!("speed_{id}"), trace.speed_series(id)?)))
                    .collect::<Result<_, polyc_core::Error>>()?,
            };
            write_trace_csv(&out, &table)?;
        }
        Command::Spectrum {
            trace,
            freqs,
            config,
            out,
        } => {
            let cfg = config.load()?;
            let freqs = freqs.unwrap_or_else(|| vec![cfg.excitation.f1, cfg.excitation.f2]);
            let table = read_trace_csv(&trace)?;
            let dt = table.dt()?;
            let columns = table
                .columns
                .iter()
                .map(|(name, series)| {
                    let readings = freqs
                        .iter()
                        .map(|&f| goertzel(series, dt, f))
                        .collect::<polyc_core::Result<Vec<_>>>()?;
                    Ok(ColumnSpectrum {
                        column: name.clone(),
                        readings,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_json(
                &out,
                &SpectrumOutput {
                    tool: Tool::current(),
                    config: cfg,
                    trace: display(&trace),
                    dt,
                    samples: table.time.len(),
                    columns,
                },
            )?;
        }
        Command::Eval {
            config,
            genome,
            targets,
            out,
        } => {
            let cfg = config.load()?;
            let targets = parse_targets(&targets)?;
            let genome = load_genome(&genome)?;
            let report = evaluate_truth_table(&genome, &cfg, &targets)?;
            for (t, d) in report.targets.iter().zip(&report.decoded) {
                println!("{t}: decoded {d:?}");
            }
            println!("fitness = {}", report.fitness);
            write_json(
                &out,
                &EvalOutput {
                    tool: Tool::current(),
                    config: cfg,
                    genome,
                    report,
                },
            )?;
        }
        Command::Evolve {
            config,
            template,
            targets,
            ea,
            seed,
            generations,
            population,
            target_fitness,
            best,
            log,
            report,
        } => {
            let cfg = config.load()?;
            let targets = parse_targets(&targets)?;
            let template = match template {
                Some(p) => load_genome(&p)?,
                None => Genome::default_template(),
            };
            let mut params = match &ea {
                Some(p) => {
                    let text = read_text(p)?;
                    let value: serde_json::Value =
                        serde_json::from_str(&text).map_err(polyc_core::Error::from)?;
                    let has_seed = value.get("seed").is_some();
                    let mut params: EaParams =
                        serde_json::from_value(value).map_err(polyc_core::Error::from)?;
                    if !has_seed {
                        params.seed = cfg.seed;
                    }
                    params
                }
                None => EaParams {
                    seed: cfg.seed,
                    ..EaParams::default()
                },
            };
            if let Some(s) = seed {
                params.seed = s;
            }
            if let Some(g) = generations {
                params.generations = g;
            }
            if let Some(p) = population {
                params.population_size = p;
            }
            if target_fitness.is_some() {
                params.target_fitness = target_fitness;
            }
            let result = run_evolution(&cfg, &template, &targets, &params)?;
            write_generation_log(&log, &result.history)?;
            let EvolutionResult {
                best_genome,
                best_fitness,
                best_report,
                evaluations,
                simulations,
                terminated_by,
                ..
            } = result;
            println!(
                "best fitness = {best_fitness} after {evaluations} evaluations ({terminated_by:?})"
            );
            let best_report = best_report
                .ok_or_else(|| CliError::Numerical("every genome failed to simulate".into()))?;
            write_json(
                &report,
                &EvalOutput {
                    tool: Tool::current(),
                    config: cfg.clone(),
                    genome: best_genome.clone(),
                    report: best_report,
                },
            )?;
            write_json(
                &best,
                &BestGenomeOutput {
                    tool: Tool::current(),
                    config: cfg,
                    ea: params,
                    best_fitness,
                    terminated_by,
                    evaluations,
                    simulations,
                    genome: best_genome,
                },
            )?;
            if terminated_by == Termination::Error {
                return Err(CliError::Numerical(
                    "evolution stopped: a whole generation failed".into(),
                ));
            }
        }
        Command::Ce {
            network,
            partition,
            search,
            mode,
            budget,
            tpm_out,
            out,
        } => {
            if partition.is_some() && search {
                return Err(CliError::Usage(
                    "--partition and --search are exclusive".into(),
                ));
            }
            let net = parse_network(&read_text(&network)?)?;
            let tpm = build_tpm(&net)?;
            if let Some(p) = &tpm_out {
                output::write_atomic(p, tpm.to_csv().as_bytes())?;
            }
            let micro = effective_information(&tpm);
            println!("micro EI = {:.6} bits", micro.ei);
            let (part, found) = if let Some(p) = &partition {
                let mapping: Vec<usize> =
                    serde_json::from_str(&read_text(p)?).map_err(polyc_core::Error::from)?;
                (Some(Partition::new(mapping)?), None)
            } else if search || mode.is_some() {
                let r = search_partitions(&tpm, mode, budget)?;
                (Some(r.partition.clone()), Some(r))
            } else {
                (None, None)
            };
            let (macro_ei, ce) = match &part {
                Some(p) => {
                    let m = effective_information(&coarse_grain(&tpm, p)?);
                    let ce = causal_emergence(&tpm, p)?;
                    println!("macro EI = {:.6} bits ({} macro states)", m.ei, p.n_macro());
                    println!("CE = {ce:.6} bits");
                    (Some(m), Some(ce))
                }
                None => (None, None),
            };
            if let Some(r) = &found {
                if r.truncated {
                    eprintln!(
                        "warning: search budget exhausted after {} candidates",
                        r.evaluations
                    );
                }
            }
            if let Some(o) = out {
                write_json(
                    &o,
                    &CeOutput {
                        tool: Tool::current(),
                        config: CeSettings {
                            network: display(&network),
                            partition: partition.as_deref().map(display),
                            search,
                            mode,
                            budget,
                        },
                        nodes: net.len(),
                        micro,
                        macro_ei,
                        causal_emergence: ce,
                        partition: part,
                        search: found,
                    },
                )?;
            }
        }
        Command::Screen {
            network,
            protocol,
            controls,
            seed,
            out,
        } => {
            let net = parse_network(&read_text(&network)?)?;
            let protocol: Protocol = match &protocol {
                Some(p) => serde_json::from_str(&read_text(p)?).map_err(polyc_core::Error::from)?,
                None => Protocol::default(),
            };
            protocol.validate()?;
            let report = screen_network(&net, &protocol)?;
            println!(
                "{} associative, {} none, {} skipped of {} triplets",
                report.counts.associative,
                report.counts.none,
                report.counts.skipped,
                report.triplets.len()
            );
            let summary = if controls > 0 {
                let s = random_controls(&net, &protocol, controls, seed)?;
                println!(
                    "controls: mean {:.3}, min {}, max {} hits",
                    s.mean, s.min, s.max
                );
                Some(s)
            } else {
                None
            };
            write_json(
                &out,
                &ScreenOutput {
                    tool: Tool::current(),
                    config: ScreenSettings {
                        network: display(&network),
                        protocol,
                        controls,
                        seed,
                    },
                    report,
                    controls: summary,
                },
            )?;
        }
    }
    Ok(())
}

fn write_generation_log(path: &Path, history: &[GenerationStats]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in history {
        w.serialize(h)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::from(e.into_error()))?;
    output::write_atomic(path, &bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
