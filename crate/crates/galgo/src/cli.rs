//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 runtime failure.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use galgo_core::descriptors::{Dataset, DescriptorProvider, PlantedSignal, SyntheticProvider};
use galgo_core::engine::Evolution;
use galgo_core::experiment::Measure;
use galgo_core::genome::{GeneticTopology, Genotype};
use galgo_core::regress::search_space_size;
use galgo_core::stats::{chi2_homogeneity_with, ExpectedMode};
use galgo_core::strategy::Method;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{MethodName, Project};
use crate::data::{read_contingency, write_activity, write_descriptors_to};
use crate::error::{write_file, CliError, CliResult};
use crate::grid::run_grid_parallel;
use crate::report::{cells_csv, measure_csv, render_chi2, render_grid, run_summary, sig6};
use crate::runlog::{fingerprint, render_run_log};
use crate::topology::{load_cgt, write_cgt};

#[derive(Debug, Parser)]
#[command(
    name = "galgo",
    version,
    about = "Genetic search for the best multiple linear regression over encoded descriptor families"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Number of candidate regressions C(N, n), optionally doubled.
    SpaceSize(SpaceSizeArgs),
    /// One evolution run: writes run_log.tsv and summary.json.
    Run(RunArgs),
    /// The 3x3 selection x survival grid with homogeneity reports.
    Grid(GridArgs),
    /// Statistical utilities.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Synthetic activity file and, optionally, a descriptor table.
    GenData(GenDataArgs),
    /// Parse a manifest and everything it references; print normalized forms.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("population").required(true).args(["big_n", "topology"]))]
pub struct SpaceSizeArgs {
    /// Number of descriptors N.
    #[arg(long = "N", value_name = "N")]
    pub big_n: Option<String>,
    /// Topology file; N is the number of its genotypes.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Regression size, or an inclusive range such as 1..5.
    #[arg(long = "n", value_name = "n")]
    pub n: String,
    /// Count both regression forms (with and without intercept).
    #[arg(long)]
    pub both: bool,
    /// Print `n,size` CSV.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub manifest: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the manifest output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_generations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub runs_per_cell: Option<usize>,
    /// Master seed; run i of every cell uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_generations: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write every run log under <out>/logs.
    #[arg(long)]
    pub logs: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Round expected counts to integers before the test.
    #[arg(long)]
    pub round_expected: bool,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Chi-square homogeneity test of a labeled contingency CSV.
    Chi2(Chi2Args),
}

#[derive(Debug, Args)]
pub struct Chi2Args {
    pub table: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Round expected counts to integers before the test.
    #[arg(long)]
    pub round_expected: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Activity CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of molecules.
    #[arg(long, default_value_t = 206)]
    pub m: usize,
    #[arg(long, default_value_t = 6.4806)]
    pub mean: f64,
    #[arg(long, default_value_t = 0.83076)]
    pub sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Descriptor table to write for every genotype of the topology.
    #[arg(long)]
    pub descriptors: Option<PathBuf>,
    #[arg(long, conflicts_with = "binary")]
    pub topology: Option<PathBuf>,
    /// Binary topology with this many genes.
    #[arg(long)]
    pub binary: Option<usize>,
    /// Comma-separated planted genotypes.
    #[arg(long, value_delimiter = ',')]
    pub planted: Vec<String>,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 2.0)]
    pub locality: f64,
    #[arg(long, default_value_t = 0.0)]
    pub low: f64,
    #[arg(long, default_value_t = 1.0)]
    pub high: f64,
    #[arg(long, default_value_t = 0)]
    pub descriptor_seed: u64,
    #[arg(long, default_value = "")]
    pub separator: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub manifest: PathBuf,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn std::io::Write) -> CliResult<()> {
    let text = match command {
        Command::SpaceSize(a) => cmd_space_size(&a)?,
        Command::Run(a) => cmd_run(&a)?,
        Command::Grid(a) => cmd_grid(&a)?,
        Command::Stats(StatsCommand::Chi2(a)) => cmd_chi2(&a)?,
        Command::GenData(a) => cmd_gen_data(&a)?,
        Command::Validate(a) => cmd_validate(&a)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

fn parse_range(text: &str) -> CliResult<(u64, u64)> {
    let bad = || CliError::Usage(format!("--n expects an integer or a range a..b, got {text:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(bad());
            }
            Ok((a, b))
        }
        None => num(text).map(|n| (n, n)),
    }
}

pub fn cmd_space_size(a: &SpaceSizeArgs) -> CliResult<String> {
    let total = match (&a.big_n, &a.topology) {
        (Some(n), None) => BigUint::from_str(n.trim())
            .map_err(|_| CliError::Usage(format!("--N expects a nonnegative integer, got {n:?}")))?,
        (None, Some(path)) => load_cgt(path)?.size(),
        _ => return Err(CliError::Usage("give exactly one of --N and --topology".into())),
    };
    let (lo, hi) = parse_range(&a.n)?;
    let mut out = String::new();
    if a.csv {
        out.push_str("n,size\n");
    }
    for n in lo..=hi {
        let size = search_space_size(&total, n, a.both).map_err(|e| CliError::Usage(e.to_string()))?;
        if a.csv {
            out.push_str(&format!("{n},{size}\n"));
        } else if lo == hi {
            out.push_str(&format!("{size}\n"));
        } else {
            out.push_str(&format!("{n}\t{size}\n"));
        }
    }
    Ok(out)
}

fn output_dir(project: &Project, over: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = over.clone().unwrap_or_else(|| project.manifest.output.clone());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

pub fn cmd_run(a: &RunArgs) -> CliResult<String> {
    let mut project = Project::load(&a.manifest)?;
    if let Some(g) = a.max_generations {
        project.evolution.max_generations = g;
    }
    let seed = a.seed.unwrap_or(project.manifest.seed);
    let cfg = project.config(seed)?;
    let print = fingerprint(&project.evolution.to_toml());
    let dir = output_dir(&project, &a.out)?;
    let result = Evolution::new(cfg, &project.topology, &project.provider, &project.dataset)?
        .run()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let sep = &project.manifest.separator;
    write_file(
        &dir.join("run_log.tsv"),
        render_run_log(&project.topology, sep, &print, &result),
    )?;
    write_file(
        &dir.join("summary.json"),
        run_summary(&project.topology, sep, &print, &result),
    )?;
    Ok(match &result.best {
        Some(b) => format!(
            "generations {}  best objective {}  r2 {}  model {}\n",
            result.records.len(),
            sig6(b.objective),
            sig6(b.model.r2),
            b.genotypes
                .iter()
                .map(|g| project.topology.render(g, sep))
                .collect::<Vec<_>>()
                .join(",")
        ),
        None => format!("generations {}  no valid model found\n", result.records.len()),
    })
}

fn method_name(m: Method) -> MethodName {
    match m {
        Method::Proportional => MethodName::Proportional,
        Method::Deterministic => MethodName::Deterministic,
        Method::Tournament => MethodName::Tournament,
    }
}

pub fn cmd_grid(a: &GridArgs) -> CliResult<String> {
    let mut project = Project::load(&a.manifest)?;
    if let Some(g) = a.max_generations {
        project.evolution.max_generations = g;
    }
    let runs = a.runs_per_cell.unwrap_or(project.manifest.grid.runs_per_cell);
    let master = a.seed.unwrap_or(project.manifest.seed);
    let alpha = a.alpha.unwrap_or(project.manifest.grid.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let mode = if a.round_expected || project.manifest.grid.round_expected {
        ExpectedMode::RoundedToInteger
    } else {
        ExpectedMode::Exact
    };
    let threshold = project.manifest.grid.threshold;
    let base = project.config(master)?;
    let dir = output_dir(&project, &a.out)?;
    let sep = project.manifest.separator.clone();

    let render = |sel: Method, surv: Method, r: &galgo_core::engine::RunResult| {
        a.logs.then(|| {
            let mut file = project.evolution.clone();
            file.selection.method = method_name(sel);
            file.survival.method = method_name(surv);
            render_run_log(&project.topology, &sep, &fingerprint(&file.to_toml()), r)
        })
    };
    let go = || {
        run_grid_parallel(
            &base,
            &project.topology,
            &project.provider,
            &project.dataset,
            runs,
            master,
            threshold,
            render,
        )
    };
    let (agg, outputs) = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(go)?,
        None => go()?,
    };

    let report = render_grid(&agg, alpha, mode);
    write_file(&dir.join("grid_report.txt"), &report)?;
    write_file(&dir.join("grid_cells.csv"), cells_csv(&agg))?;
    for m in Measure::ALL {
        if let Some(csv) = measure_csv(&agg, m) {
            write_file(&dir.join(format!("measure_{}.csv", m.name())), csv)?;
        }
    }
    if a.logs {
        let logs = dir.join("logs");
        std::fs::create_dir_all(&logs).map_err(|e| CliError::io(&logs, e))?;
        for o in &outputs {
            if let Ok((_, Some(text))) = &o.outcome {
                let name = format!(
                    "{}{}_{:03}.tsv",
                    o.selection.letter(),
                    o.survival.letter(),
                    o.index
                );
                write_file(&logs.join(name), text)?;
            }
        }
    }
    Ok(report)
}

pub fn cmd_chi2(a: &Chi2Args) -> CliResult<String> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let table = read_contingency(&a.table)?;
    let mode = if a.round_expected {
        ExpectedMode::RoundedToInteger
    } else {
        ExpectedMode::Exact
    };
    let report = chi2_homogeneity_with(&table, a.alpha, mode).map_err(|e| CliError::from(e).in_file(&a.table))?;
    Ok(render_chi2(&report))
}

/// Largest topology written out as a full descriptor table.
const MAX_TABLE_GENOTYPES: u64 = 1 << 20;

pub fn cmd_gen_data(a: &GenDataArgs) -> CliResult<String> {
    if a.m < 3 {
        return Err(CliError::Usage("--m must be at least 3".into()));
    }
    let normal = Normal::new(a.mean, a.sd)
        .map_err(|e| CliError::Usage(format!("--mean/--sd: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let width = a.m.to_string().len();
    let ids: Vec<String> = (1..=a.m).map(|i| format!("mol{i:0width$}")).collect();
    let y: Vec<f64> = (0..a.m).map(|_| normal.sample(&mut rng)).collect();
    let dataset = Dataset::new(ids, y)?;
    write_activity(&a.out, &dataset)?;
    let mut msg = format!("wrote {} molecules to {}\n", a.m, a.out.display());

    let Some(path) = &a.descriptors else {
        return Ok(msg);
    };
    let topology = match (&a.topology, a.binary) {
        (Some(p), None) => load_cgt(p)?,
        (None, Some(n)) => GeneticTopology::binary(n)?,
        _ => {
            return Err(CliError::Usage(
                "--descriptors needs one of --topology and --binary".into(),
            ))
        }
    };
    let count = topology
        .size_u64()
        .filter(|&n| n <= MAX_TABLE_GENOTYPES)
        .ok_or_else(|| CliError::Usage("topology too large for a full descriptor table".into()))?;
    let mut provider = SyntheticProvider::new(a.descriptor_seed, a.low, a.high, &dataset)?;
    if !a.planted.is_empty() {
        let genotypes = a
            .planted
            .iter()
            .map(|g| topology.parse(g, &a.separator))
            .collect::<Result<Vec<_>, _>>()?;
        provider = provider.with_planted(PlantedSignal {
            genotypes,
            noise_sd: a.noise,
            locality: a.locality,
        })?;
    }
    let rows: Vec<(Genotype, Vec<f64>)> = (0..count)
        .filter_map(|i| topology.genotype_at(i))
        .filter_map(|g| provider.provide(&g).map(|p| (g, p.values)))
        .collect();
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_descriptors_to(
        std::io::BufWriter::new(file),
        &topology,
        &a.separator,
        dataset.molecule_ids(),
        rows.iter().map(|(g, v)| (g, v.as_slice())),
    )?;
    msg.push_str(&format!("wrote {} descriptors to {}\n", rows.len(), path.display()));
    Ok(msg)
}

pub fn cmd_validate(a: &ValidateArgs) -> CliResult<String> {
    let project = Project::load(&a.manifest)?;
    let evolution = project.evolution.to_toml();
    let provider = match &project.provider {
        crate::config::Provider::Table(t) => format!("table with {} genotypes", t.len()),
        crate::config::Provider::Synthetic(s) => match s.planted() {
            Some(p) => format!("synthetic with {} planted genotypes", p.genotypes.len()),
            None => "synthetic".to_string(),
        },
    };
    Ok(format!(
        "# manifest\n{}\n# topology ({} genes, {} genotypes)\n{}\n# evolution (fingerprint {})\n{}\n# data\nmolecules = {}\ndescriptors = {}\n",
        project.manifest.to_toml(),
        project.topology.gene_count(),
        project.topology.size(),
        write_cgt(&project.topology),
        fingerprint(&evolution),
        evolution,
        project.dataset.len(),
        provider,
    ))
}
