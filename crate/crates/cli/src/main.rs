use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cba_cli::config::ExperimentConfig;
use cba_cli::experiment::{build_graph, effective_seeds, graph_seed, run_experiment, BasisData};
use cba_cli::report::{aggregate, fmt_float, metadata_json, parse_aggregate, write_aggregate, write_trials};
use cba_cli::svg::{render_svg, Metric};
use cba_cli::{HarnessError, Result};
use cba_core::bases::write_basis;
use cba_core::environments::Label;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(version, about = "Contextual bandits with abstention on graphs")]
struct Cli {
    /// Worker threads (default: one per core). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotMetric {
    Mistakes,
    Reward,
}

#[derive(Subcommand)]
enum Command {
    /// Write the graph and label files of every graph seed.
    Generate(Common),
    /// Write the basis of every graph seed and print its size.
    Basis(Common),
    /// Run every (algorithm, seed) pair and write trials.csv, aggregate.csv
    /// and metadata.json.
    Run(Common),
    /// Render aggregate.csv as SVG.
    Plot {
        /// Directory holding aggregate.csv; the SVG is written there too.
        #[arg(long)]
        out: PathBuf,
        /// Aggregate file to read instead of `<out>/aggregate.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PlotMetric::Mistakes)]
        metric: PlotMetric,
    },
}

fn output_dir(common: &Common, config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn graph_seeds(config: &ExperimentConfig, seed_offset: u64) -> Vec<u64> {
    let mut seeds: Vec<u64> = effective_seeds(config, seed_offset)
        .into_iter()
        .map(|s| graph_seed(config, s))
        .collect();
    seeds.dedup();
    seeds
}

fn generate(common: &Common) -> Result<()> {
    let config = ExperimentConfig::load(&common.config)?;
    let dir = output_dir(common, &config)?;
    for g in graph_seeds(&config, common.seed_offset) {
        let labeled = build_graph(&config.environment, g)?;
        let edges = dir.join(format!("graph_{g}.edges"));
        write_file(&edges, |w| {
            for &(u, v, weight) in labeled.graph.edges() {
                writeln!(w, "{u} {v} {}", fmt_float(weight))?;
            }
            Ok(())
        })?;
        write_file(&dir.join(format!("graph_{g}.labels")), |w| {
            for (v, label) in labeled.labels.iter().enumerate() {
                match label {
                    Label::Foreground(c) => writeln!(w, "{v} {}", labeled.class_names[*c])?,
                    Label::Background => writeln!(w, "{v} background")?,
                }
            }
            Ok(())
        })?;
        println!(
            "graph seed {g}: {} nodes, {} edges -> {}",
            labeled.n_nodes(),
            labeled.graph.edges().len(),
            edges.display()
        );
    }
    Ok(())
}

fn basis(common: &Common) -> Result<()> {
    let config = ExperimentConfig::load(&common.config)?;
    let dir = output_dir(common, &config)?;
    for g in graph_seeds(&config, common.seed_offset) {
        let labeled = build_graph(&config.environment, g)?;
        let data = BasisData::build(config.basis, &labeled.graph, g)?;
        let distinct = data.distinct(&labeled.graph)?;
        let path = dir.join(format!("basis_{}_{g}.txt", config.basis));
        write_file(&path, |w| write_basis(&distinct, &mut *w).map_err(|e| std::io::Error::other(e.to_string())))?;
        let sizes: Vec<usize> = distinct.iter().map(|e| e.members.len()).collect();
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
        println!(
            "graph seed {g}: {} nodes, {} distinct sets ({} learner elements), mean size {mean:.2}, max size {} -> {}",
            labeled.n_nodes(),
            distinct.len(),
            data.len(),
            sizes.iter().max().unwrap_or(&0),
            path.display()
        );
    }
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let config = ExperimentConfig::load(&common.config)?;
    let dir = output_dir(common, &config)?;
    let experiment = run_experiment(&config, common.seed_offset)?;
    write_file(&dir.join("trials.csv"), |w| write_trials(&experiment.records, w))?;
    let curves = aggregate(&experiment.records);
    write_file(&dir.join("aggregate.csv"), |w| write_aggregate(&curves, w))?;
    write_file(&dir.join("metadata.json"), |w| w.write_all(metadata_json(&config, &experiment).as_bytes()))?;
    for c in &curves {
        let last = c.len().checked_sub(1);
        println!(
            "{} ({}, {} seeds): mean cumulative mistakes {}, mean cumulative reward {}",
            c.algorithm,
            c.basis,
            c.n_seeds,
            last.map_or(0.0, |t| c.mistakes.mean[t]),
            last.map_or(0.0, |t| c.reward.mean[t])
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn plot(out: &Path, input: Option<&Path>, metric: PlotMetric) -> Result<()> {
    let input = input.map_or_else(|| out.join("aggregate.csv"), Path::to_path_buf);
    let text = fs::read_to_string(&input).map_err(|e| HarnessError::Config(format!("{}: {e}", input.display())))?;
    let (metric, name) = match metric {
        PlotMetric::Mistakes => (Metric::Mistakes, "mistakes.svg"),
        PlotMetric::Reward => (Metric::Reward, "reward.svg"),
    };
    let svg = render_svg(&parse_aggregate(&text)?, metric)?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let path = out.join(name);
    fs::write(&path, svg).map_err(|e| HarnessError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Basis(c) => basis(c),
        Command::Run(c) => run(c),
        Command::Plot { out, input, metric } => plot(out, input.as_deref(), *metric),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
