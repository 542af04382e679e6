//! `lidarplace` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lidarplace::cli;
use lidarplace::config::PipelineConfig;
use lidarplace::eval::DescriptorSet;
use lidarplace::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "lidarplace", version, about = "LiDAR place recognition pipeline")]
struct Args {
    /// Pipeline configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides graph.seed (and cluster.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, filter, transform and normalize every cloud into an archive.
    Preprocess,
    /// Compute one descriptor per archived cloud.
    Describe {
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Recall@1 and Recall@1% of a query set against a database set.
    Eval {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        database: PathBuf,
    },
    /// k-means over descriptors with a pose scatter plot.
    Cluster {
        #[arg(long)]
        descriptors: PathBuf,
    },
    /// Inference latency over synthetic clouds.
    Bench {
        /// Comma-separated cloud sizes; defaults to bench.sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

fn run(args: Args) -> Result<()> {
    let path = args
        .config
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.cluster_seed = seed;
    }
    let out = &args.out;
    match args.command {
        Command::Preprocess => {
            let report = cli::cmd_preprocess(&config, out, args.jobs)?;
            println!(
                "preprocessed {} clouds -> {}",
                report.rows.len(),
                report.archive.display()
            );
            if let Some(first) = report.failures.into_iter().next() {
                return Err(first);
            }
        }
        Command::Describe { archive } => {
            let archive = archive.unwrap_or_else(|| out.join(cli::ARCHIVE_FILE));
            let (p, set) = cli::cmd_describe(&config, &archive, out, args.jobs)?;
            println!("{} descriptors -> {}", set.len(), p.display());
        }
        Command::Eval { query, database } => {
            let q = DescriptorSet::read(&query)?;
            let db = DescriptorSet::read(&database)?;
            let (p, r) = cli::cmd_eval(&config, &q, &db, out)?;
            println!(
                "recall@1 = {:?}, recall@1% = {:?} -> {}",
                r.at_1.value(),
                r.at_1_percent.value(),
                p.display()
            );
        }
        Command::Cluster { descriptors } => {
            let set = DescriptorSet::read(&descriptors)?;
            let r = cli::cmd_cluster(&config, &set, out)?;
            println!("labels -> {}", r.labels_csv.display());
        }
        Command::Bench { sizes } => {
            let sizes = sizes.unwrap_or_else(|| config.bench_sizes.clone());
            let (p, rows) = cli::with_pool(args.jobs, || cli::cmd_bench(&config, &sizes, out))??;
            for r in &rows {
                println!("{} points: median {:.2} ms, p95 {:.2} ms", r.points, r.median_ms, r.p95_ms);
            }
            println!("-> {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
