use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ppod_core::ot::OtMode;
use ppod_core::ring::Party;

use ppod::config::RunConfig;
use ppod::data::{self, DatasetSpec};
use ppod::runner::{self, RunOptions, RunReport};

#[derive(Parser)]
#[command(name = "ppod", about = "Two-server privacy-preserving streaming outlier detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clustered synthetic dataset with planted outliers.
    GenData {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 3)]
        outliers: usize,
        #[arg(long, default_value_t = 0.05)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full session: initialise, slide through the stream, query.
    Run(RunArgs),
    /// Run a session and answer a single query against the final window.
    Query {
        #[command(flatten)]
        run: RunArgs,
        /// Query point, comma-separated raw coordinates.
        #[arg(long)]
        point: String,
        /// Squared query radius in the rounded integer domain.
        #[arg(long)]
        eps: u64,
    },
    /// Sweep a parameter and report per-run metrics.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to sweep.
        #[arg(long, value_enum)]
        sweep: SweepParam,
        /// Comma-separated values for the swept parameter.
        #[arg(long)]
        values: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key = value config file; profile defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (one point per row).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Inproc)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Role::All)]
    role: Role,
    /// Listen address (party 0 peer socket, or the dealer service).
    #[arg(long)]
    listen: Option<String>,
    /// Peer address to connect to (party 1).
    #[arg(long)]
    connect: Option<String>,
    /// Dealer service address (both parties in tcp mode).
    #[arg(long)]
    dealer: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Ot::IdealOt)]
    ot: Ot,
    /// Check the outlier trace against the plaintext replay reference.
    #[arg(long)]
    verify_oracle: bool,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    /// Number of generated queries issued after the last slide.
    #[arg(long, default_value_t = 0)]
    queries: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Inproc,
    Tcp,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Role {
    All,
    P0,
    P1,
    Dealer,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ot {
    IdealOt,
    RealOt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    K,
    W,
}

impl RunArgs {
    fn load_config(&self) -> Result<RunConfig> {
        match (&self.config, self.profile) {
            (Some(path), _) => RunConfig::load(path),
            (None, Profile::Desk) => Ok(RunConfig::desk()),
            (None, Profile::Paper) => Ok(RunConfig::full_scale()),
        }
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            master: self.seed,
            n_queries: self.queries,
            ot_mode: match self.ot {
                Ot::IdealOt => OtMode::Ideal,
                Ot::RealOt => OtMode::Real,
            },
            verify_oracle: self.verify_oracle,
        }
    }

    fn execute(&self) -> Result<RunReport> {
        let cfg = self.load_config()?;
        let rows = data::read_csv(&self.data)?;
        let opts = self.options();
        match (self.mode, self.role) {
            (Mode::Inproc, Role::All) => runner::run_inproc(&cfg, &rows, &opts),
            (Mode::Inproc, _) => bail!("inproc mode hosts every role; use --role all"),
            (Mode::Tcp, Role::All) => runner::run_tcp_all(&cfg, &rows, &opts),
            (Mode::Tcp, Role::Dealer) => {
                let listen = self.listen.as_deref().context("dealer needs --listen")?;
                let dealt = ppod::dealer::serve(listen, runner::derive_seed(self.seed, "dealer"))?;
                bail!("dealer session complete ({dealt} triples dealt); no report to emit")
            }
            (Mode::Tcp, role) => {
                let party = if role == Role::P0 { Party::P0 } else { Party::P1 };
                let dealer = self.dealer.as_deref().context("parties need --dealer in tcp mode")?;
                runner::run_tcp_role(
                    party,
                    &cfg,
                    &rows,
                    &opts,
                    self.listen.as_deref(),
                    self.connect.as_deref(),
                    dealer,
                )
            }
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData { points, dims, clusters, outliers, spread, seed, out } => {
            let spec = DatasetSpec { points, dims, clusters, outliers, spread, seed };
            let rows = data::generate(&spec)?;
            match out {
                Some(path) => data::write_csv(&path, &rows)?,
                None => print!("{}", data::to_csv(&rows)),
            }
            Ok(())
        }
        Command::Run(args) => {
            let report = args.execute()?;
            args.emit(&report.render())?;
            if report.oracle_verdict == Some(false) || !report.leak_ok_all {
                bail!("run completed but a verdict failed; see report");
            }
            Ok(())
        }
        Command::Query { run, point, eps } => {
            if run.role != Role::All {
                bail!("query hosts the whole session; use --role all");
            }
            let cfg = run.load_config()?;
            let rows = data::read_csv(&run.data)?;
            let raw: Vec<f64> = point
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("malformed --point")?;
            let (lo, _) = data::bounds(&rows);
            if raw.len() != lo.len() {
                bail!("query point has {} coordinates, dataset has {}", raw.len(), lo.len());
            }
            let answer = runner::run_single_query(&cfg, &rows, &run.options(), &raw, eps)?;
            println!("{}", if answer { "True" } else { "False" });
            Ok(())
        }
        Command::Bench { run, sweep, values } => {
            let base = run.load_config()?;
            let rows = data::read_csv(&run.data)?;
            let vals: Vec<usize> = values
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| v.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .context("malformed --values")?;
            let mut out = String::new();
            for v in vals {
                let mut cfg = base.clone();
                match sweep {
                    SweepParam::K => cfg.k = v,
                    SweepParam::W => cfg.window = v,
                }
                let report = runner::run_inproc(&cfg, &rows, &run.options())?;
                out.push_str(&format!(
                    "=== sweep {} = {v} ===\n{}\n",
                    match sweep {
                        SweepParam::K => "k",
                        SweepParam::W => "w",
                    },
                    report.render()
                ));
            }
            run.emit(&out)
        }
    }
}
