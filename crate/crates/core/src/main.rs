use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use explorekit::campaign::{self, CampaignConfig, CampaignError, PolicyKind, TaskSelector};
use explorekit::dataset;
use explorekit::prompt::{collection_map, compute_gaps, parse_collection, render_requirements};
use explorekit::replay;
use explorekit::report::success_table;
use explorekit::trajectory::{self, Trajectory};
use explorekit::world::World;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFRA: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "explorekit", version, about = "Explore a crafting world with text policies and build SFT data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an exploration campaign and persist its trajectories.
    Explore {
        #[command(flatten)]
        run: RunArgs,
        /// Also write a bar chart of success rates.
        #[arg(long)]
        plot: bool,
    },
    /// Turn a directory of trajectories into a JSON-Lines dataset.
    BuildDataset {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_dedup: bool,
    },
    /// Run a test campaign and write the success table.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Text report path; a CSV is written next to it.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-execute a recorded episode from its own responses.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
        /// World file to use instead of the recorded path.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Print which requirements of a task are unmet.
    GapCheck {
        /// A task name from the world, or any task text together with --requirements.
        #[arg(long)]
        task: String,
        #[arg(long, default_value = "")]
        inventory: String,
        #[arg(long, default_value = "")]
        surroundings: String,
        /// e.g. "8.0 cobblestone; 1.0 crafting_table_nearby"
        #[arg(long)]
        requirements: Option<String>,
        #[arg(long, default_value = "worlds/plan4mc_default.json")]
        world: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Campaign config (JSON); the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    world: Option<PathBuf>,
    /// Comma-separated task names, families, `eval` or `all`.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    #[arg(long)]
    biome: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    max_revisions: Option<u32>,
    #[arg(long)]
    cot: bool,
    #[arg(long)]
    no_relabel: bool,
    /// Force every skill to succeed.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    corruption_rate: Option<f64>,
    /// Trajectory directory or transcript file for the playback policy.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_transcripts: bool,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown policy `{s}` (expected llm, oracle, noisy-oracle or playback)"))
}

impl RunArgs {
    fn config(&self) -> Result<CampaignConfig, campaign::ConfigError> {
        let mut c = match &self.config {
            Some(p) => CampaignConfig::load(p)?,
            None => CampaignConfig::default(),
        };
        if let Some(w) = &self.world {
            c.world = w.clone();
        }
        if let Some(t) = &self.tasks {
            c.tasks = t.iter().map(|n| TaskSelector::Name(n.clone())).collect();
        }
        if let Some(b) = &self.biome {
            c.tasks = c
                .tasks
                .iter()
                .map(|s| match s {
                    TaskSelector::Name(n) | TaskSelector::WithBiome { task: n, .. } => TaskSelector::WithBiome {
                        task: n.clone(),
                        biome: Some(b.clone()),
                    },
                })
                .collect();
        }
        if let Some(n) = self.episodes {
            c.episodes_per_task = n;
        }
        if let Some(t) = self.max_revisions {
            c.max_revisions = t;
        }
        c.cot |= self.cot;
        c.relabel &= !self.no_relabel;
        c.deterministic |= self.deterministic;
        if let Some(p) = self.policy {
            c.policy.kind = p;
        }
        if let Some(r) = self.corruption_rate {
            c.policy.corruption_rate = r;
        }
        if let Some(t) = &self.transcripts {
            c.policy.transcripts = Some(t.clone());
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(p) = self.parallel {
            c.parallel = p;
        }
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        c.record_transcripts |= self.record_transcripts;
        Ok(c)
    }
}

/// An error paired with the exit code it maps to.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_INFRA, e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure(EXIT_CONFIG, e.into())
}

fn campaign_err(e: CampaignError) -> Failure {
    match e {
        CampaignError::Config(c) => config_err(c),
        other => Failure(EXIT_INFRA, other.into()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn explore(run: &RunArgs, plot: bool) -> Result<u8, Failure> {
    let cfg = run.config().map_err(config_err)?;
    let (result, _) = campaign::run_configured(&cfg, true).map_err(campaign_err)?;
    let table = success_table(&result);
    print!("{}", table.to_text());
    write(&cfg.out_dir.join("report.txt"), &table.to_text())?;
    write(&cfg.out_dir.join("report.csv"), &table.to_csv())?;
    if plot {
        write(&cfg.out_dir.join("report.svg"), &table.to_svg())?;
    }
    Ok(unavailable_exit(result.policy_unavailable()))
}

fn unavailable_exit(n: usize) -> u8 {
    if n > 0 {
        eprintln!("{n} episode(s) ended because the policy was unavailable");
        EXIT_INFRA
    } else {
        0
    }
}

fn evaluate(run: &RunArgs, report: Option<&Path>) -> Result<u8, Failure> {
    let cfg = run.config().map_err(config_err)?;
    let (result, _) = campaign::run_configured(&cfg, false).map_err(campaign_err)?;
    let table = success_table(&result);
    print!("{}", table.to_text());
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("report.txt"));
    write(&path, &table.to_text())?;
    write(&path.with_extension("csv"), &table.to_csv())?;
    Ok(unavailable_exit(result.policy_unavailable()))
}

fn build_dataset(dir: &Path, out: &Path, dedup: bool) -> Result<u8, Failure> {
    if !dir.is_dir() {
        return Err(config_err(anyhow!("trajectory directory {} does not exist", dir.display())));
    }
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for t in trajectory::load_dir(dir)? {
        match t {
            Ok(t) => trajectories.push(t),
            Err(e) => eprintln!("warning: skipping {e}"),
        }
    }
    if trajectories.is_empty() {
        eprintln!("warning: no trajectories in {}", dir.display());
    }
    let instances = dataset::build_dataset(&trajectories, dedup);
    if let Some(d) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    dataset::write_jsonl(out, &instances)?;
    let summary = dataset::summarize(&instances);
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    write(&out.with_extension("summary.json"), &text)?;
    println!(
        "{} instances ({} original, {} relabeled) from {} trajectories",
        summary.instances,
        summary.original,
        summary.relabeled,
        trajectories.len()
    );
    for (label, n) in &summary.per_label {
        println!("  {label}: {n}");
    }
    Ok(0)
}

fn replay_cmd(path: &Path, world: Option<&Path>) -> Result<u8, Failure> {
    let t = trajectory::load(path).map_err(config_err)?;
    let w = replay::world_for(&t, world).map_err(config_err)?;
    let (_, divergence) = replay::replay(&t, &w);
    match divergence {
        None => {
            println!("{}: replayed {} steps, no divergence", t.id, t.steps.len());
            Ok(0)
        }
        Some(d) => {
            println!("{}: {d}", t.id);
            Ok(EXIT_DIVERGED)
        }
    }
}

fn gap_check(task: &str, inventory: &str, surroundings: &str, requirements: Option<&str>, world: &Path) -> Result<u8, Failure> {
    let reqs = match requirements {
        Some(r) => parse_collection(r).map_err(|e| config_err(anyhow!("--requirements: {e}")))?,
        None => {
            let w = World::load(world).map_err(config_err)?;
            w.task(task)
                .ok_or_else(|| config_err(anyhow!("unknown task `{task}`; pass --requirements for free-form tasks")))?
                .requirements
                .clone()
        }
    };
    let inv = collection_map(inventory).map_err(|e| config_err(anyhow!("--inventory: {e}")))?;
    let surr = collection_map(surroundings).map_err(|e| config_err(anyhow!("--surroundings: {e}")))?;
    let report = compute_gaps(&reqs, &inv, &surr);
    let shown = |t: &str| if t.trim().is_empty() { "nothing".to_string() } else { t.trim().to_string() };
    println!(
        "{}",
        report.verbalize(task, &render_requirements(&reqs), &shown(inventory), &shown(surroundings))
    );
    Ok(0)
}

/// Joins the cause chain, skipping causes already spelled out by their parent.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Explore { run, plot } => explore(run, *plot),
        Command::Evaluate { run, report } => evaluate(run, report.as_deref()),
        Command::BuildDataset {
            trajectories,
            out,
            no_dedup,
        } => build_dataset(trajectories, out, !no_dedup),
        Command::Replay { trajectory, world } => replay_cmd(trajectory, world.as_deref()),
        Command::GapCheck {
            task,
            inventory,
            surroundings,
            requirements,
            world,
        } => gap_check(task, inventory, surroundings, requirements.as_deref(), world),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::from(code)
        }
    }
}
