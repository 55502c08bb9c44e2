//! Command-line front end: seeded simulation runs, the three-scenario
//! replication, report rendering, agent generation, and transcript
//! verification.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use recsim::agents::generate_population;
use recsim::config::{parse_config, BackendChoice, OutputOptions, RunConfig};
use recsim::engine::{
    build_backend, replicate_experiment, run, transcript, verify_file, ReplicationResult,
};
use recsim::metrics::{daily_means_csv, render_report, ReactionTally};
use recsim::recommender::ScenarioKind;

#[derive(Parser)]
#[command(name = "recsim", version, about = "Deterministic social feed simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run config; defaults apply for anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario (plurality | balanced | similarity).
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the backend (deterministic | llm | replay).
    #[arg(long)]
    backend: Option<String>,
    /// Cassette directory for the replay backend (or recording dir for llm).
    #[arg(long)]
    cassettes: Option<PathBuf>,
    /// Endpoint URL for the llm backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name for the llm backend.
    #[arg(long)]
    model: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random population and write it as JSON.
    GenAgents {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a full simulation run and write transcript, series, and
    /// report files.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the three focus profiles through one 30-post session per
    /// scenario and write the three report tables.
    Replicate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-render report tables from a transcript file.
    Report {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive every score update in a transcript and report the
    /// maximum deviation (zero for engine-written transcripts).
    ReplayVerify {
        #[arg(long)]
        transcript: PathBuf,
    },
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => parse_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let scenario = args.scenario.unwrap_or(ScenarioKind::Similarity);
            RunConfig::for_scenario(scenario)
        }
    };
    if let Some(scenario) = args.scenario {
        config.scenario = scenario;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(backend) = &args.backend {
        config.backend = match backend.as_str() {
            "deterministic" => BackendChoice::Deterministic,
            "replay" => {
                let dir = args
                    .cassettes
                    .as_ref()
                    .context("--backend replay requires --cassettes DIR")?;
                BackendChoice::Replay {
                    cassette_dir: dir.display().to_string(),
                    model: args.model.clone().unwrap_or_else(|| "default".into()),
                }
            }
            "llm" => BackendChoice::Llm {
                endpoint: args
                    .endpoint
                    .clone()
                    .context("--backend llm requires --endpoint URL")?,
                model: args.model.clone().context("--backend llm requires --model NAME")?,
                max_in_flight: 4,
                timeout_secs: 60,
                record_dir: args.cassettes.as_ref().map(|d| d.display().to_string()),
            },
            other => bail!("unknown backend {other:?} (expected deterministic, llm, or replay)"),
        };
    }
    if let Some(out) = &args.out {
        config.output = OutputOptions {
            dir: Some(out.display().to_string()),
            ..config.output.clone()
        };
    }
    config.validate()?;
    Ok(config)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_replication_reports(result: &ReplicationResult, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for scenario in &result.scenarios {
        let doc = render_report(scenario.scenario, &scenario.rows());
        let slug = scenario.scenario.name().to_lowercase();
        let txt = out.join(format!("report_{slug}.txt"));
        let csv = out.join(format!("report_{slug}.csv"));
        write_atomic(&txt, &doc.text)?;
        write_atomic(&csv, &doc.csv)?;
        written.push(txt);
        written.push(csv);
    }
    Ok(written)
}

fn cmd_gen_agents(n: usize, seed: u64, out: &Path) -> Result<()> {
    let agents = generate_population(n, seed)?;
    let rows: Vec<serde_json::Value> = agents
        .iter()
        .map(|a| {
            serde_json::json!({
                "id": a.key,
                "nickname": a.nickname,
                "bio": a.bio,
                "interests": a.interests.iter().collect::<Vec<_>>(),
                "o": a.static_traits.openness,
                "c": a.static_traits.conscientiousness,
                "e": a.static_traits.extraversion,
                "a": a.static_traits.agreeableness,
                "n": a.static_traits.neuroticism,
                "cs": a.static_traits.cognitive_style,
                "om": a.static_traits.open_mindedness,
                "pa": a.dynamic_traits.political_attitude,
                "sc": a.dynamic_traits.social_connectivity,
                "er": a.dynamic_traits.emotive_reaction,
                "T": a.activity_factor,
            })
        })
        .collect();
    write_atomic(out, &format!("{}\n", serde_json::to_string_pretty(&rows)?))?;
    println!("wrote {} agents to {}", n, out.display());
    Ok(())
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let config = resolve_config(args)?;
    let result = run(&config)?;
    let summary = result.score_summary();
    println!(
        "{} scenario, {} days, {} agents, {} interactions",
        result.scenario,
        result.days,
        result.agents.len(),
        result.transcript.record_count()
    );
    println!(
        "final polarization mean {:.4} [{:.4}, {:.4}]; engagement mean {:.4} [{:.4}, {:.4}]",
        summary.mean_polarization,
        summary.min_polarization,
        summary.max_polarization,
        summary.mean_engagement,
        summary.min_engagement,
        summary.max_engagement,
    );
    if let Some(dir) = &config.output.dir {
        let dir = PathBuf::from(dir);
        let slug = config.scenario.name().to_lowercase();
        let doc = render_report(config.scenario, &result.tallies);
        write_atomic(&dir.join(format!("report_{slug}.txt")), &doc.text)?;
        write_atomic(&dir.join(format!("report_{slug}.csv")), &doc.csv)?;
        write_atomic(
            &dir.join(format!("daily_means_{slug}.csv")),
            &daily_means_csv(&result.daily_means),
        )?;
        if let recsim::engine::TranscriptHandle::File { path, .. } = &result.transcript {
            println!("transcript: {}", path.display());
        }
        if let Some(series) = &result.series_path {
            println!("series: {}", series.display());
        }
        println!("reports under {}", dir.display());
    }
    Ok(())
}

fn cmd_replicate(args: &ConfigArgs) -> Result<()> {
    let config = resolve_config(args)?;
    let backend = build_backend(&config)?;
    let result = replicate_experiment(backend.as_ref(), config.seed, &config)?;
    for scenario in &result.scenarios {
        let doc = render_report(scenario.scenario, &scenario.rows());
        println!("{}", doc.text);
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let written = write_replication_reports(&result, &out)?;
    println!("wrote {} report files under {}", written.len(), out.display());
    Ok(())
}

fn cmd_report(transcript_path: &Path, out: &Path) -> Result<()> {
    let (meta, rows) = transcript::read_file(transcript_path)?;
    let mut tallies: BTreeMap<String, ReactionTally> = BTreeMap::new();
    for agent in &meta.agents {
        tallies.insert(agent.id.clone(), ReactionTally::default());
    }
    for row in &rows {
        let tally = tallies
            .get_mut(&row.agent)
            .with_context(|| format!("transcript row references unknown agent {}", row.agent))?;
        let outcome = recsim::decision::InteractionOutcome {
            reaction: match row.reaction.as_str() {
                "Nothing" => recsim::decision::ReactionKind::None,
                "Like" => recsim::decision::ReactionKind::Like,
                "Love" => recsim::decision::ReactionKind::Love,
                "Care" => recsim::decision::ReactionKind::Care,
                "Haha" => recsim::decision::ReactionKind::Haha,
                "Wow" => recsim::decision::ReactionKind::Wow,
                "Angry" => recsim::decision::ReactionKind::Angry,
                "Sad" => recsim::decision::ReactionKind::Sad,
                other => bail!("unknown reaction {other:?} in transcript"),
            },
            read_comments: row.read_comments,
            comment_text: row.comment.clone(),
            shared: row.shared,
            friend_requested: row.friend_requested,
        };
        tally.add_outcome(&outcome);
    }
    // Keep the table readable: only agents that appear in the transcript.
    let active: Vec<(String, ReactionTally)> = tallies
        .into_iter()
        .filter(|(_, t)| t.total_reactions() > 0)
        .collect();
    if active.is_empty() {
        bail!("transcript contains no interactions");
    }
    let doc = render_report(meta.scenario, &active);
    println!("{}", doc.text);
    let slug = meta.scenario.name().to_lowercase();
    write_atomic(&out.join(format!("report_{slug}.txt")), &doc.text)?;
    write_atomic(&out.join(format!("report_{slug}.csv")), &doc.csv)?;
    println!("reports under {}", out.display());
    Ok(())
}

fn cmd_replay_verify(path: &Path) -> Result<()> {
    let report = verify_file(path)?;
    println!(
        "{} records, maximum recurrence deviation {:e}",
        report.records, report.max_deviation
    );
    if report.max_deviation != 0.0 {
        bail!("transcript deviates from the score recurrences");
    }
    println!("transcript verified");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenAgents { n, seed, out } => cmd_gen_agents(*n, *seed, out),
        Command::Run { config } => cmd_run(config),
        Command::Replicate { config } => cmd_replicate(config),
        Command::Report { transcript, out } => cmd_report(transcript, out),
        Command::ReplayVerify { transcript } => cmd_replay_verify(transcript),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
