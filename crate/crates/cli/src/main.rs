//! `gesturegen`: operator command line for gesture generation sessions.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage error.

mod report;

use std::collections::BTreeMap;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use gesturegen_core::agents::{BackendSpec, ChatBackend, ContextInput, ImagePayload, OpenAiBackend, ScriptedBackend};
use gesturegen_core::config::AppConfig;
use gesturegen_core::gesture::{bundled_files, load_gesture};
use gesturegen_core::motion::validate_sequence;
use gesturegen_core::session::{feedback_stats, SessionInput, SessionRecord, SessionStatus, SessionStore};
use gesturegen_core::trajectory::{check_trajectory, compute_metrics, read_columnar, write_columnar};
use gesturegen_server::{AppState, DefaultBackend};

type CmdResult = Result<(), Box<dyn Error>>;

const DEFAULT_CONFIG_FILE: &str = "gesturegen.toml";

#[derive(Debug, Parser)]
#[command(name = "gesturegen", version, about = "Generate and refine expressive humanoid gestures with language-model agents")]
struct Cli {
    /// Configuration file (default: ./gesturegen.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sessions_dir` from the configuration.
    #[arg(long, global = true)]
    sessions_dir: Option<PathBuf>,
    /// Print structured JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Start a session and generate the first sequence.
    Generate {
        /// Generate this gesture directly, skipping context analysis.
        #[arg(long, conflicts_with_all = ["instruction", "image"], required_unless_present_any = ["instruction", "image"])]
        gesture: Option<String>,
        /// Describe the social context in words.
        #[arg(long)]
        instruction: Option<String>,
        /// Scene image for context analysis.
        #[arg(long)]
        image: Option<PathBuf>,
        /// `openai` (default) or `scripted:<fixture file>`.
        #[arg(long)]
        backend: Option<BackendSpec>,
    },
    /// Submit feedback and generate the next iteration.
    Refine {
        id: String,
        feedback: String,
        /// Defaults to the backend the session was generated with.
        #[arg(long)]
        backend: Option<BackendSpec>,
    },
    /// Build the executable trajectory and write the export bundle.
    Finalize {
        id: String,
        /// Sample rate, Hz.
        #[arg(long)]
        rate: Option<f64>,
        /// Overrides `export_dir` from the configuration.
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
    /// Print a session record.
    Show { id: String },
    /// List sessions, oldest first.
    Sessions,
    /// Feedback and latency statistics over all sessions.
    Stats,
    /// Check gesture files for invariant, reachability and collision failures.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Motion metrics of a gesture file or a columnar trajectory (.csv).
    Metrics {
        file: PathBuf,
        /// Interpolation rate for gesture files, Hz.
        #[arg(long)]
        rate: Option<f64>,
        /// Also write plot-ready columnar samples here.
        #[arg(long)]
        columns: Option<PathBuf>,
    },
    /// Serve the HTTP API (and a built web UI, if configured).
    Serve {
        /// Address to bind, e.g. 0.0.0.0:8080.
        #[arg(long, conflicts_with = "port")]
        bind: Option<String>,
        /// Port on 127.0.0.1.
        #[arg(long)]
        port: Option<u16>,
        /// Directory of static UI files.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Backend for requests that do not name one.
        #[arg(long)]
        backend: Option<BackendSpec>,
    },
    /// Write the bundled gesture library to a directory.
    ExportGestures { dir: PathBuf },
}

struct Ctx {
    config: AppConfig,
    json: bool,
}

impl Ctx {
    fn store(&self) -> Result<SessionStore, Box<dyn Error>> {
        Ok(SessionStore::open(&self.config.sessions_dir)?)
    }

    fn print(&self, value: serde_json::Value, human: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&value).expect("json values serialize"));
        } else {
            print!("{}", human());
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, Box<dyn Error>> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None if Path::new(DEFAULT_CONFIG_FILE).is_file() => AppConfig::load(Path::new(DEFAULT_CONFIG_FILE))?,
        None => AppConfig::default(),
    };
    if let Some(dir) = &cli.sessions_dir {
        config.sessions_dir = dir.clone();
    }
    Ok(config)
}

/// Where a scripted session left off in its fixture, so a later `refine`
/// in another process continues with the next response.
#[derive(Debug, Serialize, Deserialize)]
struct ScriptCursor {
    path: PathBuf,
    consumed: usize,
}

fn cursor_file(store: &SessionStore, id: &str) -> PathBuf {
    store.dir().join(format!(".{id}.script"))
}

enum Backend {
    Scripted {
        backend: ScriptedBackend,
        path: PathBuf,
        skipped: usize,
        available: usize,
    },
    Live(OpenAiBackend),
}

impl Backend {
    fn open(ctx: &Ctx, store: &SessionStore, requested: Option<&BackendSpec>, id: Option<&str>) -> Result<Self, Box<dyn Error>> {
        let cursor: Option<ScriptCursor> = id
            .map(|id| cursor_file(store, id))
            .filter(|p| p.is_file())
            .map(|p| -> Result<ScriptCursor, Box<dyn Error>> { Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?) })
            .transpose()?;
        let scripted = |path: PathBuf, skip: usize| -> Result<Self, Box<dyn Error>> {
            let backend = ScriptedBackend::load(&path)?.skip(skip);
            let available = backend.remaining();
            Ok(Backend::Scripted {
                backend,
                path,
                skipped: skip,
                available,
            })
        };
        match (requested, cursor) {
            (Some(BackendSpec::Scripted(p)), cursor) => {
                let path = std::fs::canonicalize(p).map_err(|e| format!("cannot open fixture {}: {e}", p.display()))?;
                let skip = cursor.filter(|c| c.path == path).map_or(0, |c| c.consumed);
                scripted(path, skip)
            }
            (None, Some(c)) => scripted(c.path, c.consumed),
            (Some(BackendSpec::OpenAi), _) | (None, None) => {
                Ok(Backend::Live(OpenAiBackend::from_env(ctx.config.openai.clone())?))
            }
        }
    }

    fn chat(&self) -> &dyn ChatBackend {
        match self {
            Backend::Scripted { backend, .. } => backend,
            Backend::Live(b) => b,
        }
    }

    fn save_cursor(&self, store: &SessionStore, id: &str) -> CmdResult {
        if let Backend::Scripted {
            backend,
            path,
            skipped,
            available,
        } = self
        {
            let cursor = ScriptCursor {
                path: path.clone(),
                consumed: skipped + (available - backend.remaining()),
            };
            std::fs::write(cursor_file(store, id), serde_json::to_string(&cursor)?)?;
        }
        Ok(())
    }
}

fn cmd_generate(
    ctx: &Ctx,
    gesture: Option<String>,
    instruction: Option<String>,
    image: Option<PathBuf>,
    backend: Option<BackendSpec>,
) -> CmdResult {
    let input = match gesture {
        Some(name) => SessionInput::Gesture { name },
        None => SessionInput::Context(ContextInput {
            image: image
                .map(|p| ImagePayload::load(&p).map_err(|e| format!("cannot read image {}: {e}", p.display())))
                .transpose()?,
            instruction,
        }),
    };
    let store = ctx.store()?;
    let pipeline = ctx.config.pipeline()?;
    let backend = Backend::open(ctx, &store, backend.as_ref(), None)?;
    let record = pipeline.start_session(input, backend.chat());
    store.save(&record)?;
    backend.save_cursor(&store, &record.id)?;
    ctx.print(report::session_json(&record), || report::session_text(&record));
    if record.status == SessionStatus::Failed {
        let why = record.diagnostics.last().map(String::as_str).unwrap_or("generation failed");
        return Err(format!("session {} failed: {why}", record.id).into());
    }
    Ok(())
}

fn cmd_refine(ctx: &Ctx, id: &str, feedback: &str, backend: Option<BackendSpec>) -> CmdResult {
    let store = ctx.store()?;
    let mut record = store.load(id)?;
    let pipeline = ctx.config.pipeline()?;
    let backend = Backend::open(ctx, &store, backend.as_ref(), Some(id))?;
    let result = pipeline.submit_feedback(&mut record, feedback, backend.chat());
    store.save(&record)?;
    backend.save_cursor(&store, id)?;
    result?;
    ctx.print(report::session_json(&record), || report::session_text(&record));
    Ok(())
}

fn cmd_finalize(ctx: &Ctx, id: &str, rate: Option<f64>, export_dir: Option<PathBuf>) -> CmdResult {
    let store = ctx.store()?;
    let mut record = store.load(id)?;
    let pipeline = ctx.config.pipeline()?;
    let rate = rate.unwrap_or(ctx.config.session.rate);
    let dir = export_dir.unwrap_or_else(|| ctx.config.export_dir.clone());
    let traj = pipeline.finalize(&mut record, rate, Some(&dir))?;
    store.save(&record)?;
    let info = record.finalized.clone().expect("set by finalize");
    let feasible = traj.feasibility.as_ref().is_some_and(|f| f.feasible());
    ctx.print(json!({"session_id": record.id, "feasible": feasible, "finalized": info}), || {
        let mut s = format!(
            "session    {}\niteration  {}\nsamples    {} at {} Hz ({:.3} s)\nfeasible   {}\n",
            record.id, info.iteration, info.samples, info.rate, info.duration, feasible
        );
        if let Some(e) = &info.exports {
            s += &format!(
                "gesture    {}\ntrajectory {}\nmetrics    {}\n",
                e.gesture.display(),
                e.trajectory.display(),
                e.metrics.display()
            );
        }
        s
    });
    Ok(())
}

fn cmd_show(ctx: &Ctx, id: &str) -> CmdResult {
    let record = ctx.store()?.load(id)?;
    ctx.print(serde_json::to_value(&record)?, || report::history_text(&record));
    Ok(())
}

fn cmd_sessions(ctx: &Ctx) -> CmdResult {
    let records = ctx.store()?.list()?;
    let rows: Vec<_> = records.iter().map(report::summary_json).collect();
    ctx.print(json!(rows), || report::sessions_table(&records));
    Ok(())
}

fn cmd_stats(ctx: &Ctx) -> CmdResult {
    let records: Vec<SessionRecord> = ctx.store()?.list()?;
    let stats = feedback_stats(&records);
    let mut latency: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for call in records.iter().flat_map(|r| &r.iterations).flat_map(|it| &it.calls) {
        let e = latency.entry(call.stage.to_string()).or_default();
        e.0 += 1;
        e.1 += call.latency_ms;
    }
    let latency_json: BTreeMap<_, _> = latency
        .iter()
        .map(|(stage, (n, total))| (stage.clone(), json!({"calls": n, "mean_ms": total / *n as f64})))
        .collect();
    ctx.print(json!({"feedback": stats, "latency": latency_json}), || {
        let mut s = format!(
            "sessions               {}\nfinalized              {}\nfeedback messages      {}\nmean refinements       {:.2}\npositional feedback    {}\nhigh-level feedback    {} ({:.1}%)\n",
            stats.sessions,
            stats.finalized,
            stats.feedback_count,
            stats.mean_refinements,
            stats.positional,
            stats.high_level,
            100.0 * stats.high_level_fraction
        );
        for (stage, (n, total)) in &latency {
            s += &format!("latency {stage:<14} {:.1} ms mean over {n} calls\n", total / *n as f64);
        }
        s
    });
    Ok(())
}

fn cmd_validate(ctx: &Ctx, files: &[PathBuf], rate: Option<f64>) -> CmdResult {
    let pipeline = ctx.config.pipeline()?;
    let rate = rate.unwrap_or(ctx.config.session.rate);
    let mut results = Vec::new();
    for file in files {
        let mut problems = Vec::new();
        let mut name = None;
        match load_gesture(file) {
            Err(e) => problems.push(e.to_string()),
            Ok((spec, seq)) => {
                name = Some(format!("{} ({})", spec.name, spec.category));
                let report = validate_sequence(&seq, &ctx.config.agents.bounds);
                problems.extend(report.violations.iter().map(|v| v.to_string()));
                match pipeline.trajectory(&seq, rate) {
                    Err(e) => problems.push(e.to_string()),
                    Ok(traj) => {
                        let f = check_trajectory(&traj, &pipeline.body, &pipeline.ik);
                        if !f.feasible() {
                            problems.push(f.summary());
                        }
                    }
                }
            }
        }
        results.push((file.clone(), name, problems));
    }
    let failed = results.iter().filter(|r| !r.2.is_empty()).count();
    let rows: Vec<_> = results
        .iter()
        .map(|(f, name, p)| json!({"file": f, "gesture": name, "valid": p.is_empty(), "problems": p}))
        .collect();
    ctx.print(json!(rows), || {
        let mut s = String::new();
        for (f, name, p) in &results {
            let label = name.as_deref().unwrap_or("");
            if p.is_empty() {
                s += &format!("ok    {} {label}\n", f.display());
            } else {
                s += &format!("FAIL  {} {label}\n", f.display());
                for problem in p {
                    s += &format!("      {problem}\n");
                }
            }
        }
        s
    });
    if failed > 0 {
        return Err(format!("{failed} of {} files failed validation", results.len()).into());
    }
    Ok(())
}

fn cmd_metrics(ctx: &Ctx, file: &Path, rate: Option<f64>, columns: Option<PathBuf>) -> CmdResult {
    let is_csv = file.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let traj = if is_csv {
        read_columnar(std::fs::File::open(file).map_err(|e| format!("cannot open {}: {e}", file.display()))?)?
    } else {
        let (_, seq) = load_gesture(file)?;
        let pipeline = ctx.config.pipeline()?;
        pipeline.trajectory(&seq, rate.unwrap_or(ctx.config.session.rate))?
    };
    let metrics = compute_metrics(&traj)?;
    if let Some(out) = &columns {
        write_columnar(&traj, std::io::BufWriter::new(std::fs::File::create(out)?))?;
    }
    ctx.print(
        json!({"rate": traj.rate, "duration": traj.duration, "samples": traj.samples.len(), "metrics": metrics}),
        || {
            format!(
                "{} samples at {} Hz ({:.3} s)\n{}",
                traj.samples.len(),
                traj.rate,
                traj.duration,
                report::metrics_table(&metrics)
            )
        },
    );
    Ok(())
}

fn cmd_serve(
    ctx: &Ctx,
    bind: Option<String>,
    port: Option<u16>,
    static_dir: Option<PathBuf>,
    backend: Option<BackendSpec>,
) -> CmdResult {
    let bind = bind
        .or(port.map(|p| format!("127.0.0.1:{p}")))
        .unwrap_or_else(|| ctx.config.server.bind.clone());
    let static_dir = static_dir.or_else(|| ctx.config.server.static_dir.clone());
    let state = AppState::from_config(&ctx.config)?.with_default_backend(match backend {
        Some(spec) => DefaultBackend::Spec(spec),
        None => DefaultBackend::None,
    });
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("serving on http://{bind}");
    runtime.block_on(gesturegen_server::serve(state, &bind, static_dir.as_deref()))?;
    Ok(())
}

fn cmd_export_gestures(ctx: &Ctx, dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, text) in bundled_files() {
        let path = dir.join(&name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    ctx.print(json!(written), || {
        written.iter().map(|p| format!("{}\n", p.display())).collect()
    });
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let ctx = Ctx {
        config: load_config(&cli)?,
        json: cli.json,
    };
    match cli.command {
        Command::Generate {
            gesture,
            instruction,
            image,
            backend,
        } => cmd_generate(&ctx, gesture, instruction, image, backend),
        Command::Refine { id, feedback, backend } => cmd_refine(&ctx, &id, &feedback, backend),
        Command::Finalize { id, rate, export_dir } => cmd_finalize(&ctx, &id, rate, export_dir),
        Command::Show { id } => cmd_show(&ctx, &id),
        Command::Sessions => cmd_sessions(&ctx),
        Command::Stats => cmd_stats(&ctx),
        Command::Validate { files, rate } => cmd_validate(&ctx, &files, rate),
        Command::Metrics { file, rate, columns } => cmd_metrics(&ctx, &file, rate, columns),
        Command::Serve {
            bind,
            port,
            static_dir,
            backend,
        } => cmd_serve(&ctx, bind, port, static_dir, backend),
        Command::ExportGestures { dir } => cmd_export_gestures(&ctx, &dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
