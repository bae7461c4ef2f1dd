use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hux_core::context::connect;
use hux_core::gaze::RoiCrop;
use hux_core::sim::SimError;
use hux_core::{
    oracle, retrieve, run_scenario, FrameRecord, ImageRef, MemoryDraft, MemoryError, MemoryMeta, MemoryStore, Rect,
    RunReport, ScenarioScript, TaskError,
};

use crate::config::Config;
use crate::{Cli, Command, MemoryAddArgs, MemoryCommand, MemoryQueryArgs, OracleArgs, ReportArgs, RunArgs};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

const IO: u8 = 1;
const INVALID: u8 = 2;
const BACKEND: u8 = 3;
const CORRUPT: u8 = 4;

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| Failure::new(INVALID, e.to_string()))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Run(args) => cmd_run(&config, args),
        Command::Oracle(args) => cmd_oracle(&config, args),
        Command::Memory(MemoryCommand::Add(args)) => cmd_memory_add(&config, args),
        Command::Memory(MemoryCommand::Query(args)) => cmd_memory_query(&config, args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_script(config: &Config, path: &Path) -> Result<ScenarioScript, Failure> {
    let path = config.resolve_scenario(path);
    let src = fs::read_to_string(&path).map_err(|e| Failure::new(INVALID, format!("{}: {e}", path.display())))?;
    ScenarioScript::parse(&src).map_err(|e| Failure::new(INVALID, format!("{}: {e}", path.display())))
}

fn sim_failure(e: SimError) -> Failure {
    let code = match &e {
        SimError::Backend { .. } => BACKEND,
        SimError::Task {
            source: TaskError::Backend(_),
            ..
        } => BACKEND,
        _ => INVALID,
    };
    Failure::new(code, e.to_string())
}

fn memory_failure(e: MemoryError) -> Failure {
    let code = match &e {
        MemoryError::CorruptStore { .. } => CORRUPT,
        MemoryError::PersistenceFailure(_) => IO,
        MemoryError::Backend(_) | MemoryError::NoKeywords => BACKEND,
        _ => INVALID,
    };
    Failure::new(code, e.to_string())
}

fn cmd_run(config: &Config, args: RunArgs) -> Result<(), Failure> {
    let script = load_script(config, &args.scenario)?;
    let backend = connect(&config.backend).map_err(|e| Failure::new(BACKEND, e.to_string()))?;
    let sim = config.sim_config(args.policy, args.latency_ms);
    let report = run_scenario(&script, &sim, backend.as_ref()).map_err(sim_failure)?;

    let dir = args.out_dir.unwrap_or_else(|| config.paths.reports.clone());
    fs::create_dir_all(&dir).map_err(|e| Failure::new(IO, format!("{}: {e}", dir.display())))?;
    let json_path = dir.join(format!("{}.report.json", script.name));
    let text_path = dir.join(format!("{}.transcript.txt", script.name));
    for (path, body) in [(&json_path, report.to_json()), (&text_path, report.transcript_text())] {
        fs::write(path, body).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))?;
    }
    let m = &report.metrics;
    println!(
        "{}: {} turns, {} events ({} true), {} captions, {} mismatches",
        script.name,
        report.transcript.len(),
        m.events_detected,
        m.events_true,
        m.captions_issued,
        m.oracle_count_mismatches
    );
    println!("{}", json_path.display());
    println!("{}", text_path.display());
    Ok(())
}

fn cmd_oracle(config: &Config, args: OracleArgs) -> Result<(), Failure> {
    let script = load_script(config, &args.scenario)?;
    let profile = config
        .sim_config(None, None)
        .profile_for(&script)
        .map_err(sim_failure)?;
    let out = oracle(&script, &profile);
    if args.json {
        let body = serde_json::to_string_pretty(&out).expect("oracle output serializes");
        println!("{body}");
        return Ok(());
    }
    let mut text = String::new();
    let _ = writeln!(text, "script_digest: {}", out.script_digest);
    let _ = writeln!(text, "true events: {}", out.true_events.len());
    for ev in &out.true_events {
        let changes: Vec<String> = ev
            .changes
            .iter()
            .map(|(cat, ch)| format!("{cat} {}->{}", ch.before, ch.after))
            .collect();
        let _ = writeln!(
            text,
            "  frame {} @ {} ms: {}",
            ev.frame_id,
            ev.timestamp_ms,
            changes.join(", ")
        );
    }
    let _ = writeln!(text, "counts timeline: {} frames", out.counts_timeline.len());
    let timestamps = script.frames.iter().map(|f| f.timestamp_ms);
    for ((frame_id, counts), ts) in out.counts_timeline.iter().zip(timestamps) {
        let cells: Vec<String> = counts.iter().map(|(c, n)| format!("{c}={n}")).collect();
        let _ = writeln!(text, "  frame {frame_id} @ {ts} ms: {}", cells.join(" "));
    }
    print!("{text}");
    Ok(())
}

fn cmd_memory_add(config: &Config, args: MemoryAddArgs) -> Result<(), Failure> {
    let path = args.store.store.unwrap_or_else(|| config.paths.store.clone());
    let mut store = MemoryStore::open(&path).map_err(memory_failure)?;
    let backend = connect(&config.backend).map_err(|e| Failure::new(BACKEND, e.to_string()))?;
    let scene = FrameRecord {
        frame_id: 0,
        timestamp_ms: 0,
        width: 0,
        height: 0,
        image_ref: Some(args.scene_image),
        detections: Vec::new(),
    };
    let roi = RoiCrop {
        source_frame_id: 0,
        rect: Rect::new(0, 0, 0, 0),
        image_ref: ImageRef::File { path: args.ooi_image },
        caption: Some(args.ooi_caption),
    };
    let draft = MemoryDraft {
        scene: &scene,
        scene_caption: Some(&args.scene_caption),
        roi: &roi,
        object_type: &args.object_type,
        name: args.name.as_deref(),
        user_context: &args.context,
        meta: MemoryMeta {
            location: args.location,
            time: args.time,
            device: args.device,
        },
    };
    let record = store.create(draft, backend.as_ref()).map_err(memory_failure)?;
    println!("{}", record.record_id);
    Ok(())
}

fn cmd_memory_query(config: &Config, args: MemoryQueryArgs) -> Result<(), Failure> {
    if args.query.trim().is_empty() {
        return Err(Failure::new(INVALID, "query is empty"));
    }
    let path = args.store.store.unwrap_or_else(|| config.paths.store.clone());
    let store = if path.exists() {
        MemoryStore::load(&path).map_err(memory_failure)?
    } else {
        MemoryStore::in_memory()
    };
    let hits = retrieve(&args.query, &store).map_err(memory_failure)?;
    for hit in hits.iter().take(args.top.unwrap_or(usize::MAX)) {
        println!(
            "{:.4}\t{}\t{}",
            hit.score,
            hit.record_id,
            hit.matched_keywords.join(", ")
        );
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let src = fs::read_to_string(&args.report)
        .map_err(|e| Failure::new(INVALID, format!("{}: {e}", args.report.display())))?;
    let report: RunReport = serde_json::from_str(&src)
        .map_err(|e| Failure::new(INVALID, format!("{}: line {}: {e}", args.report.display(), e.line())))?;
    print!("{}", report.transcript_text());
    Ok(())
}
