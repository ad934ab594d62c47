use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use triad_core::eval::{Averaging, EvalOptions};
use triad_core::llm::{prompt_sha256, read_transcript, TemplateId};
use triad_core::orchestrator::{build_snapshot, BackendKind, RecordTarget};
use triad_core::{
    evaluate, load_benchmark, BackendSource, Deps, Gateway, KbStore, LoadOptions, Pipeline, PipelineConfig,
    PipelineError, ReplayBackend,
};

/// A failed command and the exit code it maps to.
pub enum Failure {
    User(anyhow::Error),
    Infra(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Infra(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::User(e) | Failure::Infra(e) => e,
        }
    }
}

trait OrFail<T> {
    fn user(self) -> Result<T, Failure>;
    fn infra(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into()))
    }

    fn infra(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Infra(e.into()))
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::NoKb | PipelineError::Kb(_) => Failure::User(e.into()),
        other => Failure::Infra(other.into()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .user()
}

pub fn load(kb: &Path, snapshot: Option<&Path>, lenient: bool) -> Result<(), Failure> {
    let opts = LoadOptions {
        strict: !lenient,
        ..LoadOptions::default()
    };
    let store = KbStore::load(kb, &opts).user()?;
    println!("{} triples", store.len());
    println!("{} labels", store.label_count());
    if store.skipped_lines() > 0 {
        eprintln!("skipped {} malformed lines", store.skipped_lines());
    }
    if let Some(path) = snapshot {
        let index = build_snapshot(&store, path).user()?;
        eprintln!(
            "index: {} entity and {} relation URIs -> {}",
            index.uri_count(triad_core::index::Kind::Entity),
            index.uri_count(triad_core::index::Kind::Relation),
            path.display()
        );
    }
    Ok(())
}

fn load_config(path: &Path, replay: Option<PathBuf>) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::load(path).user()?;
    if let Some(p) = replay {
        let strict = match cfg.backend.kind {
            BackendKind::Replay { strict, .. } => strict,
            BackendKind::Live { .. } => false,
        };
        cfg.backend.kind = BackendKind::Replay {
            transcripts: Some(p),
            strict,
        };
    }
    Ok(cfg)
}

pub fn ask(
    question: &str,
    config: &Path,
    record: Option<PathBuf>,
    replay: Option<PathBuf>,
    trace: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = load_config(config, replay)?;
    let deps = Deps::load(&cfg).map_err(pipeline_failure)?;
    let mut source = BackendSource::from_config(&cfg.backend).infra()?;
    if let Some(path) = record {
        source = source.recording(RecordTarget::File(path));
    }
    let gateway = source.gateway("ask", &cfg.backend).infra()?;
    let result = Pipeline::from_config(&deps, &cfg)
        .run(question, &gateway)
        .map_err(pipeline_failure)?;
    println!("{}", result.answer);
    if let Some(path) = trace {
        write_json(&path, &result)?;
    }
    Ok(())
}

pub struct EvalArgs {
    pub benchmark: PathBuf,
    pub config: PathBuf,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    pub repeat: usize,
    pub concurrency: Option<usize>,
    pub micro: bool,
}

pub fn eval(args: EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, args.replay)?;
    let items = load_benchmark(&args.benchmark).user()?;
    let opts = EvalOptions {
        concurrency: args.concurrency.unwrap_or(cfg.concurrency),
        repeat: args.repeat,
        averaging: if args.micro { Averaging::Micro } else { Averaging::Macro },
    };
    let report = if items.is_empty() {
        evaluate(&items, &Deps::from_store(KbStore::default()), &cfg, &BackendSource::shared(Arc::new(NoBackend)), &opts)
    } else {
        let deps = Deps::load(&cfg).map_err(pipeline_failure)?;
        let mut source = BackendSource::from_config(&cfg.backend).infra()?;
        if let Some(dir) = args.record {
            source = source.recording(RecordTarget::Dir(dir));
        }
        evaluate(&items, &deps, &cfg, &source, &opts)
    };

    eprint!("{}", report.to_table());
    if report.runs.len() > 1 {
        for run in &report.runs {
            let s = &run.summary;
            eprintln!("run {}: P={:.3} R={:.3} F1={:.3}", run.run, s.precision, s.recall, s.f1);
        }
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    if let Some(dir) = &args.trace_dir {
        std::fs::create_dir_all(dir).user()?;
        if let Some(run) = report.runs.first() {
            for (item, trace) in items.iter().zip(&run.traces) {
                if let Some(t) = trace {
                    write_json(&dir.join(format!("{}.json", item.id)), t)?;
                }
            }
        }
    }
    let m = &report.mean;
    let mode = if args.micro { "micro" } else { "macro" };
    println!("{mode} P={:.3} R={:.3} F1={:.3}", m.precision, m.recall, m.f1);
    Ok(())
}

/// Stand-in for an empty benchmark, which never calls a backend.
struct NoBackend;

impl triad_core::LlmBackend for NoBackend {
    fn complete(&self, _: &triad_core::llm::LlmRequest) -> Result<triad_core::llm::LlmResponse, triad_core::LlmError> {
        Err(triad_core::LlmError::Config("no backend configured".into()))
    }
}

fn transcript_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))
        .user()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn replay_check(transcripts: &Path, benchmark: Option<PathBuf>, config: Option<PathBuf>) -> Result<(), Failure> {
    let mut bad = 0usize;
    for file in transcript_files(transcripts)? {
        let records = read_transcript(&file).user()?;
        let mut problems = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if TemplateId::parse(&r.subtask).is_none() {
                problems.push(format!("record {}: unknown subtask {:?}", i + 1, r.subtask));
            }
            if prompt_sha256(&r.prompt) != r.prompt_sha256 {
                problems.push(format!("record {}: prompt_sha256 does not match prompt", i + 1));
            }
        }
        if problems.is_empty() {
            println!("{}: {} records ok", file.display(), records.len());
        } else {
            bad += 1;
            for p in problems {
                println!("{}: {p}", file.display());
            }
        }
    }

    if let (Some(benchmark), Some(config)) = (benchmark, config) {
        let cfg = PipelineConfig::load(&config).user()?;
        let items = load_benchmark(&benchmark).user()?;
        let deps = Deps::load(&cfg).map_err(pipeline_failure)?;
        let pipeline = Pipeline::from_config(&deps, &cfg);
        for item in &items {
            let path = if transcripts.is_dir() {
                transcripts.join(format!("{}.jsonl", item.id))
            } else {
                transcripts.to_path_buf()
            };
            let replay = Arc::new(ReplayBackend::from_path(&path, true).user()?);
            let total = replay.remaining();
            let gateway = Gateway::new(replay.clone(), cfg.backend.model.clone(), cfg.backend.max_tokens);
            match pipeline.run(&item.question, &gateway) {
                Ok(_) if replay.remaining() == 0 => println!("{}: replayed all {total} records", item.id),
                Ok(_) => {
                    bad += 1;
                    println!("{}: {} of {total} records unused", item.id, replay.remaining());
                }
                Err(e) => {
                    bad += 1;
                    println!("{}: replay failed: {e}", item.id);
                }
            }
        }
    }
    if bad > 0 {
        return Err(Failure::User(anyhow!("{bad} transcript check(s) failed")));
    }
    Ok(())
}
