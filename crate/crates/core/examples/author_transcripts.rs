//! Turns hand-written reply scripts into replay transcripts.
//!
//! ```text
//! cargo run -p triad-core --example author_transcripts -- \
//!     fixtures/toy/config.toml fixtures/toy/benchmark.json \
//!     fixtures/toy/scripts.json fixtures/toy/transcripts
//! ```
//!
//! Each item runs through the real pipeline against a scripted backend whose
//! calls are recorded to `<out>/<id>.jsonl`. Scripts must be consumed exactly.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use triad_core::llm::{RecordingBackend, Script};
use triad_core::{load_benchmark, Deps, Gateway, Pipeline, PipelineConfig, ScriptedBackend};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [config, benchmark, scripts, out] = args.as_slice() else {
        bail!("usage: author_transcripts <config.toml> <benchmark.json> <scripts.json> <out dir>");
    };
    let cfg = PipelineConfig::load(config)?;
    let deps = Deps::load(&cfg)?;
    let items = load_benchmark(benchmark)?;
    let scripts: BTreeMap<String, Script> =
        serde_json::from_str(&std::fs::read_to_string(scripts)?).context("parsing scripts")?;
    let out = PathBuf::from(out);
    std::fs::create_dir_all(&out)?;

    for item in &items {
        let script = scripts.get(&item.id).with_context(|| format!("no script for {}", item.id))?;
        let scripted = Arc::new(ScriptedBackend::new(script.clone()));
        let recorder = RecordingBackend::create(scripted.clone(), out.join(format!("{}.jsonl", item.id)))?;
        let gateway = Gateway::new(Arc::new(recorder), cfg.backend.model.clone(), cfg.backend.max_tokens);
        let result = Pipeline::from_config(&deps, &cfg).run(&item.question, &gateway)?;
        let left: BTreeMap<String, usize> = scripted.remaining().into_iter().filter(|(_, n)| *n > 0).collect();
        if !left.is_empty() {
            bail!("{}: unused replies {left:?}", item.id);
        }
        println!(
            "{}: attempts={} calls={} answer={} ({:?})",
            item.id,
            result.attempts.len(),
            result.calls.len(),
            result.answer.to_string().replace('\n', " | "),
            result.answer.provenance
        );
        if std::env::var_os("TRIAD_AUTHOR_TRACE").is_some() {
            eprintln!("{}", serde_json::to_string_pretty(&result)?);
        }
    }
    Ok(())
}
