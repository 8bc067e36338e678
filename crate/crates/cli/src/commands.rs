use std::convert::Infallible;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use layoutforge::datagen::{
    build_cot_sft_record, build_dpo_pairs, generate_descriptions, sample_layout_batch, sft_record,
    write_dpo_jsonl, write_sft_jsonl, DescriptionQuota, SampleBatch,
};
use layoutforge::gateway::{CountingOracle, Gateway, ModelRole};
use layoutforge::layout::{
    parse_cot_record, parse_scene_file, serialize_scene_file, CotRecord, Room, SceneBody, SceneFile,
};
use layoutforge::metrics;
use layoutforge::pipeline::{
    assemble_scene, default_assets, placeholder_cot, run_alignment_loop, score_layout, AlignmentOutcome,
    AssetRecord, Pipeline,
};
use layoutforge::render::{rasterize_scene, RasterConfig};

use crate::report::{Failed, RunReport};
use crate::session::{load_config, open_gateway, pipeline_config};
use crate::{Cli, Command, Global};

pub enum Abort {
    Usage(String),
    Failed,
}

impl From<Failed> for Abort {
    fn from(_: Failed) -> Self {
        Abort::Failed
    }
}

type Step = Result<(), Failed>;

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_scene(path: &Path) -> Result<SceneFile, String> {
    parse_scene_file(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_cot(path: &Path) -> Result<CotRecord, String> {
    parse_cot_record(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_assets(path: &Path) -> Result<Vec<AssetRecord>, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_room(text: &str) -> Result<Room, Abort> {
    Room::parse_dims(text).map_err(|e| Abort::Usage(format!("--room {text}: {e}")))
}

fn parse_quotas(text: &str) -> Result<(usize, usize, usize), Abort> {
    let parts: Vec<usize> = text
        .split(':')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Abort::Usage(format!("--quotas {text}: expected coarse:medium:fine")))?;
    match parts[..] {
        [c, m, f] => Ok((c, m, f)),
        _ => Err(Abort::Usage(format!("--quotas {text}: expected coarse:medium:fine"))),
    }
}

/// Files in `dir` whose names end with `suffix`, sorted by name.
fn list_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)))
        .collect();
    files.sort();
    Ok(files)
}

/// Applies `f` to every item with at most `workers` threads; results keep
/// input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every item is processed"))
        .collect()
}

fn record_calls(report: &mut RunReport, oracle: &CountingOracle<Gateway>) {
    report.oracle_calls = oracle.counts().into_iter().map(|(r, n)| (r.name().to_string(), n)).collect();
}

pub fn run(cli: &Cli, report: &mut RunReport, report_file: &mut Option<PathBuf>) -> Result<(), Abort> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { files } => validate(files, report)?,
        Command::Render { scene, out, scale } => render(scene, out, *scale, report)?,
        Command::Metrics { scene, eps, tol } => metrics_cmd(scene, *eps, *tol, report)?,
        Command::Reward { batch_dir } => reward(batch_dir, report)?,
        Command::Pairs {
            batch_dir,
            threshold,
            cap,
            out,
        } => pairs(batch_dir, *threshold, *cap, out, report)?,
        Command::Score {
            scene,
            description,
            cot,
        } => with_oracle(g, report, |p, r| score(p, scene, description, cot.as_deref(), r))?,
        Command::SftBuild { gt_dir, out } => {
            let files = report.stage("load", |_| list_files(gt_dir, ".scene"))?;
            with_oracle(g, report, |p, r| sft_build(p, &files, out, g.parallel, r))?
        }
        Command::Describe {
            scene_types,
            quotas,
            out,
        } => {
            let (coarse, medium, fine) = parse_quotas(quotas)?;
            let quota = DescriptionQuota {
                num_scene_types: *scene_types,
                coarse,
                medium,
                fine,
            };
            with_oracle(g, report, |p, r| describe(p, &quota, out.as_deref(), r))?
        }
        Command::Sample {
            prompt,
            room,
            samples,
            id,
            out_dir,
        } => {
            let room = parse_room(room)?;
            let out = out_dir.join(format!("{id}.batch.json"));
            with_oracle(g, report, |p, r| sample(p, prompt, &room, *samples, id, &out, g.parallel, r))?
        }
        Command::Generate {
            prompt,
            room,
            max_iters,
            assets,
            id,
            out_dir,
        } => {
            let room = parse_room(room)?;
            *report_file = Some(out_dir.join(format!("{id}.report.json")));
            report.output("report", format!("{id}.report.json"));
            let assets = match assets {
                Some(path) => Some(report.stage("assets", |_| load_assets(path))?),
                None => None,
            };
            with_oracle(g, report, |p, r| {
                generate(p, prompt, &room, *max_iters, assets.as_deref(), id, out_dir, r)
            })?
        }
        Command::Align {
            scene,
            max_iters,
            description,
            cot,
            assets,
            id,
            out_dir,
        } => {
            let file = report.stage("parse", |_| load_scene(scene))?;
            let cot = match cot {
                Some(path) => report.stage("cot", |_| load_cot(path))?,
                None => report.stage("cot", |_| placeholder_cot(description, &file.bev()))?,
            };
            let assets = match assets {
                Some(path) => Some(report.stage("assets", |_| load_assets(path))?),
                None => None,
            };
            with_oracle(g, report, |p, r| {
                align(p, &file, description, cot, *max_iters, assets.as_deref(), id, out_dir, r)
            })?
        }
    }
    Ok(())
}

/// Opens the gateway, runs `f` against it and records per-role call counts
/// whether or not `f` succeeded.
fn with_oracle(
    global: &Global,
    report: &mut RunReport,
    f: impl FnOnce(&Pipeline<'_>, &mut RunReport) -> Step,
) -> Result<(), Abort> {
    let config = load_config(global, report)?;
    let gateway = open_gateway(global, &config, report)?;
    let oracle = CountingOracle::new(gateway);
    let pipeline = Pipeline::new(&oracle, pipeline_config(&config));
    let result = f(&pipeline, report);
    record_calls(report, &oracle);
    Ok(result?)
}

fn validate(files: &[PathBuf], report: &mut RunReport) -> Step {
    if files.is_empty() {
        return Err(report.fail("parse", "no files given"));
    }
    let mut failures = Vec::new();
    for path in files {
        match load_scene(path) {
            Ok(file) => {
                let kind = match &file.body {
                    SceneBody::Bev(_) => "bev",
                    SceneBody::Lifted(scene) => {
                        for (i, obj) in scene.objects.iter().enumerate() {
                            if let Err(e) = obj.check_vertical_bounds(&file.room) {
                                report.warn(format!("{}: object {i}: {e}", path.display()));
                            }
                        }
                        "lifted"
                    }
                };
                report.output(
                    &path.display().to_string(),
                    serde_json::json!({"kind": kind, "objects": file.bev().len()}),
                );
            }
            Err(e) => failures.push(e),
        }
    }
    report.stages.push(crate::report::StageRecord {
        name: "parse".into(),
        seconds: None,
    });
    if failures.is_empty() {
        Ok(())
    } else {
        Err(report.fail("parse", failures.join("; ")))
    }
}

fn render(scene: &Path, out: &Path, scale: u32, report: &mut RunReport) -> Step {
    let file = report.stage("parse", |_| load_scene(scene))?;
    let cfg = RasterConfig {
        scale,
        ..RasterConfig::default()
    };
    let png = report.stage("render", |_| rasterize_scene(&file.scene3d(), &cfg))?;
    report.stage("write", |_| write(out, &png))?;
    report.output("png", out.display().to_string());
    Ok(())
}

fn metrics_cmd(scene: &Path, eps: f64, tol: f64, report: &mut RunReport) -> Step {
    let file = report.stage("parse", |_| load_scene(scene))?;
    let m = report.stage("metrics", |_| metrics::evaluate(&file.scene3d(), eps, tol))?;
    report.output("object_count", m.object_count);
    report.output("out_of_bound_rate", m.out_of_bound_rate);
    report.output("collision_rate", m.collision_rate);
    report.output("offenders_oob", &m.offenders_oob);
    report.output("offenders_collision", &m.offenders_collision);
    report.output("epsilon", m.epsilon);
    report.output("tolerance", m.tolerance);
    Ok(())
}

fn load_batches(dir: &Path, report: &mut RunReport) -> Result<Vec<SampleBatch>, Failed> {
    report.stage("load", |_| {
        let files = list_files(dir, ".batch.json")?;
        if files.is_empty() {
            return Err(format!("no *.batch.json files in {}", dir.display()));
        }
        files
            .iter()
            .map(|p| SampleBatch::load(p).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()
    })
}

fn reward(dir: &Path, report: &mut RunReport) -> Step {
    let batches = load_batches(dir, report)?;
    for batch in &batches {
        let r = report.stage("reward", |_| batch.reward_report())?;
        report.output(
            &batch.prompt_id,
            serde_json::json!({
                "samples": batch.samples.len(),
                "failures": batch.failures.len(),
                "entropies": r.entropies,
                "weights": r.weights,
                "rewards": r.rewards,
            }),
        );
    }
    Ok(())
}

fn pairs(dir: &Path, threshold: f64, cap: Option<usize>, out: &Path, report: &mut RunReport) -> Step {
    let batches = load_batches(dir, report)?;
    let mut all = Vec::new();
    for batch in &batches {
        let p = build_dpo_pairs(batch, threshold, cap);
        report.output(&format!("pairs.{}", batch.prompt_id), p.len());
        all.extend(p);
    }
    report.stage("write", |_| write(out, write_dpo_jsonl(&all)))?;
    report.output("total", all.len());
    report.output("jsonl", out.display().to_string());
    Ok(())
}

fn score(
    pipeline: &Pipeline<'_>,
    scene: &Path,
    description: &str,
    cot: Option<&Path>,
    report: &mut RunReport,
) -> Step {
    let file = report.stage("parse", |_| load_scene(scene))?;
    let layout = file.bev();
    let cot = match cot {
        Some(path) => report.stage("cot", |_| load_cot(path))?,
        None => report.stage("cot", |_| placeholder_cot(description, &layout))?,
    };
    let (verdicts, ratios) =
        report.stage("evaluate", |_| score_layout(pipeline, description, &layout, &file.room, &cot))?;
    report.output("verdicts", &verdicts);
    report.output("ratios", ratios);
    Ok(())
}

fn sft_build(pipeline: &Pipeline<'_>, files: &[PathBuf], out: &Path, parallel: usize, report: &mut RunReport) -> Step {
    let decode = pipeline.config().decode(ModelRole::Descriptor);
    let results = report.stage("annotate", |_| {
        Ok::<_, Infallible>(parallel_map(files, parallel, |path| {
            let file = load_scene(path)?;
            let (_, cot) = build_cot_sft_record(&file.bev(), &file.room, pipeline.oracle(), decode)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            sft_record(&cot, &file.room).map_err(|e| format!("{}: {e}", path.display()))
        }))
    })?;
    let mut records = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => report.warn(format!("rejected {e}")),
        }
    }
    if records.is_empty() {
        return Err(report.fail("annotate", "no ground-truth layout produced a usable record"));
    }
    report.stage("write", |_| write(out, write_sft_jsonl(&records)))?;
    report.output("records", records.len());
    report.output("rejected", files.len() - records.len());
    report.output("jsonl", out.display().to_string());
    Ok(())
}

fn describe(pipeline: &Pipeline<'_>, quota: &DescriptionQuota, out: Option<&Path>, report: &mut RunReport) -> Step {
    let decode = pipeline.config().decode(ModelRole::Descriptor);
    let records = report.stage("describe", |_| generate_descriptions(quota, pipeline.oracle(), decode))?;
    match out {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&records).expect("records serialize");
            text.push('\n');
            report.stage("write", |_| write(path, text))?;
            report.output("json", path.display().to_string());
            report.output("count", records.len());
        }
        None => report.output("descriptions", &records),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sample(
    pipeline: &Pipeline<'_>,
    prompt: &str,
    room: &Room,
    samples: usize,
    id: &str,
    out: &Path,
    parallel: usize,
    report: &mut RunReport,
) -> Step {
    let seed = pipeline.config().decode(ModelRole::BevGenerator).seed;
    let batch = report.stage("sample", |_| sample_layout_batch(pipeline, id, prompt, room, samples, seed, parallel))?;
    for f in &batch.failures {
        report.warn(format!("sample {} (seed {}) failed: {}", f.index, f.seed, f.error));
    }
    report.stage("write", |_| write(out, batch.to_json()))?;
    report.output("samples", batch.samples.len());
    report.output("failures", batch.failures.len());
    report.output("batch", out.display().to_string());
    Ok(())
}

fn note_alignment(outcome: &AlignmentOutcome, report: &mut RunReport) {
    for w in &outcome.warnings {
        report.warn(w.clone());
    }
    if let Some(e) = &outcome.aborted {
        report.warn(format!("alignment stopped early: {e}"));
    }
    report.output("evaluations", outcome.evaluations);
    report.output("updates", outcome.updates());
}

/// Writes `<id>.scene`, `<id>.manifest.json` and `<id>.bev.png` into `dir`.
fn write_scene_outputs(
    pipeline: &Pipeline<'_>,
    outcome: &AlignmentOutcome,
    assets: Option<&[AssetRecord]>,
    id: &str,
    dir: &Path,
    report: &mut RunReport,
) -> Step {
    let scene = &outcome.scene;
    let assets = assets.map(<[_]>::to_vec).unwrap_or_else(|| default_assets(scene));
    let manifest = report.stage("assemble", |_| assemble_scene(scene, &assets))?;
    let png = report.stage("render", |_| pipeline.scene_image(scene))?;
    let names = [
        ("scene", format!("{id}.scene")),
        ("manifest", format!("{id}.manifest.json")),
        ("bev_png", format!("{id}.bev.png")),
    ];
    report.stage("write", |_| -> Result<(), String> {
        let text = serialize_scene_file(&SceneFile {
            room: scene.room,
            body: SceneBody::Lifted(scene.clone()),
        })
        .map_err(|e| e.to_string())?;
        write(&dir.join(&names[0].1), text)?;
        write(&dir.join(&names[1].1), manifest.to_json())?;
        write(&dir.join(&names[2].1), &png)
    })?;
    for (key, name) in names {
        report.output(key, name);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    pipeline: &Pipeline<'_>,
    prompt: &str,
    room: &Room,
    max_iters: usize,
    assets: Option<&[AssetRecord]>,
    id: &str,
    dir: &Path,
    report: &mut RunReport,
) -> Step {
    let generation = report.stage("generate_bev", |_| pipeline.generate_bev(prompt, room))?;
    for f in &generation.findings {
        report.warn(format!("chain-of-thought consistency: {f:?}"));
    }
    let initial = report.stage("lift_to_3d", |_| pipeline.lift_to_3d(prompt, &generation.layout, room))?;
    let outcome = report.stage("align", |_| {
        Ok::<_, Infallible>(run_alignment_loop(
            pipeline,
            prompt,
            initial,
            generation.cot.clone(),
            assets.unwrap_or_default(),
            max_iters,
        ))
    })?;
    note_alignment(&outcome, report);
    write_scene_outputs(pipeline, &outcome, assets, id, dir, report)
}

#[allow(clippy::too_many_arguments)]
fn align(
    pipeline: &Pipeline<'_>,
    file: &SceneFile,
    description: &str,
    cot: CotRecord,
    max_iters: usize,
    assets: Option<&[AssetRecord]>,
    id: &str,
    dir: &Path,
    report: &mut RunReport,
) -> Step {
    let outcome = report.stage("align", |_| {
        Ok::<_, Infallible>(run_alignment_loop(
            pipeline,
            description,
            file.scene3d(),
            cot,
            assets.unwrap_or_default(),
            max_iters,
        ))
    })?;
    note_alignment(&outcome, report);
    write_scene_outputs(pipeline, &outcome, assets, id, dir, report)
}
