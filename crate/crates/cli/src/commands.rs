use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use log::info;
use motion_manifold::benchstats::{
    convergence_curve, correlate, model_prompt_matrix, run_study, sensitivity_sweep, win_ratio,
    RaterTable,
};
use motion_manifold::encoder::checkpoint::{self, Checkpoint};
use motion_manifold::encoder::{attention_report, encode_window};
use motion_manifold::features::{FeatureSequence, NormStats, PreparedSequence};
use motion_manifold::metrics::{
    centroids_from_windows, embed_video, score_video, ClassCentroids, VideoScore,
};
use motion_manifold::report::{write_csv, write_json, LineChart, Series};
use motion_manifold::synthdata::{
    assign_splits, generate_dataset, load_indexed, manifest_path, read_features, write_features,
    write_index, IndexEntry, Split, INDEX_FILE,
};
use motion_manifold::training::{active_sample, train};
use motion_manifold::windows::{make_windows, DistortionKind, TemporalWindow};
use motion_manifold::Error;
use serde::{Deserialize, Serialize};

use crate::config::{resolve, RunConfig};
use crate::{Cli, Command, FeatureInput, OUTPUT_ROOT_ENV};

const RUN_FILE: &str = "run.json";

#[derive(Serialize)]
struct RunRecord<'a> {
    tool_version: &'static str,
    subcommand: &'a str,
    argv: &'a [String],
    seed: Option<u64>,
    started_unix: u64,
    config: &'a RunConfig,
}

struct Ctx<'a> {
    cfg: RunConfig,
    root: PathBuf,
    argv: &'a [String],
    subcommand: &'static str,
    started: u64,
}

impl Ctx<'_> {
    fn default_path(&self, name: &str) -> PathBuf {
        self.root.join(self.subcommand).join(name)
    }

    fn write_run(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let record = RunRecord {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            argv: self.argv,
            seed: self.cfg.seed,
            started_unix: self.started,
            config: &self.cfg,
        };
        write_json(&dir.join(RUN_FILE), &record)?;
        Ok(())
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(())
}

fn formats(spec: &str, allowed: &[&str]) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for f in spec.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        if !allowed.contains(&f) {
            return Err(Error::Config(format!(
                "unsupported output format `{f}` (expected one of: {})",
                allowed.join(", ")
            ))
            .into());
        }
        out.insert(f.to_string());
    }
    if out.is_empty() {
        return Err(Error::Config("no output format selected".into()).into());
    }
    Ok(out)
}

pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    let g = &cli.global;
    let cfg = resolve(g.config.as_deref(), &g.overrides, g.seed)?;
    let root = g
        .output_root
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let subcommand = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Train(_) => "train",
        Command::Embed(_) => "embed",
        Command::Score(_) => "score",
        Command::Centroids(_) => "centroids",
        Command::Stats(_) => "stats",
        Command::Sweep(_) => "sweep",
        Command::AttentionReport(_) => "attention-report",
        Command::ActiveSample(_) => "active-sample",
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let ctx = Ctx {
        cfg,
        root,
        argv,
        subcommand,
        started,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Embed(a) => embed(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Centroids(a) => centroids(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::AttentionReport(a) => attention(&ctx, a),
        Command::ActiveSample(a) => active(&ctx, a),
    }
}

// ---------------------------------------------------------------------------
// inputs

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!("unknown split `{other}` (train, val, test)")).into()),
    }
}

/// Sequences with their split (`None` when read from a bare manifest directory).
fn load_features(input: &FeatureInput) -> Result<Vec<(FeatureSequence, Option<Split>)>> {
    let path = &input.features;
    let index = if path.is_dir() && path.join(INDEX_FILE).is_file() {
        Some(path.join(INDEX_FILE))
    } else if path.is_file() {
        Some(path.clone())
    } else {
        None
    };
    let all: Vec<(FeatureSequence, Option<Split>)> = match index {
        Some(idx) => load_indexed(&idx)?.into_iter().map(|(s, sp)| (s, Some(sp))).collect(),
        None => {
            let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
            let mut manifests: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".manifest.json"))
                .collect();
            manifests.sort();
            manifests
                .iter()
                .map(|m| read_features(m).map(|s| (s, None)))
                .collect::<motion_manifold::Result<_>>()?
        }
    };
    let wanted = input.split.as_deref().map(parse_split).transpose()?;
    let out: Vec<_> = all
        .into_iter()
        .filter(|(_, sp)| wanted.is_none() || *sp == wanted)
        .collect();
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("no feature sequences found in {}", path.display())).into());
    }
    Ok(out)
}

fn prepare(seqs: &[FeatureSequence], norm: &Arc<NormStats>) -> Result<Vec<PreparedSequence>> {
    Ok(seqs
        .iter()
        .map(|s| PreparedSequence::new(s, Arc::clone(norm)))
        .collect::<motion_manifold::Result<_>>()?)
}

fn windows_of(prepared: &[PreparedSequence], window_len: usize, overlap: usize) -> Result<Vec<TemporalWindow>> {
    let mut out = Vec::new();
    for p in prepared {
        out.extend(make_windows(p, window_len, overlap)?);
    }
    Ok(out)
}

struct Loaded {
    ckpt: Checkpoint,
    prepared: Vec<PreparedSequence>,
}

impl Loaded {
    fn new(ctx: &Ctx, checkpoint_dir: &Path, input: &FeatureInput) -> Result<Self> {
        let ckpt = checkpoint::load(checkpoint_dir)?;
        let norm = Arc::new(ckpt.norm.clone());
        let seqs: Vec<FeatureSequence> = load_features(input)?.into_iter().map(|(s, _)| s).collect();
        let prepared = prepare(&seqs, &norm)?;
        info!("loaded {} sequences; overlap {}", prepared.len(), ctx.cfg.data.overlap);
        Ok(Self { ckpt, prepared })
    }

    fn windows(&self, ctx: &Ctx) -> Result<Vec<TemporalWindow>> {
        windows_of(&self.prepared, self.ckpt.config.window_len, ctx.cfg.data.overlap)
    }
}

// ---------------------------------------------------------------------------
// subcommands

fn synth(ctx: &Ctx, a: crate::SynthArgs) -> Result<()> {
    let mut s = ctx.cfg.synth.clone();
    s.classes = a.classes.unwrap_or(s.classes);
    s.videos_per_class = a.videos_per_class.unwrap_or(s.videos_per_class);
    s.frames = a.frames.unwrap_or(s.frames);
    s.fps = a.fps.unwrap_or(s.fps);
    let out = a.out.unwrap_or_else(|| ctx.root.join("synth"));
    let seqs = generate_dataset(s.classes, s.videos_per_class, s.frames, s.fps, ctx.cfg.synth_seed())?;
    let splits = assign_splits(&seqs, ctx.cfg.data.val_fraction, ctx.cfg.data.test_fraction)?;
    let mut entries = Vec::with_capacity(seqs.len());
    for (seq, split) in seqs.iter().zip(&splits) {
        write_features(seq, &out)?;
        let rel = manifest_path(Path::new(""), &seq.video_id);
        entries.push(IndexEntry {
            path: rel.to_string_lossy().into_owned(),
            label: seq.label.clone().unwrap_or_default(),
            split: *split,
        });
    }
    write_index(&out.join(INDEX_FILE), &entries)?;
    ctx.write_run(&out)?;
    println!("wrote {} sequences to {}", seqs.len(), out.display());
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: crate::TrainArgs) -> Result<()> {
    let all = load_features(&a.input)?;
    let (mut tr, mut val) = (Vec::new(), Vec::new());
    for (s, split) in all {
        match split {
            None | Some(Split::Train) => tr.push(s),
            Some(Split::Val) => val.push(s),
            Some(Split::Test) => {}
        }
    }
    if tr.is_empty() {
        bail!(Error::InvalidInput("no training sequences".into()));
    }
    let norm = Arc::new(NormStats::fit(&tr, ctx.cfg.data.std_floor)?);
    let enc = &ctx.cfg.encoder;
    let overlap = ctx.cfg.data.overlap;
    let train_windows = windows_of(&prepare(&tr, &norm)?, enc.window_len, overlap)?;
    let val_windows = windows_of(&prepare(&val, &norm)?, enc.window_len, overlap)?;
    info!("{} training windows, {} validation windows", train_windows.len(), val_windows.len());
    let model = train(&train_windows, &val_windows, enc, &ctx.cfg.training)?;

    let dir = a.checkpoint.unwrap_or_else(|| ctx.default_path("checkpoint"));
    checkpoint::save(&dir, &model.encoder, &model.params, &norm)?;
    model.history.write_csv(&dir.join("history.csv"))?;
    // centroids from the stored (f32) weights, so they match what later commands load
    let saved = checkpoint::load(&dir)?;
    let saved_norm = Arc::new(saved.norm.clone());
    let embeddings = windows_of(&prepare(&tr, &saved_norm)?, enc.window_len, overlap)?
        .iter()
        .map(|w| encode_window(w, &saved.params, &saved.config))
        .collect::<motion_manifold::Result<Vec<_>>>()?;
    centroids_from_windows(&embeddings)?.save(&dir.join("centroids.json"))?;
    ctx.write_run(&dir)?;
    println!(
        "trained {} epochs; final loss {:.4}; checkpoint in {}",
        model.history.epochs(),
        model.history.total.last().copied().unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    format_version: u32,
    dim: usize,
    videos: Vec<VideoEmbeddingRecord>,
}

#[derive(Serialize, Deserialize)]
struct VideoEmbeddingRecord {
    video_id: String,
    label: Option<String>,
    mean_cls: Vec<f64>,
    windows: Vec<WindowRecord>,
}

#[derive(Serialize, Deserialize)]
struct WindowRecord {
    start_frame: usize,
    z_cls: Vec<f64>,
}

fn embed(ctx: &Ctx, a: crate::EmbedArgs) -> Result<()> {
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let cfg = &l.ckpt.config;
    let videos = l
        .prepared
        .iter()
        .map(|p| {
            let v = embed_video(p, &l.ckpt.params, cfg, cfg.window_len, ctx.cfg.data.overlap)?;
            Ok(VideoEmbeddingRecord {
                video_id: v.video_id,
                label: v.label,
                mean_cls: v.mean_cls.to_vec(),
                windows: v
                    .windows
                    .iter()
                    .map(|w| WindowRecord {
                        start_frame: w.start_frame,
                        z_cls: w.z_cls.to_vec(),
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = a.out.unwrap_or_else(|| ctx.default_path(""));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(
        &out.join("embeddings.json"),
        &EmbeddingFile {
            format_version: 1,
            dim: cfg.d_model,
            videos,
        },
    )?;
    ctx.write_run(&out)?;
    Ok(())
}

fn score(ctx: &Ctx, a: crate::ScoreArgs) -> Result<()> {
    let fmts = formats(&a.format, &["csv", "json"])?;
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let cents = ClassCentroids::load(&a.centroids)?;
    let cfg = &l.ckpt.config;
    let scores: Vec<VideoScore> = l
        .prepared
        .iter()
        .map(|p| {
            let v = embed_video(p, &l.ckpt.params, cfg, cfg.window_len, ctx.cfg.data.overlap)?;
            Ok(score_video(&v, &cents)?)
        })
        .collect::<Result<_>>()?;
    let out = a.out.unwrap_or_else(|| ctx.default_path("scores.csv"));
    ensure_parent(&out)?;
    if fmts.contains("csv") {
        write_csv(&out, &scores)?;
    }
    if fmts.contains("json") {
        write_json(&out.with_extension("json"), &scores)?;
    }
    ctx.write_run(&parent_dir(&out))?;
    println!("scored {} videos", scores.len());
    Ok(())
}

fn centroids(ctx: &Ctx, a: crate::CentroidArgs) -> Result<()> {
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let embeddings = l
        .windows(ctx)?
        .iter()
        .map(|w| encode_window(w, &l.ckpt.params, &l.ckpt.config))
        .collect::<motion_manifold::Result<Vec<_>>>()?;
    let c = centroids_from_windows(&embeddings)?;
    let out = a.out.unwrap_or_else(|| ctx.default_path("centroids.json"));
    ensure_parent(&out)?;
    c.save(&out)?;
    ctx.write_run(&parent_dir(&out))?;
    println!("{} class centroids from {} windows", c.centroids.len(), embeddings.len());
    Ok(())
}

#[derive(Serialize)]
struct MosRow<'a> {
    video_id: &'a str,
    mos: f64,
    z: f64,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    video_id: &'a str,
    raters: usize,
    std: f64,
}

#[derive(Serialize)]
struct WinRow<'a> {
    score: &'a str,
    model: &'a str,
    win_ratio: Option<f64>,
}

#[derive(Serialize)]
struct Correlation {
    score: &'static str,
    videos: usize,
    spearman: f64,
}

fn stats(ctx: &Ctx, a: crate::StatsArgs) -> Result<()> {
    let fmts = formats(&a.format, &["csv", "json", "svg"])?;
    let mut table = RaterTable::from_csv(&a.ratings, a.axis.as_deref())?;
    if let Some(m) = &a.metadata {
        table.load_metadata(m)?;
    }
    let result = run_study(&table, &ctx.cfg.study);
    let curves = convergence_curve(&table, &a.convergence)?;
    let scores = a.scores.as_deref().map(read_scores).transpose()?;

    let mut correlations = Vec::new();
    let mut wins = Vec::new();
    let mos_wins = win_ratio(&model_prompt_matrix(&result.mos.mos, &table.metadata));
    for (m, r) in &mos_wins {
        wins.push(("mos", m.clone(), *r));
    }
    if let Some(scores) = &scores {
        // lower scores are better, so the metric "wins" with the smaller value
        for (name, pick) in [("s_cons", 0usize), ("s_temp", 1)] {
            let values: BTreeMap<String, f64> = scores
                .iter()
                .map(|s| (s.video_id.clone(), if pick == 0 { s.s_cons } else { s.s_temp }))
                .collect();
            let (n, rho) = correlate(&values, &result.mos.mos)?;
            correlations.push(Correlation {
                score: name,
                videos: n,
                spearman: rho,
            });
            let negated = values.iter().map(|(k, v)| (k.clone(), -v)).collect();
            for (m, r) in win_ratio(&model_prompt_matrix(&negated, &table.metadata)) {
                wins.push((name, m, r));
            }
        }
    }

    let out = a.out.unwrap_or_else(|| ctx.default_path(""));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    if fmts.contains("json") {
        write_json(&out.join("study.json"), &result)?;
        write_json(&out.join("convergence.json"), &curves)?;
        if !correlations.is_empty() {
            write_json(&out.join("correlation.json"), &correlations)?;
        }
    }
    if fmts.contains("csv") {
        let mos: Vec<MosRow> = result
            .mos
            .mos
            .iter()
            .map(|(v, m)| MosRow {
                video_id: v,
                mos: *m,
                z: result.mos.z[v],
            })
            .collect();
        write_csv(&out.join("mos.csv"), &mos)?;
        write_csv(&out.join("bt500.csv"), &result.bt500)?;
        let curve_rows: Vec<CurveRow> = curves
            .iter()
            .flat_map(|(v, c)| c.iter().enumerate().map(move |(i, s)| CurveRow { video_id: v, raters: i + 2, std: *s }))
            .collect();
        if !curve_rows.is_empty() {
            write_csv(&out.join("convergence.csv"), &curve_rows)?;
        }
        if !correlations.is_empty() {
            write_csv(&out.join("correlation.csv"), &correlations)?;
        }
        let win_rows: Vec<WinRow> = wins
            .iter()
            .map(|(s, m, r)| WinRow {
                score: s,
                model: m,
                win_ratio: *r,
            })
            .collect();
        if !win_rows.is_empty() {
            write_csv(&out.join("win_ratio.csv"), &win_rows)?;
        }
    }
    if fmts.contains("svg") && !curves.is_empty() {
        LineChart {
            title: "Rater convergence".into(),
            x_label: "number of raters".into(),
            y_label: "std of ratings".into(),
            series: curves
                .iter()
                .map(|(v, c)| Series {
                    name: v.clone(),
                    points: c.iter().enumerate().map(|(i, s)| ((i + 2) as f64, *s)).collect(),
                })
                .collect(),
        }
        .write(&out.join("convergence.svg"))?;
    }
    ctx.write_run(&out)?;
    let [r1, r2, r3] = result.rejected_per_stage();
    println!(
        "raters: {} total; rejected {r1} (repeat), {r2} (BT.500), {r3} (inter-rater); {} retained",
        result.raters.len(),
        result.after_interrater.len()
    );
    Ok(())
}

fn read_scores(path: &Path) -> Result<Vec<VideoScore>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    })?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<VideoScore>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(rows)
}

#[derive(Serialize)]
struct SweepCsvRow {
    kind: String,
    severity: f64,
    mean_s_cons: f64,
    mean_s_temp: f64,
    windows: usize,
}

fn sweep(ctx: &Ctx, a: crate::SweepArgs) -> Result<()> {
    let fmts = formats(&a.format, &["csv", "json", "svg"])?;
    let kinds = a
        .kinds
        .iter()
        .map(|k| k.parse::<DistortionKind>())
        .collect::<motion_manifold::Result<Vec<_>>>()?;
    if kinds.is_empty() || a.severities.is_empty() {
        bail!(Error::Config("sweep needs at least one kind and one severity".into()));
    }
    if let Some(s) = a.severities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        bail!(Error::Config(format!("severity {s} is outside [0, 1]")));
    }
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let cents = ClassCentroids::load(&a.centroids)?;
    let windows = l.windows(ctx)?;
    let seed = ctx.cfg.training.seed;
    let cfg = &l.ckpt.config;
    let baseline = sensitivity_sweep(&windows, &l.ckpt.params, cfg, &cents, &[DistortionKind::Shuffle], &[0.0], seed)?;
    let rows = sensitivity_sweep(&windows, &l.ckpt.params, cfg, &cents, &kinds, &a.severities, seed)?;

    let mut table: Vec<SweepCsvRow> = baseline
        .iter()
        .map(|b| SweepCsvRow {
            kind: "none".into(),
            severity: 0.0,
            mean_s_cons: b.mean_s_cons,
            mean_s_temp: b.mean_s_temp,
            windows: b.windows,
        })
        .collect();
    table.extend(rows.iter().map(|r| SweepCsvRow {
        kind: r.kind.to_string(),
        severity: r.severity,
        mean_s_cons: r.mean_s_cons,
        mean_s_temp: r.mean_s_temp,
        windows: r.windows,
    }));

    let out = a.out.unwrap_or_else(|| ctx.default_path(""));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    if fmts.contains("csv") {
        write_csv(&out.join("sweep.csv"), &table)?;
    }
    if fmts.contains("json") {
        write_json(&out.join("sweep.json"), &serde_json::json!({ "format_version": 1, "rows": table }))?;
    }
    if fmts.contains("svg") {
        for (metric, title) in [("s_cons", "Action consistency"), ("s_temp", "Temporal coherence")] {
            LineChart {
                title: format!("{title} vs distortion severity"),
                x_label: "severity".into(),
                y_label: format!("mean {metric}"),
                series: kinds
                    .iter()
                    .map(|k| Series {
                        name: k.to_string(),
                        points: rows
                            .iter()
                            .filter(|r| r.kind == *k)
                            .map(|r| (r.severity, if metric == "s_cons" { r.mean_s_cons } else { r.mean_s_temp }))
                            .collect(),
                    })
                    .collect(),
            }
            .write(&out.join(format!("{metric}.svg")))?;
        }
    }
    ctx.write_run(&out)?;
    println!("{} sweep rows over {} windows", table.len(), windows.len());
    Ok(())
}

#[derive(Serialize)]
struct AttentionRow<'a> {
    scope: &'a str,
    group: &'a str,
    weight: f64,
}

fn attention(ctx: &Ctx, a: crate::AttentionArgs) -> Result<()> {
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let report = attention_report(&l.windows(ctx)?, &l.ckpt.params, &l.ckpt.config)?;
    let out = a.out.unwrap_or_else(|| ctx.default_path(""));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("attention.json"), &report)?;
    let mut rows = Vec::new();
    for (g, w) in report.groups.iter().zip(&report.overall) {
        rows.push(AttentionRow {
            scope: "overall",
            group: g,
            weight: *w,
        });
    }
    for (class, weights) in &report.per_class {
        for (g, w) in report.groups.iter().zip(weights) {
            rows.push(AttentionRow {
                scope: class,
                group: g,
                weight: *w,
            });
        }
    }
    write_csv(&out.join("attention.csv"), &rows)?;
    ctx.write_run(&out)?;
    for (g, w) in report.groups.iter().zip(&report.overall) {
        println!("{g:>14}: {w:.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleRow<'a> {
    rank: usize,
    video_id: &'a str,
    start_frame: usize,
    label: &'a str,
    distance: f64,
}

fn active(ctx: &Ctx, a: crate::ActiveArgs) -> Result<()> {
    let l = Loaded::new(ctx, &a.checkpoint, &a.input)?;
    let cents = ClassCentroids::load(&a.centroids)?;
    let windows = l.windows(ctx)?;
    let picked = active_sample(&windows, &l.ckpt.params, &l.ckpt.config, &cents, a.keep_fraction)?;
    let rows: Vec<SampleRow> = picked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let w = &windows[r.index];
            SampleRow {
                rank: i + 1,
                video_id: &w.video_id,
                start_frame: w.start_frame,
                label: w.label.as_deref().unwrap_or(""),
                distance: r.distance,
            }
        })
        .collect();
    let out = a.out.unwrap_or_else(|| ctx.default_path("selected.csv"));
    ensure_parent(&out)?;
    write_csv(&out, &rows)?;
    ctx.write_run(&parent_dir(&out))?;
    println!("kept {} of {} windows", rows.len(), windows.len());
    Ok(())
}
