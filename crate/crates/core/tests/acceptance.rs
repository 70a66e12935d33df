//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The three training runs of the desk configuration dominate the runtime
//! (about 5 to 7 minutes each on one core).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use motion_manifold::benchstats::{
    bt500_reject, bt500_stats, convergence_curve, mos_zscore, sensitivity_sweep, spearman, win_ratio, RaterTable,
    SweepRow,
};
use motion_manifold::encoder::{
    encode_window, standard_groups, EncoderConfig, EncoderParams, FeatureGroup, WindowEmbedding,
};
use motion_manifold::features::{fit_and_apply_normalization, NormStats, DEFAULT_STD_FLOOR, FRAME_DIM};
use motion_manifold::metrics::{
    centroids_from_windows, mean_cls, nearest_centroid_accuracy, s_cons, s_temp_window, window_nmi,
    ClassCentroids, VideoEmbedding,
};
use motion_manifold::synthdata::{assign_splits, generate_dataset, Split};
use motion_manifold::training::{label_indices, objective, train, TrainConfig, TrainedModel, TrainingBatch};
use motion_manifold::windows::{make_windows, window_starts, DistortionKind, TemporalWindow};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Runner {
    total: usize,
    failures: usize,
}

impl Runner {
    fn check(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let o = f();
        let elapsed = t.elapsed();
        let in_time = elapsed <= budget;
        let pass = o.pass && in_time;
        self.total += 1;
        if !pass {
            self.failures += 1;
        }
        let timing = if in_time {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s, over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("{} {name}: {} ({timing})", if pass { "PASS" } else { "FAIL" }, o.detail);
    }
}

// ---------------------------------------------------------------------------
// statistics oracles

/// 1-based ranks by counting; inputs are tie-free.
fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| 1.0 + x.iter().filter(|b| *b < a).count() as f64).collect()
}

fn rank_formula(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let d2: f64 = brute_ranks(x).iter().zip(brute_ranks(y)).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn pop_mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt())
}

/// Rejected raters by direct per-video threshold counting.
fn bt500_oracle(scores: &BTreeMap<String, BTreeMap<String, f64>>) -> BTreeSet<String> {
    let videos: BTreeSet<&String> = scores.values().flat_map(|m| m.keys()).collect();
    let mut band = BTreeMap::new();
    for v in videos {
        let s: Vec<f64> = scores.values().filter_map(|m| m.get(v).copied()).collect();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let m2 = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = s.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let kurt = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
        let sd = m2.sqrt();
        let th = if (2.0..=4.0).contains(&kurt) { 2.0 * sd } else { 20f64.sqrt() * sd };
        band.insert(v.clone(), (mean - th, mean + th));
    }
    let mut rejected = BTreeSet::new();
    for (r, m) in scores {
        let p = m.iter().filter(|(v, s)| **s > band[*v].1).count();
        let q = m.iter().filter(|(v, s)| **s < band[*v].0).count();
        let n = m.len();
        let r1 = (p + q) as f64 / n as f64;
        let r2 = if p + q == 0 { 0.0 } else { (p as f64 - q as f64).abs() / (p + q) as f64 };
        if (r1 > 0.05 && r2 < 0.3) || n < 10 {
            rejected.insert(r.clone());
        }
    }
    rejected
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 3 + i % 40;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let got = spearman(&x, &y).unwrap();
        worst = worst.max((got - rank_formula(&x, &y)).abs());
    }
    let spearman_ok = worst < 1e-12;

    // 12 raters × 12 videos: 11 scatter normally around a per-video level,
    // r11 lands about 3σ away, alternating direction
    let mut table = RaterTable::default();
    for v in 0..12 {
        let level = 3.0 + 0.4 * v as f64;
        for r in 0..12 {
            let s = if r == 11 {
                level + if v % 2 == 0 { 1.6 } else { -1.6 }
            } else {
                level + 0.5 * rng.sample::<f64, _>(StandardNormal)
            };
            table.insert(&format!("r{r:02}"), &format!("v{v:02}"), s.clamp(0.0, 10.0)).unwrap();
        }
    }
    // a 13th rater who saw only 9 videos
    for v in 0..9 {
        table.insert("r12", &format!("v{v:02}"), 3.0 + 0.4 * v as f64).unwrap();
    }
    let oracle_rejected = bt500_oracle(&table.scores);
    let retained = bt500_reject(&table);
    let expected_retained: BTreeSet<String> = table.raters().difference(&oracle_rejected).cloned().collect();
    let bt_ok = retained == expected_retained
        && oracle_rejected.contains("r11")
        && oracle_rejected.contains("r12")
        && bt500_stats(&table).iter().all(|s| s.rejected == oracle_rejected.contains(&s.rater));

    // win ratio: three models, four prompts, one missing entry and one tie
    let mut sc: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (m, p, s) in [
        ("a", "p0", 5.0), ("a", "p1", 7.0), ("a", "p2", 3.0), ("a", "p3", 6.0),
        ("b", "p0", 4.0), ("b", "p1", 7.0), ("b", "p2", 8.0),
        ("c", "p0", 9.0), ("c", "p1", 1.0), ("c", "p2", 2.0), ("c", "p3", 6.5),
    ] {
        sc.entry(m.into()).or_default().insert(p.into(), s);
    }
    let mut wins: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (ma, pa) in &sc {
        for (mb, pb) in &sc {
            if ma == mb {
                continue;
            }
            for (p, s) in pa {
                if let Some(t) = pb.get(p) {
                    let e = wins.entry(ma.as_str()).or_default();
                    e.1 += 1.0;
                    e.0 += if s > t { 1.0 } else if s == t { 0.5 } else { 0.0 };
                }
            }
        }
    }
    let wr = win_ratio(&sc);
    let wr_ok = wr.len() == 3 && wins.iter().all(|(m, (w, g))| wr[*m] == Some(w / g));

    // MOS and z over a retained subset
    let mut mt = RaterTable::default();
    for (r, v, s) in [("x", "v1", 7.0), ("y", "v1", 9.0), ("z", "v1", 1.0), ("x", "v2", 4.0), ("y", "v2", 5.0), ("x", "v3", 6.0), ("z", "v4", 2.0)] {
        mt.insert(r, v, s).unwrap();
    }
    let keep: BTreeSet<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let mos = mos_zscore(&mt, &keep);
    let expect = [("v1", 8.0), ("v2", 4.5), ("v3", 6.0)];
    let (mu, sd) = pop_mean_std(&expect.map(|e| e.1));
    let mos_ok = mos.mos.len() == 3
        && expect.iter().all(|(v, m)| mos.mos[*v] == *m && (mos.z[*v] - (m - mu) / sd).abs() < 1e-15)
        && mos.excluded == vec!["v4".to_string()];

    // convergence curve: population std of the first n ratings in rater-id order
    let mut ct = RaterTable::default();
    for (r, s) in [("a", 4.0), ("b", 6.0), ("c", 8.0), ("d", 6.0)] {
        ct.insert(r, "v", s).unwrap();
    }
    let curve = convergence_curve(&ct, &["v".to_string()]).unwrap();
    let expect_curve = [1.0, (8.0f64 / 3.0).sqrt(), 2f64.sqrt()];
    let conv_ok = curve["v"].len() == 3 && curve["v"].iter().zip(expect_curve).all(|(a, b)| (a - b).abs() < 1e-12);

    outcome(
        spearman_ok && bt_ok && wr_ok && mos_ok && conv_ok,
        format!(
            "spearman max |Δ| {worst:.1e}; bt500 {}; win ratio {}; mos/z {}; convergence {}",
            ok_word(bt_ok),
            ok_word(wr_ok),
            ok_word(mos_ok),
            ok_word(conv_ok)
        ),
    )
}

fn ok_word(b: bool) -> &'static str {
    if b { "ok" } else { "MISMATCH" }
}

// ---------------------------------------------------------------------------
// gradient check

fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        layers: 1,
        heads: 2,
        window_len: 4,
        kernel_size: 3,
        dilations: vec![1, 2],
        groups: vec![FeatureGroup::new("a", 0, 3), FeatureGroup::new("b", 3, 2)],
        seed: 5,
        ..EncoderConfig::default()
    }
}

fn random_window(rng: &mut ChaCha8Rng, t: usize, width: usize, video: String, label: &str) -> TemporalWindow {
    let stat = Array2::from_shape_fn((t, FRAME_DIM), |_| 0.0);
    let mut stat = stat;
    for i in 0..t {
        for j in 0..width {
            stat[[i, j]] = rng.sample(StandardNormal);
        }
    }
    TemporalWindow::from_static(stat, Arc::new(NormStats::identity()), video, 0, 0, Some(label.into()))
}

fn gradient_check() -> Outcome {
    let enc = tiny_encoder();
    let params = EncoderParams::init(&enc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let windows: Vec<_> = (0..6)
        .map(|i| random_window(&mut rng, 4, 5, format!("w{i}"), if i % 2 == 0 { "x" } else { "y" }))
        .collect();
    let labels = label_indices(&windows).unwrap().0;
    let cfg = TrainConfig { temperature: 0.5, ..TrainConfig::default() };
    let batch = TrainingBatch::assemble(windows, labels, &cfg, &mut rng);
    let (_, grads) = objective(&batch, &params, &enc, &cfg, true).unwrap();
    let grads = grads.unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    let h = 1e-6;
    let mut worst = (0.0f64, String::new());
    for (ti, (name, a)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(a.len());
        for j in 0..a.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mut ts = p.tensors_mut();
                *ts[ti].1.iter_mut().nth(j).unwrap() += delta;
                drop(ts);
                objective(&batch, &p, &enc, &cfg, false).unwrap().0.total
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(numeric.iter().map(|x| x * x).sum::<f64>().sqrt());
        let rel = if scale < 1e-12 { diff } else { diff / scale };
        if rel > worst.0 {
            worst = (rel, name.clone());
        }
    }
    outcome(
        worst.0 < 1e-4,
        format!("{} tensors, worst relative error {:.2e} ({})", analytic.len(), worst.0, worst.1),
    )
}

// ---------------------------------------------------------------------------
// embedding contracts

fn desk_encoder() -> EncoderConfig {
    EncoderConfig { d_model: 64, groups: standard_groups(), ..EncoderConfig::default() }
}

fn embedding_contracts() -> Outcome {
    let enc = desk_encoder();
    let params = EncoderParams::init(&enc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut norm_err, mut simplex_err, mut min_perm) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut deterministic = true;
    for i in 0..1000 {
        let w = random_window(&mut rng, enc.window_len, FRAME_DIM, format!("r{i}"), "x");
        let a = encode_window(&w, &params, &enc).unwrap();
        let b = encode_window(&w, &params, &enc).unwrap();
        deterministic &= a == b;
        norm_err = norm_err.max((a.z_cls.dot(&a.z_cls).sqrt() - 1.0).abs());
        for row in a.z_frames.rows() {
            norm_err = norm_err.max((row.dot(&row).sqrt() - 1.0).abs());
        }
        for row in a.attention.rows() {
            simplex_err = simplex_err.max((row.sum() - 1.0).abs());
            if row.iter().any(|v| *v < 0.0) {
                simplex_err = f64::INFINITY;
            }
        }
        let (p, q) = (rng.random_range(0..enc.window_len), rng.random_range(0..enc.window_len - 1));
        let q = if q >= p { q + 1 } else { q };
        let mut stat = w.static_feats.clone();
        for j in 0..FRAME_DIM {
            stat.swap([p, j], [q, j]);
        }
        let swapped = TemporalWindow::from_static(stat, Arc::clone(&w.norm), "s", 0, 0, None);
        let c = encode_window(&swapped, &params, &enc).unwrap();
        min_perm = min_perm.min(s_cons(a.z_cls.view(), c.z_cls.view()).unwrap());
    }
    outcome(
        norm_err <= 1e-5 && simplex_err <= 1e-6 && deterministic && min_perm > 1e-8,
        format!(
            "max |‖z‖−1| {norm_err:.1e}; max simplex error {simplex_err:.1e}; bit-equal repeats {deterministic}; min z_cls shift under a frame swap {min_perm:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// windowing

fn windowing_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cases = 0;
    let mut bad = Vec::new();
    for _ in 0..20_000 {
        let t = rng.random_range(1..=64usize);
        let overlap = rng.random_range(0..t);
        let len = rng.random_range(1..=400usize);
        let starts = window_starts(len, t, overlap).unwrap();
        let stride = t - overlap;
        cases += 1;
        let stride_ok = starts[0] == 0 && starts.windows(2).all(|p| p[1] - p[0] == stride);
        let covered = starts.last().unwrap() + t >= len;
        let minimal = starts.len() == 1 || starts[starts.len() - 2] + t < len;
        if !(stride_ok && covered && minimal) {
            bad.push(format!("L={len} T={t} o={overlap}"));
        }
    }
    // padding rules on real windows, including L < T
    let seqs = generate_dataset(2, 1, 70, 30.0, 9).unwrap();
    let norm = Arc::new(NormStats::identity());
    for len in [1usize, 5, 31, 32, 33, 56, 57, 70] {
        let mut seq = seqs[0].clone();
        seq.frames.truncate(len);
        let prepared = motion_manifold::features::PreparedSequence::new(&seq, Arc::clone(&norm)).unwrap();
        for (t, overlap) in [(32, 8), (8, 0), (16, 15), (1, 0)] {
            cases += 1;
            let ws = make_windows(&prepared, t, overlap).unwrap();
            let starts = window_starts(len, t, overlap).unwrap();
            let mut ok = ws.len() == starts.len();
            for (w, s) in ws.iter().zip(&starts) {
                let real = (len - s).min(t);
                ok &= w.start_frame == *s && w.len() == t && w.pad_count == t - real;
                for r in 0..t {
                    let src = (s + r).min(len - 1);
                    ok &= w.static_feats.row(r) == prepared.static_rows.row(src);
                }
            }
            if len < t {
                ok &= ws.len() == 1 && ws[0].pad_count == t - len;
            }
            if !ok {
                bad.push(format!("make_windows L={len} T={t} o={overlap}"));
            }
        }
    }
    let canonical = window_starts(96, 32, 8).unwrap() == vec![0, 24, 48, 72];
    outcome(
        bad.is_empty() && canonical,
        if bad.is_empty() {
            format!("{cases} cases; L=96,T=32,o=8 → starts 0,24,48,72")
        } else {
            format!("{} of {cases} cases violate the rules, e.g. {}", bad.len(), bad[0])
        },
    )
}

// ---------------------------------------------------------------------------
// desk model

struct Desk {
    train: Vec<TemporalWindow>,
    test: Vec<TemporalWindow>,
}

fn desk_data() -> Desk {
    let seqs = generate_dataset(5, 20, 96, 30.0, 42).unwrap();
    let splits = assign_splits(&seqs, 0.0, 0.2).unwrap();
    let pick = |want: Split| -> Vec<_> {
        seqs.iter().zip(&splits).filter(|(_, s)| **s == want).map(|(q, _)| q.clone()).collect()
    };
    let (_, ptrain, ptest) = fit_and_apply_normalization(&pick(Split::Train), &pick(Split::Test), DEFAULT_STD_FLOOR).unwrap();
    let windows = |p: &[motion_manifold::features::PreparedSequence]| -> Vec<TemporalWindow> {
        p.iter().flat_map(|s| make_windows(s, 32, 8).unwrap()).collect()
    };
    Desk { train: windows(&ptrain), test: windows(&ptest) }
}

fn desk_train_config() -> TrainConfig {
    TrainConfig { batch_size: 32, epochs: 30, seed: 0, ..TrainConfig::default() }
}

struct Evaluated {
    model: TrainedModel,
    centroids: ClassCentroids,
    nmi: f64,
    accuracy: f64,
    sweep: Vec<SweepRow>,
}

const SEVERITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn evaluate(desk: &Desk, model: TrainedModel) -> Evaluated {
    let enc = |ws: &[TemporalWindow]| -> Vec<WindowEmbedding> {
        ws.iter().map(|w| encode_window(w, &model.params, &model.encoder).unwrap()).collect()
    };
    let centroids = centroids_from_windows(&enc(&desk.train)).unwrap();
    let test_embeddings = enc(&desk.test);
    let nmi = window_nmi(&test_embeddings, 0).unwrap();
    let accuracy = nearest_centroid_accuracy(&test_embeddings, &centroids);
    let sweep = sensitivity_sweep(&desk.test, &model.params, &model.encoder, &centroids, &DistortionKind::ALL, &SEVERITIES, 0).unwrap();
    Evaluated { model, centroids, nmi, accuracy, sweep }
}

fn curve(sweep: &[SweepRow], kind: DistortionKind, temp: bool) -> Vec<f64> {
    sweep
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| if temp { r.mean_s_temp } else { r.mean_s_cons })
        .collect()
}

fn fmt_curve(c: &[f64]) -> String {
    c.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("/")
}

fn severity_rho(sweep: &[SweepRow], kind: DistortionKind, temp: bool) -> f64 {
    spearman(&SEVERITIES, &curve(sweep, kind, temp)).unwrap_or(f64::NAN)
}

fn train_desk(desk: &Desk, config: TrainConfig) -> Evaluated {
    let model = train(&desk.train, &[], &desk_encoder(), &config).unwrap();
    evaluate(desk, model)
}

fn distortion_sensitivity(full: &Evaluated) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [DistortionKind::Shuffle, DistortionKind::Reverse] {
        for (temp, name) in [(true, "S_temp"), (false, "S_cons")] {
            let rho = severity_rho(&full.sweep, kind, temp);
            pass &= rho >= 0.9;
            parts.push(format!("{kind} {name} ρ={rho:.2} [{}]", fmt_curve(&curve(&full.sweep, kind, temp))));
        }
    }
    let copy = curve(&full.sweep, DistortionKind::Copy, true);
    let copy_ok = copy[4] <= copy[0];
    pass &= copy_ok;
    parts.push(format!("copy S_temp at 1.0 {:.3} vs undistorted {:.3}", copy[4], copy[0]));
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// identities

fn trivial_identities() -> Outcome {
    let constant = Array2::from_shape_fn((6, 4), |(_, j)| [0.5, 0.5, 0.5, 0.5][j]);
    let st_ok = s_temp_window(constant.view()).unwrap() == 0.0;

    // the only video of a class: its mean CLS is the class centroid
    let enc = tiny_encoder();
    let params = EncoderParams::init(&enc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let windows: Vec<WindowEmbedding> = (0..3)
        .map(|i| {
            let mut w = random_window(&mut rng, 4, 5, "solo".into(), "only");
            w.start_frame = 2 * i;
            encode_window(&w, &params, &enc).unwrap()
        })
        .collect();
    let video = VideoEmbedding {
        video_id: "solo".into(),
        label: Some("only".into()),
        mean_cls: mean_cls(&windows).unwrap(),
        windows: windows.clone(),
    };
    let centroids = centroids_from_windows(&windows).unwrap();
    let sc = s_cons(video.mean_cls.view(), centroids.get("only").unwrap().view()).unwrap();

    let ws: Vec<_> = (0..6)
        .map(|i| random_window(&mut rng, 4, 5, format!("w{i}"), if i < 3 { "x" } else { "y" }))
        .collect();
    let labels = label_indices(&ws).unwrap().0;
    let cfg = TrainConfig { lambda: 0.0, ..TrainConfig::default() };
    let batch = TrainingBatch::assemble(ws, labels, &cfg, &mut rng);
    let (loss, _) = objective(&batch, &params, &enc, &cfg, false).unwrap();
    let lambda_ok = loss.total == loss.supcon;
    outcome(
        st_ok && sc == 0.0 && lambda_ok,
        format!("s_temp(constant) {}; solo-video s_cons {sc}; λ=0 total − supcon = {}", ok_word(st_ok), loss.total - loss.supcon),
    )
}

fn main() {
    let mut run = Runner { total: 0, failures: 0 };
    run.check("statistics oracles", Duration::from_secs(10), statistics_oracles);
    run.check("gradient correctness", Duration::from_secs(60), gradient_check);
    run.check("embedding contracts", Duration::from_secs(60), embedding_contracts);
    run.check("windowing properties", Duration::from_secs(10), windowing_suite);
    run.check("trivial metric identities", Duration::from_secs(10), trivial_identities);

    let desk = desk_data();
    let mut full = None;
    run.check("synthetic manifold separability", Duration::from_secs(15 * 60), || {
        let e = train_desk(&desk, desk_train_config());
        let o = outcome(
            e.nmi >= 0.90 && e.accuracy >= 0.90,
            format!(
                "{} train / {} test windows, {} epochs; NMI {:.3}, nearest-centroid accuracy {:.3}, {} classes",
                desk.train.len(),
                desk.test.len(),
                e.model.history.epochs(),
                e.nmi,
                e.accuracy,
                e.centroids.centroids.len()
            ),
        );
        full = Some(e);
        o
    });
    let full = full.unwrap();
    run.check("distortion sensitivity", Duration::from_secs(120), || distortion_sensitivity(&full));
    run.check("loss ablation direction", Duration::from_secs(30 * 60), || {
        let no_supcon = train_desk(&desk, TrainConfig { supcon_weight: 0.0, ..desk_train_config() });
        let no_hard = train_desk(&desk, TrainConfig { lambda: 0.0, ..desk_train_config() });
        let drop = full.nmi - no_supcon.nmi;
        let rho = |e: &Evaluated| {
            (severity_rho(&e.sweep, DistortionKind::Shuffle, true) + severity_rho(&e.sweep, DistortionKind::Shuffle, false)) / 2.0
        };
        let (rf, rh) = (rho(&full), rho(&no_hard));
        outcome(
            drop >= 0.15 && rh < rf,
            format!(
                "NMI full {:.3} vs without supcon {:.3} (drop {drop:.3}); shuffle severity ρ full {rf:.3} vs without hard negatives {rh:.3} [S_temp {} vs {}]",
                full.nmi,
                no_supcon.nmi,
                fmt_curve(&curve(&full.sweep, DistortionKind::Shuffle, true)),
                fmt_curve(&curve(&no_hard.sweep, DistortionKind::Shuffle, true)),
            ),
        )
    });

    // a failed criterion is reported above; only a harness error fails the target
    if run.failures == 0 {
        println!("acceptance: all {} criteria passed", run.total);
    } else {
        println!("acceptance: {} of {} criteria failed", run.failures, run.total);
    }
}
