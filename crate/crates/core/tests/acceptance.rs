// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hypersense_core::accel::{run_frame, SaConfig};
use hypersense_core::energy::{per_frame_energy, savings, EnergyParams, Scenario, System};
use hypersense_core::eval::{frame_roc, partial_auc, roc_from_scores, score_frames};
use hypersense_core::fragment::{Class, FragmentModel, LabeledFrameSet};
use hypersense_core::hdc::{bind, bundle, cosine, permute, EncoderParams, Hypervector};
use hypersense_core::io;
use hypersense_core::pipeline::{self, TrainOptions};
use hypersense_core::rng::{SeededRng, RNG_ALGORITHM_ID};
use hypersense_core::sense::{decide, simulate_stream, GatePolicy};
use hypersense_core::sliding::{
    encode_naive, encode_reuse, row_contributions, EncoderPath, FragmentGrid, Frame, OpCounter,
};
use hypersense_core::synth::{generate, SynthSpec};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> SeededRng {
    SeededRng::new(seed, 99)
}

fn random_frame(h: usize, w: usize, r: &mut SeededRng) -> Frame {
    Frame::new(h, w, (0..h * w).map(|_| r.uniform() as f32).collect()).unwrap()
}

/// Largest element-wise relative difference, `|a-b| / max(|a|, |b|)`.
fn max_rel_diff(a: &[Hypervector], b: &[Hypervector]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.values().iter().zip(y.values()))
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs()) as f64;
            if scale == 0.0 {
                0.0
            } else {
                (x as f64 - y as f64).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// `(h, w, D)` triples of the equivalence criterion. No listed D is a
/// multiple of 3, so the 2x3 window is exercised at the nearest smaller
/// multiples instead.
fn geometries() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (h, w) in [(2, 3), (4, 4), (8, 8)] {
        for d in [64usize, 256, 1024] {
            let d = if d % w == 0 { d } else { d - d % w };
            out.push((h, w, d));
        }
    }
    out
}

fn random_model(enc_seed: u64, h: usize, w: usize, dim: usize, r: &mut SeededRng) -> FragmentModel {
    FragmentModel::from_parts(
        Hypervector::random_gaussian(dim, r),
        Hypervector::random_gaussian(dim, r),
        enc_seed,
        h,
        w,
        RNG_ALGORITHM_ID,
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let (mut frag_checked, mut frame_checked) = (0usize, 0usize);
    let (size_h, size_w) = (14, 15);
    for (gi, &(h, w, dim)) in geometries().iter().enumerate() {
        let mut r = rng(100 + gi as u64);
        let model = random_model(gi as u64, h, w, dim, &mut r);
        for stride in [1, 2] {
            let grid = FragmentGrid::new(size_h, size_w, h, w, stride).unwrap();
            for _ in 0..20 {
                let frame = random_frame(size_h, size_w, &mut r);
                let naive = encode_naive(&frame, &grid, model.encoder(), &mut OpCounter::default())
                    .unwrap();
                let reuse = encode_reuse(&frame, &grid, model.encoder(), &mut OpCounter::default())
                    .unwrap();
                worst = worst.max(max_rel_diff(&naive, &reuse));
                let sn: Vec<f64> = naive.iter().map(|v| model.score_encoded(v)).collect();
                let sr: Vec<f64> = reuse.iter().map(|v| model.score_encoded(v)).collect();
                let t = 0.0;
                for (a, b) in sn.iter().zip(&sr) {
                    if (a - t).abs() > 1e-4 {
                        frag_checked += 1;
                        ensure!(
                            (*a > t) == (*b > t),
                            "fragment decision differs ({a} vs {b})"
                        );
                    }
                }
                if sn.iter().all(|s| (s - t).abs() > 1e-4) {
                    frame_checked += 1;
                    ensure!(
                        decide(&sn, t, 1) == decide(&sr, t, 1),
                        "frame decision differs"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-5, "max relative difference {worst:e} > 1e-5");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "max rel diff {worst:.2e}; {frag_checked} fragment and {frame_checked} frame decisions identical; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    let mut parts = Vec::new();
    for (w, expect) in [(3usize, "1.80"), (8, "4.27"), (96, "48.25")] {
        let dim = 4 * w;
        let enc = EncoderParams::generate(7, 1, w, dim).unwrap();
        let mut r = rng(w as u64);
        let n = 3 * w;
        let row: Vec<f32> = (0..n + 1).map(|_| r.uniform() as f32).collect();
        let count = |len: usize, reuse: bool| -> u64 {
            let origins: Vec<usize> = (0..=len - w).collect();
            let mut k = OpCounter::default();
            if reuse {
                row_contributions(&row[..len], enc.base(), 0, &origins, &mut k).unwrap();
            } else {
                let frame = Frame::new(1, len, row[..len].to_vec()).unwrap();
                let grid = FragmentGrid::new(1, len, 1, w, 1).unwrap();
                encode_naive(&frame, &grid, &enc, &mut k).unwrap();
            }
            k.scalar_mults
        };
        let reuse_m = count(n + 1, true) - count(n, true);
        let naive_m = count(n + 1, false) - count(n, false);
        ensure!(
            reuse_m as usize * w == dim * (2 * w - 1),
            "w={w}: reuse marginal {reuse_m} != D(2w-1)/w = {}",
            dim * (2 * w - 1) / w
        );
        ensure!(
            naive_m as usize == w * dim,
            "w={w}: naive marginal {naive_m} != wD"
        );
        ensure!(
            naive_m as usize * (2 * w - 1) == reuse_m as usize * w * w,
            "w={w}: factor is not w^2/(2w-1)"
        );
        let factor = naive_m as f64 / reuse_m as f64;
        ensure!(format!("{factor:.2}") == expect, "w={w}: factor {factor}");
        parts.push(format!("w={w}: {reuse_m}/elem, {factor:.2}x"));
    }
    Ok(parts.join("; "))
}

fn criterion_3() -> Outcome {
    let d = 10_000;
    let seeds = 100u64;
    let mut small = 0usize;
    let mut worst_bundle = 1.0f64;
    let mut worst_perm = 0.0f64;
    let mut worst_bind = 0.0f64;
    for seed in 0..seeds {
        let mut r = rng(1000 + seed);
        let a = Hypervector::random_gaussian(d, &mut r);
        let b = Hypervector::random_gaussian(d, &mut r);
        let (pa, pb, key) = (
            Hypervector::random_bipolar(d, &mut r),
            Hypervector::random_bipolar(d, &mut r),
            Hypervector::random_bipolar(d, &mut r),
        );
        if cosine(&a, &b).unwrap().abs() <= 0.05 {
            small += 1;
        }
        worst_bundle = worst_bundle.min(cosine(&a, &bundle(&a, &b).unwrap()).unwrap());
        worst_perm = worst_perm.max(cosine(&permute(&a, 1), &a).unwrap().abs());
        let before = cosine(&pa, &pb).unwrap();
        let after = cosine(&bind(&key, &pa).unwrap(), &bind(&key, &pb).unwrap()).unwrap();
        worst_bind = worst_bind.max((before - after).abs());
        ensure!(
            permute(&a, d as i64) == a,
            "rho^D is not the identity (seed {seed})"
        );
    }
    ensure!(
        small as f64 >= 0.99 * seeds as f64,
        "only {small}/{seeds} pairs near-orthogonal"
    );
    ensure!(worst_bundle >= 0.5, "cos(a, a+b) fell to {worst_bundle}");
    ensure!(worst_perm <= 0.05, "|cos(rho(a), a)| reached {worst_perm}");
    ensure!(
        worst_bind <= 0.05,
        "binding moved similarity by {worst_bind}"
    );
    Ok(format!(
        "{small}/{seeds} orthogonal, min cos(a,a+b) {worst_bundle:.3}, max |cos(rho a,a)| {worst_perm:.3}, bind drift {worst_bind:.3}"
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        frames: 500,
        height: 128,
        width: 128,
        amplitude: 3.0,
        ..SynthSpec::default()
    };
    let (frames, labels) = generate(&spec).map_err(|e| e.to_string())?;
    let set = LabeledFrameSet::new(frames, labels).map_err(|e| e.to_string())?;
    let cut = set.len() * 4 / 5;
    let train_set = set.subset(&(0..cut).collect::<Vec<_>>());
    let test_set = set.subset(&(cut..set.len()).collect::<Vec<_>>());
    let opts = TrainOptions {
        fragment: 32,
        dim: 4096,
        eta: 0.05,
        epochs: 20,
        ..TrainOptions::default()
    };
    let out = pipeline::train(&train_set, &opts).map_err(|e| e.to_string())?;
    let acc = out.val_final.accuracy();
    let (f1_init, f1_final) = (out.val_initial.f1(), out.val_final.f1());
    let scores = score_frames(&out.model, &test_set.frames, 32, 8, EncoderPath::Naive)
        .map_err(|e| e.to_string())?;
    let auc = frame_roc(&scores, &test_set.presence(), 0)
        .map_err(|e| e.to_string())?
        .auc();
    let elapsed = start.elapsed();
    ensure!(acc >= 0.90, "validation accuracy {acc:.4} < 0.90");
    ensure!(auc >= 0.95, "frame AUC {auc:.4} < 0.95");
    ensure!(
        f1_final >= f1_init,
        "retrained F1 {f1_final:.4} < initial {f1_init:.4}"
    );
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "val accuracy {acc:.4}, frame AUC {auc:.4} on {} held-out frames, F1 {f1_init:.4} -> {f1_final:.4}, {:.1}s",
        test_set.len(),
        elapsed.as_secs_f64()
    ))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let n = 1000;
    // Two-decimal scores force ties.
    let labels: Vec<bool> = (0..n).map(|_| r.uniform() < 0.4).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| ((r.uniform() + if l { 0.3 } else { 0.0 }) * 100.0).round() / 100.0)
        .collect();
    let curve = roc_from_scores(&scores, &labels).map_err(|e| e.to_string())?;
    let (mut conc, mut pairs) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    conc += 1.0;
                } else if scores[i] == scores[j] {
                    conc += 0.5;
                }
            }
        }
    }
    let brute = conc / pairs;
    let auc = curve.auc();
    ensure!(
        (auc - brute).abs() <= 1e-9,
        "AUC {auc} vs concordance {brute}"
    );
    let pauc = partial_auc(&curve, 0.8).map_err(|e| e.to_string())?;
    ensure!((0.0..=0.2).contains(&pauc), "pAUC {pauc} outside [0, 0.2]");
    let perfect = roc_from_scores(
        &[0.9, 0.8, 0.7, 0.1, 0.2],
        &[true, true, true, false, false],
    )
    .map_err(|e| e.to_string())?;
    let p = partial_auc(&perfect, 0.8).map_err(|e| e.to_string())?;
    ensure!((p - 0.2).abs() < 1e-12, "perfect pAUC {p}");
    Ok(format!(
        "AUC {auc:.12} = concordance {brute:.12}; pAUC {pauc:.4}; perfect pAUC {p}"
    ))
}

fn criterion_6() -> Outcome {
    let n = 6000;
    let mut r = rng(6);
    let truth: Vec<bool> = (0..n).map(|_| r.uniform() < 0.01).collect();
    let frames = vec![Frame::zeros(1, 1); n];
    let policy = GatePolicy::new(60.0, 1.0).map_err(|e| e.to_string())?;
    let oracle_truth = truth.clone();
    let mut oracle = move |i: usize, _: &Frame| {
        Ok((
            if oracle_truth[i] {
                Class::Pos
            } else {
                Class::Neg
            },
            0,
        ))
    };
    let (log, summary) =
        simulate_stream(&frames, &truth, &mut oracle, &policy).map_err(|e| e.to_string())?;
    let union: std::collections::BTreeSet<usize> = (0..n)
        .filter(|&i| truth[i])
        .chain((0..n).step_by(60))
        .collect();
    ensure!(
        summary.generated == union.len(),
        "generated {} != |positives U ticks| {}",
        summary.generated,
        union.len()
    );
    let generated: std::collections::BTreeSet<usize> = log
        .entries
        .iter()
        .filter(|e| e.generated)
        .map(|e| e.frame)
        .collect();
    ensure!(
        generated == union,
        "generated set differs from positives U ticks"
    );

    for set in 0..100u64 {
        let mut r = rng(600 + set);
        let scores: Vec<f64> = (0..1 + r.below(60))
            .map(|_| r.uniform_range(-1.0, 1.0))
            .collect();
        let mut ts: Vec<f64> = (0..20).map(|_| r.uniform_range(-1.2, 1.2)).collect();
        ts.sort_by(f64::total_cmp);
        for td in 0..5 {
            for pair in ts.windows(2) {
                let (lo, hi) = (decide(&scores, pair[0], td), decide(&scores, pair[1], td));
                ensure!(hi.1 <= lo.1, "count rose with T_score");
                ensure!(
                    !(hi.0 == Class::Pos && lo.0 == Class::Neg),
                    "decision not monotone in T_score"
                );
            }
        }
        for &t in &ts {
            for td in 0..6 {
                let (a, b) = (decide(&scores, t, td).0, decide(&scores, t, td + 1).0);
                ensure!(
                    !(b == Class::Pos && a == Class::Neg),
                    "decision not monotone in T_detection"
                );
            }
        }
    }
    Ok(format!(
        "{} positives, {} generated = |union|; 100 score sets monotone",
        truth.iter().filter(|&&t| t).count(),
        summary.generated
    ))
}

fn criterion_7() -> Outcome {
    let e = EnergyParams::default();
    let always = Scenario {
        p: 0.01,
        tpr: 1.0,
        fpr: 1.0,
        min_rate_fraction: 1.0 / 60.0,
    };
    let s = savings(&e, &always).map_err(|x| x.to_string())?;
    ensure!(
        s.total_saving <= 0.0,
        "always-on saving {} > 0",
        s.total_saving
    );
    ensure!(
        s.quality_loss == 0.0,
        "always-on quality loss {}",
        s.quality_loss
    );
    let idle = Scenario {
        p: 0.0,
        tpr: 0.5,
        fpr: 0.0,
        min_rate_fraction: 0.0,
    };
    let hs = per_frame_energy(&e, &idle, System::HyperSense).map_err(|x| x.to_string())?;
    ensure!(
        hs.total == e.e_sense_lo + e.e_edge_infer,
        "idle energy {} != {}",
        hs.total,
        e.e_sense_lo + e.e_edge_infer
    );
    let mut rows = Vec::new();
    for fpr in [0.05f64, 0.1, 0.2, 0.3] {
        let sc = Scenario {
            p: 0.01,
            tpr: fpr.powf(1.0 / 8.0),
            fpr,
            min_rate_fraction: 1.0 / 60.0,
        };
        rows.push(savings(&e, &sc).map_err(|x| x.to_string())?);
    }
    for w in rows.windows(2) {
        ensure!(
            w[1].total_saving < w[0].total_saving,
            "saving not strictly decreasing"
        );
        ensure!(
            w[1].quality_loss < w[0].quality_loss,
            "quality loss not strictly decreasing"
        );
    }
    Ok(format!(
        "saving {:.1}% -> {:.1}%, quality loss {:.2}% -> {:.2}% over FPR 0.05..0.3",
        100.0 * rows[0].total_saving,
        100.0 * rows[3].total_saving,
        100.0 * rows[0].quality_loss,
        100.0 * rows[3].quality_loss
    ))
}

fn criterion_8() -> Outcome {
    let (w, h) = (8, 4);
    let enc = EncoderParams::generate(3, h, w, 64).unwrap();
    let frame = random_frame(h, 20, &mut rng(8));
    let cfg = SaConfig::new(h, w, 64);
    let run = run_frame(&frame, &cfg, &enc, true).map_err(|e| e.to_string())?;
    let trace = run.trace.as_ref().unwrap();
    for j in 1..=w {
        ensure!(
            trace.first_active(1, j) == Some(j as u64),
            "PE(1,{j}) first active at {:?}",
            trace.first_active(1, j)
        );
    }
    let mut worst = 0.0f64;
    let mut checked = 0;
    let (size_h, size_w) = (14, 15);
    for (gi, &(h, w, dim)) in geometries().iter().enumerate() {
        let enc = EncoderParams::generate(gi as u64, h, w, dim).unwrap();
        let mut r = rng(800 + gi as u64);
        for stride in [1, 2] {
            let grid = FragmentGrid::new(size_h, size_w, h, w, stride).unwrap();
            let frame = random_frame(size_h, size_w, &mut r);
            let cfg = SaConfig {
                stride,
                ..SaConfig::new(h, w, dim)
            };
            let sim = run_frame(&frame, &cfg, &enc, false).map_err(|e| e.to_string())?;
            let mut reuse = OpCounter::default();
            encode_reuse(&frame, &grid, &enc, &mut reuse).unwrap();
            ensure!(
                sim.summary.scalar_mults == reuse.scalar_mults,
                "({h},{w},{dim}) stride {stride}: simulated {} vs functional {} mults",
                sim.summary.scalar_mults,
                reuse.scalar_mults
            );
            let naive = encode_naive(&frame, &grid, &enc, &mut OpCounter::default()).unwrap();
            worst = worst.max(max_rel_diff(&sim.hypervectors, &naive));
            checked += 1;
        }
    }
    ensure!(
        worst <= 1e-5,
        "simulator vs naive relative difference {worst:e}"
    );
    Ok(format!(
        "wavefront PE(1,j) at cycle j for j=1..{w}; mult totals equal on {checked} configurations; max rel diff {worst:.2e}"
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        frames: 30,
        height: 48,
        width: 48,
        radius_min: 4,
        radius_max: 6,
        presence: 0.6,
        seed: 9,
        ..SynthSpec::default()
    };
    let (frames, labels) = generate(&spec).map_err(|e| e.to_string())?;
    let set = LabeledFrameSet::new(frames.clone(), labels).map_err(|e| e.to_string())?;
    let out = pipeline::train(
        &set,
        &TrainOptions {
            fragment: 12,
            dim: 600,
            per_frame: 6,
            epochs: 3,
            seed: 9,
            ..TrainOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let model_bytes = io::encode_model(&out.model);
    let model_path = dir.path().join("m.hsm");
    io::write_bytes(&model_path, &model_bytes).map_err(|e| e.to_string())?;
    let loaded = io::read_model(&model_path).map_err(|e| e.to_string())?;
    ensure!(
        io::encode_model(&loaded) == model_bytes,
        "model bytes differ after round trip"
    );

    let frame_bytes = io::encode_frames(&frames).map_err(|e| e.to_string())?;
    let frames_path = dir.path().join("f.hsf");
    io::write_bytes(&frames_path, &frame_bytes).map_err(|e| e.to_string())?;
    let back = io::read_frames(&frames_path).map_err(|e| e.to_string())?;
    ensure!(
        io::encode_frames(&back).map_err(|e| e.to_string())? == frame_bytes,
        "frame container bytes differ after round trip"
    );

    let a =
        score_frames(&out.model, &frames, 12, 6, EncoderPath::Naive).map_err(|e| e.to_string())?;
    let b = score_frames(&loaded, &back, 12, 6, EncoderPath::Naive).map_err(|e| e.to_string())?;
    let n: usize = a.iter().map(Vec::len).sum();
    ensure!(a == b, "scores from the regenerated encoder differ");
    Ok(format!(
        "{} model bytes and {} frame bytes identical; {n} scores identical",
        model_bytes.len(),
        frame_bytes.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("reuse matches naive encoding", criterion_1),
        ("steady-state savings law", criterion_2),
        ("HDC algebra at D=10000", criterion_3),
        ("end-to-end synthetic detection", criterion_4),
        ("ROC oracle", criterion_5),
        ("gating simulator", criterion_6),
        ("energy model ordering", criterion_7),
        ("pipeline simulator", criterion_8),
        ("serialization round trip", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
