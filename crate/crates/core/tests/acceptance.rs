//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! The exit status reflects failures only when `ACCEPTANCE_STRICT` is set,
//! so the report runs as part of the ordinary test suite.

use std::path::Path;
use std::time::{Duration, Instant};

use chartrelate::chartgen::{generate_corpus, Corpus, GenConfig};
use chartrelate::cluster::kmeans;
use chartrelate::eval::{
    ablate_k_selection, ablate_segmentation, edit_distance, evaluate, total_accuracy,
};
use chartrelate::preprocess::{saturation_threshold, PreprocessConfig};
use chartrelate::relate::{extract_relations, spearman_xy, TruthText};
use chartrelate::segment::{hsv_range, HsvBox, TruthFacets};
use chartrelate::{Hsv, PipelineConfig, RasterImage, Rgb8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 20_240_601;

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn corpus(dir: &Path, count: usize, seed: u64) -> Corpus {
    let config = GenConfig { count, ..Default::default() };
    generate_corpus(&config, seed, dir).expect("corpus generation");
    Corpus::open(dir).expect("corpus opens")
}

fn k_selection(out: &mut Outcome, corpus: &Corpus, cfg: &PipelineConfig) {
    let start = Instant::now();
    let report = ablate_k_selection(corpus, cfg).expect("k ablation");
    let elapsed = start.elapsed();
    let with = report.k_accuracy_with_preprocess.unwrap();
    let without = report.k_accuracy_without.unwrap();
    out.check(
        "1 k-selection accuracy >= 0.95 within 5 min",
        with >= 0.95 && elapsed <= Duration::from_secs(300),
        format!("accuracy {with:.3} on {} charts in {:.1}s", report.charts, elapsed.as_secs_f64()),
    );
    out.check(
        "2 k-selection without preprocessing strictly lower",
        without < with,
        format!("raw {without:.3} vs preprocessed {with:.3}"),
    );
}

fn segmentation(out: &mut Outcome, corpus: &Corpus, cfg: &PipelineConfig) {
    let report = ablate_segmentation(corpus, cfg).expect("segmentation ablation");
    let with = report.segmentation_errors_with.unwrap();
    let without = report.segmentation_errors_without.unwrap();
    out.check(
        "3 segmentation errors <= 5 on 50 charts, raw >= preprocessed",
        with <= 5 && without >= with,
        format!("preprocessed {with}, raw {without} on {} charts", report.charts),
    );
}

fn end_to_end(out: &mut Outcome, corpus: &Corpus, cfg: &PipelineConfig) {
    let pairs: Vec<_> = (0..corpus.len())
        .map(|i| {
            let (img, truth) = corpus.load(i).unwrap();
            let result = extract_relations(&img, &TruthFacets(truth.facets.clone()), &TruthText::new(&truth), cfg)
                .unwrap_or_else(|_| chartrelate::ExtractionResult {
                    x_axis: None,
                    y_axis: None,
                    title: None,
                    series: Vec::new(),
                });
            (result, truth)
        })
        .collect();
    let report = evaluate(&pairs).unwrap();
    let excluded = report.series_noocr_excluding_boundary.unwrap_or(0.0);
    out.check(
        "4 Series_NoOCR >= 0.85 and >= 0.92 away from the boundary",
        report.series_noocr >= 0.85 && excluded >= 0.92,
        format!(
            "{:.3} overall, {excluded:.3} boundary excluded ({} charts, {} series)",
            report.series_noocr, report.charts, report.series
        ),
    );
}

fn metric_identity(out: &mut Outcome) {
    let t = total_accuracy(0.86, 0.833);
    let pct = (t * 1000.0).round() / 10.0;
    out.check(
        "5 total accuracy of (0.86, 0.833) is 0.8465 -> 84.5%",
        (t - 0.8465).abs() < 1e-12 && pct == 84.5,
        format!("{t:.6} -> {pct}%"),
    );
}

fn rank_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let eq = v.iter().filter(|&&b| b == a).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn spearman_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    let mut samples = 0;
    while samples < 1000 {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=10);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        if xs.iter().all(|&a| a == xs[0]) || ys.iter().all(|&a| a == ys[0]) {
            continue;
        }
        let r = spearman_xy(&xs, &ys).unwrap();
        worst = worst.max((r - pearson_oracle(&rank_oracle(&xs), &rank_oracle(&ys))).abs());
        samples += 1;
    }
    (worst < 1e-9, format!("max |diff| {worst:.2e} over {samples} tied samples"))
}

/// Minimum SSE over every assignment of points to at most k groups.
fn exhaustive_sse(points: &[[f64; 3]], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sse = 0.0;
        for g in 0..k {
            let members: Vec<&[f64; 3]> = points.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len() as f64;
            let mean: Vec<f64> = (0..3).map(|c| members.iter().map(|p| p[c]).sum::<f64>() / m).collect();
            sse += members.iter().map(|p| (0..3).map(|c| (p[c] - mean[c]).powi(2)).sum::<f64>()).sum::<f64>();
        }
        best = best.min(sse);
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

fn kmeans_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    let trials = 300;
    for t in 0..trials {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3usize.min(n));
        let palette: Vec<Rgb8> = (0..rng.random_range(2..=8)).map(|_| Rgb8::new(rng.random(), rng.random(), rng.random())).collect();
        let px: Vec<Rgb8> = (0..n).map(|_| palette[rng.random_range(0..palette.len())]).collect();
        let fit = kmeans(&px, k, t).unwrap();
        let pts: Vec<[f64; 3]> = px.iter().map(|p| p.to_f64()).collect();
        worst = worst.max(fit.sse - exhaustive_sse(&pts, k));
    }
    (worst < 1e-6, format!("max excess SSE {worst:.2e} over {trials} inputs"))
}

fn edit_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(0..10)).map(|_| (b'a' + rng.random_range(0..4u8)) as char).collect()
    };
    let mut violations = 0;
    for _ in 0..1000 {
        let (a, b, c) = (word(rng), word(rng), word(rng));
        let (ab, ba, bc, ac) = (edit_distance(&a, &b), edit_distance(&b, &a), edit_distance(&b, &c), edit_distance(&a, &c));
        if ab != ba || (ab == 0) != (a == b) || edit_distance(&a, &a) != 0 || ac > ab + bc {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} axiom violations on 1000 triples"))
}

fn idempotence_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let cfg = PreprocessConfig::default();
    let mut bad = 0;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let px = (0..w * h).map(|_| Rgb8::new(rng.random(), rng.random(), rng.random())).collect();
        let img = RasterImage::new(w, h, px).unwrap();
        let once = saturation_threshold(&img, &cfg);
        if saturation_threshold(&once, &cfg) != once {
            bad += 1;
        }
    }
    (bad == 0, format!("{bad} of 100 random images changed on a second pass"))
}

fn hsv_table() -> (bool, String) {
    let b = |h0, h1, s0, s1, v0, v1| HsvBox { lower: Hsv::new(h0, s0, v0), upper: Hsv::new(h1, s1, v1) };
    let cases = [
        (Rgb8::new(255, 0, 0), vec![b(0, 10, 230, 255, 215, 255), b(170, 180, 230, 255, 215, 255)]),
        (chartrelate::raster::hsv_to_rgb(Hsv::new(5, 255, 255)), vec![b(0, 15, 230, 255, 215, 255), b(175, 180, 230, 255, 215, 255)]),
        (chartrelate::raster::hsv_to_rgb(Hsv::new(175, 255, 255)), vec![b(165, 180, 230, 255, 215, 255), b(0, 5, 230, 255, 215, 255)]),
    ];
    let ok = cases.iter().filter(|(c, want)| &hsv_range(*c).boxes == want).count();
    (ok == cases.len(), format!("{ok}/{} wrap-around cases exact", cases.len()))
}

fn determinism() -> (bool, String) {
    let config = GenConfig { count: 8, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_corpus(&config, 7, a.path()).unwrap();
    generate_corpus(&config, 7, b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let same = names
        .iter()
        .all(|n| std::fs::read(a.path().join(n)).unwrap() == std::fs::read(b.path().join(n)).unwrap());
    (same, format!("{} files compared byte for byte", names.len()))
}

fn oracles(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let suites = [
        ("spearman vs rank oracle", spearman_suite(&mut rng)),
        ("kmeans vs exhaustive optimum", kmeans_suite(&mut rng)),
        ("edit distance metric axioms", edit_suite(&mut rng)),
        ("saturation threshold idempotence", idempotence_suite(&mut rng)),
        ("hsv range wrap-around table", hsv_table()),
        ("corpus byte determinism", determinism()),
    ];
    for (name, (pass, detail)) in suites {
        out.check(&format!("6 {name}"), pass, detail);
    }
}

fn main() {
    let mut out = Outcome { failed: 0 };
    let cfg = PipelineConfig::default();

    let dir100 = tempfile::tempdir().unwrap();
    let c100 = corpus(dir100.path(), 100, CORPUS_SEED);
    k_selection(&mut out, &c100, &cfg);

    let dir50 = tempfile::tempdir().unwrap();
    let c50 = corpus(dir50.path(), 50, CORPUS_SEED + 1);
    segmentation(&mut out, &c50, &cfg);

    end_to_end(&mut out, &c100, &cfg);
    metric_identity(&mut out);
    oracles(&mut out);

    if out.failed > 0 {
        println!("{} criteria failed", out.failed);
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
        return;
    }
    println!("all criteria passed");
}
