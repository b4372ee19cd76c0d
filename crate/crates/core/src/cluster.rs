//! Color-space k-means and k selection.
//!
//! Pixels are clustered in RGB. Because chart images contain few distinct
//! colors, clustering runs on a weighted color histogram, which gives the same
//! centroids and SSE as clustering every pixel individually.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, Rgb8};

const MAX_ITERATIONS: usize = 100;
const CONVERGENCE_SHIFT: f64 = 0.5;
/// Inputs with at most this many labelings of their distinct colors are
/// solved exactly by enumeration.
const EXHAUSTIVE_LABELINGS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorCluster {
    pub centroid: [f64; 3],
    pub member_count: usize,
}

impl ColorCluster {
    pub fn color(&self) -> Rgb8 {
        Rgb8::from_f64(self.centroid)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub clusters: Vec<ColorCluster>,
    pub sse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSelectionResult {
    pub chosen_k: usize,
    pub normalized_errors: Vec<f64>,
    pub kneedle_k: usize,
    pub bumped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Largest k tried by the error curve.
    pub k_max: usize,
    /// Normalized error at or above which the knee is bumped by one.
    pub kneedle_threshold: f64,
    pub subsample_cap: usize,
    pub restarts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k_max: 8,
            kneedle_threshold: 0.985,
            subsample_cap: 20_000,
            restarts: 3,
        }
    }
}

/// Distinct colors with multiplicities, sorted by color.
#[derive(Clone, Debug)]
struct Histogram {
    colors: Vec<[f64; 3]>,
    weights: Vec<f64>,
    total: usize,
}

impl Histogram {
    fn from_counts(counts: &BTreeMap<Rgb8, usize>) -> Self {
        Histogram {
            colors: counts.keys().map(|c| c.to_f64()).collect(),
            weights: counts.values().map(|&w| w as f64).collect(),
            total: counts.values().sum(),
        }
    }

    fn from_pixels(pixels: &[Rgb8]) -> Self {
        let mut counts = BTreeMap::new();
        for &p in pixels {
            *counts.entry(p).or_insert(0usize) += 1;
        }
        Histogram::from_counts(&counts)
    }

    fn len(&self) -> usize {
        self.colors.len()
    }
}

/// Uniformly samples at most `cap` pixels without replacement.
///
/// Sampling indexes pixels in sorted color order, so the result does not
/// depend on where pixels sit in the image.
fn sample_histogram(pixels: &[Rgb8], cap: usize, seed: u64) -> Histogram {
    let mut counts = BTreeMap::new();
    for &p in pixels {
        *counts.entry(p).or_insert(0usize) += 1;
    }
    if pixels.len() <= cap {
        return Histogram::from_counts(&counts);
    }
    let keys: Vec<Rgb8> = counts.keys().copied().collect();
    let mut cumulative = Vec::with_capacity(keys.len());
    let mut acc = 0;
    for k in &keys {
        acc += counts[k];
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5A17_AB1E);
    let mut sampled = BTreeMap::new();
    for i in index::sample(&mut rng, pixels.len(), cap) {
        let bucket = cumulative.partition_point(|&c| c <= i);
        *sampled.entry(keys[bucket]).or_insert(0usize) += 1;
    }
    Histogram::from_counts(&sampled)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(c: &[f64; 3], centroids: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, m) in centroids.iter().enumerate() {
        let d = dist2(c, m);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeanspp_init(hist: &Histogram, k: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    let pick = |rng: &mut dyn rand::RngCore, weights: &[f64]| -> usize {
        let total: f64 = weights.iter().sum();
        let mut r = rng.random::<f64>() * total;
        for (i, &w) in weights.iter().enumerate() {
            if r < w {
                return i;
            }
            r -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    };
    let mut centroids = vec![hist.colors[pick(rng, &hist.weights)]];
    let mut d2: Vec<f64> = hist.colors.iter().map(|c| dist2(c, &centroids[0])).collect();
    while centroids.len() < k {
        let scores: Vec<f64> = d2.iter().zip(&hist.weights).map(|(d, w)| d * w).collect();
        if scores.iter().all(|&s| s == 0.0) {
            break;
        }
        let next = hist.colors[pick(rng, &scores)];
        for (d, c) in d2.iter_mut().zip(&hist.colors) {
            *d = d.min(dist2(c, &next));
        }
        centroids.push(next);
    }
    centroids
}

/// Lloyd iterations from the given centroids.
fn lloyd(hist: &Histogram, mut centroids: Vec<[f64; 3]>) -> KMeansFit {
    let k = centroids.len();
    let mut assignment = vec![usize::MAX; hist.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, c) in hist.colors.iter().enumerate() {
            let (j, _) = nearest(c, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        let mut sums = vec![[0.0f64; 3]; k];
        let mut weights = vec![0.0f64; k];
        for (i, c) in hist.colors.iter().enumerate() {
            let w = hist.weights[i];
            let s = &mut sums[assignment[i]];
            for ch in 0..3 {
                s[ch] += w * c[ch];
            }
            weights[assignment[i]] += w;
        }
        let mut shift = 0.0f64;
        let mut reseeded = false;
        for j in 0..k {
            let updated = if weights[j] > 0.0 {
                [sums[j][0] / weights[j], sums[j][1] / weights[j], sums[j][2] / weights[j]]
            } else {
                // Empty cluster: restart it on the worst-served color.
                reseeded = true;
                let (far, _) = hist
                    .colors
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i, hist.weights[i] * dist2(c, &centroids[assignment[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                hist.colors[far]
            };
            shift = shift.max(dist2(&updated, &centroids[j]).sqrt());
            centroids[j] = updated;
        }
        if !reseeded && (!changed || shift < CONVERGENCE_SHIFT) {
            break;
        }
    }

    // Score the final partition against its own means.
    let mut sums = vec![[0.0f64; 3]; k];
    let mut weights = vec![0.0f64; k];
    for (i, c) in hist.colors.iter().enumerate() {
        let (j, _) = nearest(c, &centroids);
        assignment[i] = j;
        for ch in 0..3 {
            sums[j][ch] += hist.weights[i] * c[ch];
        }
        weights[j] += hist.weights[i];
    }
    let means: Vec<[f64; 3]> = (0..k)
        .map(|j| {
            if weights[j] > 0.0 {
                [sums[j][0] / weights[j], sums[j][1] / weights[j], sums[j][2] / weights[j]]
            } else {
                centroids[j]
            }
        })
        .collect();
    let sse = hist
        .colors
        .iter()
        .zip(&hist.weights)
        .zip(&assignment)
        .map(|((c, w), &j)| w * dist2(c, &means[j]))
        .sum();
    let clusters = (0..k)
        .filter(|&j| weights[j] > 0.0)
        .map(|j| ColorCluster {
            centroid: means[j],
            member_count: weights[j].round() as usize,
        })
        .collect();
    KMeansFit { clusters, sse }
}

fn labelings(d: usize, k: usize) -> usize {
    (0..d).try_fold(1usize, |acc, _| acc.checked_mul(k)).unwrap_or(usize::MAX)
}

/// Means of the lowest-SSE partition of the histogram into at most k groups.
fn exact_centroids(hist: &Histogram, k: usize) -> Vec<[f64; 3]> {
    let d = hist.len();
    let mut labels = vec![0usize; d];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let mut sums = vec![[0.0f64; 3]; k];
        let mut sq = vec![0.0f64; k];
        let mut w = vec![0.0f64; k];
        for (i, c) in hist.colors.iter().enumerate() {
            let g = labels[i];
            let wi = hist.weights[i];
            for ch in 0..3 {
                sums[g][ch] += wi * c[ch];
            }
            sq[g] += wi * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
            w[g] += wi;
        }
        let sse: f64 = (0..k)
            .filter(|&g| w[g] > 0.0)
            .map(|g| sq[g] - (sums[g][0].powi(2) + sums[g][1].powi(2) + sums[g][2].powi(2)) / w[g])
            .sum();
        if sse < best.0 - 1e-9 {
            let means = (0..k)
                .filter(|&g| w[g] > 0.0)
                .map(|g| [sums[g][0] / w[g], sums[g][1] / w[g], sums[g][2] / w[g]])
                .collect();
            best = (sse, means);
        }
        // Labels in restricted-growth form skip relabelings of the same partition.
        let mut i = d;
        loop {
            if i == 1 {
                return best.1;
            }
            i -= 1;
            let cap = labels[..i].iter().max().map_or(0, |&m| m + 1).min(k - 1);
            if labels[i] < cap {
                labels[i] += 1;
                labels[i + 1..].iter_mut().for_each(|l| *l = 0);
                break;
            }
        }
    }
}

fn fit_histogram(
    hist: &Histogram,
    k: usize,
    seed: u64,
    restarts: usize,
    warm: Option<&[[f64; 3]]>,
) -> KMeansFit {
    // Fewer distinct colors than clusters: every color is its own cluster.
    if hist.len() <= k {
        let clusters = hist
            .colors
            .iter()
            .zip(&hist.weights)
            .map(|(c, w)| ColorCluster {
                centroid: *c,
                member_count: *w as usize,
            })
            .collect();
        return KMeansFit { clusters, sse: 0.0 };
    }

    let mut best: Option<KMeansFit> = None;
    let mut consider = |fit: KMeansFit| {
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    };

    if let Some(prev) = warm {
        // Previous solution plus the worst-served color: its starting SSE is
        // already no larger than the previous SSE, so the curve cannot rise.
        let (far, _) = hist
            .colors
            .iter()
            .zip(&hist.weights)
            .enumerate()
            .map(|(i, (c, w))| (i, w * nearest(c, prev).1))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let mut init = prev.to_vec();
        init.push(hist.colors[far]);
        init.truncate(k);
        consider(lloyd(hist, init));
    }
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((k as u64) << 32 | r as u64);
        let init = kmeanspp_init(hist, k, &mut rng);
        consider(lloyd(hist, init));
    }
    if labelings(hist.len(), k) <= EXHAUSTIVE_LABELINGS {
        consider(lloyd(hist, exact_centroids(hist, k)));
    }
    best.expect("at least one restart")
}

/// Lloyd's k-means with k-means++ seeding, best of the default restart count.
pub fn kmeans(pixels: &[Rgb8], k: usize, seed: u64) -> Result<KMeansFit> {
    kmeans_with_restarts(pixels, k, seed, ClusterConfig::default().restarts)
}

pub fn kmeans_with_restarts(pixels: &[Rgb8], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if pixels.len() < k {
        return Err(Error::TooFewPixels {
            needed: k,
            got: pixels.len(),
        });
    }
    Ok(fit_histogram(&Histogram::from_pixels(pixels), k, seed, restarts, None))
}

/// Clusters a seeded subsample of the image's pixels.
pub fn kmeans_image(img: &RasterImage, k: usize, seed: u64, cfg: &ClusterConfig) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let hist = sample_histogram(img.pixels(), cfg.subsample_cap, seed);
    if hist.total < k {
        return Err(Error::TooFewPixels { needed: k, got: hist.total });
    }
    Ok(fit_histogram(&hist, k, seed, cfg.restarts, None))
}

/// `sse(k) / sse(1)` for k = 1..=k_max over a seeded pixel subsample.
pub fn error_curve(img: &RasterImage, seed: u64, cfg: &ClusterConfig) -> Result<Vec<f64>> {
    Ok(sse_curve(img, seed, cfg)?.0)
}

/// Normalized curve plus the unnormalized `sse(1)`.
fn sse_curve(img: &RasterImage, seed: u64, cfg: &ClusterConfig) -> Result<(Vec<f64>, f64)> {
    if cfg.k_max < 1 {
        return Err(Error::InvalidParams("k_max must be at least 1".into()));
    }
    let hist = sample_histogram(img.pixels(), cfg.subsample_cap, seed);
    if hist.total < cfg.k_max {
        return Err(Error::TooFewPixels {
            needed: cfg.k_max,
            got: hist.total,
        });
    }
    let mut sse = Vec::with_capacity(cfg.k_max);
    let mut prev: Option<Vec<[f64; 3]>> = None;
    for k in 1..=cfg.k_max {
        let fit = fit_histogram(&hist, k, seed, cfg.restarts, prev.as_deref());
        prev = Some(fit.clusters.iter().map(|c| c.centroid).collect());
        sse.push(fit.sse);
    }
    let base = sse[0];
    if base == 0.0 {
        let mut curve = vec![0.0; cfg.k_max];
        curve[0] = 1.0;
        return Ok((curve, 0.0));
    }
    Ok((sse.iter().map(|s| s / base).collect(), base))
}

/// Knee of a decreasing curve: the 1-based index maximizing the distance
/// between the flipped, min-max normalized curve and the diagonal.
pub fn kneedle(curve: &[f64]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::CurveTooShort(curve.len()));
    }
    let n = curve.len();
    let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut best = (1, f64::NEG_INFINITY);
    for (i, &y) in curve.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let flipped = if span > 0.0 { 1.0 - (y - lo) / span } else { 1.0 };
        let d = flipped - x;
        if d > best.1 + 1e-12 {
            best = (i + 1, d);
        }
    }
    Ok(best.0)
}

/// Bumps the knee by one when its normalized error is still at or above the
/// threshold, i.e. when the curve flattens too early.
pub fn bump_rule(curve: &[f64], kneedle_k: usize, threshold: f64) -> (usize, bool) {
    let err = curve[kneedle_k - 1];
    if err >= threshold && kneedle_k < curve.len() {
        (kneedle_k + 1, true)
    } else {
        (kneedle_k, false)
    }
}

pub fn select_k_from_curve(curve: Vec<f64>, threshold: f64) -> Result<KSelectionResult> {
    let kneedle_k = kneedle(&curve)?;
    let (chosen_k, bumped) = bump_rule(&curve, kneedle_k, threshold);
    Ok(KSelectionResult {
        chosen_k,
        normalized_errors: curve,
        kneedle_k,
        bumped,
    })
}

/// Picks the number of color clusters (series + background) for an image.
pub fn select_k(img: &RasterImage, seed: u64, cfg: &ClusterConfig) -> Result<KSelectionResult> {
    let (curve, sse1) = sse_curve(img, seed, cfg)?;
    if sse1 == 0.0 {
        // A single color has nothing to separate.
        return Ok(KSelectionResult {
            chosen_k: 1,
            normalized_errors: curve,
            kneedle_k: 1,
            bumped: false,
        });
    }
    select_k_from_curve(curve, cfg.kneedle_threshold)
}
