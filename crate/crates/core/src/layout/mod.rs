//! Layout similarity: the [`Scorer`] contract, a deterministic dual-scale
//! grid scorer, and the perturbation corpus used to train or evaluate
//! learned scorers.

mod corpus;
mod damage;
mod sidecar;
pub mod synth;

use crate::raster::{dominant_color, RasterImage, Rgb, MAX_COLOR_DISTANCE};

pub use corpus::{
    corpus_split, gen_variants, write_corpus, Corpus, CorpusError, LabeledPair, ManifestRecord,
    PageInstance, Provenance, Split, Variant, DAMAGED_VARIANTS, SCALED_VARIANTS, UNRELATED_VARIANTS,
    VARIANTS_PER_PAGE,
};
pub use damage::{apply_damage, label_of, scale_page, DamageKind, DamageSpec, PenaltyWeights};
pub use sidecar::{serve_grid, SidecarRequest, SidecarResponse, SidecarScorer};

/// Side length of the square scorer input.
pub const INPUT_SIZE: u32 = 640;
/// Cells per side of the local grid.
pub const GRID_CELLS: u32 = 8;
/// Colors closer than this count as the same.
pub const COLOR_TOLERANCE: f64 = 80.0;
/// Weight of the global (whole-image) term; the local grid gets the rest.
pub const GLOBAL_WEIGHT: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("empty image")]
    EmptyImage,
    #[error("scorer backend: {0}")]
    Backend(String),
}

/// Similarity between a reference and a generated screenshot, in `[0, 1]`.
/// Implementations must return exactly 1 for identical inputs.
pub trait Scorer: Send + Sync {
    fn score(&self, reference: &RasterImage, generated: &RasterImage) -> Result<f64, ScoreError>;
}

/// Built-in deterministic scorer, see [`grid_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GridScorer;

impl Scorer for GridScorer {
    fn score(&self, reference: &RasterImage, generated: &RasterImage) -> Result<f64, ScoreError> {
        if reference.is_empty() || generated.is_empty() {
            return Err(ScoreError::EmptyImage);
        }
        Ok(grid_score(reference, generated))
    }
}

/// Aspect-preserving fit into a black 640x640 square, centered.
pub fn preprocess(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    if w == INPUT_SIZE && h == INPUT_SIZE {
        return img.clone();
    }
    let (nw, nh) = fitted_size(w, h);
    let mut out = RasterImage::filled(INPUT_SIZE, INPUT_SIZE, Rgb::BLACK);
    out.paste(&img.resize(nw, nh), (INPUT_SIZE - nw) / 2, (INPUT_SIZE - nh) / 2);
    out
}

/// Size of `w` x `h` scaled by `min(640/w, 640/h)`, rounded, at least 1.
pub fn fitted_size(w: u32, h: u32) -> (u32, u32) {
    let scale = (f64::from(INPUT_SIZE) / f64::from(w)).min(f64::from(INPUT_SIZE) / f64::from(h));
    let fit = |v: u32| ((f64::from(v) * scale).round() as u32).clamp(1, INPUT_SIZE);
    (fit(w), fit(h))
}

fn cell_dominants(img: &RasterImage) -> Vec<Rgb> {
    let cell = INPUT_SIZE / GRID_CELLS;
    let mut out = Vec::with_capacity((GRID_CELLS * GRID_CELLS) as usize);
    let px = img.pixels();
    for cy in 0..GRID_CELLS {
        for cx in 0..GRID_CELLS {
            let rows = (cy * cell..(cy + 1) * cell).flat_map(|y| {
                let start = (y * INPUT_SIZE + cx * cell) as usize;
                px[start..start + cell as usize].iter().copied()
            });
            out.push(dominant_color(rows).expect("cells are non-empty"));
        }
    }
    out
}

/// Dual-scale similarity on preprocessed inputs:
/// `0.3 * global + 0.7 * local`, where `global` is one minus the normalized
/// distance between mean colors and `local` is the fraction of the 8x8
/// cells whose dominant colors are within [`COLOR_TOLERANCE`].
pub fn grid_score(reference: &RasterImage, generated: &RasterImage) -> f64 {
    if reference == generated {
        return 1.0;
    }
    let a = preprocess(reference);
    let b = preprocess(generated);
    let (ma, mb) = (a.mean_color(), b.mean_color());
    let mean_dist = ma
        .iter()
        .zip(&mb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let global = 1.0 - mean_dist / MAX_COLOR_DISTANCE;
    let (ca, cb) = (cell_dominants(&a), cell_dominants(&b));
    let close = ca
        .iter()
        .zip(&cb)
        .filter(|(x, y)| x.distance(**y) < COLOR_TOLERANCE)
        .count();
    let local = close as f64 / ca.len() as f64;
    (GLOBAL_WEIGHT * global + (1.0 - GLOBAL_WEIGHT) * local).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaeError {
    #[error("predictions ({preds}) and labels ({labels}) differ in length")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("no samples")]
    Empty,
}

/// Mean absolute error.
pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64, MaeError> {
    if preds.len() != labels.len() {
        return Err(MaeError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MaeError::Empty);
    }
    let total: f64 = preds.iter().zip(labels).map(|(p, y)| (y - p).abs()).sum();
    Ok(total / preds.len() as f64)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when the
/// lengths differ, there are fewer than two samples, or either side is
/// constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}
