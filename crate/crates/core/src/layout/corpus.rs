//! Perturbation corpus: ten labeled variants per page and an 8:1:1 split.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::damage::{apply_damage, distribute, label_of, scale_page, DamageKind, DamageSpec, PenaltyWeights};
use crate::raster::{RasterError, RasterImage};
use crate::sim::{render_page, AppModel, PageSpec};

pub const SCALED_VARIANTS: usize = 3;
pub const DAMAGED_VARIANTS: usize = 5;
pub const UNRELATED_VARIANTS: usize = 2;
pub const VARIANTS_PER_PAGE: usize = SCALED_VARIANTS + DAMAGED_VARIANTS + UNRELATED_VARIANTS;
/// Scaled variants draw a factor uniformly from `1 +- SCALE_RANGE`.
pub const SCALE_RANGE: f64 = 0.3;
const MIN_PENALTY: f64 = 0.1;
const MAX_PENALTY: f64 = 0.9;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no other page available for unrelated variants")]
    EmptyPool,
    #[error("corpus needs at least 10 pairs, got {0}")]
    TooFew(usize),
    #[error("penalty weights allow at most {0:.3} total penalty; need more than {MIN_PENALTY}")]
    WeightsTooSmall(f64),
    #[error("image: {0}")]
    Image(#[from] RasterError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A renderable page plus a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PageInstance {
    pub id: String,
    pub page: PageSpec,
}

impl PageInstance {
    /// The model's initial page.
    pub fn from_model(id: impl Into<String>, model: &AppModel) -> Self {
        Self {
            id: id.into(),
            page: model.initial().clone(),
        }
    }

    pub fn render(&self) -> RasterImage {
        render_page(&self.page)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Scaled { factor: f64 },
    Damaged { damages: Vec<DamageSpec> },
    Unrelated { source: String },
}

/// A generated image with its similarity label against the page's render.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub image: RasterImage,
    pub label: f64,
    pub provenance: Provenance,
}

impl Variant {
    /// Total penalty for damaged variants.
    pub fn penalty(&self) -> Option<f64> {
        matches!(self.provenance, Provenance::Damaged { .. }).then(|| 1.0 - self.label)
    }
}

/// Builds the ten variants of `page`: three uniformly scaled copies
/// (label 1), five progressively damaged copies (weight-penalty labels,
/// strictly decreasing), and two renders of other pages from `pool`
/// (label 0). Deterministic in `seed`.
pub fn gen_variants(
    page: &PageInstance,
    pool: &[PageInstance],
    seed: u64,
    weights: &PenaltyWeights,
) -> Result<Vec<Variant>, CorpusError> {
    let others: Vec<&PageInstance> = pool.iter().filter(|p| p.id != page.id).collect();
    if others.is_empty() {
        return Err(CorpusError::EmptyPool);
    }
    let hi = MAX_PENALTY.min(weights.total());
    if hi <= MIN_PENALTY {
        return Err(CorpusError::WeightsTooSmall(weights.total()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(VARIANTS_PER_PAGE);

    for _ in 0..SCALED_VARIANTS {
        let factor = rng.gen_range(1.0 - SCALE_RANGE..=1.0 + SCALE_RANGE);
        out.push(Variant {
            image: render_page(&scale_page(&page.page, factor)),
            label: 1.0,
            provenance: Provenance::Scaled { factor },
        });
    }

    // One kind mix and one widget order per page; penalties rise through
    // five disjoint strata so labels strictly decrease and damage nests.
    let mut kinds = DamageKind::ALL.to_vec();
    kinds.shuffle(&mut rng);
    kinds.truncate(rng.gen_range(1..=kinds.len()));
    let shares: Vec<(DamageKind, f64)> = kinds.iter().map(|&k| (k, rng.gen_range(0.2..=1.0))).collect();
    let damage_seed: u64 = rng.gen();
    let stratum = (hi - MIN_PENALTY) / DAMAGED_VARIANTS as f64;
    for i in 0..DAMAGED_VARIANTS {
        let penalty = MIN_PENALTY + stratum * (i as f64 + rng.gen_range(0.05..0.95));
        let damages = distribute(penalty, &shares, weights);
        out.push(Variant {
            image: render_page(&apply_damage(&page.page, &damages, weights, damage_seed)),
            label: label_of(&damages, weights),
            provenance: Provenance::Damaged { damages },
        });
    }

    for _ in 0..UNRELATED_VARIANTS {
        let other = others[rng.gen_range(0..others.len())];
        out.push(Variant {
            image: other.render(),
            label: 0.0,
            provenance: Provenance::Unrelated {
                source: other.id.clone(),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub ref_path: PathBuf,
    pub gen_path: PathBuf,
    pub label: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Pairs partitioned into train/val/test index lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<LabeledPair>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Corpus {
    pub fn split_of(&self, index: usize) -> Option<Split> {
        if self.train.contains(&index) {
            Some(Split::Train)
        } else if self.val.contains(&index) {
            Some(Split::Val)
        } else if self.test.contains(&index) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

/// Seeded shuffle, then `floor(0.8n)` train, `floor(0.1n)` val, rest test.
pub fn corpus_split(pairs: Vec<LabeledPair>, seed: u64) -> Result<Corpus, CorpusError> {
    let n = pairs.len();
    if n < 10 {
        return Err(CorpusError::TooFew(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Corpus {
        pairs,
        train: order,
        val,
        test,
    })
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(rename = "ref")]
    pub ref_path: String,
    #[serde(rename = "gen")]
    pub gen_path: String,
    pub label: f64,
    pub provenance: Provenance,
    pub split: Split,
}

fn page_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 step keeps per-page streams independent
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Renders every page's variants under `out_dir/images/`, splits all pairs,
/// and writes `out_dir/manifest.jsonl`.
pub fn write_corpus(
    pages: &[PageInstance],
    seed: u64,
    weights: &PenaltyWeights,
    out_dir: &Path,
) -> Result<Vec<ManifestRecord>, CorpusError> {
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images)?;
    let mut pairs = Vec::new();
    for (i, page) in pages.iter().enumerate() {
        let variants = gen_variants(page, pages, page_seed(seed, i), weights)?;
        let dir = images.join(&page.id);
        std::fs::create_dir_all(&dir)?;
        let ref_rel = PathBuf::from("images").join(&page.id).join("ref.png");
        page.render().save_png(out_dir.join(&ref_rel))?;
        for (k, v) in variants.into_iter().enumerate() {
            let gen_rel = PathBuf::from("images").join(&page.id).join(format!("v{k}.png"));
            v.image.save_png(out_dir.join(&gen_rel))?;
            pairs.push(LabeledPair {
                ref_path: ref_rel.clone(),
                gen_path: gen_rel,
                label: v.label,
                provenance: v.provenance,
            });
        }
    }
    let corpus = corpus_split(pairs, seed)?;
    let records: Vec<ManifestRecord> = corpus
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| ManifestRecord {
            ref_path: p.ref_path.to_string_lossy().replace('\\', "/"),
            gen_path: p.gen_path.to_string_lossy().replace('\\', "/"),
            label: p.label,
            provenance: p.provenance.clone(),
            split: corpus.split_of(i).expect("splits partition the pairs"),
        })
        .collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("manifest.jsonl"))?);
    for r in &records {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    f.flush()?;
    Ok(records)
}
