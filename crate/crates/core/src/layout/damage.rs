//! Layout damage injected at the app-model level, and the linear
//! weight-penalty labels attached to damaged variants.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::raster::{Bounds, Rgb};
use crate::sim::PageSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageKind {
    Deletion,
    Shift,
    Collapse,
    Style,
}

impl DamageKind {
    pub const ALL: [DamageKind; 4] = [
        DamageKind::Deletion,
        DamageKind::Shift,
        DamageKind::Collapse,
        DamageKind::Style,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    pub kind: DamageKind,
    /// Extent of the damage in `(0, 1]`.
    pub severity: f64,
}

impl DamageSpec {
    pub fn new(kind: DamageKind, severity: f64) -> Option<Self> {
        (severity > 0.0 && severity <= 1.0).then_some(Self { kind, severity })
    }
}

/// Per-kind score deduction at full severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyWeights {
    pub deletion: f64,
    pub shift: f64,
    pub collapse: f64,
    pub style: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            deletion: 0.25,
            shift: 0.15,
            collapse: 0.35,
            style: 0.10,
        }
    }
}

impl PenaltyWeights {
    pub fn weight(&self, kind: DamageKind) -> f64 {
        match kind {
            DamageKind::Deletion => self.deletion,
            DamageKind::Shift => self.shift,
            DamageKind::Collapse => self.collapse,
            DamageKind::Style => self.style,
        }
    }

    /// Largest penalty reachable with every kind at full severity.
    pub fn total(&self) -> f64 {
        DamageKind::ALL.iter().map(|&k| self.weight(k)).sum()
    }
}

/// `clamp(1 - sum(weight(kind) * severity), 0, 1)`.
pub fn label_of(damages: &[DamageSpec], weights: &PenaltyWeights) -> f64 {
    let penalty: f64 = damages
        .iter()
        .map(|d| weights.weight(d.kind) * d.severity)
        .sum();
    (1.0 - penalty).clamp(0.0, 1.0)
}

/// Splits `penalty` over kinds in proportion to `shares`, capping each
/// severity at 1 and pouring the excess into the remaining kinds (listed
/// kinds first, then the others). Severities are non-decreasing in
/// `penalty`, so damages drawn for growing penalties nest.
pub(crate) fn distribute(
    penalty: f64,
    shares: &[(DamageKind, f64)],
    weights: &PenaltyWeights,
) -> Vec<DamageSpec> {
    let mut severity = [0.0f64; 4];
    let idx = |k: DamageKind| DamageKind::ALL.iter().position(|&x| x == k).unwrap();
    let mut remaining = penalty;
    let mut pools: Vec<Vec<(DamageKind, f64)>> = vec![shares.to_vec()];
    let rest: Vec<_> = DamageKind::ALL
        .iter()
        .filter(|k| !shares.iter().any(|(s, _)| s == *k))
        .map(|&k| (k, weights.weight(k)))
        .collect();
    pools.push(rest);
    for pool in pools {
        let mut open: Vec<(DamageKind, f64)> = pool.into_iter().filter(|(_, s)| *s > 0.0).collect();
        while remaining > 1e-12 && !open.is_empty() {
            let total_share: f64 = open.iter().map(|(_, s)| s).sum();
            let mut capped = false;
            let mut spent = 0.0;
            for &(k, share) in &open {
                let w = weights.weight(k);
                let want = remaining * share / total_share;
                let room = (1.0 - severity[idx(k)]) * w;
                let take = want.min(room);
                severity[idx(k)] += take / w;
                spent += take;
                if take < want {
                    capped = true;
                }
            }
            remaining -= spent;
            open.retain(|(k, _)| severity[idx(*k)] < 1.0 - 1e-12);
            if !capped {
                break;
            }
        }
    }
    DamageKind::ALL
        .iter()
        .zip(severity)
        .filter(|(_, s)| *s > 1e-12)
        .map(|(&kind, s)| DamageSpec {
            kind,
            severity: s.min(1.0),
        })
        .collect()
}

/// Uniformly scales canvas and widget bounds.
pub fn scale_page(page: &PageSpec, factor: f64) -> PageSpec {
    let s = |v: u32| ((f64::from(v) * factor).round() as u32).max(1);
    let scale_bounds = |b: Bounds, limit: Bounds| {
        let x = ((f64::from(b.x) * factor).round() as u32).min(limit.right().saturating_sub(1));
        let y = ((f64::from(b.y) * factor).round() as u32).min(limit.bottom().saturating_sub(1));
        Bounds {
            x,
            y,
            w: s(b.w).min(limit.right() - x),
            h: s(b.h).min(limit.bottom() - y),
        }
    };
    let canvas = Bounds {
        x: 0,
        y: 0,
        w: s(page.canvas.w),
        h: s(page.canvas.h),
    };
    let mut out = page.clone();
    out.canvas = canvas;
    for w in &mut out.widgets {
        let rel = Bounds {
            x: w.bounds.x - page.canvas.x,
            y: w.bounds.y - page.canvas.y,
            ..w.bounds
        };
        w.bounds = scale_bounds(rel, canvas);
    }
    out
}

fn far_color(c: Rgb) -> Rgb {
    let inverse = Rgb::new(255 - c.r, 255 - c.g, 255 - c.b);
    if inverse.distance(c) >= 160.0 {
        inverse
    } else if c.luma() > 128.0 {
        Rgb::new(20, 20, 20)
    } else {
        Rgb::new(235, 235, 235)
    }
}

/// Applies `damages` to `page`. Widgets are visited in a seed-determined
/// order and consumed by area: each kind claims a share of the total widget
/// area equal to its share of the total weight times its severity, so the
/// damaged area tracks the penalty and, for a fixed seed, larger penalties
/// damage a superset of widgets.
pub fn apply_damage(page: &PageSpec, damages: &[DamageSpec], weights: &PenaltyWeights, seed: u64) -> PageSpec {
    let mut out = page.clone();
    let total_weight = weights.total();
    let total_area: f64 = page.widgets.iter().map(|w| w.bounds.area() as f64).sum();
    if page.widgets.is_empty() || total_weight <= 0.0 || total_area <= 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..page.widgets.len()).collect();
    order.shuffle(&mut rng);
    let flips: Vec<bool> = (0..page.widgets.len()).map(|_| rng.gen_bool(0.5)).collect();

    let mut bounds = Vec::with_capacity(DamageKind::ALL.len());
    let mut acc = 0.0;
    for kind in DamageKind::ALL {
        let severity = damages
            .iter()
            .filter(|d| d.kind == kind)
            .map(|d| d.severity)
            .fold(0.0f64, f64::max);
        acc += weights.weight(kind) * severity / total_weight;
        bounds.push((acc, kind));
    }

    let canvas = page.canvas;
    let mut deleted = Vec::new();
    let mut covered = 0.0;
    for i in order {
        let area = page.widgets[i].bounds.area() as f64;
        let mid = (covered + area / 2.0) / total_area;
        covered += area;
        let Some(&(_, kind)) = bounds.iter().find(|(b, _)| mid < *b) else {
            continue;
        };
        let w = &mut out.widgets[i];
        match kind {
            DamageKind::Deletion => deleted.push(i),
            DamageKind::Style => w.fill = far_color(w.fill),
            DamageKind::Collapse => w.bounds.h = (w.bounds.h / 8).max(1),
            DamageKind::Shift => {
                let b = &mut w.bounds;
                let step = i64::from(b.w / 2).max(1);
                let right = i64::from(b.x) + step + i64::from(b.w) <= i64::from(canvas.right());
                let left = i64::from(b.x) - step >= i64::from(canvas.x);
                let dx = match (flips[i], left, right) {
                    (true, true, _) | (false, true, false) => -step,
                    _ => step,
                };
                b.x = clamp_axis(i64::from(b.x) + dx, b.w, canvas.x, canvas.right());
            }
        }
    }
    deleted.sort_unstable_by(|a, b| b.cmp(a));
    for i in deleted {
        out.widgets.remove(i);
    }
    out
}

fn clamp_axis(pos: i64, extent: u32, lo: u32, hi: u32) -> u32 {
    let max = i64::from(hi.saturating_sub(extent).max(lo));
    pos.clamp(i64::from(lo), max) as u32
}
