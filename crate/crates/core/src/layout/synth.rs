//! Seeded generator of GUI-like application models: a header bar, a
//! sidebar of buttons and a grid of cards over a plain background.
//!
//! Pages are laid out on an 8-column grid of square units with 6 or 8
//! rows, so unit boundaries coincide with the scorer's cell grid after
//! preprocessing.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{ActionKind, NodeState};
use crate::raster::{Bounds, Rgb};
use crate::sim::{AppModel, Effect, PageSpec, TransitionRule, Trigger, WidgetSpec};

pub const GRID_COLUMNS: u32 = 8;

const PALETTE: [Rgb; 10] = [
    Rgb::new(230, 57, 70),
    Rgb::new(29, 53, 87),
    Rgb::new(69, 123, 157),
    Rgb::new(42, 157, 143),
    Rgb::new(233, 196, 106),
    Rgb::new(244, 162, 97),
    Rgb::new(106, 76, 147),
    Rgb::new(0, 122, 255),
    Rgb::new(52, 199, 89),
    Rgb::new(255, 45, 85),
];

fn widget(name: String, role: &str, bounds: Bounds, fill: Rgb) -> WidgetSpec {
    let actions = match role {
        "button" => BTreeSet::from([ActionKind::Click]),
        "text" => BTreeSet::from([ActionKind::SetText, ActionKind::Focus]),
        _ => BTreeSet::new(),
    };
    WidgetSpec {
        name,
        role: role.into(),
        bounds,
        fill,
        states: BTreeSet::from([NodeState::Visible, NodeState::Enabled]),
        actions,
        text: None,
    }
}

fn pick(rng: &mut ChaCha8Rng, background: Rgb, avoid: &[Rgb]) -> Rgb {
    let candidates: Vec<Rgb> = PALETTE
        .iter()
        .copied()
        .filter(|c| c.distance(background) >= 120.0 && avoid.iter().all(|a| a.distance(*c) >= 80.0))
        .collect();
    *candidates
        .choose(rng)
        .unwrap_or_else(|| PALETTE.choose(rng).expect("palette is non-empty"))
}

/// Splits the `cols` x `rows` block at (`c0`, `r0`) into cards of at most
/// three units per side.
fn split_cards(rng: &mut ChaCha8Rng, c0: u32, r0: u32, cols: u32, rows: u32, out: &mut Vec<(u32, u32, u32, u32)>) {
    let can_h = cols > 3 || (cols > 1 && rng.gen_bool(0.3));
    let can_v = rows > 3 || (rows > 1 && rng.gen_bool(0.3));
    if can_h && (!can_v || cols >= rows) {
        let cut = rng.gen_range(1..cols);
        split_cards(rng, c0, r0, cut, rows, out);
        split_cards(rng, c0 + cut, r0, cols - cut, rows, out);
    } else if can_v {
        let cut = rng.gen_range(1..rows);
        split_cards(rng, c0, r0, cols, cut, out);
        split_cards(rng, c0, r0 + cut, cols, rows - cut, out);
    } else {
        out.push((c0, r0, cols, rows));
    }
}

/// One page on a grid of `unit`-sized squares, `rows` high.
pub fn synth_page(rng: &mut ChaCha8Rng, unit: u32, rows: u32) -> PageSpec {
    let dark = rng.gen_bool(0.3);
    let background = if dark { Rgb::new(28, 28, 32) } else { Rgb::new(246, 246, 246) };
    let inset = (unit / 10).max(1);
    let cell = |c: u32, r: u32, cols: u32, rws: u32| Bounds {
        x: c * unit + inset,
        y: r * unit + inset,
        w: cols * unit - 2 * inset,
        h: rws * unit - 2 * inset,
    };
    let mut widgets = Vec::new();

    let header_fill = pick(rng, background, &[]);
    widgets.push(widget("Header".into(), "label", cell(0, 0, GRID_COLUMNS, 1), header_fill));

    let side = rng.gen_range(1..=2u32);
    let side_fill = pick(rng, background, &[header_fill]);
    let mut n = 0;
    for r in 1..rows {
        if r > 1 && rng.gen_bool(0.2) {
            continue;
        }
        n += 1;
        widgets.push(widget(format!("Nav {n}"), "button", cell(0, r, side, 1), side_fill));
    }

    let mut cards = Vec::new();
    split_cards(rng, side, 1, GRID_COLUMNS - side, rows - 1, &mut cards);
    let mut last = vec![header_fill, side_fill];
    for (i, (c, r, cols, rws)) in cards.into_iter().enumerate() {
        if rng.gen_bool(0.1) {
            continue;
        }
        let fill = pick(rng, background, &last[last.len() - 2..]);
        last.push(fill);
        let role = if rng.gen_bool(0.25) { "text" } else { "panel" };
        widgets.push(widget(format!("Card {}", i + 1), role, cell(c, r, cols, rws), fill));
    }
    PageSpec {
        canvas: Bounds {
            x: 0,
            y: 0,
            w: GRID_COLUMNS * unit,
            h: rows * unit,
        },
        background,
        widgets,
    }
}

/// A two-page app; `Nav 1` on `main` opens `details`.
pub fn synth_app(seed: u64) -> AppModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = rng.gen_range(5..=10u32) * 8;
    let rows = if rng.gen_bool(0.5) { 6 } else { 8 };
    let main = synth_page(&mut rng, unit, rows);
    let details = synth_page(&mut rng, unit, rows);
    AppModel {
        initial_page: "main".into(),
        pages: BTreeMap::from([("main".into(), main), ("details".into(), details)]),
        transitions: vec![TransitionRule {
            on: Trigger {
                name: "Nav 1".into(),
                role: Some("button".into()),
                action: ActionKind::Click,
                payload: None,
            },
            effects: vec![Effect::Navigate("details".into())],
        }],
        crash_on_start: None,
        start_delay: 0.0,
        faults: Vec::new(),
    }
}
