//! Budgeted alert-zone expansion.
//!
//! A zone `A` may grow by at most `W = ⌊α·|A|⌋` base cells if doing so
//! lowers the pairing cost of its token cover. Expansion runs bottom-up over
//! the hierarchy. At level `k` every even-aligned `2×2` block inside the
//! zone's (even-rounded) bounding box that is partly covered yields patch
//! groups; a multiple-choice knapsack picks at most one patch per group
//! within the remaining budget; the picks are kept only if the pairing cost
//! of the enlarged zone does not rise. Fully covered blocks then become
//! single cells of level `k + 1` and the budget is divided by four.
//!
//! Cells inside a `2×2` block are numbered in spiral order:
//! `0 → (x, y)`, `1 → (x+1, y)`, `2 → (x+1, y+1)`, `3 → (x, y+1)`.

use std::collections::{BTreeSet, HashSet};
use std::hash::BuildHasher;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::encoding::{self, AlertZone, CellId, Encoding, EncodingError, GridSpec};
use crate::minimize::{minimize_codes, MinimizeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("expansion ratio {0} is outside [0, 1]")]
    BadAlpha(f64),
    #[error("budget {0} is negative")]
    NegativeBudget(i64),
    #[error("a 2x2 block with {0} zone cells has no patches")]
    NotACandidate(usize),
    #[error("spiral index {0} is outside 0..=3")]
    BadSpiralIndex(usize),
    #[error("zone must be at level 0, got level {0}")]
    NotBaseLevel(u32),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
}

/// How patch gains are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GainMode {
    /// Non-wildcards saved by minimizing the block's cells with and without
    /// the patch.
    #[default]
    Measured,
    /// Fixed table by zone/non-zone counts, `2·k` for a block completed
    /// from three zone cells.
    Formula,
}

/// Which patches a block with a single zone cell offers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PatchMode {
    /// The next cell in spiral order, or the whole block.
    #[default]
    Compact,
    /// Either neighbouring cell, or the whole block.
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpansionConfig {
    pub encoding: Encoding,
    pub gain: GainMode,
    pub patches: PatchMode,
}

/// Cell positions (spiral indices) of a patch before coordinates are known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalPatch {
    pub attached: Vec<usize>,
    pub attaching: Vec<usize>,
}

/// Cells to add at one level together with the zone cells they complete.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub attached: Vec<CellId>,
    pub attaching: Vec<CellId>,
    pub cost: u64,
    pub gain: u64,
}

/// Mutually exclusive patches from one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGroup {
    pub patches: Vec<Patch>,
}

/// A knapsack item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Item {
    pub cost: u64,
    pub gain: u64,
}

/// Optimal multiple-choice knapsack solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    /// `(group, item)` indices, in group order.
    pub picks: Vec<(usize, usize)>,
    pub gain: u64,
    pub cost: u64,
}

/// Bounding box of `cells` widened to whole `2×2` blocks:
/// `(min_x, max_x, min_y, max_y)` with even minima and odd maxima, clamped
/// to the grid.
pub fn find_boundary(d_k: u32, cells: impl IntoIterator<Item = (u32, u32)>) -> Option<(u32, u32, u32, u32)> {
    let mut it = cells.into_iter();
    let (x0, y0) = it.next()?;
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (x0, x0, y0, y0);
    for (x, y) in it {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let top = d_k.saturating_sub(1);
    Some((
        min_x & !1,
        (max_x | 1).min(top),
        min_y & !1,
        (max_y | 1).min(top),
    ))
}

/// Coordinates of spiral index `i` in the block whose top-left cell is `(x, y)`.
pub fn recover_coord(i: usize, x: u32, y: u32) -> Result<(u32, u32), ExpansionError> {
    match i {
        0 => Ok((x, y)),
        1 => Ok((x + 1, y)),
        2 => Ok((x + 1, y + 1)),
        3 => Ok((x, y + 1)),
        _ => Err(ExpansionError::BadSpiralIndex(i)),
    }
}

/// Which cells of the block at `(x, y)` belong to the zone, in spiral order.
pub fn mark_zone_cells<S: BuildHasher>(zone: &HashSet<(u32, u32), S>, x: u32, y: u32) -> [bool; 4] {
    std::array::from_fn(|i| {
        let c = recover_coord(i, x, y).expect("index below 4");
        zone.contains(&c)
    })
}

/// Patch groups of a block with one to three zone cells.
pub fn patch_groups_inside_area(
    marked: [bool; 4],
    mode: PatchMode,
) -> Result<Vec<Vec<LocalPatch>>, ExpansionError> {
    let zone: Vec<usize> = (0..4).filter(|&i| marked[i]).collect();
    let free: Vec<usize> = (0..4).filter(|&i| !marked[i]).collect();
    let single = |cell: usize, at: usize| LocalPatch {
        attached: vec![cell],
        attaching: vec![at],
    };
    match zone[..] {
        [z] => {
            let mut group = vec![single((z + 1) % 4, z)];
            if mode == PatchMode::Full {
                group.push(single((z + 3) % 4, z));
            }
            group.push(LocalPatch {
                attached: free,
                attaching: zone,
            });
            Ok(vec![group])
        }
        [a, b] if (a + 2) % 4 == b => Ok(vec![
            vec![single((a + 1) % 4, a)],
            vec![single((b + 1) % 4, b)],
        ]),
        [_, _] | [_, _, _] => Ok(vec![vec![LocalPatch {
            attached: free,
            attaching: zone,
        }]]),
        _ => Err(ExpansionError::NotACandidate(zone.len())),
    }
}

/// Gain by the fixed table: 1 for a `1×2` patch; for a completed block 2,
/// 1 or `2·k` with one, two or three zone cells.
pub fn formula_gain(n_zone: usize, n_added: usize, k: u32) -> u64 {
    match (n_zone + n_added, n_zone) {
        (2, _) => 1,
        (4, 1) => 2,
        (4, 2) => 1,
        (4, 3) => 2 * u64::from(k),
        _ => 0,
    }
}

fn cover_non_wildcards(
    grid: &GridSpec,
    cells: impl Iterator<Item = CellId>,
    k: u32,
    encoding: Encoding,
) -> Result<u64, ExpansionError> {
    let codes = cells
        .map(|c| encoding::cell_code(grid, c, encoding))
        .collect::<Result<Vec<_>, _>>()?;
    let width = 2 * (grid.log2()? - k);
    Ok(minimize_codes(&codes, width)?.non_wildcards())
}

/// Non-wildcards saved by covering `attaching ∪ attached` instead of
/// `attaching` alone, with level-`k` codes.
pub fn measured_gain(
    grid: &GridSpec,
    k: u32,
    attaching: &[CellId],
    attached: &[CellId],
    encoding: Encoding,
) -> Result<u64, ExpansionError> {
    let before = cover_non_wildcards(grid, attaching.iter().copied(), k, encoding)?;
    let after = cover_non_wildcards(grid, attaching.iter().chain(attached).copied(), k, encoding)?;
    Ok(before.saturating_sub(after))
}

/// Places a local patch at block `(x, y)` of level `k` and sets its cost and gain.
pub fn cost_gain(
    local: &LocalPatch,
    x: u32,
    y: u32,
    k: u32,
    grid: &GridSpec,
    cfg: &ExpansionConfig,
) -> Result<Patch, ExpansionError> {
    let place = |ids: &[usize]| -> Result<Vec<CellId>, ExpansionError> {
        ids.iter()
            .map(|&i| recover_coord(i, x, y).map(|(cx, cy)| CellId::new(cx, cy, k)))
            .collect()
    };
    let attached = place(&local.attached)?;
    let attaching = place(&local.attaching)?;
    let gain = match cfg.gain {
        GainMode::Formula => formula_gain(attaching.len(), attached.len(), k),
        GainMode::Measured => measured_gain(grid, k, &attaching, &attached, cfg.encoding)?,
    };
    Ok(Patch {
        cost: attached.len() as u64,
        gain,
        attached,
        attaching,
    })
}

/// Patch groups of every candidate block at level `k`.
pub fn patch_groups_level<S: BuildHasher>(
    grid: &GridSpec,
    k: u32,
    zone_k: &HashSet<(u32, u32), S>,
    cfg: &ExpansionConfig,
) -> Result<Vec<PatchGroup>, ExpansionError> {
    let d_k = grid.side_at(k);
    let Some((min_x, max_x, min_y, max_y)) = find_boundary(d_k, zone_k.iter().copied()) else {
        return Ok(Vec::new());
    };
    let mut groups = Vec::new();
    let mut x = min_x;
    while x < max_x {
        let mut y = min_y;
        while y < max_y {
            let marked = mark_zone_cells(zone_k, x, y);
            let count = marked.iter().filter(|&&m| m).count();
            if (1..4).contains(&count) {
                for local in patch_groups_inside_area(marked, cfg.patches)? {
                    let patches = local
                        .iter()
                        .map(|p| cost_gain(p, x, y, k, grid, cfg))
                        .collect::<Result<_, _>>()?;
                    groups.push(PatchGroup { patches });
                }
            }
            y += 2;
        }
        x += 2;
    }
    Ok(groups)
}

/// Picks at most one item per group, maximizing total gain with total cost
/// at most `w`.
pub fn knapsack(w: i64, groups: &[Vec<Item>]) -> Result<Selection, ExpansionError> {
    if w < 0 {
        return Err(ExpansionError::NegativeBudget(w));
    }
    let cap = w as usize;
    let n = groups.len();
    let mut table = vec![vec![0u64; cap + 1]; n + 1];
    for i in 1..=n {
        for c in 0..=cap {
            let mut best = table[i - 1][c];
            for item in &groups[i - 1] {
                if item.cost as usize <= c {
                    best = best.max(item.gain + table[i - 1][c - item.cost as usize]);
                }
            }
            table[i][c] = best;
        }
    }
    let gain = table[n][cap];
    let mut picks = Vec::new();
    let mut c = cap;
    for i in (1..=n).rev() {
        if table[i][c] == table[i - 1][c] {
            continue;
        }
        let j = groups[i - 1]
            .iter()
            .position(|item| {
                item.cost as usize <= c
                    && table[i][c] == item.gain + table[i - 1][c - item.cost as usize]
            })
            .expect("a better value comes from some item of the group");
        picks.push((i - 1, j));
        c -= groups[i - 1][j].cost as usize;
    }
    picks.reverse();
    let cost = picks.iter().map(|&(g, j)| groups[g][j].cost).sum();
    Ok(Selection { picks, gain, cost })
}

/// Optimal patches, at most one per group, with total cost at most `w`.
pub fn knapsack_for_groups(w: i64, groups: &[PatchGroup]) -> Result<Vec<Patch>, ExpansionError> {
    let items: Vec<Vec<Item>> = groups
        .iter()
        .map(|g| {
            g.patches
                .iter()
                .map(|p| Item {
                    cost: p.cost,
                    gain: p.gain,
                })
                .collect()
        })
        .collect();
    let sel = knapsack(w, &items)?;
    Ok(sel
        .picks
        .into_iter()
        .map(|(g, j)| groups[g].patches[j].clone())
        .collect())
}

/// Patch groups of level `k`, reduced to the knapsack optimum under `w`.
pub fn select_patches_level<S: BuildHasher>(
    w: i64,
    grid: &GridSpec,
    k: u32,
    zone_k: &HashSet<(u32, u32), S>,
    cfg: &ExpansionConfig,
) -> Result<Vec<Patch>, ExpansionError> {
    if w < 0 {
        return Err(ExpansionError::NegativeBudget(w));
    }
    if w == 0 {
        return Ok(Vec::new());
    }
    let groups = patch_groups_level(grid, k, zone_k, cfg)?;
    knapsack_for_groups(w, &groups)
}

/// Pairings needed to evaluate the minimized token cover of a set of base cells.
pub fn zone_pairings(
    grid: &GridSpec,
    cells: &BTreeSet<CellId>,
    encoding: Encoding,
) -> Result<u64, ExpansionError> {
    let codes = cells
        .iter()
        .map(|&c| encoding::cell_code(grid, c, encoding))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(minimize_codes(&codes, 2 * grid.log2()?)?.pairing_cost())
}

/// What happened at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelReport {
    pub k: u32,
    /// Budget entering the level, in level-`k` cells.
    pub budget: i64,
    pub patches: Vec<Patch>,
    /// Base cells the patches would add.
    pub added: usize,
    pub accepted: bool,
    pub pairings_before: u64,
    pub pairings_after: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedZone {
    pub cells: BTreeSet<CellId>,
    pub origin: AlertZone,
    pub alpha: f64,
    /// `⌊α·|A|⌋`.
    pub budget: i64,
    pub pairings_before: u64,
    pub pairings_after: u64,
    pub levels: Vec<LevelReport>,
}

impl ExpandedZone {
    pub fn added(&self) -> usize {
        self.cells.len() - self.origin.len()
    }

    /// `pairings(A) / pairings(Â)`.
    pub fn improvement_factor(&self) -> f64 {
        self.pairings_before as f64 / self.pairings_after as f64
    }

    pub fn to_zone(&self, grid: &GridSpec) -> Result<AlertZone, EncodingError> {
        AlertZone::new(grid, self.cells.iter().copied(), self.origin.shape())
    }
}

struct PairingCache<'a> {
    grid: &'a GridSpec,
    encoding: Encoding,
    seen: FxHashMap<Vec<CellId>, u64>,
}

impl PairingCache<'_> {
    fn get(&mut self, cells: &BTreeSet<CellId>) -> Result<u64, ExpansionError> {
        let key: Vec<CellId> = cells.iter().copied().collect();
        if let Some(&v) = self.seen.get(&key) {
            return Ok(v);
        }
        let v = zone_pairings(self.grid, cells, self.encoding)?;
        self.seen.insert(key, v);
        Ok(v)
    }
}

/// Enlarges a level-0 zone by at most `⌊α·|A|⌋` base cells without raising
/// its pairing cost.
///
/// Stops when the pairing check rejects a level's patches, when the budget
/// runs out, or when no fully covered block is left to carry to the next
/// level. Only fully covered `2×2` blocks are carried up, so every cell of
/// the working zone at level `k` stands for `4^k` base cells of the result.
pub fn expand_zone(
    alpha: f64,
    zone: &AlertZone,
    grid: &GridSpec,
    cfg: &ExpansionConfig,
) -> Result<ExpandedZone, ExpansionError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ExpansionError::BadAlpha(alpha));
    }
    if zone.level() != 0 {
        return Err(ExpansionError::NotBaseLevel(zone.level()));
    }
    if cfg.encoding == Encoding::Baseline {
        return Err(EncodingError::NotBinary(Encoding::Baseline).into());
    }
    let log_d = grid.log2()?;
    let budget = (alpha * zone.len() as f64).floor() as i64;
    let mut cache = PairingCache {
        grid,
        encoding: cfg.encoding,
        seen: FxHashMap::default(),
    };
    let mut expanded: BTreeSet<CellId> = zone.cells().clone();
    let pairings_before = cache.get(&expanded)?;
    let mut current: FxHashSet<(u32, u32)> = zone.cells().iter().map(|c| (c.x, c.y)).collect();
    let mut w = budget;
    let mut levels = Vec::new();

    for k in 0..log_d {
        if w <= 0 || current.is_empty() {
            break;
        }
        let patches = select_patches_level(w, grid, k, &current, cfg)?;
        let mut candidate = expanded.clone();
        for p in &patches {
            for c in &p.attached {
                candidate.extend(c.base_cells());
            }
        }
        let before = cache.get(&expanded)?;
        let after = cache.get(&candidate)?;
        let accepted = after <= before;
        levels.push(LevelReport {
            k,
            budget: w,
            added: candidate.len() - expanded.len(),
            patches: patches.clone(),
            accepted,
            pairings_before: before,
            pairings_after: after,
        });
        if !accepted {
            break;
        }
        expanded = candidate;
        for p in &patches {
            w -= p.cost as i64;
            current.extend(p.attached.iter().map(|c| (c.x, c.y)));
        }
        w /= 4;
        if w <= 0 {
            break;
        }
        current = coarsen(&current);
    }

    let pairings_after = cache.get(&expanded)?;
    Ok(ExpandedZone {
        cells: expanded,
        origin: zone.clone(),
        alpha,
        budget,
        pairings_before,
        pairings_after,
        levels,
    })
}

/// Parents of the fully covered `2×2` blocks.
fn coarsen(cells: &FxHashSet<(u32, u32)>) -> FxHashSet<(u32, u32)> {
    cells
        .iter()
        .filter(|&&(x, y)| x % 2 == 0 && y % 2 == 0)
        .filter(|&&(x, y)| {
            cells.contains(&(x + 1, y)) && cells.contains(&(x, y + 1)) && cells.contains(&(x + 1, y + 1))
        })
        .map(|&(x, y)| (x / 2, y / 2))
        .collect()
}
