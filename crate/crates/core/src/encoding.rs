//! Grid addressing and cell encodings.
//!
//! The domain is the unit square split into a `d × d` grid. Column `x` grows
//! to the right and row `y` grows downwards, so `(0, 0)` is the top-left
//! cell. A cell at hierarchy level `k` covers a `2^k × 2^k` block of base
//! cells.
//!
//! Three encodings map a cell to an HVE index vector:
//!
//! - **Baseline**: a one-hot vector of width `d²`, positions numbered
//!   row-major from 1 at the top-left cell.
//! - **Hierarchical**: a quadtree ID of width `2·log2 d`. Each level
//!   contributes two bits, coarsest level first: the horizontal half
//!   (left 0, right 1) then the vertical half (top 0, bottom 1).
//! - **Gray**: the reflected Gray code of `y` followed by that of `x`, each
//!   `log2 d` bits wide.
//!
//! Codes are handled as integers whose most significant bit is the first
//! character of the bit string.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::hve::{IndexVector, Pattern, Symbol};

/// Largest supported grid side.
pub const MAX_SIDE: u32 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("grid side {0} must be a power of two in 2..=1024")]
    NotPowerOfTwo(u32),
    #[error("grid side {0} is outside 1..=1024")]
    BadSide(u32),
    #[error("point ({0}, {1}) is outside the unit square")]
    PointOutOfDomain(f64, f64),
    #[error("cell ({x}, {y}) at level {k} is outside the grid")]
    OutOfBounds { x: u32, y: u32, k: u32 },
    #[error("level {k} exceeds the top level {max}")]
    BadLevel { k: u32, max: u32 },
    #[error("alert zone has no cells")]
    EmptyZone,
    #[error("zone mixes cells of levels {0} and {1}")]
    LevelMismatch(u32, u32),
    #[error("operation needs level-0 cells, got level {0}")]
    NotBaseLevel(u32),
    #[error("{0} encoding does not produce binary cell IDs")]
    NotBinary(Encoding),
    #[error("code {code} does not fit in {width} bits")]
    BadCode { code: u64, width: u32 },
    #[error("zone file: {0}")]
    Parse(String),
}

/// A square grid of `d × d` base cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    d: u32,
}

impl GridSpec {
    /// A grid usable with every encoding: `d` must be a power of two in `2..=1024`.
    pub fn new(d: u32) -> Result<Self, EncodingError> {
        if !(2..=MAX_SIDE).contains(&d) || !d.is_power_of_two() {
            return Err(EncodingError::NotPowerOfTwo(d));
        }
        Ok(Self { d })
    }

    /// A grid of any side in `1..=1024`. Only the baseline encoding accepts
    /// sides that are not powers of two.
    pub fn with_side(d: u32) -> Result<Self, EncodingError> {
        if !(1..=MAX_SIDE).contains(&d) {
            return Err(EncodingError::BadSide(d));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn is_power_of_two(&self) -> bool {
        self.d.is_power_of_two()
    }

    /// `log2 d`; errors when `d` is not a power of two.
    pub fn log2(&self) -> Result<u32, EncodingError> {
        if self.d.is_power_of_two() {
            Ok(self.d.trailing_zeros())
        } else {
            Err(EncodingError::NotPowerOfTwo(self.d))
        }
    }

    /// Number of hierarchy levels, `1 + log2 d`.
    pub fn levels(&self) -> Result<u32, EncodingError> {
        Ok(self.log2()? + 1)
    }

    /// Cells per side at level `k`.
    pub fn side_at(&self, k: u32) -> u32 {
        self.d >> k
    }

    pub fn cell_count(&self) -> usize {
        (self.d as usize).pow(2)
    }

    pub fn contains(&self, cell: CellId) -> bool {
        let side = if cell.k == 0 {
            self.d
        } else if self.d.is_power_of_two() && cell.k <= self.d.trailing_zeros() {
            self.side_at(cell.k)
        } else {
            return false;
        };
        cell.x < side && cell.y < side
    }

    fn check(&self, cell: CellId) -> Result<(), EncodingError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(EncodingError::OutOfBounds {
                x: cell.x,
                y: cell.y,
                k: cell.k,
            })
        }
    }

    /// All base cells, row by row.
    pub fn base_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.d).flat_map(move |y| (0..self.d).map(move |x| CellId::base(x, y)))
    }
}

/// A grid cell `(x, y)` at hierarchy level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub x: u32,
    pub y: u32,
    pub k: u32,
}

impl CellId {
    pub fn new(x: u32, y: u32, k: u32) -> Self {
        Self { x, y, k }
    }

    pub fn base(x: u32, y: u32) -> Self {
        Self { x, y, k: 0 }
    }

    /// The enclosing cell one level up.
    pub fn parent(&self) -> Self {
        Self::new(self.x / 2, self.y / 2, self.k + 1)
    }

    /// Base cells covered by this cell.
    pub fn base_cells(&self) -> impl Iterator<Item = CellId> {
        let side = 1u32 << self.k;
        let (x0, y0) = (self.x << self.k, self.y << self.k);
        (0..side).flat_map(move |dy| (0..side).map(move |dx| CellId::base(x0 + dx, y0 + dy)))
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k == 0 {
            write!(f, "({},{})", self.x, self.y)
        } else {
            write!(f, "({},{})_{}", self.x, self.y, self.k)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Shape {
    Square,
    Rectangular,
    Circular,
    #[default]
    Freeform,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Square => "square",
            Shape::Rectangular => "rect",
            Shape::Circular => "circle",
            Shape::Freeform => "freeform",
        })
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" => Ok(Shape::Square),
            "rect" | "rectangular" => Ok(Shape::Rectangular),
            "circle" | "circular" => Ok(Shape::Circular),
            "freeform" => Ok(Shape::Freeform),
            other => Err(format!("unknown shape {other:?}")),
        }
    }
}

/// A non-empty set of cells at one hierarchy level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlertZone {
    cells: BTreeSet<CellId>,
    level: u32,
    shape: Shape,
}

impl AlertZone {
    pub fn new(
        grid: &GridSpec,
        cells: impl IntoIterator<Item = CellId>,
        shape: Shape,
    ) -> Result<Self, EncodingError> {
        let cells: BTreeSet<CellId> = cells.into_iter().collect();
        let level = cells.first().ok_or(EncodingError::EmptyZone)?.k;
        for &c in &cells {
            if c.k != level {
                return Err(EncodingError::LevelMismatch(level, c.k));
            }
            grid.check(c)?;
        }
        Ok(Self {
            cells,
            level,
            shape,
        })
    }

    /// Level-0 zone from `(x, y)` pairs.
    pub fn from_xy(
        grid: &GridSpec,
        cells: impl IntoIterator<Item = (u32, u32)>,
        shape: Shape,
    ) -> Result<Self, EncodingError> {
        Self::new(grid, cells.into_iter().map(|(x, y)| CellId::base(x, y)), shape)
    }

    pub fn cells(&self) -> &BTreeSet<CellId> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn contains(&self, cell: &CellId) -> bool {
        self.cells.contains(cell)
    }

    pub fn to_text(&self, grid: &GridSpec) -> String {
        let mut out = format!("ZONE v1 d={} k={}\n# shape={}\n", grid.d(), self.level, self.shape);
        for c in &self.cells {
            out.push_str(&format!("cell={},{}\n", c.x, c.y));
        }
        out
    }

    /// Parses a zone file, returning the grid it was written for.
    pub fn from_text(text: &str) -> Result<(GridSpec, Self), EncodingError> {
        let bad = |m: String| EncodingError::Parse(m);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("ZONE") || fields.next() != Some("v1") {
            return Err(bad(format!("bad header {header:?}")));
        }
        let mut field = |name: &str| -> Result<u32, EncodingError> {
            fields
                .next()
                .and_then(|f| f.strip_prefix(name))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("header lacks {name}")))
        };
        let d = field("d=")?;
        let k = field("k=")?;
        let grid = GridSpec::with_side(d)?;
        let mut shape = Shape::Freeform;
        let mut cells = Vec::new();
        for line in lines {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(s) = comment.trim().strip_prefix("shape=") {
                    shape = s.parse().map_err(bad)?;
                }
                continue;
            }
            let xy = line
                .strip_prefix("cell=")
                .ok_or_else(|| bad(format!("unexpected line {line:?}")))?;
            let (x, y) = xy
                .split_once(',')
                .and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)))
                .ok_or_else(|| bad(format!("bad cell {xy:?}")))?;
            cells.push(CellId::new(x, y, k));
        }
        let zone = Self::new(&grid, cells, shape)?;
        Ok((grid, zone))
    }
}

/// How cells become HVE index vectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Encoding {
    Baseline,
    Hierarchical,
    #[default]
    Gray,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Baseline => "baseline",
            Encoding::Hierarchical => "hier",
            Encoding::Gray => "gray",
        })
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Encoding::Baseline),
            "hier" | "hierarchical" => Ok(Encoding::Hierarchical),
            "gray" => Ok(Encoding::Gray),
            other => Err(format!("unknown encoding {other:?}")),
        }
    }
}

/// HVE width of an encoding on `grid`: `d²` for baseline, `2·log2 d` otherwise.
pub fn width(grid: &GridSpec, encoding: Encoding) -> Result<usize, EncodingError> {
    match encoding {
        Encoding::Baseline => Ok(grid.cell_count()),
        Encoding::Hierarchical | Encoding::Gray => Ok(2 * grid.log2()? as usize),
    }
}

/// The base cell containing a point of `[0,1)²`.
pub fn cell_of_point(grid: &GridSpec, px: f64, py: f64) -> Result<CellId, EncodingError> {
    let inside = |v: f64| (0.0..1.0).contains(&v);
    if !inside(px) || !inside(py) {
        return Err(EncodingError::PointOutOfDomain(px, py));
    }
    let d = f64::from(grid.d());
    let clamp = |v: f64| ((v * d).floor() as u32).min(grid.d() - 1);
    Ok(CellId::base(clamp(px), clamp(py)))
}

fn require_base(grid: &GridSpec, cell: CellId) -> Result<(), EncodingError> {
    if cell.k != 0 {
        return Err(EncodingError::NotBaseLevel(cell.k));
    }
    grid.check(cell)
}

/// 1-based row-major position of a base cell.
pub fn baseline_position(grid: &GridSpec, cell: CellId) -> Result<usize, EncodingError> {
    require_base(grid, cell)?;
    Ok(cell.y as usize * grid.d() as usize + cell.x as usize + 1)
}

/// One-hot index vector with the 1 at the cell's baseline position.
pub fn baseline_index(grid: &GridSpec, cell: CellId) -> Result<IndexVector, EncodingError> {
    let p = baseline_position(grid, cell)?;
    let mut bits = vec![false; grid.cell_count()];
    bits[p - 1] = true;
    Ok(IndexVector::new(bits))
}

/// Token with `*` on every zone cell and `0` everywhere else.
pub fn baseline_token(grid: &GridSpec, zone: &AlertZone) -> Result<Pattern, EncodingError> {
    let mut symbols = vec![Symbol::Zero; grid.cell_count()];
    for &c in zone.cells() {
        symbols[baseline_position(grid, c)? - 1] = Symbol::Star;
    }
    Ok(Pattern::new(symbols))
}

/// Quadtree code of `(x, y)` with `bits` bits per axis.
pub fn hier_code_xy(x: u32, y: u32, bits: u32) -> u64 {
    let mut code = 0u64;
    for level in (0..bits).rev() {
        code = (code << 2) | u64::from((x >> level) & 1) << 1 | u64::from((y >> level) & 1);
    }
    code
}

/// Inverse of [`hier_code_xy`].
pub fn hier_decode_xy(code: u64, bits: u32) -> (u32, u32) {
    let (mut x, mut y) = (0u32, 0u32);
    for level in (0..bits).rev() {
        let pair = (code >> (2 * level)) & 0b11;
        x = (x << 1) | (pair >> 1) as u32;
        y = (y << 1) | (pair & 1) as u32;
    }
    (x, y)
}

/// Reflected binary Gray code of `n`.
pub fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// Inverse of [`gray`].
pub fn gray_inverse(g: u32) -> u32 {
    let mut n = g;
    let mut shift = 1;
    while shift < 32 {
        n ^= n >> shift;
        shift <<= 1;
    }
    n
}

/// `gray(y)` followed by `gray(x)`, `bits` bits each.
pub fn gray_code_xy(x: u32, y: u32, bits: u32) -> u64 {
    u64::from(gray(y)) << bits | u64::from(gray(x))
}

/// Inverse of [`gray_code_xy`].
pub fn gray_decode_xy(code: u64, bits: u32) -> (u32, u32) {
    let mask = (1u64 << bits) - 1;
    (
        gray_inverse((code & mask) as u32),
        gray_inverse((code >> bits & mask) as u32),
    )
}

/// Renders the low `width` bits of `code`, most significant first.
pub fn code_to_string(code: u64, width: u32) -> String {
    (0..width)
        .rev()
        .map(|i| if code >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// The `nbits`-bit Gray code of `n` as a string.
pub fn gray_code(nbits: u32, n: u32) -> Result<String, EncodingError> {
    if nbits < 32 && n >> nbits != 0 {
        return Err(EncodingError::BadCode {
            code: n.into(),
            width: nbits,
        });
    }
    Ok(code_to_string(gray(n).into(), nbits))
}

/// Binary code of a cell of `grid` at any level, under a hierarchical or
/// Gray encoding. The code is `2·(log2 d − k)` bits wide.
pub fn cell_code(grid: &GridSpec, cell: CellId, encoding: Encoding) -> Result<u64, EncodingError> {
    let log = grid.log2()?;
    grid.check(cell)?;
    let bits = log - cell.k;
    match encoding {
        Encoding::Hierarchical => Ok(hier_code_xy(cell.x, cell.y, bits)),
        Encoding::Gray => Ok(gray_code_xy(cell.x, cell.y, bits)),
        Encoding::Baseline => Err(EncodingError::NotBinary(encoding)),
    }
}

/// Inverse of [`cell_code`] for base cells.
pub fn decode_cell(grid: &GridSpec, code: u64, encoding: Encoding) -> Result<CellId, EncodingError> {
    let bits = grid.log2()?;
    if code >> (2 * bits) != 0 {
        return Err(EncodingError::BadCode {
            code,
            width: 2 * bits,
        });
    }
    let (x, y) = match encoding {
        Encoding::Hierarchical => hier_decode_xy(code, bits),
        Encoding::Gray => gray_decode_xy(code, bits),
        Encoding::Baseline => return Err(EncodingError::NotBinary(encoding)),
    };
    Ok(CellId::base(x, y))
}

pub fn hier_id(grid: &GridSpec, cell: CellId) -> Result<String, EncodingError> {
    require_base(grid, cell)?;
    let code = cell_code(grid, cell, Encoding::Hierarchical)?;
    Ok(code_to_string(code, 2 * grid.log2()?))
}

pub fn gray_id(grid: &GridSpec, cell: CellId) -> Result<String, EncodingError> {
    require_base(grid, cell)?;
    let code = cell_code(grid, cell, Encoding::Gray)?;
    Ok(code_to_string(code, 2 * grid.log2()?))
}

/// Index vector of a base cell under any encoding.
pub fn index_vector(
    grid: &GridSpec,
    cell: CellId,
    encoding: Encoding,
) -> Result<IndexVector, EncodingError> {
    match encoding {
        Encoding::Baseline => baseline_index(grid, cell),
        _ => {
            require_base(grid, cell)?;
            let w = 2 * grid.log2()?;
            let code = cell_code(grid, cell, encoding)?;
            Ok(IndexVector::new((0..w).rev().map(|i| code >> i & 1 == 1).collect()))
        }
    }
}

/// Sorted binary codes of the zone's cells (at the zone's level).
pub fn zone_codes(
    grid: &GridSpec,
    zone: &AlertZone,
    encoding: Encoding,
) -> Result<Vec<u64>, EncodingError> {
    let mut codes = zone
        .cells()
        .iter()
        .map(|&c| cell_code(grid, c, encoding))
        .collect::<Result<Vec<_>, _>>()?;
    codes.sort_unstable();
    Ok(codes)
}

/// The zone's cell IDs as bit strings.
pub fn zone_to_cellset(
    grid: &GridSpec,
    zone: &AlertZone,
    encoding: Encoding,
) -> Result<BTreeSet<String>, EncodingError> {
    let w = 2 * (grid.log2()? - zone.level());
    Ok(zone_codes(grid, zone, encoding)?
        .into_iter()
        .map(|c| code_to_string(c, w))
        .collect())
}
