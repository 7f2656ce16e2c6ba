//! Allocentric semantic map: egocentric partial maps are placed with exact
//! quarter-turn transforms and merged by element-wise maximum.

mod dump;
mod explored;

use serde::{Deserialize, Serialize};

use crate::classes::LargeClass;
use crate::geometry::{ego_to_cell, Cell, Pose};
use crate::perception::{PartialMap, CHANNELS, NAV_CHANNEL};
use crate::scalar::Confidence;

pub use dump::{channel_name, ChannelDump, MapDump, MAP_DUMP_FORMAT};
pub use explored::{render_explored, update_explored_area, ExploredAreaMap, EXPLORED_DEPTH, EXPLORED_HALF_WIDTH};

/// Navigable confidence needed for a cell to count at all.
pub const NAV_STRICT_THRESHOLD: f64 = 0.95;
/// Confidence at which a neighbour counts toward the support rule.
pub const NAV_NEIGHBOR_THRESHOLD: f64 = 0.5;
/// Qualifying 4-neighbours required by the support rule.
pub const NAV_MIN_NEIGHBORS: usize = 3;

/// `G`×`G`×`CHANNELS` confidence grid, stored channel-major and row-major
/// within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap<T: Confidence = f32> {
    size: usize,
    data: Vec<T>,
}

impl<T: Confidence> SemanticMap<T> {
    pub fn new(size: usize) -> Self {
        SemanticMap { size, data: vec![T::zero(); size * size * CHANNELS] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn offset(&self, channel: usize, cell: Cell) -> usize {
        channel * self.size * self.size + cell.index(self.size)
    }

    /// Value at `cell`; zero off-grid.
    pub fn get(&self, channel: usize, cell: Cell) -> T {
        if cell.in_bounds(self.size) {
            self.data[self.offset(channel, cell)]
        } else {
            T::zero()
        }
    }

    pub fn set(&mut self, channel: usize, cell: Cell, value: T) {
        let o = self.offset(channel, cell);
        self.data[o] = value;
    }

    pub fn channel(&self, channel: usize) -> &[T] {
        let n = self.size * self.size;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn navigable(&self, cell: Cell) -> T {
        self.get(NAV_CHANNEL, cell)
    }

    /// Element-wise maximum with a layer.
    pub fn merge(&mut self, layer: &SparseLayer<T>) {
        debug_assert_eq!(layer.size, self.size);
        for (cell, values) in &layer.entries {
            for (ch, &v) in values.iter().enumerate() {
                let o = self.offset(ch, *cell);
                if v > self.data[o] {
                    self.data[o] = v;
                }
            }
        }
    }

    /// Element-wise maximum with another map.
    pub fn merge_map(&mut self, other: &SemanticMap<T>) {
        debug_assert_eq!(other.size, self.size);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            if b > *a {
                *a = b;
            }
        }
    }

    /// First cell (row-major) holding the channel maximum, and that maximum.
    pub fn argmax(&self, channel: usize) -> (Cell, T) {
        let mut best = (0, T::neg_infinity());
        for (i, &v) in self.channel(channel).iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (Cell::from_index(best.0, self.size), best.1)
    }

    pub fn max_confidence(&self, class: LargeClass) -> T {
        self.argmax(class.index()).1
    }

    /// Multiplies one channel by `factor`, saturating at one.
    pub fn scale_channel(&mut self, channel: usize, factor: T) {
        let n = self.size * self.size;
        for v in &mut self.data[channel * n..(channel + 1) * n] {
            *v = (*v * factor).clamp_unit();
        }
    }
}

/// The cells one partial map touches in the allocentric frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLayer<T: Confidence = f32> {
    size: usize,
    entries: Vec<(Cell, [T; CHANNELS])>,
}

impl<T: Confidence> SparseLayer<T> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[(Cell, [T; CHANNELS])] {
        &self.entries
    }

    pub fn to_dense(&self) -> SemanticMap<T> {
        let mut m = SemanticMap::new(self.size);
        m.merge(self);
        m
    }
}

/// Places every valid window cell of `partial` onto a `size`×`size` grid,
/// given the agent's pose in that grid's frame. Cells landing off-grid
/// are dropped.
pub fn transform_partial<T: Confidence>(partial: &PartialMap<T>, pose: Pose, size: usize) -> SparseLayer<T> {
    let mut entries = Vec::new();
    for (d, l) in PartialMap::<T>::slots() {
        if !partial.is_valid(d, l) {
            continue;
        }
        let cell = ego_to_cell(pose.cell(), pose.r, d as i32, l);
        if !cell.in_bounds(size) {
            continue;
        }
        let mut values = [T::zero(); CHANNELS];
        values.copy_from_slice(partial.channels(d, l));
        entries.push((cell, values));
    }
    SparseLayer { size, entries }
}

/// Element-wise maximum over all layers.
pub fn aggregate<'a, T: Confidence>(size: usize, layers: impl IntoIterator<Item = &'a SparseLayer<T>>) -> SemanticMap<T> {
    let mut map = SemanticMap::new(size);
    for layer in layers {
        map.merge(layer);
    }
    map
}

/// Boolean occupancy grid over the map frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NavGrid {
    size: usize,
    cells: Vec<bool>,
}

impl NavGrid {
    pub fn new(size: usize) -> Self {
        NavGrid { size, cells: vec![false; size * size] }
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(Cell) -> bool) -> Self {
        NavGrid { size, cells: (0..size * size).map(|i| f(Cell::from_index(i, size))).collect() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.in_bounds(self.size) && self.cells[cell.index(self.size)]
    }

    pub fn set(&mut self, cell: Cell, value: bool) {
        if cell.in_bounds(self.size) {
            self.cells[cell.index(self.size)] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| Cell::from_index(i, self.size))
    }

    pub fn is_subset_of(&self, other: &NavGrid) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn union_with(&mut self, cells: impl IntoIterator<Item = Cell>) {
        for c in cells {
            self.set(c, true);
        }
    }
}

/// Thresholded navigable area: strictly confident cells that are also
/// supported by at least three confident-enough 4-neighbours.
pub fn postprocess_navigable<T: Confidence>(map: &SemanticMap<T>) -> NavGrid {
    let strict = T::from_f64_lossy(NAV_STRICT_THRESHOLD);
    let loose = T::from_f64_lossy(NAV_NEIGHBOR_THRESHOLD);
    NavGrid::from_fn(map.size(), |cell| {
        map.navigable(cell) > strict
            && cell
                .neighbors4()
                .iter()
                .filter(|n| n.in_bounds(map.size()) && map.navigable(**n) >= loose)
                .count()
                >= NAV_MIN_NEIGHBORS
    })
}
