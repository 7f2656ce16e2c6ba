use crate::geometry::{ego_to_cell, Cell, Pose};

/// Rows of the single-step explored rectangle, from the agent's row forward.
pub const EXPLORED_DEPTH: i32 = 5;
/// Half-width of the single-step explored rectangle.
pub const EXPLORED_HALF_WIDTH: i32 = 1;

/// Record of where the agent has looked, kept allocentrically and rendered
/// agent-centred on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploredAreaMap {
    size: usize,
    explored: Vec<bool>,
    count: usize,
}

impl ExploredAreaMap {
    pub fn new(size: usize) -> Self {
        ExploredAreaMap { size, explored: vec![false; size * size], count: 0 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_explored(&self, cell: Cell) -> bool {
        cell.in_bounds(self.size) && self.explored[cell.index(self.size)]
    }

    /// Number of explored cells.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Marks the rectangle in front of `pose`. Set union, so repeated poses
    /// change nothing.
    pub fn update(&mut self, pose: Pose) {
        for d in 0..EXPLORED_DEPTH {
            for l in -EXPLORED_HALF_WIDTH..=EXPLORED_HALF_WIDTH {
                let cell = ego_to_cell(pose.cell(), pose.r, d, l);
                if cell.in_bounds(self.size) && !self.explored[cell.index(self.size)] {
                    self.explored[cell.index(self.size)] = true;
                    self.count += 1;
                }
            }
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.explored.iter().enumerate().filter(|(_, &e)| e).map(|(i, _)| Cell::from_index(i, self.size))
    }

    /// Agent-centred view: the agent sits at the centre facing up; explored
    /// cells read 1, the centre reads 2, everything else 0. Row-major.
    pub fn render(&self, agent: Pose) -> Vec<u8> {
        let c = (self.size / 2) as i32;
        let mut out = vec![0u8; self.size * self.size];
        for v in 0..self.size as i32 {
            for u in 0..self.size as i32 {
                let (depth, lateral) = (c - v, u - c);
                if self.is_explored(ego_to_cell(agent.cell(), agent.r, depth, lateral)) {
                    out[(v as usize) * self.size + u as usize] = 1;
                }
            }
        }
        out[(c as usize) * self.size + c as usize] = 2;
        out
    }
}

/// Free-function form of [`ExploredAreaMap::update`].
pub fn update_explored_area(mut explored: ExploredAreaMap, pose: Pose) -> ExploredAreaMap {
    explored.update(pose);
    explored
}

/// Free-function form of [`ExploredAreaMap::render`].
pub fn render_explored(explored: &ExploredAreaMap, agent: Pose) -> Vec<u8> {
    explored.render(agent)
}
