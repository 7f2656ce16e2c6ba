//! Discrete grid geometry: cells, headings, camera horizons and the
//! egocentric/allocentric conversions used throughout the crate.
//!
//! Conventions: `x` is the column, `y` is the row (growing downward).
//! Rotation 0 faces north (`-y`), 90 faces east (`+x`). Lateral offsets are
//! measured to the agent's right.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A grid cell. Coordinates are signed so that off-grid positions can be
/// represented before clipping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn in_bounds(self, size: usize) -> bool {
        self.x >= 0 && self.y >= 0 && (self.x as usize) < size && (self.y as usize) < size
    }

    /// Row-major index into a `size`×`size` grid. Caller checks bounds.
    pub fn index(self, size: usize) -> usize {
        self.y as usize * size + self.x as usize
    }

    pub fn from_index(index: usize, size: usize) -> Self {
        Cell::new((index % size) as i32, (index / size) as i32)
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Agent heading, restricted to the four axis directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Rotation {
    North,
    East,
    South,
    West,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::North, Rotation::East, Rotation::South, Rotation::West];

    pub fn degrees(self) -> i32 {
        self.quarter_turns() as i32 * 90
    }

    pub fn from_degrees(deg: i32) -> Option<Self> {
        match deg.rem_euclid(360) {
            0 => Some(Rotation::North),
            90 => Some(Rotation::East),
            180 => Some(Rotation::South),
            270 => Some(Rotation::West),
            _ => None,
        }
    }

    pub fn quarter_turns(self) -> u8 {
        match self {
            Rotation::North => 0,
            Rotation::East => 1,
            Rotation::South => 2,
            Rotation::West => 3,
        }
    }

    pub fn from_quarter_turns(q: i32) -> Self {
        Rotation::ALL[q.rem_euclid(4) as usize]
    }

    /// Clockwise by 90°.
    pub fn right(self) -> Self {
        Self::from_quarter_turns(self.quarter_turns() as i32 + 1)
    }

    /// Counter-clockwise by 90°.
    pub fn left(self) -> Self {
        Self::from_quarter_turns(self.quarter_turns() as i32 - 1)
    }

    pub fn reverse(self) -> Self {
        Self::from_quarter_turns(self.quarter_turns() as i32 + 2)
    }

    /// Unit step in the facing direction.
    pub fn forward(self) -> (i32, i32) {
        match self {
            Rotation::North => (0, -1),
            Rotation::East => (1, 0),
            Rotation::South => (0, 1),
            Rotation::West => (-1, 0),
        }
    }

    /// Unit step toward the agent's right-hand side.
    pub fn rightward(self) -> (i32, i32) {
        self.right().forward()
    }
}

impl TryFrom<i32> for Rotation {
    type Error = String;

    fn try_from(deg: i32) -> Result<Self, Self::Error> {
        if !(0..360).contains(&deg) {
            return Err(format!("rotation {deg} is not one of 0, 90, 180, 270"));
        }
        Rotation::from_degrees(deg).ok_or_else(|| format!("rotation {deg} is not one of 0, 90, 180, 270"))
    }
}

impl From<Rotation> for i32 {
    fn from(r: Rotation) -> i32 {
        r.degrees()
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

/// Vertical camera angle in degrees. Positive values look down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Horizon(i32);

impl Horizon {
    pub const MAX: i32 = 60;
    pub const MIN: i32 = -30;
    pub const STEP: i32 = 15;
    /// The full legal ladder, top (most downward) first.
    pub const LADDER: [Horizon; 7] = [
        Horizon(60),
        Horizon(45),
        Horizon(30),
        Horizon(15),
        Horizon(0),
        Horizon(-15),
        Horizon(-30),
    ];
    pub const INITIAL: Horizon = Horizon(30);

    pub fn new(deg: i32) -> Option<Self> {
        if (Self::MIN..=Self::MAX).contains(&deg) && deg % Self::STEP == 0 {
            Some(Horizon(deg))
        } else {
            None
        }
    }

    pub fn degrees(self) -> i32 {
        self.0
    }

    /// `LookUp` raises the camera, decreasing `h`.
    pub fn up(self) -> Option<Self> {
        Self::new(self.0 - Self::STEP)
    }

    /// `LookDown` lowers the camera, increasing `h`.
    pub fn down(self) -> Option<Self> {
        Self::new(self.0 + Self::STEP)
    }
}

impl TryFrom<i32> for Horizon {
    type Error = String;

    fn try_from(deg: i32) -> Result<Self, Self::Error> {
        Horizon::new(deg).ok_or_else(|| format!("horizon {deg} is not on the legal ladder"))
    }
}

impl From<Horizon> for i32 {
    fn from(h: Horizon) -> i32 {
        h.0
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Full agent pose `(x, y, r, h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
    pub r: Rotation,
    pub h: Horizon,
}

impl Pose {
    pub fn new(x: i32, y: i32, r: Rotation, h: Horizon) -> Self {
        Pose { x, y, r, h }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }

    pub fn with_cell(self, cell: Cell) -> Self {
        Pose { x: cell.x, y: cell.y, ..self }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, r={}, h={})", self.x, self.y, self.r, self.h)
    }
}

/// Cell reached from `origin` facing `r` after `depth` steps forward and
/// `lateral` steps to the right.
pub fn ego_to_cell(origin: Cell, r: Rotation, depth: i32, lateral: i32) -> Cell {
    let (fx, fy) = r.forward();
    let (rx, ry) = r.rightward();
    Cell::new(origin.x + depth * fx + lateral * rx, origin.y + depth * fy + lateral * ry)
}

/// Inverse of [`ego_to_cell`]: `(depth, lateral)` of `cell` seen from
/// `origin` facing `r`.
pub fn cell_to_ego(origin: Cell, r: Rotation, cell: Cell) -> (i32, i32) {
    let (fx, fy) = r.forward();
    let (rx, ry) = r.rightward();
    let dx = cell.x - origin.x;
    let dy = cell.y - origin.y;
    (dx * fx + dy * fy, dx * rx + dy * ry)
}

/// Rigid transform between the simulator's world frame and an agent's map
/// frame. The start pose lands on the map center facing north.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub origin: Cell,
    pub facing: Rotation,
    pub center: Cell,
}

impl Anchor {
    pub fn new(start: Pose, map_size: usize) -> Self {
        let c = (map_size / 2) as i32;
        Anchor { origin: start.cell(), facing: start.r, center: Cell::new(c, c) }
    }

    pub fn cell_to_map(&self, cell: Cell) -> Cell {
        let (depth, lateral) = cell_to_ego(self.origin, self.facing, cell);
        ego_to_cell(self.center, Rotation::North, depth, lateral)
    }

    pub fn cell_to_world(&self, cell: Cell) -> Cell {
        let (depth, lateral) = cell_to_ego(self.center, Rotation::North, cell);
        ego_to_cell(self.origin, self.facing, depth, lateral)
    }

    pub fn rotation_to_map(&self, r: Rotation) -> Rotation {
        Rotation::from_quarter_turns(r.quarter_turns() as i32 - self.facing.quarter_turns() as i32)
    }

    pub fn rotation_to_world(&self, r: Rotation) -> Rotation {
        Rotation::from_quarter_turns(r.quarter_turns() as i32 + self.facing.quarter_turns() as i32)
    }

    pub fn to_map(&self, pose: Pose) -> Pose {
        let c = self.cell_to_map(pose.cell());
        Pose::new(c.x, c.y, self.rotation_to_map(pose.r), pose.h)
    }

    pub fn to_world(&self, pose: Pose) -> Pose {
        let c = self.cell_to_world(pose.cell());
        Pose::new(c.x, c.y, self.rotation_to_world(pose.r), pose.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations_compose() {
        for r in Rotation::ALL {
            assert_eq!(r.right().left(), r);
            assert_eq!(r.right().right(), r.reverse());
            assert_eq!(Rotation::from_degrees(r.degrees()), Some(r));
        }
        assert_eq!(Rotation::East.right(), Rotation::South);
        assert_eq!(Rotation::North.left(), Rotation::West);
    }

    #[test]
    fn horizon_ladder() {
        assert_eq!(Horizon::new(60).unwrap().down(), None);
        assert_eq!(Horizon::new(-30).unwrap().up(), None);
        assert_eq!(Horizon::new(60).unwrap().up(), Horizon::new(45));
        assert!(Horizon::new(10).is_none());
        assert!(Horizon::new(75).is_none());
    }

    #[test]
    fn north_window_places_cells_up_and_right() {
        let o = Cell::new(5, 5);
        assert_eq!(ego_to_cell(o, Rotation::North, 2, 1), Cell::new(6, 3));
        assert_eq!(ego_to_cell(o, Rotation::East, 2, 1), Cell::new(7, 6));
        for r in Rotation::ALL {
            for d in -3..4 {
                for l in -3..4 {
                    let c = ego_to_cell(o, r, d, l);
                    assert_eq!(cell_to_ego(o, r, c), (d, l));
                }
            }
        }
    }

    #[test]
    fn anchor_round_trip() {
        let start = Pose::new(4, 9, Rotation::West, Horizon::INITIAL);
        let a = Anchor::new(start, 37);
        assert_eq!(a.to_map(start), Pose::new(18, 18, Rotation::North, Horizon::INITIAL));
        for x in 0..12 {
            for y in 0..12 {
                for r in Rotation::ALL {
                    let p = Pose::new(x, y, r, Horizon::INITIAL);
                    assert_eq!(a.to_world(a.to_map(p)), p);
                }
            }
        }
        // one cell west of the start is one cell ahead in the map frame
        assert_eq!(a.cell_to_map(Cell::new(3, 9)), Cell::new(18, 17));
    }

    #[test]
    fn serde_rejects_illegal_angles() {
        assert!(serde_json::from_str::<Rotation>("45").is_err());
        assert!(serde_json::from_str::<Horizon>("75").is_err());
        assert_eq!(serde_json::from_str::<Horizon>("-15").unwrap(), Horizon::new(-15).unwrap());
    }
}
