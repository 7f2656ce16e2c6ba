//! Object class vocabulary.
//!
//! Large classes get a channel in the semantic map; small classes are found
//! through instance detections. Both lists are closed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Horizon;

/// Number of large-object channels in the semantic map.
pub const N_LARGE: usize = 20;

macro_rules! class_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $key:literal, $display:literal;)* }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant,)*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)*];

            /// Canonical identifier used in files.
            pub fn key(self) -> &'static str {
                match self {
                    $($name::$variant => $key,)*
                }
            }

            /// Phrase used when rendering instructions.
            pub fn display_name(self) -> &'static str {
                match self {
                    $($name::$variant => $display,)*
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_key(key: &str) -> Option<Self> {
                match key {
                    $($key => Some($name::$variant),)*
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.key())
            }
        }
    };
}

class_enum! {
    /// The twenty large receptacle/furniture classes.
    LargeClass {
        Armchair => "armchair", "armchair";
        Chair => "chair", "chair";
        Cart => "cart", "cart";
        Sofa => "sofa", "sofa";
        Shelf => "shelf", "shelf";
        Drawer => "drawer", "drawer";
        Cabinet => "cabinet", "cabinet";
        Countertop => "countertop", "counter";
        Sink => "sink", "sink";
        StoveBurner => "stoveburner", "stove burner";
        Fridge => "fridge", "fridge";
        Bed => "bed", "bed";
        Dresser => "dresser", "dresser";
        Toilet => "toilet", "toilet";
        Bathtub => "bathtub", "bathtub";
        Ottoman => "ottoman", "ottoman";
        DiningTable => "diningtable", "dining table";
        SideTable => "sidetable", "side table";
        CoffeeTable => "coffeetable", "coffee table";
        Desk => "desk", "desk";
    }
}

class_enum! {
    /// Small, pickable object classes. Any fixed list works here.
    SmallClass {
        Apple => "apple", "apple";
        Mug => "mug", "mug";
        Lettuce => "lettuce", "lettuce";
        Watch => "watch", "watch";
        SprayBottle => "spray_bottle", "spray bottle";
        Tomato => "tomato", "tomato";
        Potato => "potato", "potato";
        Bread => "bread", "bread";
        Egg => "egg", "egg";
        Cup => "cup", "cup";
        Plate => "plate", "plate";
        Bowl => "bowl", "bowl";
        Knife => "knife", "knife";
        Fork => "fork", "fork";
        Spoon => "spoon", "spoon";
        Book => "book", "book";
        Pen => "pen", "pen";
        Pencil => "pencil", "pencil";
        CellPhone => "cellphone", "cell phone";
        KeyChain => "keychain", "key chain";
    }
}

/// Cells to back away from an object of the named class before interacting.
///
/// Keyed by name so the rule also covers articulated receptacles (`safe`)
/// that have no channel of their own.
pub fn backup_distance_for_name(name: &str) -> i32 {
    match name {
        "fridge" => 3,
        "safe" | "cabinet" | "drawer" => 2,
        _ => 1,
    }
}

impl LargeClass {
    pub fn backup_distance(self) -> i32 {
        backup_distance_for_name(self.key())
    }

    pub fn is_articulated(self) -> bool {
        matches!(self, LargeClass::Fridge | LargeClass::Cabinet | LargeClass::Drawer)
    }

    pub fn default_height(self) -> HeightClass {
        use LargeClass::*;
        match self {
            Armchair | Chair | Cart | Sofa | Bed | Ottoman | Bathtub | Toilet | CoffeeTable | Drawer => {
                HeightClass::Floor
            }
            Countertop | Sink | StoveBurner | Fridge | Dresser | DiningTable | SideTable | Desk | Cabinet => {
                HeightClass::Mid
            }
            Shelf => HeightClass::High,
        }
    }

    /// Footprint length along the wall, in cells.
    pub fn footprint_width(self) -> usize {
        use LargeClass::*;
        match self {
            Chair | Ottoman | Drawer | Toilet | Sink | Cart => 1,
            Fridge | Armchair | Cabinet | StoveBurner | SideTable | Dresser | Desk | Shelf => 2,
            Sofa | Bed | Bathtub | Countertop | DiningTable | CoffeeTable => 3,
        }
    }
}

/// Vertical placement of an object, which fixes the camera horizons from
/// which it can be seen and handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightClass {
    Floor,
    Mid,
    High,
}

impl HeightClass {
    pub fn band(self) -> [Horizon; 2] {
        let (a, b) = match self {
            HeightClass::Floor => (60, 45),
            HeightClass::Mid => (30, 15),
            HeightClass::High => (0, -15),
        };
        [Horizon::new(a).unwrap(), Horizon::new(b).unwrap()]
    }

    pub fn admits(self, h: Horizon) -> bool {
        self.band().contains(&h)
    }
}

/// Either kind of object class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    Large(LargeClass),
    Small(SmallClass),
}

impl ObjectClass {
    pub fn key(self) -> &'static str {
        match self {
            ObjectClass::Large(c) => c.key(),
            ObjectClass::Small(c) => c.key(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ObjectClass::Large(c) => c.display_name(),
            ObjectClass::Small(c) => c.display_name(),
        }
    }

    pub fn as_large(self) -> Option<LargeClass> {
        match self {
            ObjectClass::Large(c) => Some(c),
            ObjectClass::Small(_) => None,
        }
    }

    pub fn as_small(self) -> Option<SmallClass> {
        match self {
            ObjectClass::Small(c) => Some(c),
            ObjectClass::Large(_) => None,
        }
    }

    pub fn is_large(self) -> bool {
        matches!(self, ObjectClass::Large(_))
    }
}

impl From<LargeClass> for ObjectClass {
    fn from(c: LargeClass) -> Self {
        ObjectClass::Large(c)
    }
}

impl From<SmallClass> for ObjectClass {
    fn from(c: SmallClass) -> Self {
        ObjectClass::Small(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown object class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for ObjectClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LargeClass::from_key(s)
            .map(ObjectClass::Large)
            .or_else(|| SmallClass::from_key(s).map(ObjectClass::Small))
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

impl FromStr for LargeClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LargeClass::from_key(s).ok_or_else(|| UnknownClass(s.to_string()))
    }
}

impl FromStr for SmallClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SmallClass::from_key(s).ok_or_else(|| UnknownClass(s.to_string()))
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

macro_rules! serde_by_key {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.key())
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

serde_by_key!(LargeClass, SmallClass, ObjectClass);
