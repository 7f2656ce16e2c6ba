use serde::{Deserialize, Serialize};

use super::SemanticMap;
use crate::classes::LargeClass;
use crate::perception::{CHANNELS, NAV_CHANNEL};
use crate::scalar::Confidence;

pub const MAP_DUMP_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub name: String,
    /// Row-major confidences.
    pub values: Vec<f64>,
}

/// JSON form of a [`SemanticMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDump {
    pub format: u32,
    pub grid_size: usize,
    pub channels: Vec<ChannelDump>,
}

pub fn channel_name(channel: usize) -> &'static str {
    if channel == NAV_CHANNEL {
        "navigable"
    } else {
        LargeClass::ALL[channel].key()
    }
}

impl<T: Confidence> From<&SemanticMap<T>> for MapDump {
    fn from(map: &SemanticMap<T>) -> Self {
        MapDump {
            format: MAP_DUMP_FORMAT,
            grid_size: map.size(),
            channels: (0..CHANNELS)
                .map(|ch| ChannelDump {
                    name: channel_name(ch).to_string(),
                    values: map.channel(ch).iter().map(|v| v.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }
}
