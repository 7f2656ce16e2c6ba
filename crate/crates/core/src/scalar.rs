use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar type for map and detection confidences: `f32` or `f64`.
pub trait Confidence:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite confidence")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn clamp_unit(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Confidence for f32 {}
impl Confidence for f64 {}
