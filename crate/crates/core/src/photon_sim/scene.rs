use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Ground-truth depth and normalized reflectance of one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub depth_m: Raster<f64>,
    pub reflectance: Raster<f64>,
    /// Expected background photons per pixel per bin. `None` means the
    /// SBR-implied level of the paired condition.
    pub background: Option<Raster<f64>>,
    pub label: Option<usize>,
}

impl SceneTruth {
    pub fn new(depth_m: Raster<f64>, reflectance: Raster<f64>, label: Option<usize>) -> Result<Self> {
        reflectance.ensure_dims(depth_m.dims())?;
        if let Some(bad) = depth_m.as_slice().iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::Format(format!("invalid depth {bad}")));
        }
        if let Some(bad) = reflectance
            .as_slice()
            .iter()
            .find(|r| !(0.0..=1.0).contains(*r))
        {
            return Err(Error::Format(format!("reflectance {bad} outside [0, 1]")));
        }
        Ok(Self {
            depth_m,
            reflectance,
            background: None,
            label,
        })
    }

    /// Flat scene with uniform depth and reflectance.
    pub fn uniform(width: usize, height: usize, depth_m: f64, reflectance: f64) -> Result<Self> {
        Self::new(
            Raster::filled(width, height, depth_m),
            Raster::filled(width, height, reflectance),
            None,
        )
    }

    pub fn with_background(mut self, background: Raster<f64>) -> Result<Self> {
        background.ensure_dims(self.dims())?;
        self.background = Some(background);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.depth_m.width()
    }

    pub fn height(&self) -> usize {
        self.depth_m.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth_m.dims()
    }
}
