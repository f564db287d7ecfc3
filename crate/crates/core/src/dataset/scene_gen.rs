//! Procedural depth scenes: one object class rendered over a flat far plane.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_sim::SceneTruth;
use crate::raster::Raster;

/// Angular footprint of one pixel, radians.
pub const PIXEL_IFOV: f64 = 2.5e-3;
/// Depth of the background plane, meters.
pub const BACKGROUND_DEPTH_M: f64 = 115.0;
pub const OBJECT_REFLECTANCE: f64 = 0.9;
pub const BACKGROUND_REFLECTANCE: f64 = 0.3;
/// Object distance range, meters.
pub const DISTANCE_RANGE_M: (f64, f64) = (10.0, 100.0);
/// Nominal object half-size as a fraction of the shorter frame side.
pub const NOMINAL_HALF_SIZE: f64 = 0.25;
pub const SCALE_JITTER: f64 = 0.25;
pub const CENTER_JITTER: f64 = 0.15;
pub const MAX_ROTATION: f64 = PI / 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeClass {
    Sphere,
    Box,
    Pyramid,
    Cylinder,
    Ramp,
    Torus,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Sphere,
        ShapeClass::Box,
        ShapeClass::Pyramid,
        ShapeClass::Cylinder,
        ShapeClass::Ramp,
        ShapeClass::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Sphere => "sphere",
            ShapeClass::Box => "box",
            ShapeClass::Pyramid => "pyramid",
            ShapeClass::Cylinder => "cylinder",
            ShapeClass::Ramp => "ramp",
            ShapeClass::Torus => "torus",
        }
    }

    pub fn default_names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }

    /// Relief (in units of the object radius) towards the camera at the
    /// normalized object coordinates `(u, v)`, or `None` outside the silhouette.
    fn relief(self, u: f64, v: f64) -> Option<f64> {
        let rho = (u * u + v * v).sqrt();
        match self {
            ShapeClass::Sphere => (rho <= 1.0).then(|| (1.0 - rho * rho).sqrt()),
            ShapeClass::Box => (u.abs() <= 0.8 && v.abs() <= 0.8).then_some(0.0),
            ShapeClass::Pyramid => {
                // apex up: vertices (0,-1), (-0.9,0.8), (0.9,0.8)
                let inside = v <= 0.8 && u.abs() <= 0.9 * (v + 1.0) / 1.8;
                inside.then(|| -0.5 * (v + 1.0))
            }
            ShapeClass::Cylinder => {
                (u.abs() <= 0.5 && v.abs() <= 1.0).then(|| 0.5 * (1.0 - (u / 0.5).powi(2)).sqrt())
            }
            ShapeClass::Ramp => (u.abs() <= 1.0 && v.abs() <= 0.6).then(|| -(v + 0.6)),
            ShapeClass::Torus => (0.5..=1.0)
                .contains(&rho)
                .then(|| 0.25 * (1.0 - ((rho - 0.75) / 0.25).powi(2)).max(0.0).sqrt()),
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// Randomized placement of one object in the frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePose {
    pub class: ShapeClass,
    pub width: usize,
    pub height: usize,
    /// Object centre in pixels.
    pub center: (f64, f64),
    /// Half-size in pixels.
    pub half_size: f64,
    /// In-plane rotation, radians.
    pub rotation: f64,
    /// Distance of the object reference plane, meters.
    pub distance_m: f64,
}

impl ScenePose {
    pub fn nominal_half_size(width: usize, height: usize) -> f64 {
        NOMINAL_HALF_SIZE * width.min(height) as f64
    }

    pub fn random(class: ShapeClass, width: usize, height: usize, rng: &mut impl Rng) -> Self {
        let nominal = Self::nominal_half_size(width, height);
        let scale = rng.random_range(1.0 - SCALE_JITTER..=1.0 + SCALE_JITTER);
        let jx = rng.random_range(-CENTER_JITTER..=CENTER_JITTER) * width as f64;
        let jy = rng.random_range(-CENTER_JITTER..=CENTER_JITTER) * height as f64;
        let rotation = rng.random_range(-MAX_ROTATION..=MAX_ROTATION);
        let distance_m = rng.random_range(DISTANCE_RANGE_M.0..=DISTANCE_RANGE_M.1);
        Self {
            class,
            width,
            height,
            center: (width as f64 / 2.0 + jx, height as f64 / 2.0 + jy),
            half_size: nominal * scale,
            rotation,
            distance_m,
        }
    }

    /// Object radius in meters at its distance.
    pub fn radius_m(&self) -> f64 {
        self.half_size * self.distance_m * PIXEL_IFOV
    }

    /// Normalized object coordinates of a pixel centre.
    pub fn object_coords(&self, x: usize, y: usize) -> (f64, f64) {
        let dx = x as f64 + 0.5 - self.center.0;
        let dy = y as f64 + 0.5 - self.center.1;
        let (s, c) = self.rotation.sin_cos();
        ((c * dx + s * dy) / self.half_size, (-s * dx + c * dy) / self.half_size)
    }

    /// Object depth at a pixel, if the pixel is covered.
    pub fn object_depth(&self, x: usize, y: usize) -> Option<f64> {
        let (u, v) = self.object_coords(x, y);
        self.class
            .relief(u, v)
            .map(|r| self.distance_m - r * self.radius_m())
    }

    pub fn render(&self, label: Option<usize>) -> SceneTruth {
        let depth = Raster::from_fn(self.width, self.height, |x, y| {
            self.object_depth(x, y).unwrap_or(BACKGROUND_DEPTH_M)
        });
        let reflectance = Raster::from_fn(self.width, self.height, |x, y| {
            if self.object_depth(x, y).is_some() {
                OBJECT_REFLECTANCE
            } else {
                BACKGROUND_REFLECTANCE
            }
        });
        SceneTruth::new(depth, reflectance, label).expect("generated rasters are valid")
    }
}

/// Generates a random scene of `classes[class_id]`.
pub fn gen_scene(
    classes: &[ShapeClass],
    class_id: usize,
    size: (usize, usize),
    rng: &mut impl Rng,
) -> Result<SceneTruth> {
    let class = *classes.get(class_id).ok_or(Error::LabelOutOfRange {
        label: class_id,
        class_count: classes.len(),
    })?;
    Ok(ScenePose::random(class, size.0, size.1, rng).render(Some(class_id)))
}
