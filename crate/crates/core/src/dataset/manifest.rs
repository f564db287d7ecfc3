use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::scene_gen::{gen_scene, ShapeClass};
use crate::error::{Error, Result};
use crate::photon_sim::SceneTruth;
use crate::raster::{read_raster, write_raster, RasterKind};
use crate::rng;

pub const GENERATOR_VERSION: &str = "spadal-scenes/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the manifest directory.
    pub depth_path: PathBuf,
    pub reflectance_path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub seed: u64,
    pub generator_version: String,
    pub width: usize,
    pub height: usize,
    pub per_class: usize,
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub meta: GenerationMeta,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        fs::write(path, json)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            if !ids.insert(&e.id) {
                return Err(Error::Format(format!("duplicate manifest id {}", e.id)));
            }
            if e.label >= self.class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label: e.label,
                    class_count: self.class_names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn load_scene(&self, entry: &ManifestEntry) -> Result<SceneTruth> {
        let depth = read_raster(self.base_dir.join(&entry.depth_path), RasterKind::Depth)?;
        let refl = read_raster(self.base_dir.join(&entry.reflectance_path), RasterKind::Reflectance)?;
        SceneTruth::new(depth, refl, Some(entry.label))
    }
}

/// Options of the procedural dataset generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub classes: Vec<ShapeClass>,
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Fraction of each class assigned to the training split.
    pub train_fraction: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            classes: ShapeClass::ALL.to_vec(),
            per_class: 10,
            width: 32,
            height: 32,
            seed: 0,
            train_fraction: 0.7,
        }
    }
}

/// Renders scenes into `out_dir/scenes/` and writes `out_dir/manifest.json`.
pub fn generate_dataset(out_dir: impl AsRef<Path>, opts: &GenOptions) -> Result<Manifest> {
    if opts.classes.is_empty() || opts.per_class == 0 {
        return Err(Error::Empty("class list"));
    }
    if !(0.0..=1.0).contains(&opts.train_fraction) {
        return Err(Error::InvalidRequest("train_fraction outside [0, 1]".into()));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("scenes"))?;
    let n_train = (opts.per_class as f64 * opts.train_fraction).round() as usize;
    let mut entries = Vec::new();
    for (label, class) in opts.classes.iter().enumerate() {
        let mut order: Vec<usize> = (0..opts.per_class).collect();
        order.shuffle(&mut rng::stream(opts.seed, &[label as u64, u64::MAX]));
        let mut split = vec![Split::Test; opts.per_class];
        for &i in &order[..n_train] {
            split[i] = Split::Train;
        }
        for (i, split) in split.into_iter().enumerate() {
            let id = format!("{}-{:04}", class.name(), i);
            let mut rng = rng::stream(opts.seed, &[label as u64, i as u64]);
            let scene = gen_scene(&opts.classes, label, (opts.width, opts.height), &mut rng)?;
            let depth_path = PathBuf::from("scenes").join(format!("{id}.dph"));
            let reflectance_path = PathBuf::from("scenes").join(format!("{id}.rfl"));
            write_raster(out_dir.join(&depth_path), RasterKind::Depth, &scene.depth_m)?;
            write_raster(
                out_dir.join(&reflectance_path),
                RasterKind::Reflectance,
                &scene.reflectance,
            )?;
            entries.push(ManifestEntry {
                id,
                depth_path,
                reflectance_path,
                label,
                split,
            });
        }
    }
    let manifest = Manifest {
        class_names: opts.classes.iter().map(|c| c.name().to_string()).collect(),
        entries,
        meta: GenerationMeta {
            seed: opts.seed,
            generator_version: GENERATOR_VERSION.to_string(),
            width: opts.width,
            height: opts.height,
            per_class: opts.per_class,
            train_fraction: opts.train_fraction,
        },
        base_dir: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}
