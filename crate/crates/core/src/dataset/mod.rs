//! Procedural scenes, manifests, sample-group pools and dataset persistence.
//!
//! On-disk layout of a dataset directory:
//!
//! ```text
//! manifest.json      scene list, class names, generation metadata
//! scenes/            <id>.dph depth and <id>.rfl reflectance rasters
//! events/            <id>_obs.phe and <id>_v<j>.phe photon events
//! images/            <id>_obs.dph and <id>_v<j>.dph reconstructions
//! pools.json         pool snapshot written after simulation
//! ```

mod build;
mod manifest;
mod pools;
mod scene_gen;

pub use build::{
    build_dataset, build_dataset_with, default_reference_condition, default_variant_conditions,
    image_seed, load_dataset, simulate_entry, simulate_to_dir, Dataset, PoolsSnapshot,
    SimulatedEntry, SnapshotGroup,
};
pub use manifest::{
    generate_dataset, GenOptions, GenerationMeta, Manifest, ManifestEntry, Split,
    GENERATOR_VERSION,
};
pub use pools::{DepthRange, GroupId, Pools, SampleGroup, TestItem, TestSet};
#[cfg(test)]
pub(crate) use pools::toy_pools;
pub use scene_gen::{
    gen_scene, ScenePose, ShapeClass, BACKGROUND_DEPTH_M, BACKGROUND_REFLECTANCE,
    DISTANCE_RANGE_M, MAX_ROTATION, OBJECT_REFLECTANCE, PIXEL_IFOV,
};
