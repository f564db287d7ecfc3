//! Labeled / unlabeled sample-group pools and the held-out test set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::DepthImage;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub String);

impl GroupId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GroupId {
    fn from(s: &str) -> Self {
        GroupId(s.to_string())
    }
}

/// One observed image plus its synthetic variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub id: GroupId,
    pub observed: DepthImage,
    pub variants: Vec<DepthImage>,
    pub label: Option<usize>,
}

impl SampleGroup {
    /// Observed image first, then the variants.
    pub fn images(&self) -> impl Iterator<Item = &DepthImage> {
        std::iter::once(&self.observed).chain(self.variants.iter())
    }
}

/// Global depth normalization shared by every image of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl DepthRange {
    pub fn of_images<'a>(images: impl IntoIterator<Item = &'a DepthImage>) -> Self {
        let (min, max) = images
            .into_iter()
            .map(|img| img.depth_m.min_max())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            });
        Self { min, max }
    }

    pub fn normalize(&self, depth: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (depth - self.min) / span
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestItem {
    pub id: GroupId,
    pub image: DepthImage,
    pub label: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub items: Vec<TestItem>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// The labeled and unlabeled pools. Ground-truth labels of unlabeled groups
/// are kept private and only reachable through an oracle.
#[derive(Clone, Debug)]
pub struct Pools {
    class_names: Vec<String>,
    variants_per_group: usize,
    depth_range: DepthRange,
    groups: BTreeMap<GroupId, SampleGroup>,
    labeled: BTreeSet<GroupId>,
    unlabeled: BTreeSet<GroupId>,
    withheld: BTreeMap<GroupId, usize>,
}

impl Pools {
    /// All groups start unlabeled; `truth` holds their withheld labels.
    pub fn new(
        class_names: Vec<String>,
        depth_range: DepthRange,
        groups: Vec<(SampleGroup, usize)>,
    ) -> Result<Self> {
        let variants_per_group = groups.first().map_or(0, |(g, _)| g.variants.len());
        let mut map = BTreeMap::new();
        let mut withheld = BTreeMap::new();
        for (mut g, label) in groups {
            if label >= class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label,
                    class_count: class_names.len(),
                });
            }
            if g.variants.len() != variants_per_group {
                return Err(Error::Format(format!(
                    "group {} has {} variants, expected {variants_per_group}",
                    g.id,
                    g.variants.len()
                )));
            }
            let dims = g.observed.dims();
            for v in &g.variants {
                v.depth_m.ensure_dims(dims)?;
            }
            g.label = None;
            withheld.insert(g.id.clone(), label);
            if map.insert(g.id.clone(), g).is_some() {
                return Err(Error::Format("duplicate group id".into()));
            }
        }
        let unlabeled = map.keys().cloned().collect();
        Ok(Self {
            class_names,
            variants_per_group,
            depth_range,
            groups: map,
            labeled: BTreeSet::new(),
            unlabeled,
            withheld,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// M, the number of synthetic variants per group.
    pub fn variants_per_group(&self) -> usize {
        self.variants_per_group
    }

    pub fn depth_range(&self) -> DepthRange {
        self.depth_range
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, id: &GroupId) -> Option<&SampleGroup> {
        self.groups.get(id)
    }

    pub fn labeled_ids(&self) -> &BTreeSet<GroupId> {
        &self.labeled
    }

    pub fn unlabeled_ids(&self) -> &BTreeSet<GroupId> {
        &self.unlabeled
    }

    pub fn labeled_groups(&self) -> impl Iterator<Item = &SampleGroup> {
        self.labeled.iter().map(|id| &self.groups[id])
    }

    pub fn unlabeled_groups(&self) -> impl Iterator<Item = &SampleGroup> {
        self.unlabeled.iter().map(|id| &self.groups[id])
    }

    pub fn all_groups(&self) -> impl Iterator<Item = &SampleGroup> {
        self.groups.values()
    }

    pub(crate) fn withheld_label(&self, id: &GroupId) -> Option<usize> {
        self.withheld.get(id).copied()
    }

    /// Moves groups from the unlabeled to the labeled pool, attaching labels.
    /// Either every id moves or none does.
    pub fn move_to_labeled(&mut self, ids: &[GroupId], labels: &[usize]) -> Result<()> {
        if ids.len() != labels.len() {
            return Err(Error::InvalidRequest(format!(
                "{} ids but {} labels",
                ids.len(),
                labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (id, &label) in ids.iter().zip(labels) {
            if !self.unlabeled.contains(id) || !seen.insert(id) {
                return Err(Error::UnknownGroup(id.to_string()));
            }
            if label >= self.class_count() {
                return Err(Error::LabelOutOfRange {
                    label,
                    class_count: self.class_count(),
                });
            }
        }
        for (id, &label) in ids.iter().zip(labels) {
            self.unlabeled.remove(id);
            self.labeled.insert(id.clone());
            self.groups.get_mut(id).expect("known id").label = Some(label);
        }
        Ok(())
    }
}

/// `n` groups `g000..` of 2×2 images with `m` variants, labels `i % 3`.
#[cfg(test)]
pub(crate) fn toy_pools(n: usize, m: usize) -> Pools {
    let img = DepthImage::from_depth(crate::raster::Raster::filled(2, 2, 1.0));
    let groups = (0..n)
        .map(|i| {
            (
                SampleGroup {
                    id: GroupId(format!("g{i:03}")),
                    observed: img.clone(),
                    variants: vec![img.clone(); m],
                    label: None,
                },
                i % 3,
            )
        })
        .collect();
    Pools::new(
        vec!["a".into(), "b".into(), "c".into()],
        DepthRange { min: 0.0, max: 2.0 },
        groups,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_one_group() {
        let mut p = toy_pools(5, 4);
        p.move_to_labeled(&["g002".into()], &[1]).unwrap();
        assert_eq!(p.labeled_ids().len(), 1);
        assert_eq!(p.unlabeled_ids().len(), 4);
        assert_eq!(p.group(&"g002".into()).unwrap().label, Some(1));
        assert!(p.move_to_labeled(&["g002".into()], &[1]).is_err());
    }

    #[test]
    fn failed_moves_are_atomic() {
        let mut p = toy_pools(5, 4);
        assert!(p.move_to_labeled(&["g000".into(), "zzz".into()], &[0, 0]).is_err());
        assert!(p.move_to_labeled(&["g000".into(), "g001".into()], &[0, 7]).is_err());
        assert!(p.move_to_labeled(&["g000".into(), "g000".into()], &[0, 0]).is_err());
        assert!(p.labeled_ids().is_empty());
        assert_eq!(p.unlabeled_ids().len(), 5);
    }

    #[test]
    fn labels_hidden_until_moved() {
        let p = toy_pools(4, 1);
        assert!(p.all_groups().all(|g| g.label.is_none()));
        assert_eq!(p.withheld_label(&"g001".into()), Some(1));
    }

    #[test]
    fn depth_range_normalization() {
        let r = DepthRange { min: 10.0, max: 110.0 };
        assert_eq!(r.normalize(10.0), 0.0);
        assert_eq!(r.normalize(60.0), 0.5);
        assert_eq!(DepthRange { min: 1.0, max: 1.0 }.normalize(1.0), 0.0);
    }
}
