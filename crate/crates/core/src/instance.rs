//! Problem instances: a start point plus clusters of ground nodes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-plane coordinates in metres.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub nodes: Vec<Point>,
}

impl Cluster {
    pub fn centroid(&self) -> Point {
        let n = self.nodes.len() as f64;
        let (sx, sy) = self
            .nodes
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }
}

/// A start position and `K` clusters of ground nodes.
///
/// Item indices used by tours are `0` for the start and `k + 1` for
/// `clusters[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "InstanceFile", try_from = "InstanceFile")]
pub struct Instance {
    pub area_m: f64,
    pub seed: u64,
    pub start: Point,
    pub clusters: Vec<Cluster>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    area_m: f64,
    seed: u64,
    start: Point,
    clusters: Vec<Cluster>,
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> Self {
        Self {
            version: INSTANCE_SCHEMA_VERSION,
            area_m: inst.area_m,
            seed: inst.seed,
            start: inst.start,
            clusters: inst.clusters,
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = InstanceParseError;

    fn try_from(file: InstanceFile) -> std::result::Result<Self, Self::Error> {
        if file.version != INSTANCE_SCHEMA_VERSION {
            return Err(InstanceParseError::Version(file.version));
        }
        Instance::new(file.area_m, file.seed, file.start, file.clusters).map_err(InstanceParseError::Invalid)
    }
}

impl Instance {
    pub fn new(area_m: f64, seed: u64, start: Point, clusters: Vec<Cluster>) -> Result<Self> {
        let inst = Self {
            area_m,
            seed,
            start,
            clusters,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area_m.is_finite() && self.area_m > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "area_m must be positive, got {}",
                self.area_m
            )));
        }
        if self.clusters.is_empty() {
            return Err(Error::InvalidInstance("at least one cluster is required".into()));
        }
        let inside = |p: Point| p.iter().all(|c| c.is_finite() && *c >= 0.0 && *c <= self.area_m);
        if !inside(self.start) {
            return Err(Error::InvalidInstance(format!(
                "start {:?} lies outside the field [0, {}]²",
                self.start, self.area_m
            )));
        }
        for (k, cluster) in self.clusters.iter().enumerate() {
            if cluster.nodes.is_empty() {
                return Err(Error::InvalidInstance(format!("cluster {k} has no nodes")));
            }
            if let Some(p) = cluster.nodes.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
                return Err(Error::InvalidInstance(format!(
                    "cluster {k} has non-finite node {p:?}"
                )));
            }
        }
        Ok(())
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.nodes.len()).collect()
    }

    /// Location of tour item `item` as seen by the ordering heuristics: the
    /// start point, or a cluster centroid.
    pub fn item_point(&self, item: usize) -> Point {
        if item == 0 {
            self.start
        } else {
            self.clusters[item - 1].centroid()
        }
    }

    /// Copy with every coordinate divided by the field side, so the field
    /// becomes the unit square.
    pub fn normalized(&self) -> Instance {
        let s = self.area_m;
        let scale = |p: &Point| [p[0] / s, p[1] / s];
        Instance {
            area_m: 1.0,
            seed: self.seed,
            start: scale(&self.start),
            clusters: self
                .clusters
                .iter()
                .map(|c| Cluster {
                    nodes: c.nodes.iter().map(scale).collect(),
                })
                .collect(),
        }
    }

    /// Normalised start point followed by the normalised cluster centroids;
    /// this is the input sequence of the neural policy.
    pub fn policy_features(&self) -> Vec<Point> {
        let s = self.area_m;
        (0..=self.k())
            .map(|i| {
                let p = self.item_point(i);
                [p[0] / s, p[1] / s]
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, InstanceParseError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(InstanceParseError::Json)?;
        Instance::try_from(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            InstanceParseError::Json(source) => Error::Parse {
                path: path.to_owned(),
                source,
            },
            InstanceParseError::Version(v) => Error::InvalidInstance(format!(
                "{}: unsupported schema version {v}",
                path.display()
            )),
            InstanceParseError::Invalid(err) => err,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceParseError {
    #[error(transparent)]
    Json(serde_json::Error),
    #[error("unsupported schema version {0}")]
    Version(u32),
    #[error(transparent)]
    Invalid(Error),
}

/// Parameters of the Gaussian-cluster instance generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub k: usize,
    pub n: usize,
    pub area_m: f64,
    pub std_m: f64,
}

impl GenSpec {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            area_m: 2000.0,
            std_m: 30.0,
        }
    }
}

/// Draws an instance: cluster means uniform over the field, nodes Gaussian
/// around their mean and clamped to the field, start at the origin.
pub fn generate(k: usize, n: usize, area_m: f64, std_m: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(&mut rng, GenSpec { k, n, area_m, std_m }, seed)
}

pub fn generate_with<R: Rng + ?Sized>(rng: &mut R, spec: GenSpec, seed: u64) -> Instance {
    assert!(spec.k >= 1 && spec.n >= 1, "k and n must be at least 1");
    let GenSpec { k, n, area_m, std_m } = spec;
    let clusters = (0..k)
        .map(|_| {
            let mean = [rng.random::<f64>() * area_m, rng.random::<f64>() * area_m];
            let nodes = (0..n)
                .map(|_| {
                    let dx: f64 = rng.sample(StandardNormal);
                    let dy: f64 = rng.sample(StandardNormal);
                    [
                        (mean[0] + std_m * dx).clamp(0.0, area_m),
                        (mean[1] + std_m * dy).clamp(0.0, area_m),
                    ]
                })
                .collect();
            Cluster { nodes }
        })
        .collect();
    Instance {
        area_m,
        seed,
        start: [0.0, 0.0],
        clusters,
    }
}

/// A visiting order `π₀..π_K` over the items of an instance. `π₀` is the
/// start; the return leg to the start is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Tour(Vec<usize>);

impl Tour {
    /// Validates that `order` is a permutation of `0..order.len()` that
    /// begins with the start item.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.first() != Some(&0) {
            return Err(Error::InvalidTour(format!(
                "tour must begin at the start item 0: {order:?}"
            )));
        }
        let mut seen = vec![false; order.len()];
        for &item in &order {
            match seen.get_mut(item) {
                Some(s) if !*s => *s = true,
                Some(_) => {
                    return Err(Error::InvalidTour(format!("item {item} repeated in {order:?}")))
                }
                None => {
                    return Err(Error::InvalidTour(format!(
                        "item {item} out of range for {} items",
                        order.len()
                    )))
                }
            }
        }
        Ok(Self(order))
    }

    /// Start followed by the clusters in instance order.
    pub fn identity(k: usize) -> Self {
        Self((0..=k).collect())
    }

    /// Tour visiting the clusters in the given order (0-based cluster indices).
    pub fn from_cluster_order(clusters: &[usize]) -> Result<Self> {
        let mut order = Vec::with_capacity(clusters.len() + 1);
        order.push(0);
        order.extend(clusters.iter().map(|c| c + 1));
        Self::new(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    /// Number of items, including the start.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 0-based cluster indices in visiting order.
    pub fn cluster_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.0[1..].iter().map(|i| i - 1)
    }

    pub(crate) fn check_against(&self, k: usize) -> Result<()> {
        if self.0.len() != k + 1 {
            return Err(Error::InvalidTour(format!(
                "tour has {} items but the instance has {k} clusters",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Tour {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Tour::new(order)
    }
}

impl From<Tour> for Vec<usize> {
    fn from(t: Tour) -> Self {
        t.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(5, 4, 2000.0, 30.0, 42);
        let b = generate(5, 4, 2000.0, 30.0, 42);
        assert_eq!(a, b);
        assert_ne!(a, generate(5, 4, 2000.0, 30.0, 43));
        assert_eq!(a.k(), 5);
        assert!(a.clusters.iter().all(|c| c.nodes.len() == 4));
        assert_eq!(a.start, [0.0, 0.0]);
    }

    #[test]
    fn zero_spread_collapses_cluster() {
        let inst = generate(3, 6, 2000.0, 0.0, 7);
        for c in &inst.clusters {
            assert!(c.nodes.iter().all(|p| *p == c.nodes[0]));
        }
    }

    #[test]
    fn cluster_means_are_uniform() {
        // Chi-square over a 4x4 grid of the field, 10^4 cluster means.
        let inst = generate(10_000, 1, 2000.0, 1e-9, 11);
        let mut counts = [0usize; 16];
        for c in &inst.clusters {
            let p = c.nodes[0];
            let cx = ((p[0] / 500.0) as usize).min(3);
            let cy = ((p[1] / 500.0) as usize).min(3);
            counts[cy * 4 + cx] += 1;
        }
        let expected = 10_000.0 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 15 degrees of freedom, 99.9th percentile is 37.7.
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn round_trip_through_file() {
        let inst = generate(4, 3, 2000.0, 30.0, 99);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        inst.save(&path).unwrap();
        assert_eq!(Instance::load(&path).unwrap(), inst);
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = generate(2, 2, 100.0, 1.0, 1).to_json();
        let cut = &text[..text.len() / 2];
        assert!(matches!(Instance::from_json(cut), Err(InstanceParseError::Json(_))));
    }

    #[test]
    fn missing_field_is_named() {
        let err = Instance::from_json(r#"{"version":1,"area_m":10,"seed":0,"start":[0,0]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("clusters"), "{err}");
    }

    #[test]
    fn empty_cluster_list_rejected() {
        let text = r#"{"version":1,"area_m":10,"seed":0,"start":[0,0],"clusters":[]}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceParseError::Invalid(_))));
        let text = r#"{"version":2,"area_m":10,"seed":0,"start":[0,0],"clusters":[{"nodes":[[1,1]]}]}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceParseError::Version(2))));
    }

    #[test]
    fn tour_validation() {
        assert!(Tour::new(vec![0, 2, 1]).is_ok());
        assert!(Tour::new(vec![1, 0, 2]).is_err());
        assert!(Tour::new(vec![0, 1, 1]).is_err());
        assert!(Tour::new(vec![0, 3, 1]).is_err());
        let t = Tour::from_cluster_order(&[2, 0, 1]).unwrap();
        assert_eq!(t.order(), &[0, 3, 1, 2]);
        assert_eq!(t.cluster_order().collect::<Vec<_>>(), vec![2, 0, 1]);
        let parsed: Tour = serde_json::from_str("[0,2,1]").unwrap();
        assert_eq!(parsed.order(), &[0, 2, 1]);
        assert!(serde_json::from_str::<Tour>("[0,2,2]").is_err());
    }

    #[test]
    fn policy_features_are_normalized_centroids() {
        let inst = Instance::new(
            100.0,
            0,
            [0.0, 0.0],
            vec![Cluster { nodes: vec![[10.0, 20.0], [30.0, 40.0]] }],
        )
        .unwrap();
        assert_eq!(inst.policy_features(), vec![[0.0, 0.0], [0.2, 0.3]]);
        assert_eq!(inst.normalized().clusters[0].nodes[1], [0.3, 0.4]);
    }

    proptest! {
        #[test]
        fn generated_nodes_stay_in_field(k in 1usize..6, n in 1usize..6, std in 1.0f64..800.0, seed: u64) {
            let inst = generate(k, n, 500.0, std, seed);
            for c in &inst.clusters {
                for p in &c.nodes {
                    prop_assert!((0.0..=500.0).contains(&p[0]) && (0.0..=500.0).contains(&p[1]));
                }
            }
        }

        #[test]
        fn json_round_trip_is_exact(k in 1usize..5, n in 1usize..5, seed: u64) {
            let inst = generate(k, n, 2000.0, 30.0, seed);
            prop_assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
        }
    }
}
