//! Synthetic datasets.
//!
//! Specs are written `kind:key=value,...`:
//!
//! - `uniform:n=1000,d=3,extent=1`
//! - `gaussian:n=1000,d=3,clusters=10,sigma=0.01,extent=1,seed=7`
//!
//! Coordinates lie in `[0, extent)` per axis. `seed` falls back to the
//! seed passed alongside the spec.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io::PointCloud;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum GenSpec {
    Uniform {
        n: usize,
        d: usize,
        extent: f32,
        seed: Option<u64>,
    },
    Gaussian(GaussianClusters),
}

/// Isotropic normal blobs. Point `i` belongs to cluster `i % clusters`;
/// centers are uniform in the domain and samples are clamped to it.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianClusters {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    pub sigma: f32,
    pub extent: f32,
    pub seed: Option<u64>,
}

impl GaussianClusters {
    /// Returns the points and the cluster centers.
    pub fn sample(&self, default_seed: u64) -> (PointCloud, Vec<Vec<f32>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(default_seed));
        let centers: Vec<Vec<f32>> = (0..self.clusters)
            .map(|_| {
                (0..self.d)
                    .map(|_| rng.random_range(0.0..self.extent))
                    .collect()
            })
            .collect();
        let normal = Normal::new(0.0f32, self.sigma).expect("sigma validated at parse time");
        let top = upper_bound(self.extent);
        let mut cloud = PointCloud::new(self.d);
        cloud.coords.reserve_exact(self.n * self.d);
        for i in 0..self.n {
            let c = &centers[i % self.clusters];
            for &ck in c {
                cloud
                    .coords
                    .push((ck + normal.sample(&mut rng)).clamp(0.0, top));
            }
        }
        (cloud, centers)
    }
}

/// Largest f32 strictly below `extent`.
fn upper_bound(extent: f32) -> f32 {
    f32::from_bits(extent.to_bits() - 1)
}

impl GenSpec {
    pub fn dim(&self) -> usize {
        match self {
            GenSpec::Uniform { d, .. } => *d,
            GenSpec::Gaussian(g) => g.d,
        }
    }

    pub fn generate(&self, default_seed: u64) -> PointCloud {
        match self {
            GenSpec::Uniform { n, d, extent, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(default_seed));
                PointCloud {
                    dim: *d,
                    coords: (0..n * d).map(|_| rng.random_range(0.0..*extent)).collect(),
                }
            }
            GenSpec::Gaussian(g) => g.sample(default_seed).0,
        }
    }
}

impl FromStr for GenSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let usage = |msg: String| CliError::Usage(format!("generator '{s}': {msg}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| usage(format!("expected key=value, got '{part}'")))?;
            kv.insert(k.trim(), v.trim());
        }
        let mut take = |key: &str| kv.remove(key);
        fn num<T: FromStr>(key: &str, v: Option<&str>, default: Option<T>) -> Result<T, String> {
            match v {
                Some(v) => v.parse().map_err(|_| format!("bad value '{v}' for {key}")),
                None => default.ok_or_else(|| format!("missing {key}")),
            }
        }
        let n: usize = num("n", take("n"), None).map_err(usage)?;
        let d: usize = num("d", take("d"), Some(3)).map_err(usage)?;
        let extent: f32 = num("extent", take("extent"), Some(1.0)).map_err(usage)?;
        let seed: Option<u64> = take("seed")
            .map(|v| num("seed", Some(v), None))
            .transpose()
            .map_err(usage)?;
        if d == 0 {
            return Err(usage("d must be positive".into()));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(usage("extent must be positive and finite".into()));
        }
        let spec = match kind {
            "uniform" => GenSpec::Uniform { n, d, extent, seed },
            "gaussian" | "gaussian_clusters" => {
                let clusters: usize = num("clusters", take("clusters"), Some(1)).map_err(usage)?;
                let sigma: f32 = num("sigma", take("sigma"), None).map_err(usage)?;
                if clusters == 0 {
                    return Err(usage("clusters must be positive".into()));
                }
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(usage("sigma must be non-negative and finite".into()));
                }
                GenSpec::Gaussian(GaussianClusters {
                    n,
                    d,
                    clusters,
                    sigma,
                    extent,
                    seed,
                })
            }
            _ => {
                return Err(usage(format!(
                    "unknown kind '{kind}' (expected uniform or gaussian)"
                )))
            }
        };
        if let Some(k) = kv.keys().next() {
            return Err(usage(format!("unknown key '{k}'")));
        }
        Ok(spec)
    }
}
