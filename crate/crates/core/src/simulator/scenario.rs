use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::EmbeddingBag;

/// Ground truth for one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionLabel {
    pub class: usize,
    pub attribute: usize,
}

/// A (class, attribute) cell such as "motorcycle at night".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub class: usize,
    pub attribute: usize,
}

impl Cell {
    pub fn contains(&self, label: &RegionLabel) -> bool {
        label.class == self.class && label.attribute == self.attribute
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub bag: EmbeddingBag,
    pub labels: Vec<RegionLabel>,
    /// Scene attribute shared by every region of the image.
    pub attribute: usize,
}

impl Image {
    pub fn count_in(&self, cell: Cell) -> usize {
        self.labels.iter().filter(|l| cell.contains(l)).count()
    }
}

/// Generator parameters. Distances are absolute; with the default
/// `sigma = 1` the nearest two centroids of an attribute sit 6 sigma apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_classes: usize,
    pub n_attributes: usize,
    pub dim: usize,
    /// RMS distance of a region from its centroid (per-coordinate std is
    /// `sigma / sqrt(dim)`).
    pub sigma: f64,
    /// Smallest centroid distance between two classes of one attribute.
    pub separation: f64,
    /// Norm of the per-attribute offset.
    pub attribute_offset: f64,
    /// Norm of the vector shared by all centroids.
    pub base_norm: f64,
    /// Relative frequency of each attribute among regular images.
    pub attribute_weights: Vec<f64>,
    /// Images drawn from the natural distribution, which never contains the
    /// rare cell.
    pub n_images: usize,
    /// Images with one forced rare-cell region.
    pub n_rare_slice_images: usize,
    pub rare_cell: Cell,
    pub min_regions: usize,
    pub max_regions: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            n_attributes: 2,
            dim: 64,
            sigma: 1.0,
            separation: 6.0,
            attribute_offset: 10.0,
            base_norm: 20.0,
            attribute_weights: vec![0.7, 0.3],
            n_images: 5900,
            n_rare_slice_images: 115,
            rare_cell: Cell {
                class: 0,
                attribute: 1,
            },
            min_regions: 1,
            max_regions: 6,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.n_attributes == 0 || self.dim == 0 {
            return bad("n_attributes and dim must be positive".into());
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("separation", self.separation),
            ("attribute_offset", self.attribute_offset),
            ("base_norm", self.base_norm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if self.attribute_weights.len() != self.n_attributes
            || self.attribute_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.attribute_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("attribute_weights needs one nonnegative weight per attribute".into());
        }
        if self.rare_cell.class >= self.n_classes || self.rare_cell.attribute >= self.n_attributes {
            return bad("rare_cell outside the class/attribute grid".into());
        }
        if self.min_regions == 0 || self.min_regions > self.max_regions {
            return bad("need 1 <= min_regions <= max_regions".into());
        }
        if self.n_images + self.n_rare_slice_images == 0 {
            return bad("no images requested".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// `n_classes * n_attributes` centroids of length `dim`, class-major.
    pub centroids: Vec<Vec<f32>>,
    /// Regular images first, then the rare-slice images.
    pub images: Vec<Image>,
}

impl Scenario {
    pub fn centroid(&self, cell: Cell) -> &[f32] {
        &self.centroids[cell.class * self.config.n_attributes + cell.attribute]
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn rare_cell(&self) -> Cell {
        self.config.rare_cell
    }

    /// Nearest-centroid label of a vector; ties go to the lower cell index.
    pub fn nearest_cell(&self, v: &[f32]) -> Cell {
        let a = self.config.n_attributes;
        let (best, _) = self
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d: f64 = c
                    .iter()
                    .zip(v)
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum();
                (i, d)
            })
            .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        Cell {
            class: best / a,
            attribute: best % a,
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn scaled(v: Vec<f64>, norm: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * norm / n).collect()
}

/// Random class directions for one attribute, scaled so the closest pair is
/// `separation` apart.
fn class_layout(rng: &mut ChaCha8Rng, classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = (0..classes).map(|_| scaled(gaussian_vec(rng, dim), 1.0)).collect();
    let mut dmin = f64::INFINITY;
    for a in 0..classes {
        for b in (a + 1)..classes {
            let d = dirs[a]
                .iter()
                .zip(&dirs[b])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            dmin = dmin.min(d);
        }
    }
    let k = if dmin > 0.0 { separation / dmin } else { 0.0 };
    dirs.into_iter()
        .map(|d| d.into_iter().map(|x| x * k).collect())
        .collect()
}

/// Samples a scenario. Deterministic under `config.seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let (c, a, dim) = (config.n_classes, config.n_attributes, config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let base = scaled(gaussian_vec(&mut rng, dim), config.base_norm);
    let mut centroids = vec![Vec::new(); c * a];
    for att in 0..a {
        let offset = scaled(gaussian_vec(&mut rng, dim), config.attribute_offset);
        let layout = class_layout(&mut rng, c, dim, config.separation);
        for (cls, dir) in layout.into_iter().enumerate() {
            centroids[cls * a + att] = (0..dim)
                .map(|d| (base[d] + offset[d] + dir[d]) as f32)
                .collect();
        }
    }

    let attr_dist = WeightedIndex::new(&config.attribute_weights)
        .map_err(|e| Error::InvalidConfig(format!("attribute_weights: {e}")))?;
    let coord_std = config.sigma / (dim as f64).sqrt();
    let rare = config.rare_cell;

    let mut images = Vec::with_capacity(config.n_images + config.n_rare_slice_images);
    for i in 0..config.n_images + config.n_rare_slice_images {
        let forced = i >= config.n_images;
        let attribute = if forced { rare.attribute } else { attr_dist.sample(&mut rng) };
        let k = rng.random_range(config.min_regions..=config.max_regions);
        let mut labels = Vec::with_capacity(k);
        for r in 0..k {
            let class = if forced && r == 0 {
                rare.class
            } else if attribute == rare.attribute {
                // the rare cell only appears through forced regions
                let mut cls = rng.random_range(0..c - 1);
                if cls >= rare.class {
                    cls += 1;
                }
                cls
            } else {
                rng.random_range(0..c)
            };
            labels.push(RegionLabel { class, attribute });
        }
        let mut data = Vec::with_capacity(k * dim);
        for l in &labels {
            let centre = &centroids[l.class * a + l.attribute];
            for &m in centre {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push((m as f64 + coord_std * z) as f32);
            }
        }
        images.push(Image {
            bag: EmbeddingBag::new(k, dim, data)?,
            labels,
            attribute,
        });
    }

    Ok(Scenario {
        config: config.clone(),
        centroids,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_images: 200,
            n_rare_slice_images: 10,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(generate_scenario(&small(4)).unwrap(), generate_scenario(&small(4)).unwrap());
        assert_ne!(
            generate_scenario(&small(4)).unwrap().images,
            generate_scenario(&small(5)).unwrap().images
        );
    }

    #[test]
    fn zero_sigma_sits_on_centroids() {
        let s = generate_scenario(&ScenarioConfig {
            sigma: 0.0,
            ..small(1)
        })
        .unwrap();
        for img in &s.images {
            for (row, l) in img.bag.iter_rows().zip(&img.labels) {
                let c = s.centroid(Cell {
                    class: l.class,
                    attribute: l.attribute,
                });
                assert_eq!(row, c);
            }
        }
    }

    #[test]
    fn rare_cell_only_in_forced_images() {
        let cfg = small(2);
        let s = generate_scenario(&cfg).unwrap();
        for (i, img) in s.images.iter().enumerate() {
            let n = img.count_in(cfg.rare_cell);
            if i < cfg.n_images {
                assert_eq!(n, 0);
            } else {
                assert_eq!(n, 1);
                assert_eq!(img.attribute, cfg.rare_cell.attribute);
            }
            assert!((1..=6).contains(&img.labels.len()));
        }
    }

    #[test]
    fn two_class_nearest_centroid() {
        let cfg = ScenarioConfig {
            n_classes: 2,
            attribute_weights: vec![1.0, 0.0],
            n_images: 500,
            n_rare_slice_images: 0,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&cfg).unwrap();
        let (mut ok, mut total) = (0, 0);
        for img in &s.images {
            for (row, l) in img.bag.iter_rows().zip(&img.labels) {
                total += 1;
                if s.nearest_cell(row).class == l.class {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 / total as f64 >= 0.99, "{ok}/{total}");
    }

    #[test]
    fn rejects_bad_config() {
        let bad = ScenarioConfig {
            attribute_weights: vec![1.0],
            ..ScenarioConfig::default()
        };
        assert!(matches!(generate_scenario(&bad), Err(Error::InvalidConfig(_))));
    }
}
