use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Cell, Image, RegionLabel, Scenario};
use crate::error::{Error, Result};
use crate::similarity::EmbeddingBag;

/// How the initial labeled set is starved of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", deny_unknown_fields)]
pub enum ImbalanceSpec {
    /// Each rare class is held to `rare_budget` objects while every other
    /// class gets at least `rho * rare_budget`.
    RareClass {
        rare_classes: Vec<usize>,
        rare_budget: usize,
        rho: f64,
    },
    /// Balanced classes, except the rare cell is held to `slice_budget`
    /// objects against `rho * slice_budget` objects of the same class under
    /// other attributes.
    RareSlice {
        cell: Cell,
        slice_budget: usize,
        rho: f64,
        class_budget: usize,
    },
}

impl ImbalanceSpec {
    pub fn rare_slice(cell: Cell) -> Self {
        ImbalanceSpec::RareSlice {
            cell,
            slice_budget: 10,
            rho: 10.0,
            class_budget: 110,
        }
    }

    pub fn rare_class(rare_classes: Vec<usize>) -> Self {
        ImbalanceSpec::RareClass {
            rare_classes,
            rare_budget: 20,
            rho: 10.0,
        }
    }

    /// Whether a region belongs to the targeted rare set.
    pub fn is_target(&self, label: &RegionLabel) -> bool {
        match self {
            ImbalanceSpec::RareClass { rare_classes, .. } => rare_classes.contains(&label.class),
            ImbalanceSpec::RareSlice { cell, .. } => cell.contains(label),
        }
    }

    pub fn target_count(&self, image: &Image) -> usize {
        image.labels.iter().filter(|l| self.is_target(l)).count()
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let c = scenario.n_classes();
        let (rho, budgets_ok) = match self {
            ImbalanceSpec::RareClass {
                rare_classes,
                rare_budget,
                rho,
            } => {
                if rare_classes.is_empty() || rare_classes.iter().any(|&r| r >= c) {
                    return Err(Error::InvalidConfig("rare_classes must name valid classes".into()));
                }
                if rare_classes.len() >= c {
                    return Err(Error::InvalidConfig("at least one class must stay frequent".into()));
                }
                (*rho, *rare_budget > 0)
            }
            ImbalanceSpec::RareSlice {
                cell,
                slice_budget,
                rho,
                class_budget,
            } => {
                if cell.class >= c || cell.attribute >= scenario.config.n_attributes {
                    return Err(Error::InvalidConfig("rare cell outside the grid".into()));
                }
                (*rho, *slice_budget > 0 && *class_budget > 0)
            }
        };
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be at least 1, got {rho}")));
        }
        if !budgets_ok {
            return Err(Error::InvalidConfig("object budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Query and labeled-set sizes of the published rare-slice setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlicePreset {
    MotorcycleNight,
    BicycleNight,
    PedestrianNight,
    PedestrianRainy,
    PedestrianHighway,
}

impl SlicePreset {
    pub const ALL: [SlicePreset; 5] = [
        Self::MotorcycleNight,
        Self::BicycleNight,
        Self::PedestrianNight,
        Self::PedestrianRainy,
        Self::PedestrianHighway,
    ];

    pub fn query_size(self) -> usize {
        match self {
            Self::PedestrianNight => 3,
            _ => 5,
        }
    }

    /// Initial labeled images in the published setup, for comparison with
    /// the realized size.
    pub fn reference_labeled_images(self) -> usize {
        match self {
            Self::MotorcycleNight => 363,
            Self::BicycleNight => 348,
            Self::PedestrianNight => 355,
            Self::PedestrianRainy => 361,
            Self::PedestrianHighway => 362,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub imbalance: ImbalanceSpec,
    pub query_size: usize,
    /// Held-out images drawn from the natural distribution.
    pub test_images: usize,
    /// Held-out images containing the target (rare-slice mode only).
    pub test_target_images: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            imbalance: ImbalanceSpec::rare_slice(Cell {
                class: 0,
                attribute: 1,
            }),
            query_size: SlicePreset::MotorcycleNight.query_size(),
            test_images: 600,
            test_target_images: 50,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn preset(preset: SlicePreset, cell: Cell) -> Self {
        Self {
            imbalance: ImbalanceSpec::rare_slice(cell),
            query_size: preset.query_size(),
            ..Self::default()
        }
    }
}

/// Realized composition of the initial labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub labeled_images: usize,
    /// Labeled objects per class.
    pub class_counts: Vec<usize>,
    /// Labeled objects in the target (rare classes or rare cell).
    pub target_objects: usize,
    /// Achieved imbalance ratio.
    pub realized_rho: f64,
}

/// Image-index splits over one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub spec: ImbalanceSpec,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub query: Vec<usize>,
    pub test: Vec<usize>,
    pub report: SplitReport,
}

impl Splits {
    /// Query bags restricted to their target regions.
    pub fn query_bags(&self, scenario: &Scenario) -> Result<Vec<EmbeddingBag>> {
        self.query
            .iter()
            .map(|&i| {
                let img = &scenario.images[i];
                let rows: Vec<&[f32]> = img
                    .bag
                    .iter_rows()
                    .zip(&img.labels)
                    .filter(|(_, l)| self.spec.is_target(l))
                    .map(|(r, _)| r)
                    .collect();
                EmbeddingBag::from_rows(&rows)
            })
            .collect()
    }

    /// True when L, U, Q and test share no image.
    pub fn is_disjoint(&self) -> bool {
        let mut all: Vec<usize> = [&self.labeled, &self.unlabeled, &self.query, &self.test]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        all.len() == n
    }
}

struct Quota {
    // wanted objects per class, not counting the target set
    classes: Vec<usize>,
    // target-set objects, also a hard cap
    target: usize,
}

fn take_labeled(
    scenario: &Scenario,
    spec: &ImbalanceSpec,
    quota: &Quota,
    candidates: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let c = scenario.n_classes();
    let mut class_counts = vec![0usize; c];
    let mut free = vec![0usize; c];
    let mut target = 0usize;
    let mut labeled = Vec::new();
    let mut rest = Vec::new();

    let done = |free: &[usize], target: usize| {
        target >= quota.target && quota.classes.iter().zip(free).all(|(&q, &n)| n >= q)
    };

    for (pos, &i) in candidates.iter().enumerate() {
        if done(&free, target) {
            rest.extend_from_slice(&candidates[pos..]);
            break;
        }
        let img = &scenario.images[i];
        let t = spec.target_count(img);
        let mut add_free = vec![0usize; c];
        for l in img.labels.iter().filter(|l| !spec.is_target(l)) {
            add_free[l.class] += 1;
        }
        let fits = target + t <= quota.target;
        let helps = (t > 0 && target < quota.target)
            || quota
                .classes
                .iter()
                .zip(free.iter().zip(&add_free))
                .any(|(&q, (&n, &a))| a > 0 && n < q);
        if fits && helps {
            labeled.push(i);
            target += t;
            for (f, a) in free.iter_mut().zip(&add_free) {
                *f += a;
            }
            for l in &img.labels {
                class_counts[l.class] += 1;
            }
        } else {
            rest.push(i);
        }
    }
    if !done(&free, target) {
        return Err(Error::InsufficientObjects(format!(
            "labeled quotas unmet: target {target}/{}, per-class {:?}",
            quota.target, free
        )));
    }
    Ok((labeled, rest, target))
}

fn draw(pool: &mut Vec<usize>, n: usize, what: &str) -> Result<Vec<usize>> {
    if pool.len() < n {
        return Err(Error::InsufficientObjects(format!(
            "{what}: need {n} images, have {}",
            pool.len()
        )));
    }
    Ok(pool.drain(..n).collect())
}

fn build(scenario: &Scenario, cfg: &SplitConfig) -> Result<Splits> {
    let spec = &cfg.imbalance;
    spec.validate(scenario)?;
    if cfg.query_size == 0 {
        return Err(Error::InvalidConfig("query_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = scenario.images.len();
    let mut with_target: Vec<usize> = (0..n)
        .filter(|&i| spec.target_count(&scenario.images[i]) > 0)
        .collect();
    let mut without: Vec<usize> = (0..n)
        .filter(|&i| spec.target_count(&scenario.images[i]) == 0)
        .collect();
    with_target.shuffle(&mut rng);
    without.shuffle(&mut rng);

    let query = draw(&mut with_target, cfg.query_size, "query set")?;
    let mut test = draw(&mut without, cfg.test_images, "test set")?;
    if matches!(spec, ImbalanceSpec::RareSlice { .. }) {
        test.extend(draw(&mut with_target, cfg.test_target_images, "test target images")?);
    }

    let c = scenario.n_classes();
    let quota = match spec {
        ImbalanceSpec::RareClass {
            rare_classes,
            rare_budget,
            rho,
        } => {
            let frequent = (rho * *rare_budget as f64).ceil() as usize;
            Quota {
                classes: (0..c)
                    .map(|j| {
                        if rare_classes.contains(&j) {
                            0
                        } else {
                            frequent
                        }
                    })
                    .collect(),
                target: rare_budget * rare_classes.len(),
            }
        }
        ImbalanceSpec::RareSlice {
            cell,
            slice_budget,
            rho,
            class_budget,
        } => {
            let other = (rho * *slice_budget as f64).ceil() as usize;
            Quota {
                classes: (0..c)
                    .map(|j| if j == cell.class { other } else { *class_budget })
                    .collect(),
                target: *slice_budget,
            }
        }
    };

    // Rare-class mode counts each rare class separately, so it draws from the
    // mixed pool with a per-class cap; rare-slice mode has one shared cap.
    let mut candidates: Vec<usize> = with_target.iter().chain(&without).copied().collect();
    candidates.shuffle(&mut rng);
    let (labeled, unlabeled, target_objects) = match spec {
        ImbalanceSpec::RareClass {
            rare_classes,
            rare_budget,
            ..
        } => take_rare_class(scenario, rare_classes, *rare_budget, &quota, &candidates)?,
        ImbalanceSpec::RareSlice { .. } => take_labeled(scenario, spec, &quota, &candidates)?,
    };

    let mut class_counts = vec![0usize; c];
    for &i in &labeled {
        for l in &scenario.images[i].labels {
            class_counts[l.class] += 1;
        }
    }
    let realized_rho = match spec {
        ImbalanceSpec::RareClass { rare_classes, .. } => {
            let rare_max = rare_classes.iter().map(|&r| class_counts[r]).max().unwrap_or(0);
            let freq_min = (0..c)
                .filter(|j| !rare_classes.contains(j))
                .map(|j| class_counts[j])
                .min()
                .unwrap_or(0);
            freq_min as f64 / rare_max.max(1) as f64
        }
        ImbalanceSpec::RareSlice { cell, .. } => {
            (class_counts[cell.class] - target_objects) as f64 / target_objects.max(1) as f64
        }
    };
    let mut unlabeled = unlabeled;
    unlabeled.sort_unstable();
    let mut labeled = labeled;
    labeled.sort_unstable();

    Ok(Splits {
        spec: spec.clone(),
        report: SplitReport {
            labeled_images: labeled.len(),
            class_counts,
            target_objects,
            realized_rho,
        },
        labeled,
        unlabeled,
        query,
        test,
    })
}

fn take_rare_class(
    scenario: &Scenario,
    rare_classes: &[usize],
    rare_budget: usize,
    quota: &Quota,
    candidates: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let c = scenario.n_classes();
    let mut counts = vec![0usize; c];
    let mut labeled = Vec::new();
    let mut rest = Vec::new();
    let done = |counts: &[usize]| {
        (0..c).all(|j| {
            if rare_classes.contains(&j) {
                counts[j] >= rare_budget
            } else {
                counts[j] >= quota.classes[j]
            }
        })
    };
    for (pos, &i) in candidates.iter().enumerate() {
        if done(&counts) {
            rest.extend_from_slice(&candidates[pos..]);
            break;
        }
        let mut add = vec![0usize; c];
        for l in &scenario.images[i].labels {
            add[l.class] += 1;
        }
        let fits = rare_classes.iter().all(|&r| counts[r] + add[r] <= rare_budget);
        let helps = (0..c).any(|j| {
            add[j] > 0
                && if rare_classes.contains(&j) {
                    counts[j] < rare_budget
                } else {
                    counts[j] < quota.classes[j]
                }
        });
        if fits && helps {
            labeled.push(i);
            for (n, a) in counts.iter_mut().zip(&add) {
                *n += a;
            }
        } else {
            rest.push(i);
        }
    }
    if !done(&counts) {
        return Err(Error::InsufficientObjects(format!(
            "labeled quotas unmet, per-class counts {counts:?}"
        )));
    }
    let target = rare_classes.iter().map(|&r| counts[r]).sum();
    Ok((labeled, rest, target))
}

/// Rare-class split: rare classes held to their budget in L, everything left
/// over goes to U.
pub fn build_initial_labeled_rare_class(scenario: &Scenario, cfg: &SplitConfig) -> Result<Splits> {
    if !matches!(cfg.imbalance, ImbalanceSpec::RareClass { .. }) {
        return Err(Error::InvalidConfig("expected a RareClass imbalance spec".into()));
    }
    build(scenario, cfg)
}

/// Rare-slice split: class-balanced L with the rare cell starved.
pub fn build_initial_labeled_rare_slice(scenario: &Scenario, cfg: &SplitConfig) -> Result<Splits> {
    if !matches!(cfg.imbalance, ImbalanceSpec::RareSlice { .. }) {
        return Err(Error::InvalidConfig("expected a RareSlice imbalance spec".into()));
    }
    build(scenario, cfg)
}

/// Dispatches on the imbalance mode.
pub fn build_splits(scenario: &Scenario, cfg: &SplitConfig) -> Result<Splits> {
    build(scenario, cfg)
}
