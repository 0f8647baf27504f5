use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::splits::Splits;
use super::surrogate::SurrogateModel;
use crate::error::{Error, Result};

/// Region-classification stand-ins for detection AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Accuracy on test regions of the target (rare class or rare cell).
    /// `None` when the test split holds no such region.
    pub rare_slice_accuracy_proxy: Option<f64>,
    /// Target objects in the latest selection.
    pub rare_slice_objects: usize,
    /// Images in the latest selection containing at least one target object.
    pub rare_slice_images: usize,
    pub overall_accuracy_proxy: f64,
}

/// Anything that labels a region vector with a class.
pub trait RegionClassifier {
    fn classify(&self, x: &[f32]) -> usize;
}

impl RegionClassifier for SurrogateModel {
    fn classify(&self, x: &[f32]) -> usize {
        self.predict(x)
    }
}

/// The generator's own nearest-centroid rule.
impl RegionClassifier for Scenario {
    fn classify(&self, x: &[f32]) -> usize {
        self.nearest_cell(x).class
    }
}

pub fn compute_metrics<M: RegionClassifier + ?Sized>(
    model: &M,
    scenario: &Scenario,
    splits: &Splits,
    selection: &[usize],
) -> Result<RoundMetrics> {
    if splits.test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let (mut hit, mut total, mut rare_hit, mut rare_total) = (0usize, 0usize, 0usize, 0usize);
    for &i in &splits.test {
        let img = &scenario.images[i];
        for (x, l) in img.bag.iter_rows().zip(&img.labels) {
            let ok = model.classify(x) == l.class;
            total += 1;
            hit += ok as usize;
            if splits.spec.is_target(l) {
                rare_total += 1;
                rare_hit += ok as usize;
            }
        }
    }
    let counts: Vec<usize> = selection
        .iter()
        .map(|&i| splits.spec.target_count(&scenario.images[i]))
        .collect();
    Ok(RoundMetrics {
        rare_slice_accuracy_proxy: (rare_total > 0).then(|| rare_hit as f64 / rare_total as f64),
        rare_slice_objects: counts.iter().sum(),
        rare_slice_images: counts.iter().filter(|&&n| n > 0).count(),
        overall_accuracy_proxy: hit as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use std::hash::{DefaultHasher, Hash, Hasher};

    use super::*;
    use crate::simulator::scenario::{generate_scenario, ScenarioConfig};
    use crate::simulator::splits::{build_splits, SplitConfig};

    fn setup() -> (Scenario, Splits) {
        let s = generate_scenario(&ScenarioConfig {
            n_images: 2500,
            n_rare_slice_images: 80,
            seed: 9,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let sp = build_splits(&s, &SplitConfig::default()).unwrap();
        (s, sp)
    }

    /// Pseudo-random label derived from the vector's bits.
    struct Coin(usize);

    impl RegionClassifier for Coin {
        fn classify(&self, x: &[f32]) -> usize {
            let mut h = DefaultHasher::new();
            x.iter().for_each(|v| v.to_bits().hash(&mut h));
            (h.finish() % self.0 as u64) as usize
        }
    }

    #[test]
    fn perfect_model_scores_one() {
        let (s, sp) = setup();
        let r = compute_metrics(&s, &s, &sp, &[]).unwrap();
        assert_eq!(r.overall_accuracy_proxy, 1.0);
        assert_eq!(r.rare_slice_accuracy_proxy, Some(1.0));
    }

    #[test]
    fn random_model_is_chance_level() {
        let (s, sp) = setup();
        let r = compute_metrics(&Coin(10), &s, &sp, &[]).unwrap();
        assert!((r.overall_accuracy_proxy - 0.1).abs() < 0.03, "{}", r.overall_accuracy_proxy);
    }

    #[test]
    fn counts_selected_targets() {
        let (s, sp) = setup();
        let m = SurrogateModel::zeros(s.n_classes(), s.config.dim);
        assert_eq!(compute_metrics(&m, &s, &sp, &sp.unlabeled[..0]).unwrap().rare_slice_objects, 0);
        let rare: Vec<usize> = sp
            .unlabeled
            .iter()
            .copied()
            .filter(|&i| sp.spec.target_count(&s.images[i]) > 0)
            .take(3)
            .collect();
        let r = compute_metrics(&m, &s, &sp, &rare).unwrap();
        assert_eq!(r.rare_slice_images, 3);
        assert_eq!(r.rare_slice_objects, 3);
    }

    #[test]
    fn empty_test_set() {
        let (s, mut sp) = setup();
        sp.test.clear();
        assert!(matches!(compute_metrics(&s, &s, &sp, &[]), Err(Error::EmptyTestSet)));
    }
}
