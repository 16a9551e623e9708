//! Production-line sampling and the chance that a compromised batch is
//! caught.

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::oversight::OversightError;
use crate::rng::SimRng;

fn check_probability(p: f64) -> Result<(), OversightError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(OversightError::ProbabilityOutOfRange(p))
    }
}

/// Probability that at least one of `n` compromised devices is picked when
/// each device is sampled independently with probability `p`:
/// `1 - (1 - p)^n`.
pub fn detection_probability(p: f64, n: u64) -> Result<f64, OversightError> {
    check_probability(p)?;
    if n == 0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    // -expm1(n * ln(1 - p)) keeps precision for small p.
    Ok(-(n as f64 * (-p).ln_1p()).exp_m1())
}

/// Indices in `0..population` selected by independent Bernoulli(`p`) draws,
/// in increasing order. Uses geometric skips, so the cost scales with the
/// sample size rather than the population.
pub fn sample_population(
    rng: &mut SimRng,
    population: u64,
    p: f64,
) -> Result<Vec<u64>, OversightError> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(Vec::new());
    }
    if p == 1.0 {
        return Ok((0..population).collect());
    }
    let mut out = Vec::new();
    let mut next = rng.geometric(p);
    while next < population {
        out.push(next);
        next = next.saturating_add(1).saturating_add(rng.geometric(p));
    }
    Ok(out)
}

/// A production run in which an attacker slips compromised devices past
/// sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BatchScenario {
    /// Devices produced.
    pub population: u64,
    /// Compromised devices among them.
    pub compromised: u64,
    pub sampling_rate: f64,
    /// Batch sizes in production order; must sum to `population`.
    pub batches: Vec<u64>,
    pub customers: u64,
}

impl BatchScenario {
    /// Equal batches of `batch_size` (the last one may be short).
    pub fn uniform(
        population: u64,
        compromised: u64,
        sampling_rate: f64,
        batch_size: u64,
        customers: u64,
    ) -> Result<Self, OversightError> {
        let size = batch_size.max(1);
        let mut batches = vec![size; (population / size) as usize];
        if !population.is_multiple_of(size) {
            batches.push(population % size);
        }
        let s = BatchScenario {
            population,
            compromised,
            sampling_rate,
            batches,
            customers,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), OversightError> {
        check_probability(self.sampling_rate)?;
        if self.compromised > self.population {
            return Err(OversightError::InvalidScenario(format!(
                "{} compromised devices exceed population {}",
                self.compromised, self.population
            )));
        }
        let total: u64 = self.batches.iter().sum();
        if total != self.population || self.batches.contains(&0) {
            return Err(OversightError::InvalidScenario(format!(
                "batches sum to {total}, population is {}",
                self.population
            )));
        }
        if self.customers == 0 {
            return Err(OversightError::InvalidScenario("no customers".into()));
        }
        Ok(())
    }

    /// Start index of every batch.
    fn batch_starts(&self) -> Vec<u64> {
        self.batches
            .iter()
            .scan(0u64, |acc, &b| {
                let s = *acc;
                *acc += b;
                Some(s)
            })
            .collect()
    }
}

/// Fraction of `trials` in which sampling catches at least one compromised
/// device.
///
/// Each trial draws its own generator from `(seed, trial index)`, so the
/// result does not depend on thread scheduling. The compromised devices form
/// a contiguous run starting at a uniformly chosen batch boundary (wrapping
/// at the end of production), and the whole population is sampled.
pub fn simulate_batch_smuggling(
    seed: u64,
    scenario: &BatchScenario,
    trials: u64,
) -> Result<f64, OversightError> {
    scenario.validate()?;
    if trials == 0 {
        return Err(OversightError::InvalidScenario("zero trials".into()));
    }
    if scenario.compromised == 0 {
        return Ok(0.0);
    }
    let starts = scenario.batch_starts();
    let n = scenario.population;
    let caught: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SimRng::stream(seed, t);
            let start = starts[rng.below(starts.len() as u64) as usize];
            let end = start + scenario.compromised;
            let sampled = sample_population(&mut rng, n, scenario.sampling_rate)
                .expect("validated probability");
            let hit = sampled
                .iter()
                .any(|&i| (i >= start && i < end) || (end > n && i < end - n));
            u64::from(hit)
        })
        .sum();
    Ok(caught as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_device_batch_value() {
        let q = detection_probability(0.001, 1000).unwrap();
        assert!((q - 0.63230).abs() < 1e-5, "{q}");
    }

    #[test]
    fn trivial_detection_cases() {
        assert_eq!(detection_probability(0.3, 0).unwrap(), 0.0);
        assert_eq!(detection_probability(1.0, 5).unwrap(), 1.0);
        assert_eq!(detection_probability(0.0, 5).unwrap(), 0.0);
        assert!(detection_probability(1.5, 5).is_err());
        assert!(detection_probability(-0.1, 5).is_err());
        assert!(detection_probability(f64::NAN, 5).is_err());
    }

    #[test]
    fn sampling_extremes() {
        let mut rng = SimRng::new(1);
        assert!(sample_population(&mut rng, 1000, 0.0).unwrap().is_empty());
        assert_eq!(
            sample_population(&mut rng, 1000, 1.0).unwrap(),
            (0..1000).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sample_indices_sorted_and_in_range() {
        let mut rng = SimRng::new(2);
        let s = sample_population(&mut rng, 10_000, 0.05).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|&i| i < 10_000));
    }

    #[test]
    fn no_compromised_means_never_caught() {
        let s = BatchScenario::uniform(100, 0, 0.5, 10, 1).unwrap();
        assert_eq!(simulate_batch_smuggling(1, &s, 100).unwrap(), 0.0);
    }

    #[test]
    fn scenario_validation() {
        assert!(BatchScenario::uniform(10, 11, 0.1, 5, 1).is_err());
        let mut s = BatchScenario::uniform(10, 1, 0.1, 5, 1).unwrap();
        s.batches = vec![5, 4];
        assert!(s.validate().is_err());
        s.batches = vec![5, 5];
        s.customers = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn wrapping_run_is_counted() {
        // one compromised run that must wrap: population 10, batches of 5,
        // 7 compromised, p = 1 always catches
        let s = BatchScenario::uniform(10, 7, 1.0, 5, 1).unwrap();
        assert_eq!(simulate_batch_smuggling(3, &s, 50).unwrap(), 1.0);
    }
}
