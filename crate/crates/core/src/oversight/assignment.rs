//! Random, balanced assignment of devices to customers.

use crate::oversight::OversightError;
use crate::rng::SimRng;

/// Shuffles `devices` and deals them into `customers` contiguous shares.
/// Shares differ in size by at most one; the first `len % customers`
/// customers get the larger share.
pub fn assign_randomly<T: Clone>(
    rng: &mut SimRng,
    devices: &[T],
    customers: u64,
) -> Result<Vec<Vec<T>>, OversightError> {
    if customers == 0 {
        return Err(OversightError::InvalidScenario("no customers".into()));
    }
    let mut pool = devices.to_vec();
    rng.shuffle(&mut pool);
    let c = customers as usize;
    let base = pool.len() / c;
    let extra = pool.len() % c;
    let mut out = Vec::with_capacity(c);
    let mut rest = pool.as_slice();
    for i in 0..c {
        let take = base + usize::from(i < extra);
        let (share, tail) = rest.split_at(take);
        out.push(share.to_vec());
        rest = tail;
    }
    Ok(out)
}

/// Probability that one customer receiving `allocation` of `population`
/// devices (uniformly at random, without replacement) gets all `compromised`
/// ones: `C(N - m, k - m) / C(N, k)`.
pub fn all_captured_probability(population: u64, compromised: u64, allocation: u64) -> f64 {
    if compromised > allocation || allocation > population {
        return 0.0;
    }
    (0..compromised)
        .map(|i| (allocation - i) as f64 / (population - i) as f64)
        .product()
}
