//! The majority recursion behind the tree automata: after `n` steps the
//! root is Bernoulli(`h^n(p)`) with `h(p) = 3p^2 - 2p^3`.

use rand::Rng;
use serde::Serialize;

use crate::configuration::bernoulli;
use crate::rules::maj3;

/// Largest number of leaves drawn by one Monte Carlo estimate.
pub const MAX_LEAF_DRAWS: u64 = 1 << 32;

pub fn h(p: f64) -> f64 {
    3.0 * p * p - 2.0 * p * p * p
}

/// `h` composed `n` times.
pub fn h_iterate(p: f64, n: usize) -> f64 {
    (0..n).fold(p, |q, _| h(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootLaw {
    pub p: f64,
    pub steps: usize,
    pub exact: f64,
    pub samples: u64,
    pub ones: u64,
}

impl RootLaw {
    pub fn estimate(&self) -> f64 {
        self.ones as f64 / self.samples as f64
    }

    /// `|estimate - exact|` in binomial standard deviations of `exact`.
    pub fn z_score(&self) -> f64 {
        let sd = (self.exact * (1.0 - self.exact) / self.samples as f64).sqrt();
        let diff = self.estimate() - self.exact;
        if sd == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff.abs() / sd
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{samples} samples of a depth-{steps} tree exceed the leaf budget")]
pub struct TooLarge {
    pub steps: usize,
    pub samples: u64,
}

fn eval<R: Rng + ?Sized>(depth: usize, p: f64, rng: &mut R) -> u8 {
    if depth == 0 {
        bernoulli(rng, p)
    } else {
        let a = eval(depth - 1, p, rng);
        let b = eval(depth - 1, p, rng);
        let c = eval(depth - 1, p, rng);
        maj3(a, b, c)
    }
}

/// Exact root law with a Monte Carlo estimate from `samples` independent
/// depth-`steps` ternary majority trees with Bernoulli(`p`) leaves.
pub fn tree_root_law<R: Rng + ?Sized>(p: f64, steps: usize, samples: u64, rng: &mut R) -> Result<RootLaw, TooLarge> {
    let leaves = 3u64.checked_pow(steps as u32);
    match leaves.and_then(|l| l.checked_mul(samples)) {
        Some(total) if total <= MAX_LEAF_DRAWS => {}
        _ => return Err(TooLarge { steps, samples }),
    }
    let ones = (0..samples).map(|_| eval(steps, p, rng) as u64).sum();
    Ok(RootLaw {
        p,
        steps,
        exact: h_iterate(p, steps),
        samples,
        ones,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replica_rng;

    #[test]
    fn fixed_points() {
        for n in 0..10 {
            assert_eq!(h_iterate(0.5, n), 0.5);
        }
        assert_eq!(h(0.0), 0.0);
        assert_eq!(h(1.0), 1.0);
    }

    #[test]
    fn depth_zero_is_p() {
        assert_eq!(h_iterate(0.37, 0), 0.37);
        let law = tree_root_law(0.37, 0, 1000, &mut replica_rng(0, 0)).unwrap();
        assert_eq!(law.exact, 0.37);
    }

    #[test]
    fn budget() {
        assert!(tree_root_law(0.5, 30, 10, &mut replica_rng(0, 0)).is_err());
    }
}
