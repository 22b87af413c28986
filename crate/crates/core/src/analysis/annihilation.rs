//! The traffic rule seen as ballistic annihilation.
//!
//! `psi(x)_i = 1 - x_i - x_{i-1}` marks every `00` with `+1` and every `11`
//! with `-1`. Under the traffic rule `+1` particles move one cell right and
//! `-1` particles one cell left per step, and opposite particles that meet
//! annihilate.

use rand::Rng;

use crate::configuration::{Configuration, Symbol};
use crate::engine::{EngineError, Kernel, SyncStepper};
use crate::rules::Rule;
use crate::topology::Topology;

pub fn recode_psi(config: &Configuration) -> Result<Vec<i8>, EngineError> {
    let n = match **config.topology() {
        Topology::Ring { n } => n,
        ref other => {
            return Err(crate::rules::RuleError::Topology {
                rule: "psi recoding",
                topology: other.kind_name(),
            }
            .into())
        }
    };
    let x = config.symbols();
    Ok((0..n)
        .map(|i| 1 - x[i] as i8 - x[(i + n - 1) % n] as i8)
        .collect())
}

/// One step of ballistic annihilation on a ring of `{-1, 0, 1}`. Opposite
/// particles landing on the same cell, or crossing each other, vanish.
pub fn particle_step(psi: &[i8]) -> Vec<i8> {
    let n = psi.len();
    let mut out = vec![0i8; n];
    for k in 0..n {
        let from_left = psi[(k + n - 1) % n] == 1;
        let from_right = psi[(k + 1) % n] == -1;
        // a +1 at k-1 and a -1 at k would swap places instead
        let crossed_left = from_left && psi[k] == -1 && n > 1;
        let crossed_right = from_right && psi[k] == 1 && n > 1;
        let plus = from_left && !crossed_left;
        let minus = from_right && !crossed_right;
        out[k] = match (plus, minus) {
            (true, false) => 1,
            (false, true) => -1,
            _ => 0,
        };
    }
    out
}

/// `(positives, negatives)` in `psi(x)` read straight from `x`.
pub fn particle_counts(x: &[Symbol]) -> (usize, usize) {
    let n = x.len();
    let mut plus = 0;
    let mut minus = 0;
    for i in 0..n {
        match (x[(i + n - 1) % n], x[i]) {
            (0, 0) => plus += 1,
            (1, 1) => minus += 1,
            _ => {}
        }
    }
    (plus, minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Run the traffic rule and recode.
    Traffic,
    /// Move and annihilate the particles of `psi(x)` directly.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleTrack {
    pub cells: usize,
    pub times: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// Final particle positions and signs.
    pub survivors: Vec<(usize, i8)>,
}

impl ParticleTrack {
    pub fn negative_density(&self, idx: usize) -> f64 {
        self.negative[idx] as f64 / self.cells as f64
    }

    pub fn positive_density(&self, idx: usize) -> f64 {
        self.positive[idx] as f64 / self.cells as f64
    }

    pub fn final_negative_density(&self) -> f64 {
        self.negative_density(self.negative.len() - 1)
    }

    pub fn final_positive_density(&self) -> f64 {
        self.positive_density(self.positive.len() - 1)
    }
}

/// Particle counts at times `0, every, 2 * every, ...` and at `steps`.
pub fn annihilation_track(
    config: &Configuration,
    steps: usize,
    every: usize,
    route: Route,
) -> Result<ParticleTrack, EngineError> {
    let psi = recode_psi(config)?;
    let every = every.max(1);
    let n = psi.len();
    let mut track = ParticleTrack {
        cells: n,
        times: Vec::new(),
        positive: Vec::new(),
        negative: Vec::new(),
        survivors: Vec::new(),
    };
    let mut record = |t: usize, plus: usize, minus: usize| {
        track.times.push(t);
        track.positive.push(plus);
        track.negative.push(minus);
    };
    match route {
        Route::Traffic => {
            // the traffic rule draws no randomness
            let mut rng = crate::seeding::replica_rng(0, 0);
            let mut stepper = SyncStepper::new(Rule::Traffic, config, Kernel::Auto, &mut rng)?;
            let (p, m) = particle_counts(config.symbols());
            record(0, p, m);
            for t in 1..=steps {
                stepper.step(&mut rng);
                if t % every == 0 || t == steps {
                    let (p, m) = particle_counts(&stepper.symbols());
                    record(t, p, m);
                }
            }
            let x = stepper.symbols();
            let last = recode_psi(&Configuration::new(config.topology().clone(), x)?)?;
            track.survivors = survivors(&last);
        }
        Route::Direct => {
            let mut parts: Vec<(usize, i8)> = survivors(&psi);
            let count = |parts: &[(usize, i8)]| {
                let plus = parts.iter().filter(|p| p.1 == 1).count();
                (plus, parts.len() - plus)
            };
            let (p, m) = count(&parts);
            record(0, p, m);
            for t in 1..=steps {
                parts = move_particles(&parts, n);
                if t % every == 0 || t == steps {
                    let (p, m) = count(&parts);
                    record(t, p, m);
                }
            }
            parts.sort_unstable();
            track.survivors = parts;
        }
    }
    Ok(track)
}

fn survivors(psi: &[i8]) -> Vec<(usize, i8)> {
    psi.iter()
        .enumerate()
        .filter(|(_, &s)| s != 0)
        .map(|(k, &s)| (k, s))
        .collect()
}

/// Particles are kept in cyclic order; a `+1` directly followed by a `-1`
/// at distance one or two annihilates with it.
fn move_particles(parts: &[(usize, i8)], n: usize) -> Vec<(usize, i8)> {
    let m = parts.len();
    let mut dead = vec![false; m];
    if m >= 2 {
        for k in 0..m {
            let (a, sa) = parts[k];
            let (b, sb) = parts[(k + 1) % m];
            let gap = (b + n - a) % n;
            if sa == 1 && sb == -1 && (1..=2).contains(&gap) {
                dead[k] = true;
                dead[(k + 1) % m] = true;
            }
        }
    }
    parts
        .iter()
        .zip(dead)
        .filter(|(_, d)| !d)
        .map(|(&(p, s), _)| {
            let q = if s == 1 { (p + 1) % n } else { (p + n - 1) % n };
            (q, s)
        })
        .collect()
}

/// Ring of `n` cells drawn from Bernoulli(`p`), recoded.
pub fn sample_psi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Vec<i8>, EngineError> {
    let topo = std::sync::Arc::new(Topology::ring(n)?);
    let config = Configuration::sample_bernoulli(topo, p, rng)?;
    recode_psi(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::step_sync;
    use crate::seeding::replica_rng;

    #[test]
    fn psi_values() {
        let c = Configuration::ring_from_str("1001").unwrap();
        assert_eq!(recode_psi(&c).unwrap(), vec![-1, 0, 1, 0]);
        let alt = Configuration::ring_from_str("010101").unwrap();
        assert!(recode_psi(&alt).unwrap().iter().all(|&s| s == 0));
    }

    #[test]
    fn psi_sum() {
        let mut rng = replica_rng(2, 0);
        for n in [1usize, 5, 40] {
            let topo = std::sync::Arc::new(Topology::ring(n).unwrap());
            let c = Configuration::sample_bernoulli(topo, 0.3, &mut rng).unwrap();
            let sum: i64 = recode_psi(&c).unwrap().iter().map(|&s| s as i64).sum();
            assert_eq!(sum, n as i64 - 2 * c.density().ones as i64);
        }
    }

    #[test]
    fn routes_agree() {
        let mut rng = replica_rng(3, 0);
        for p in [0.3, 0.5, 0.7] {
            let topo = std::sync::Arc::new(Topology::ring(301).unwrap());
            let c = Configuration::sample_bernoulli(topo, p, &mut rng).unwrap();
            let a = annihilation_track(&c, 400, 7, Route::Traffic).unwrap();
            let b = annihilation_track(&c, 400, 7, Route::Direct).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn direct_step_matches_traffic_small() {
        let mut rng = replica_rng(1, 0);
        let c = Configuration::ring_from_str("0011101000110").unwrap();
        let next = step_sync(&c, Rule::Traffic, &mut rng).unwrap();
        assert_eq!(particle_step(&recode_psi(&c).unwrap()), recode_psi(&next).unwrap());
    }
}
