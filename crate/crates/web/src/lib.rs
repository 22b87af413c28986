//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Seeds are `u32` on this side so that JavaScript can pass plain numbers.

use std::collections::BTreeMap;
use std::sync::Arc;

use densilab::analysis::{h_iterate, tree_root_law};
use densilab::engine::{Kernel, SyncStepper};
use densilab::seeding::replica_rng;
use densilab::{Configuration, Rule, Symbol, Topology};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn rule_from(name: &str, param: f64) -> Result<Rule, JsError> {
    let mut params = BTreeMap::new();
    match name {
        "majority_traffic" => {
            params.insert("alpha".to_string(), param);
        }
        "fuks" => {
            params.insert("p_copy".to_string(), param);
        }
        _ => {}
    }
    Rule::from_name(name, &params).map_err(js_err)
}

/// Space-time diagram of a Bernoulli(`p`) ring: `steps + 1` rows of `n`
/// cells, row-major. Two-tape rules append the second tape's rows.
#[wasm_bindgen]
pub fn ring_diagram(rule: &str, param: f64, n: usize, p: f64, steps: usize, seed: u32) -> Result<Vec<u8>, JsError> {
    let rule = rule_from(rule, param)?;
    let topo = Arc::new(Topology::ring(n).map_err(js_err)?);
    let mut rng = replica_rng(seed as u64, 0);
    let start = if rule.tapes() == 2 {
        Configuration::sample_two_tape(topo, p, 0.5, &mut rng)
    } else {
        Configuration::sample_bernoulli(topo, p, &mut rng)
    }
    .map_err(js_err)?;
    let mut stepper = SyncStepper::new(rule, &start, Kernel::Auto, &mut rng).map_err(js_err)?;
    let mut snaps = vec![stepper.symbols()];
    for _ in 0..steps {
        stepper.step(&mut rng);
        snaps.push(stepper.symbols());
    }
    let mut out = Vec::with_capacity(snaps.len() * n * rule.tapes());
    for tape in 0..rule.tapes() {
        for s in &snaps {
            out.extend(s.iter().map(|&x| (x >> tape) & 1));
        }
    }
    Ok(out)
}

/// A torus under Toom, Maj5 or Glauber dynamics, stepped from JavaScript.
#[wasm_bindgen]
pub struct TorusDemo {
    stepper: SyncStepper,
    rng: ChaCha8Rng,
    width: usize,
    height: usize,
}

#[wasm_bindgen]
impl TorusDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(rule: &str, width: usize, height: usize, p: f64, seed: u32) -> Result<TorusDemo, JsError> {
        let rule = rule_from(rule, 0.0)?;
        let topo = Arc::new(Topology::torus(width, height).map_err(js_err)?);
        let mut rng = replica_rng(seed as u64, 0);
        let start = Configuration::sample_bernoulli(topo, p, &mut rng).map_err(js_err)?;
        let stepper = SyncStepper::new(rule, &start, Kernel::Auto, &mut rng).map_err(js_err)?;
        Ok(TorusDemo {
            stepper,
            rng,
            width,
            height,
        })
    }

    /// Advances `count` synchronous steps.
    pub fn step(&mut self, count: usize) {
        for _ in 0..count {
            self.stepper.step(&mut self.rng);
        }
    }

    /// Cell `(i, j)` at index `j * width + i`, `j` pointing north.
    pub fn cells(&self) -> Vec<Symbol> {
        self.stepper.symbols()
    }

    pub fn steps(&self) -> usize {
        self.stepper.steps()
    }

    pub fn ones(&self) -> usize {
        self.stepper.symbols().iter().filter(|&&s| s == 1).count()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// 0 or 1 once uniform, -1 before.
    pub fn absorbed(&self) -> i32 {
        self.stepper.absorbed().map_or(-1, i32::from)
    }
}

/// `h^t(p)` for `t = 0..=steps`, `h(q) = 3q^2 - 2q^3`.
#[wasm_bindgen]
pub fn root_law_curve(p: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|t| h_iterate(p, t)).collect()
}

/// Monte Carlo root frequencies of majority trees of depth `0..=steps`,
/// `samples` trees each.
#[wasm_bindgen]
pub fn root_law_samples(p: f64, steps: usize, samples: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let mut rng = replica_rng(seed as u64, 0);
    (0..=steps)
        .map(|t| {
            tree_root_law(p, t, samples as u64, &mut rng)
                .map(|law| law.estimate())
                .map_err(js_err)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagram_shape() {
        let d = ring_diagram("gkl", 0.0, 20, 0.5, 7, 1).unwrap();
        assert_eq!(d.len(), 20 * 8);
        let d = ring_diagram("two_tape", 0.0, 10, 0.5, 3, 1).unwrap();
        assert_eq!(d.len(), 2 * 10 * 4);
        assert!(ring_diagram("majority_traffic", 0.3, 10, 0.5, 3, 1).is_ok());
    }

    #[test]
    fn torus_reaches_majority() {
        let mut t = TorusDemo::new("toom", 16, 16, 0.9, 3).unwrap();
        t.step(200);
        assert_eq!(t.absorbed(), 1);
        assert_eq!(t.ones(), 256);
    }

    #[test]
    fn curve_starts_at_p() {
        let c = root_law_curve(0.4, 3);
        assert_eq!(c[0], 0.4);
        assert!(c.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(root_law_samples(0.4, 3, 100, 1).unwrap().len(), 4);
    }
}
