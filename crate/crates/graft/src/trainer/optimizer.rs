use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::ParamTree;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adaptive moment estimation. Moments are kept per parameter with their
/// own step counters, so parameters that only receive gradients on some
/// episodes (per-source encoders under round-robin) are bias-corrected
/// consistently.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub m: BTreeMap<String, Array2<f64>>,
    pub v: BTreeMap<String, Array2<f64>>,
    pub steps: BTreeMap<String, u64>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        params: &mut ParamTree,
        grads: &BTreeMap<String, Array2<f64>>,
        lr: f64,
    ) -> Result<()> {
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            if g.dim() != p.dim() {
                return Err(Error::Shape(format!(
                    "gradient for {name:?} is {:?}, parameter is {:?}",
                    g.dim(),
                    p.dim()
                )));
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Array2::zeros(g.dim()));
            let t = self.steps.entry(name.clone()).or_insert(0);
            *t += 1;
            let tf = *t as f64;
            ndarray::Zip::from(&mut *m).and(g).for_each(|m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            ndarray::Zip::from(&mut *v)
                .and(g)
                .for_each(|v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            let c1 = 1.0 - BETA1.powf(tf);
            let c2 = 1.0 - BETA2.powf(tf);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPS);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn quadratic_converges_to_minimum() {
        // f(p) = 0.5 * ||p - c||^2, gradient p - c.
        let c = arr2(&[[3.0, -2.0]]);
        let mut params = ParamTree::new();
        params.insert("p", Array2::zeros((1, 2)));
        let mut opt = AdamState::new();
        for _ in 0..2000 {
            let g = params.get("p").unwrap() - &c;
            let mut grads = BTreeMap::new();
            grads.insert("p".to_string(), g);
            opt.step(&mut params, &grads, 0.05).unwrap();
        }
        let p = params.get("p").unwrap();
        assert!((p[[0, 0]] - 3.0).abs() < 1e-2, "{p:?}");
        assert!((p[[0, 1]] + 2.0).abs() < 1e-2, "{p:?}");
    }

    #[test]
    fn untouched_parameters_are_not_moved() {
        let mut params = ParamTree::new();
        params.insert("a", arr2(&[[1.0]]));
        params.insert("b", arr2(&[[2.0]]));
        let mut opt = AdamState::new();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), arr2(&[[0.5]]));
        opt.step(&mut params, &grads, 0.1).unwrap();
        assert_eq!(params.get("b").unwrap()[[0, 0]], 2.0);
        assert!(params.get("a").unwrap()[[0, 0]] < 1.0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut params = ParamTree::new();
        params.insert("a", arr2(&[[1.0]]));
        let mut opt = AdamState::new();
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Array2::zeros((2, 2)));
        assert!(opt.step(&mut params, &grads, 0.1).is_err());
    }
}
