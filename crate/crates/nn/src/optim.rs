use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::mlp::Mlp;

/// Adam hyper-parameters other than the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AdamState {
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) step: u64,
}

impl AdamState {
    pub(crate) fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

impl Mlp {
    /// One bias-corrected Adam step using the accumulated gradient, which is
    /// then cleared.
    ///
    /// A non-finite gradient or update leaves parameters and moments untouched.
    pub fn optimizer_step(&mut self, lr: f64) -> Result<()> {
        self.optimizer_step_with(lr, AdamConfig::default())
    }

    pub fn optimizer_step_with(&mut self, lr: f64, cfg: AdamConfig) -> Result<()> {
        if self.grads().iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        let t = self.adam.step + 1;
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        let n = self.num_params();
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let g = self.grads()[i];
            let mi = cfg.beta1 * self.adam.m[i] + (1.0 - cfg.beta1) * g;
            let vi = cfg.beta2 * self.adam.v[i] + (1.0 - cfg.beta2) * g * g;
            let p = self.params()[i] - lr * (mi / bc1) / ((vi / bc2).sqrt() + cfg.eps);
            if !p.is_finite() {
                return Err(NnError::NonFinite("parameter update"));
            }
            m.push(mi);
            v.push(vi);
            next.push(p);
        }
        self.params_mut().copy_from_slice(&next);
        self.adam.m = m;
        self.adam.v = v;
        self.adam.step = t;
        self.zero_grad();
        Ok(())
    }

    pub fn adam_moments(&self) -> (&[f64], &[f64]) {
        (&self.adam.m, &self.adam.v)
    }
}

/// Polyak averaging: `target ← (1 − tau)·target + tau·online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    target.check_same_shape(online)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::InvalidSpec(format!("tau must lie in [0, 1], got {tau}")));
    }
    if tau == 1.0 {
        return target.copy_params_from(online);
    }
    for (t, &o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{Activation, NetSpec};

    fn scalar() -> Mlp {
        // y = w·x + b with a single weight
        Mlp::zeros(NetSpec {
            input: 1,
            hidden: vec![],
            output: 1,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        })
        .unwrap()
    }

    #[test]
    fn zero_gradient_keeps_params_and_moments() {
        let mut net = scalar();
        net.params_mut().copy_from_slice(&[0.4, -0.2]);
        net.optimizer_step(1e-3).unwrap();
        assert_eq!(net.params(), &[0.4, -0.2]);
        assert!(net.adam_moments().0.iter().all(|&m| m == 0.0));
        assert!(net.adam_moments().1.iter().all(|&v| v == 0.0));
        assert_eq!(net.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, 42.0, -7.0] {
            let mut net = scalar();
            net.grads_mut()[0] = g;
            net.optimizer_step(1e-4).unwrap();
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps)
            let expected = 1e-4 * g.abs() / (g.abs() + 1e-8);
            assert!((net.params()[0].abs() - expected).abs() < 1e-15);
            assert_eq!(net.params()[0].signum(), -g.signum());
            assert!(net.grads().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn quadratic_converges() {
        // minimize ½x² with x stored in the single weight; gradient is x
        let mut net = scalar();
        net.params_mut()[0] = 1.0;
        let mut prev = 1.0f64;
        for step in 0..3000 {
            let x = net.params()[0];
            net.grads_mut()[0] = x;
            net.optimizer_step(1e-2).unwrap();
            let now = net.params()[0].abs();
            if step < 80 {
                assert!(now < prev, "step {step}: {now} !< {prev}");
            }
            prev = now;
        }
        assert!(net.params()[0].abs() < 1e-2);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut net = scalar();
        net.params_mut().copy_from_slice(&[0.1, 0.2]);
        net.grads_mut()[1] = f64::NAN;
        assert!(matches!(net.optimizer_step(1e-3), Err(NnError::NonFinite(_))));
        assert_eq!(net.params(), &[0.1, 0.2]);
        assert_eq!(net.step_count(), 0);
    }

    #[test]
    fn soft_update_limits_and_default_tau() {
        let online = {
            let mut n = scalar();
            n.params_mut().copy_from_slice(&[1.0, 1.0]);
            n
        };
        let mut t = scalar();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t.params(), &[0.0, 0.0]);
        soft_update(&mut t, &online, 0.05).unwrap();
        assert_eq!(t.params(), &[0.05, 0.05]);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t.params(), online.params());
    }

    #[test]
    fn soft_update_shape_mismatch() {
        let mut a = scalar();
        let b = Mlp::zeros(NetSpec::value_head(2).with_hidden(vec![2])).unwrap();
        assert!(soft_update(&mut a, &b, 0.5).is_err());
    }

    #[test]
    fn soft_update_contracts_geometrically() {
        let mut online = scalar();
        online.params_mut().copy_from_slice(&[2.0, -3.0]);
        let mut t = scalar();
        let dist = |t: &Mlp| {
            t.params()
                .iter()
                .zip(online.params())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mut d = dist(&t);
        for _ in 0..50 {
            soft_update(&mut t, &online, 0.05).unwrap();
            let nd = dist(&t);
            assert!((nd / d - 0.95).abs() < 1e-9);
            d = nd;
        }
    }
}
