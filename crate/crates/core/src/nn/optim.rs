//! Optimizers. State is kept per parameter in visit order, which is fixed by
//! construction, so updates are deterministic.

use super::Layer;
use crate::scalar::Scalar;
use ndarray::ArrayD;

/// Adaptive moment estimation.
pub struct Adam<F: Scalar> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    t: usize,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr: F::cast(lr),
            beta1: F::cast(0.9),
            beta2: F::cast(0.999),
            eps: F::cast(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// GAN-style momentum (beta1 = 0.5).
    pub fn with_beta1(mut self, beta1: f64) -> Self {
        self.beta1 = F::cast(beta1);
        self
    }

    pub fn step(&mut self, net: &mut dyn Layer<F>) {
        self.t += 1;
        let t = self.t as i32;
        let (beta1, beta2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let bc1 = F::one() - beta1.powi(t);
        let bc2 = F::one() - beta2.powi(t);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        net.visit_params("", &mut |_, mut value, grad| {
            if m.len() <= idx {
                m.push(ArrayD::zeros(value.raw_dim()));
                v.push(ArrayD::zeros(value.raw_dim()));
            }
            let m_i = &mut m[idx];
            let v_i = &mut v[idx];
            ndarray::Zip::from(&mut *m_i)
                .and(&grad)
                .for_each(|m, &g| *m = beta1 * *m + (F::one() - beta1) * g);
            ndarray::Zip::from(&mut *v_i)
                .and(&grad)
                .for_each(|v, &g| *v = beta2 * *v + (F::one() - beta2) * g * g);
            ndarray::Zip::from(&mut value)
                .and(&*m_i)
                .and(&*v_i)
                .for_each(|p, &m, &v| {
                    let m_hat = m / bc1;
                    let v_hat = v / bc2;
                    *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                });
            idx += 1;
        });
    }
}

/// Adadelta with a learning-rate multiplier on the computed update.
pub struct Adadelta<F: Scalar> {
    pub lr: F,
    pub rho: F,
    pub eps: F,
    acc_grad: Vec<ArrayD<F>>,
    acc_update: Vec<ArrayD<F>>,
}

impl<F: Scalar> Adadelta<F> {
    pub fn new(lr: f64) -> Self {
        Adadelta {
            lr: F::cast(lr),
            rho: F::cast(0.95),
            eps: F::cast(1e-7),
            acc_grad: Vec::new(),
            acc_update: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut dyn Layer<F>) {
        let (rho, eps, lr) = (self.rho, self.eps, self.lr);
        let (acc_g, acc_u) = (&mut self.acc_grad, &mut self.acc_update);
        let mut idx = 0;
        net.visit_params("", &mut |_, mut value, grad| {
            if acc_g.len() <= idx {
                acc_g.push(ArrayD::zeros(value.raw_dim()));
                acc_u.push(ArrayD::zeros(value.raw_dim()));
            }
            let g_i = &mut acc_g[idx];
            let u_i = &mut acc_u[idx];
            ndarray::Zip::from(&mut *g_i)
                .and(&grad)
                .for_each(|a, &g| *a = rho * *a + (F::one() - rho) * g * g);
            ndarray::Zip::from(&mut value)
                .and(&mut *u_i)
                .and(&*g_i)
                .and(&grad)
                .for_each(|p, u, &a, &g| {
                    let delta = -((*u + eps).sqrt() / (a + eps).sqrt()) * g;
                    *u = rho * *u + (F::one() - rho) * delta * delta;
                    *p = *p + lr * delta;
                });
            idx += 1;
        });
    }
}
