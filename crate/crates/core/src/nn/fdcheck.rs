//! Central finite differences over network parameters. This is the
//! independent verification route for every analytic backward pass: it never
//! touches gradient code, only repeated forward evaluations.

use super::Layer;
use crate::scalar::Scalar;

/// Numerical gradient of `loss_fn` w.r.t. every parameter of `net`, by central
/// differences with step `h`. `loss_fn` must be a pure function of the
/// network parameters (it may run forward passes but must not mutate
/// parameters itself).
pub fn numeric_param_grads<F, L>(
    net: &mut L,
    loss_fn: &mut dyn FnMut(&mut L) -> F,
    h: f64,
) -> Vec<(String, ndarray::ArrayD<f64>)>
where
    F: Scalar,
    L: Layer<F> + ?Sized,
{
    // Discover parameter names and sizes first.
    let mut shapes: Vec<(String, usize)> = Vec::new();
    net.visit_params("", &mut |name, value, _| {
        shapes.push((name.to_string(), value.len()));
    });

    let mut grads = Vec::with_capacity(shapes.len());
    for (pi, (name, len)) in shapes.iter().enumerate() {
        let mut grad_flat = vec![0.0f64; *len];
        for ci in 0..*len {
            let nudge = |net: &mut L, delta: f64| {
                let mut cur = 0usize;
                net.visit_params("", &mut |_, mut value, _| {
                    if cur == pi {
                        let flat = value.as_slice_mut().expect("contiguous param");
                        flat[ci] = F::cast(flat[ci].as_f64() + delta);
                    }
                    cur += 1;
                });
            };
            nudge(net, h);
            let plus = loss_fn(net).as_f64();
            nudge(net, -2.0 * h);
            let minus = loss_fn(net).as_f64();
            nudge(net, h);
            grad_flat[ci] = (plus - minus) / (2.0 * h);
        }
        let mut shape_holder = None;
        let mut cur = 0usize;
        net.visit_params("", &mut |_, value, _| {
            if cur == pi {
                shape_holder = Some(value.raw_dim());
            }
            cur += 1;
        });
        let arr = ndarray::ArrayD::from_shape_vec(shape_holder.unwrap(), grad_flat)
            .expect("fd grad shape");
        grads.push((name.clone(), arr));
    }
    grads
}

/// Maximum elementwise relative error between two gradient snapshots, with a
/// floor that keeps near-zero entries from blowing up the ratio.
pub fn max_relative_error(
    analytic: &[(String, ndarray::ArrayD<f64>)],
    numeric: &[(String, ndarray::ArrayD<f64>)],
) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "parameter sets differ");
    let mut worst = 0.0f64;
    for ((name_a, a), (name_n, n)) in analytic.iter().zip(numeric) {
        assert_eq!(name_a, name_n, "parameter order differs");
        for (&x, &y) in a.iter().zip(n.iter()) {
            let scale = x.abs().max(y.abs()).max(1e-6);
            let rel = (x - y).abs() / scale;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
