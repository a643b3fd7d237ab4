//! Adamax parameter updates and gradient verification.

use std::collections::BTreeMap;

use super::value::ParamSet;

/// Optimizer state: first-moment and infinity-norm estimates per parameter,
/// plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamaxState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: BTreeMap<String, Vec<f64>>,
    u: BTreeMap<String, Vec<f64>>,
}

impl AdamaxState {
    pub fn new(lr: f64) -> AdamaxState {
        AdamaxState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            u: BTreeMap::new(),
        }
    }
}

/// One update from the gradients currently in the parameter slots:
/// t += 1; m = β₁m + (1−β₁)g; u = max(β₂u, |g|); p −= (lr/(1−β₁ᵗ)) · m/(u+ε).
pub fn adamax_step(params: &mut ParamSet, state: &mut AdamaxState) {
    state.t += 1;
    let correction = state.lr / (1.0 - state.beta1.powi(state.t as i32));
    for (name, value) in params.iter_mut() {
        if !value.requires_grad {
            continue;
        }
        let numel = value.numel();
        let grad = value.grad.as_ref().map(|g| g.as_slice()).unwrap_or(&[]);
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; numel]);
        let u = state.u.entry(name.clone()).or_insert_with(|| vec![0.0; numel]);
        for i in 0..numel {
            let g = grad.get(i).copied().unwrap_or(0.0);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            u[i] = (state.beta2 * u[i]).max(g.abs());
            value.data[i] -= correction * m[i] / (u[i] + state.eps);
        }
    }
}

/// Compares the gradients produced by `run` against central differences.
///
/// `run` must zero the slots, run forward and backward at the given
/// parameters, leave the gradients in the slots, and return the loss. The
/// result is the worst relative error over every learnable coordinate, with
/// denominator max(|analytic|, |numeric|, 1e-8).
pub fn finite_diff_check(
    params: &mut ParamSet,
    h: f64,
    mut run: impl FnMut(&mut ParamSet) -> f64,
) -> f64 {
    assert!(h > 0.0);
    run(params);
    let analytic: BTreeMap<String, Vec<f64>> = params
        .iter()
        .filter(|(_, v)| v.requires_grad)
        .map(|(name, v)| (name.clone(), v.grad.clone().expect("run must fill gradient slots")))
        .collect();

    let mut worst = 0.0f64;
    let names: Vec<String> = analytic.keys().cloned().collect();
    for name in names {
        for i in 0..params.get(&name).numel() {
            let original = params.get(&name).data[i];
            params.get_mut(&name).data[i] = original + h;
            let plus = run(params);
            params.get_mut(&name).data[i] = original - h;
            let minus = run(params);
            params.get_mut(&name).data[i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[&name][i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    // Leave the slots at the base-point gradients.
    run(params);
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::tape::Tape;
    use crate::tensor::value::TensorValue;
    
    

    fn constant_grad_params(g: &[f64]) -> ParamSet {
        let mut params = ParamSet::new();
        let mut p = TensorValue::vector(vec![1.0; g.len()]).with_grad();
        p.grad = Some(g.to_vec());
        params.insert("p", p);
        params
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut params = constant_grad_params(&[0.0, 0.0]);
        let mut state = AdamaxState::new(0.002);
        adamax_step(&mut params, &mut state);
        assert_eq!(state.t, 1);
        assert_eq!(params.get("p").data, [1.0, 1.0]);
    }

    #[test]
    fn first_step_is_the_normalized_gradient() {
        let g = [0.3, -0.4];
        let mut params = constant_grad_params(&g);
        let mut state = AdamaxState::new(0.002);
        adamax_step(&mut params, &mut state);
        for i in 0..2 {
            let expected = 1.0 - 0.002 * g[i] / (g[i].abs() + 1e-8);
            assert!((params.get("p").data[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_updates_approach_the_learning_rate() {
        let g = [0.25, -2.0];
        let mut params = constant_grad_params(&g);
        let mut state = AdamaxState::new(0.002);
        let mut previous = params.get("p").data.clone();
        let mut last_delta = vec![0.0; 2];
        for _ in 0..500 {
            params.get_mut("p").grad = Some(g.to_vec());
            adamax_step(&mut params, &mut state);
            let current = params.get("p").data.clone();
            last_delta = current.iter().zip(&previous).map(|(c, p)| c - p).collect();
            previous = current;
        }
        for (d, gi) in last_delta.iter().zip(&g) {
            let expected = -state.lr * gi.signum();
            assert!((d - expected).abs() < 1e-6, "update {d} vs {expected}");
        }
    }

    #[test]
    fn quadratic_gradients_check_to_high_precision() {
        let mut params = ParamSet::new();
        params.insert("w", TensorValue::vector(vec![0.4, -1.3, 2.2]).with_grad());
        let target = [1.0, 2.0, 3.0];
        let err = finite_diff_check(&mut params, 1e-5, |p| {
            p.zero_grads();
            let tape = Tape::new();
            let w = tape.param("w", p);
            let t = tape.vector(target.to_vec());
            let diff = tape.sub(w, t).unwrap();
            let sq = tape.mul(diff, diff).unwrap();
            let loss = tape.sum(sq);
            tape.backward(loss);
            tape.write_grads(p);
            tape.scalar_value(loss)
        });
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn every_primitive_differentiates_correctly() {
        // Fixed inputs keep every op away from its non-smooth points
        // (activation kinks, pooling ties, the origin of abs).
        let mut params = ParamSet::new();
        params.insert(
            "w",
            TensorValue::matrix(
                4,
                3,
                vec![0.5, -0.3, 0.8, 0.2, 0.7, -0.6, -0.4, 0.1, 0.9, 0.3, -0.8, 0.2],
            )
            .with_grad(),
        );
        params.insert("v", TensorValue::vector(vec![0.6, -0.5, 0.4, 0.7]).with_grad());
        params.insert("b", TensorValue::vector(vec![0.25, -0.35, 0.45]).with_grad());
        // One composite loss touching every primitive op.
        let err = finite_diff_check(&mut params, 1e-5, |p| {
            p.zero_grads();
            let tape = Tape::new();
            let w = tape.param("w", p);
            let v = tape.param("v", p);
            let b = tape.param("b", p);
            let h = tape.matmul(v, w).unwrap();
            let h = tape.add(h, b).unwrap();
            let t = tape.tanh(h);
            let s = tape.sigmoid(h);
            let e = tape.elu(h);
            let l = tape.leaky_relu(h, 0.2);
            let cat = tape.concat(&[t, s, e, l]).unwrap();
            let sliced = tape.slice(cat, 2, 7).unwrap();
            let first = tape.slice(sliced, 0, 3).unwrap();
            let second = tape.slice(sliced, 3, 3).unwrap();
            let lift = tape.vector(vec![5.0, 5.0, 5.0]);
            let second = tape.add(second, lift).unwrap();
            let stacked = tape.stack_rows(&[first, second]).unwrap();
            let pooled = tape.row_max_pool(stacked).unwrap();
            let wrow = tape.row(w, 1).unwrap();
            let amped = tape.mul(pooled, wrow).unwrap();
            let soft = tape.softmax(amped).unwrap();
            let scaled = tape.scale(soft, 3.0);
            let shift = tape.vector(vec![2.0, 2.0, 2.0]);
            let moved = tape.abs(tape.add(scaled, shift).unwrap());
            let ce = tape.cross_entropy_with_logits(moved, 1).unwrap();
            let logit = tape.dot(pooled, wrow).unwrap();
            let bce = tape.binary_cross_entropy_with_logits(logit, 1.0).unwrap();
            let loss = tape.add(ce, bce).unwrap();
            let loss = tape.sum(loss);
            tape.backward(loss);
            tape.write_grads(p);
            tape.scalar_value(loss)
        });
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn abs_gradient_covers_both_signs() {
        let mut params = ParamSet::new();
        params.insert("x", TensorValue::vector(vec![-2.0, 3.0]).with_grad());
        let err = finite_diff_check(&mut params, 1e-5, |p| {
            p.zero_grads();
            let tape = Tape::new();
            let x = tape.param("x", p);
            let loss = tape.sum(tape.abs(x));
            tape.backward(loss);
            tape.write_grads(p);
            tape.scalar_value(loss)
        });
        assert!(err < 1e-8, "relative error {err}");
        let grad = params.get("x").grad.as_ref().unwrap().clone();
        assert_eq!(grad, [-1.0, 1.0]);
    }
}
