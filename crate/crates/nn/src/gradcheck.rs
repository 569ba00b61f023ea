//! Central finite-difference oracle for backward passes.
//!
//! Test support: each checked op is rebuilt as an f64 graph, its analytic
//! leaf gradients are compared against `(f(x+h) - f(x-h)) / 2h` element by
//! element. Lives in the library so downstream crates can check their own
//! composite ops and losses.

use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

/// Deterministic projection weights that make a scalar out of any output,
/// exercising every output element with distinct sensitivities.
pub fn scalarize(g: &mut Graph<f64>, out: NodeId) -> NodeId {
    let n = g.value(out).numel();
    let w = Tensor::from_vec(
        g.shape(out),
        (0..n).map(|i| (0.9 * i as f64 + 0.3).sin() + 0.05).collect(),
    );
    let w = g.input(w);
    let prod = g.mul(out, w).expect("scalarize shapes");
    g.mean(prod)
}

/// Checks analytic gradients of `build` against central finite differences
/// for every element of every input. `build` receives leaves in the order of
/// `inputs` and must return a scalar loss node.
pub fn check_gradients(
    inputs: &[Tensor<f64>],
    step: f64,
    rel_tol: f64,
    build: impl Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
) -> Result<(), String> {
    // Analytic pass.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = build(&mut g, &ids);
    if !g.value(loss).is_scalar() {
        return Err("build must return a scalar loss".into());
    }
    let grads = g.backward_nodes(loss).map_err(|e| e.to_string())?;

    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = perturbed.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let loss = build(&mut g, &ids);
        g.value(loss).item()
    };

    for (which, input) in inputs.iter().enumerate() {
        let analytic = match &grads[ids[which].0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(input.shape()),
        };
        for el in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[which].data_mut()[el] += step;
            let mut minus = inputs.to_vec();
            minus[which].data_mut()[el] -= step;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * step);
            let a = analytic.data()[el];
            let denom = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            if denom > 1e-7 {
                if err / denom > rel_tol && err > 1e-9 {
                    return Err(format!(
                        "input {which} element {el}: analytic {a:.9e} vs numeric {numeric:.9e} \
                         (rel err {:.3e})",
                        err / denom
                    ));
                }
            } else if err > 1e-7 {
                return Err(format!(
                    "input {which} element {el}: analytic {a:.9e} vs numeric {numeric:.9e} near zero"
                ));
            }
        }
    }
    Ok(())
}
