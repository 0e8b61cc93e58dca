//! Central finite-difference gradients, the oracle every analytic backward
//! pass in the crate is checked against.

use super::mlp::{Gradients, MlpParams};
use super::MathError;

/// Approximates `d loss / d params` coordinate by coordinate with central
/// differences of half-width `eps`. The returned gradient uses the same
/// shape tree as the parameters. Errors if the loss comes back non-finite.
pub fn finite_diff_grad<F>(
    params: &MlpParams,
    eps: f64,
    mut loss: F,
) -> Result<Gradients, MathError>
where
    F: FnMut(&MlpParams) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MathError::InvalidHyperparameter(format!(
            "finite difference eps must be positive, got {eps}"
        )));
    }
    let mut work = params.clone();
    let mut flat = Vec::with_capacity(params.num_coords());
    for i in 0..params.num_coords() {
        let original = *work.coord_mut(i);
        *work.coord_mut(i) = original + eps;
        let plus = loss(&work);
        *work.coord_mut(i) = original - eps;
        let minus = loss(&work);
        *work.coord_mut(i) = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(MathError::NonFinite {
                context: "finite difference loss evaluation",
            });
        }
        flat.push((plus - minus) / (2.0 * eps));
    }
    // Rebuild the shape tree by walking layers in coordinate order.
    let mut grads = Gradients::zeros_like(params);
    let mut it = flat.into_iter();
    grads.fill_from_flat(&mut it);
    Ok(grads)
}

impl Gradients {
    fn zeros_like(params: &MlpParams) -> Self {
        let weights = (0..params.num_layers())
            .map(|l| vec![0.0; params.weights(l).len()])
            .collect();
        let biases = (0..params.num_layers())
            .map(|l| vec![0.0; params.biases(l).len()])
            .collect();
        Self { weights, biases }
    }

    fn fill_from_flat(&mut self, it: &mut impl Iterator<Item = f64>) {
        for l in 0..self.weights.len() {
            for w in &mut self.weights[l] {
                *w = it.next().expect("flat gradient length matches");
            }
            for b in &mut self.biases[l] {
                *b = it.next().expect("flat gradient length matches");
            }
        }
        assert!(it.next().is_none(), "flat gradient length matches");
    }
}
