use serde::{Deserialize, Serialize};

/// Below this norm a difference vector counts as zero and the cosine term is
/// dropped.
pub(crate) const ZERO_NORM: f64 = 1e-12;

/// Weights of the two loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cosine: f64,
    pub mse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            cosine: 1.0,
            mse: 1.0,
        }
    }
}

/// Cosine distance between the true shift `target - anchor` and the predicted
/// shift `pred - anchor`, plus the mean squared error between `target` and
/// `pred`. Returns the loss and its gradient with respect to `pred`.
///
/// When either shift has zero norm the cosine term and its gradient are 0.
pub fn dual_loss(
    target: [f64; 3],
    anchor: [f64; 3],
    pred: [f64; 3],
    weights: LossWeights,
) -> (f64, [f64; 3]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 3];

    if weights.cosine != 0.0 {
        let u: [f64; 3] = std::array::from_fn(|i| target[i] - anchor[i]);
        let v: [f64; 3] = std::array::from_fn(|i| pred[i] - anchor[i]);
        let nu = norm(u);
        let nv = norm(v);
        if nu > ZERO_NORM && nv > ZERO_NORM {
            let dot = dot(u, v);
            let cos = dot / (nu * nv);
            loss += weights.cosine * (1.0 - cos);
            // d cos / dv = u / (|u||v|) - (u.v) v / (|u| |v|^3)
            for i in 0..3 {
                let d_cos = u[i] / (nu * nv) - dot * v[i] / (nu * nv * nv * nv);
                grad[i] -= weights.cosine * d_cos;
            }
        }
    }

    if weights.mse != 0.0 {
        let mut sq = 0.0;
        for i in 0..3 {
            let d = pred[i] - target[i];
            sq += d * d;
            grad[i] += weights.mse * 2.0 * d / 3.0;
        }
        loss += weights.mse * sq / 3.0;
    }

    (loss, grad)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prediction_has_zero_loss() {
        let (loss, grad) = dual_loss([0.2, 0.4, 0.9], [0.5, 0.5, 0.5], [0.2, 0.4, 0.9], LossWeights::default());
        assert!(loss.abs() < 1e-15);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn antiparallel_shift_costs_two() {
        let w = LossWeights { cosine: 1.0, mse: 0.0 };
        let anchor = [0.5, 0.5, 0.5];
        let (loss, _) = dual_loss([0.7, 0.4, 0.6], anchor, [0.3, 0.6, 0.4], w);
        assert!((loss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_drops_cosine_term() {
        let anchor = [0.5, 0.5, 0.5];
        let w = LossWeights { cosine: 1.0, mse: 0.0 };
        let (loss, grad) = dual_loss(anchor, anchor, [0.1, 0.2, 0.3], w);
        assert_eq!(loss, 0.0);
        assert_eq!(grad, [0.0; 3]);
        let (loss, _) = dual_loss([0.1, 0.2, 0.3], anchor, anchor, LossWeights::default());
        let mse = (0.16 + 0.09 + 0.04) / 3.0;
        assert!((loss - mse).abs() < 1e-12);
    }
}
