use ndarray::{Array2, Zip};

use super::Real;

/// Scalar loss over a network output batch.
pub trait Loss<S: Real> {
    fn value(&self, output: &Array2<S>) -> S;
    fn gradient(&self, output: &Array2<S>) -> Array2<S>;
    /// Sign pattern of the loss's own nondifferentiable points, if any.
    fn kink_signature(&self, _output: &Array2<S>) -> Vec<bool> {
        Vec::new()
    }
}

/// `mean |output − target|` over batch and features; subgradient 0 at equality.
pub struct MeanAbsoluteError<'a, S> {
    pub target: &'a Array2<S>,
}

impl<S: Real> Loss<S> for MeanAbsoluteError<'_, S> {
    fn value(&self, output: &Array2<S>) -> S {
        let n = S::from_usize(output.len());
        Zip::from(output)
            .and(self.target)
            .fold(S::zero(), |acc, &o, &t| acc + (o - t).abs())
            / n
    }

    fn gradient(&self, output: &Array2<S>) -> Array2<S> {
        let n = S::from_usize(output.len());
        Zip::from(output)
            .and(self.target)
            .map_collect(|&o, &t| {
                if o > t {
                    S::one() / n
                } else if o < t {
                    -S::one() / n
                } else {
                    S::zero()
                }
            })
    }

    fn kink_signature(&self, output: &Array2<S>) -> Vec<bool> {
        Zip::from(output)
            .and(self.target)
            .map_collect(|&o, &t| o > t)
            .into_raw_vec_and_offset()
            .0
    }
}

/// `½ Σ (output − target)²`, summed over batch and features.
pub struct SquaredError<'a, S> {
    pub target: &'a Array2<S>,
}

impl<S: Real> Loss<S> for SquaredError<'_, S> {
    fn value(&self, output: &Array2<S>) -> S {
        let half = S::from_f64(0.5);
        Zip::from(output)
            .and(self.target)
            .fold(S::zero(), |acc, &o, &t| acc + half * (o - t) * (o - t))
    }

    fn gradient(&self, output: &Array2<S>) -> Array2<S> {
        output - self.target
    }
}
