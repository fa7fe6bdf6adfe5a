//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records every primitive as it executes (define-by-run). Each
//! primitive stores a forward value and an adjoint rule; [`Graph::backward`]
//! walks the record in reverse and sums contributions over all paths.
//!
//! ```
//! use diffsar::autodiff::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
//! let loss = x.square().sum();
//! let grads = loss.backward().unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
//! ```

mod conv;
mod graph;
mod ops;
mod tensor;

pub use conv::conv3x3;
pub use graph::{AdjointFn, Gradients, Graph, Var};
pub use ops::{concat, logistic, CsrMatrix};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max_i |g_ad,i − g_fd,i| / (|g_fd,i| + 1e-8)
    pub max_rel_error: f64,
    /// coordinate attaining the maximum
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences with step `epsilon`.
pub fn check_gradient<F>(f: F, x: &Tensor, epsilon: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let leaf = g.param(x.clone());
    let out = f(&g, leaf)?;
    if !out.item().is_finite() {
        return Err(Error::Numeric("non-finite value at the base point".into()));
    }
    let analytic = g.backward(out)?.get_or_zeros(leaf).into_data();

    let eval = |probe: &Tensor, i: usize| -> Result<f64> {
        let g = Graph::new();
        let v = f(&g, g.constant(probe.clone()))?.item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!(
                "non-finite value perturbing coordinate {i}"
            )))
        }
    };

    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let base = x.data()[i];
        probe.data_mut()[i] = base + epsilon;
        let up = eval(&probe, i)?;
        probe.data_mut()[i] = base - epsilon;
        let down = eval(&probe, i)?;
        probe.data_mut()[i] = base;
        numeric.push((up - down) / (2.0 * epsilon));
    }

    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-8))
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, e)| if e > best.1 { (i, e) } else { best },
        );

    Ok(GradCheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let grads = x.square().sum().backward().unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn constant_root_gives_zero_gradients() {
        let g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        let c = g.scalar(5.0);
        let grads = c.backward().unwrap();
        assert!(grads.is_empty());
        assert_eq!(grads.get_or_zeros(x).data(), &[0.0, 0.0]);
        let zero = x.scale(0.0).sum();
        assert_eq!(zero.backward().unwrap().get(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(x.square().backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn paths_accumulate() {
        // L = x*x + 3x at x = 2 → 2x + 3 = 7
        let g = Graph::new();
        let x = g.param(Tensor::scalar(2.0));
        let l = x.mul(x).unwrap().add(x.scale(3.0)).unwrap();
        assert_eq!(l.backward().unwrap().get(x).unwrap().item(), 7.0);
    }

    #[test]
    fn linear_function_checks_exactly() {
        let x = Tensor::vector(vec![0.3, -1.2, 4.0, 2.5]);
        let r = check_gradient(|_, x| Ok(x.sum()), &x, 1e-4).unwrap();
        assert!(r.max_rel_error <= 1e-10, "{}", r.max_rel_error);
    }

    #[test]
    fn sine_against_cosine() {
        let x = Tensor::vector(vec![0.1, 0.7, -2.0, 3.3, 1.5]);
        let r = check_gradient(|_, x| Ok(x.sin().sum()), &x, 1e-4).unwrap();
        assert!(r.max_rel_error <= 1e-6, "{}", r.max_rel_error);
        for (a, xi) in r.analytic.iter().zip(x.data()) {
            assert!((a - xi.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_values_are_reported() {
        let x = Tensor::vector(vec![1e-5, 1.0]);
        let err = check_gradient(|_, x| Ok(x.add_scalar(-1e-5).ln().sum()), &x, 1e-4);
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    #[test]
    fn prob_union_gradient_matches_product_rule() {
        let g = Graph::new();
        let x = g.param(Tensor::new(vec![1, 3], vec![0.2, 0.5, 0.9]).unwrap());
        let u = x.prob_union().unwrap();
        assert!((u.item() - (1.0 - 0.8 * 0.5 * 0.1)).abs() < 1e-15);
        let gr = u.sum().backward().unwrap();
        let d = gr.get(x).unwrap().data().to_vec();
        assert!((d[0] - 0.5 * 0.1).abs() < 1e-15);
        assert!((d[1] - 0.8 * 0.1).abs() < 1e-15);
        assert!((d[2] - 0.8 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_has_leaf_shape() {
        let g = Graph::new();
        let x = g.param(Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap());
        let gr = x.row_norm().unwrap().sum().backward().unwrap();
        assert_eq!(gr.get(x).unwrap().shape(), &[2, 3]);
    }
}
