//! Gauss–Hermite quadrature against the standard Gaussian measure.
//!
//! Rules use the probabilists' convention: nodes/weights satisfy
//! `sum_i w_i f(x_i) ~ E_{y~N(0,1)}[f(y)]`, weights sum to 1, and nodes are
//! symmetric about 0. Nodes come from the Golub–Welsch eigenvalue construction
//! on the Jacobi matrix of the Hermite recurrence.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Hermite rule of the given order, exact for polynomial moments up
    /// to degree `2 * order - 1`.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 2, "quadrature order must be at least 2");
        // Jacobi matrix for probabilists' Hermite polynomials: zero diagonal,
        // off-diagonal sqrt(i).
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for i in 1..order {
            let b = (i as f64).sqrt();
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|j| {
                let node = eig.eigenvalues[j];
                let first = eig.eigenvectors[(0, j)];
                (node, first * first)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Enforce the exact +/- symmetry of the rule; the eigensolver is only
        // symmetric to rounding.
        let n = pairs.len();
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[j].1 + pairs[i].1);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            weights[n / 2] = pairs[n / 2].1;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        QuadratureRule { nodes, weights }
    }

    /// Gauss–Legendre rule on [0, upper], for the tail integrals where a
    /// substitution has already flattened the integrand.
    pub fn gauss_legendre(order: usize, upper: f64) -> Self {
        assert!(order >= 2 && upper > 0.0);
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for i in 1..order {
            let fi = i as f64;
            let b = fi / (4.0 * fi * fi - 1.0).sqrt();
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|j| {
                let first = eig.eigenvectors[(0, j)];
                // Map [-1, 1] onto [0, upper]; total weight 2 becomes upper.
                (
                    0.5 * upper * (eig.eigenvalues[j] + 1.0),
                    upper * first * first,
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(y)] for y ~ N(0,1).
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: x });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// E[f(y1, y2)] for independent standard Gaussians, on the tensor grid.
    pub fn expect_2d(&self, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&x1, &w1) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (&x2, &w2) in self.nodes.iter().zip(&self.weights) {
                let v = f(x1, x2);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { node: x2 });
                }
                inner += w2 * v;
            }
            acc += w1 * inner;
        }
        Ok(acc)
    }
}
