//! Small fixed regression bases and ridge least squares, used by the adaptive
//! designs and the benchmark's value fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::Observation;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Feature map for observations: one-hot indicators for discrete spaces and,
/// for continuous ones, a polynomial basis of configurable degree, up to the
/// default quadratic [1, o, o^2] (elementwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// Intercept only; valid for either observation kind.
    Constant,
    OneHot { cardinality: usize },
    Linear { dim: usize },
    Quadratic { dim: usize },
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        match self {
            FeatureMap::Constant => 1,
            FeatureMap::OneHot { cardinality } => *cardinality,
            FeatureMap::Linear { dim } => 1 + dim,
            FeatureMap::Quadratic { dim } => 1 + 2 * dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self, obs: &Observation) -> Vec<f64> {
        match (self, obs) {
            (FeatureMap::Constant, _) => vec![1.0],
            (FeatureMap::OneHot { cardinality }, Observation::Discrete(i)) => {
                let mut phi = vec![0.0; *cardinality];
                phi[*i] = 1.0;
                phi
            }
            (FeatureMap::Linear { dim }, Observation::Continuous(v)) => {
                debug_assert_eq!(v.len(), *dim);
                let mut phi = Vec::with_capacity(1 + dim);
                phi.push(1.0);
                phi.extend_from_slice(v);
                phi
            }
            (FeatureMap::Quadratic { dim }, Observation::Continuous(v)) => {
                debug_assert_eq!(v.len(), *dim);
                let mut phi = Vec::with_capacity(1 + 2 * dim);
                phi.push(1.0);
                phi.extend_from_slice(v);
                phi.extend(v.iter().map(|x| x * x));
                phi
            }
            _ => panic!("feature map does not match observation kind"),
        }
    }

    /// The map matching an environment's observation form.
    pub fn for_observation(obs: &Observation, cardinality: usize) -> FeatureMap {
        match obs {
            Observation::Discrete(_) => FeatureMap::OneHot { cardinality },
            Observation::Continuous(v) => FeatureMap::Quadratic { dim: v.len() },
        }
    }
}

/// Accumulates normal equations X'X and X'y for a ridge solve.
#[derive(Debug, Clone)]
pub struct RidgeAccumulator {
    dim: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    count: usize,
}

impl RidgeAccumulator {
    pub fn new(dim: usize) -> Self {
        RidgeAccumulator {
            dim,
            xtx: DMatrix::zeros(dim, dim),
            xty: DVector::zeros(dim),
            count: 0,
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.xtx[(i, j)] += x[i] * x[j];
            }
            self.xty[i] += x[i] * y;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn solve(&self, lambda: f64) -> Result<LinearModel> {
        if self.count == 0 {
            return Err(Error::InsufficientData("no rows accumulated".into()));
        }
        let mut a = self.xtx.clone();
        for i in 0..self.dim {
            a[(i, i)] += lambda;
        }
        let beta = a
            .lu()
            .solve(&self.xty)
            .ok_or_else(|| Error::domain("singular ridge system"))?;
        Ok(LinearModel { beta: beta.iter().copied().collect() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub beta: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// One-shot ridge fit of y on rows of x.
pub fn ridge_fit(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<LinearModel> {
    debug_assert_eq!(xs.len(), ys.len());
    let dim = xs.first().map(|x| x.len()).unwrap_or(0);
    let mut acc = RidgeAccumulator::new(dim);
    for (x, y) in xs.iter().zip(ys) {
        acc.add(x, *y);
    }
    acc.solve(lambda)
}
