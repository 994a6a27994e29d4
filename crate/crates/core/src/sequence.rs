//! Nonnegative sequences known up to a horizon plus an asymptotic tail, with
//! their partial sums `Lambda_n` and tail sums `Theta_m`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::innovation::{analytic_lq_norm, difference_lq_norm};
use crate::model::{ModelKind, ProcessModel, Kernel};
use crate::series::Decay;
use crate::stats::{isotonic_nonincreasing, Estimate};

/// Values shown explicitly before switching to the tail shape.
const ANALYTIC_HORIZON: u64 = 4096;

/// Where the values of a sequence come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Estimated,
    /// Values are upper bounds of the quantity of interest.
    UpperBound,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Estimated => "estimated",
            Provenance::UpperBound => "upper-bound",
        }
    }

    /// Combination of two ingredients.
    pub fn combine(self, other: Provenance) -> Provenance {
        use Provenance::*;
        match (self, other) {
            (UpperBound, _) | (_, UpperBound) => UpperBound,
            (Estimated, _) | (_, Estimated) => Estimated,
            _ => Exact,
        }
    }
}

/// `x_0, ..., x_{N}` with standard errors, plus a tail shape for `i > N`.
/// Without a tail shape, sums reaching past the horizon are horizon-limited.
#[derive(Clone, Debug, PartialEq)]
pub struct TailedSequence {
    values: Vec<f64>,
    se: Vec<f64>,
    tail: Option<Decay>,
    provenance: Provenance,
    /// `suffix[m] = sum_{i = m}^{N} x_i`.
    suffix: Vec<f64>,
    suffix_se: Vec<f64>,
}

impl TailedSequence {
    pub fn new(values: Vec<f64>, tail: Option<Decay>, provenance: Provenance) -> Self {
        let se = vec![0.0; values.len()];
        Self::with_se(values, se, tail, provenance)
    }

    pub fn with_se(values: Vec<f64>, se: Vec<f64>, tail: Option<Decay>, provenance: Provenance) -> Self {
        assert_eq!(values.len(), se.len());
        let n = values.len();
        let mut suffix = vec![0.0; n + 1];
        let mut suffix_se = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + values[i];
            suffix_se[i] = suffix_se[i + 1] + se[i];
        }
        Self {
            values,
            se,
            tail,
            provenance,
            suffix,
            suffix_se,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn standard_errors(&self) -> &[f64] {
        &self.se
    }

    pub fn tail(&self) -> Option<Decay> {
        self.tail
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of explicit values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon_limited(&self) -> bool {
        self.tail.is_none()
    }

    /// Tail shape, treating a missing tail as zero beyond the horizon.
    pub fn tail_or_vanishing(&self) -> Decay {
        self.tail.unwrap_or(Decay::Vanishing)
    }

    /// `x_i`, from the tail shape beyond the horizon (0 without a tail).
    pub fn get(&self, i: usize) -> f64 {
        if i < self.values.len() {
            self.values[i]
        } else {
            self.tail_or_vanishing().value_at(i)
        }
    }

    /// `Theta_m = sum_{i >= m} x_i` with a conservative (linear) error bound.
    pub fn big_theta(&self, m: usize) -> Estimate {
        let n = self.values.len();
        let tail = self.tail_or_vanishing();
        if m >= n {
            return Estimate::exact(tail.tail_from(m));
        }
        Estimate {
            value: self.suffix[m] + tail.tail_from(n),
            se: self.suffix_se[m],
        }
    }

    /// `Lambda_n = sum_{i <= n} x_i`, zero for `n < 0`.
    pub fn lambda(&self, n: i64) -> Estimate {
        if n < 0 {
            return Estimate::exact(0.0);
        }
        let n = n as usize;
        let len = self.values.len();
        if n < len {
            Estimate {
                value: self.suffix[0] - self.suffix[n + 1],
                se: self.suffix_se[0] - self.suffix_se[n + 1],
            }
        } else {
            let tail = self.tail_or_vanishing();
            let beyond: f64 = (len..=n).map(|i| tail.value_at(i)).sum();
            Estimate {
                value: self.suffix[0] + beyond,
                se: self.suffix_se[0],
            }
        }
    }

    /// Nonincreasing version of the explicit values (pool adjacent
    /// violators, weights `1/se^2`).
    pub fn monotone(&self) -> Self {
        let weights: Vec<f64> = self
            .se
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / (s * s) } else { 1e300 })
            .collect();
        let fitted = isotonic_nonincreasing(&self.values, &weights);
        Self::with_se(fitted, self.se.clone(), self.tail, self.provenance)
    }
}

/// `theta_{n,q}` from [`crate::model::analytic_theta`], extended by its tail
/// shape; `None` for chain-driven filters.
pub fn analytic_theta_sequence(model: &ProcessModel, q: f64) -> Result<Option<TailedSequence>> {
    let spec = model.innovations();
    spec.ensure_moment(q)?;
    let seq = match model.kind() {
        ModelKind::LinearIid { coefficients } => {
            let c = analytic_lq_norm(spec, q)?;
            coefficient_sequence(coefficients, c, Provenance::Exact)
        }
        ModelKind::LipschitzTransform {
            coefficients, transform, ..
        } => {
            let c = transform.lipschitz_constant() * difference_lq_norm(spec, q)?.value;
            coefficient_sequence(coefficients, c, Provenance::UpperBound)
        }
        ModelKind::IteratedRandomFunction { chain } => match chain.kernel {
            Kernel::Ar1 { rho } => geometric_sequence(analytic_lq_norm(spec, q)?, rho.abs(), Provenance::Exact),
            Kernel::ContractingSine { rho } => {
                geometric_sequence(difference_lq_norm(spec, q)?.value, rho.abs(), Provenance::UpperBound)
            }
        },
        ModelKind::LinearDependentInnovations { .. } => return Ok(None),
    };
    Ok(Some(seq))
}

/// `scale * ratio^i` as an explicit head of 64 values plus a geometric tail.
pub fn geometric_sequence(scale: f64, ratio: f64, provenance: Provenance) -> TailedSequence {
    let values: Vec<f64> = (0..64).map(|i| scale * ratio.powi(i)).collect();
    let tail = if ratio == 0.0 {
        Decay::Vanishing
    } else {
        Decay::geometric(scale, ratio)
    };
    TailedSequence::new(values, Some(tail), provenance)
}

/// `c |a_i|` up to the truncation lag (at most 4096 values), then `c` times
/// the coefficient shape.
pub(crate) fn coefficient_sequence(
    coefficients: &crate::coefficients::CoefficientSequence,
    c: f64,
    provenance: Provenance,
) -> TailedSequence {
    let horizon = coefficients.truncation_lag().min(ANALYTIC_HORIZON);
    let values: Vec<f64> = (0..=horizon).map(|i| c * coefficients.coefficient(i).abs()).collect();
    let tail = if coefficients.truncation_lag() <= ANALYTIC_HORIZON
        && matches!(coefficients.kind(), crate::coefficients::CoefficientKind::Explicit { .. })
    {
        Decay::Vanishing
    } else {
        coefficients.decay().scaled(c)
    };
    TailedSequence::new(values, Some(tail), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSequence;
    use crate::innovation::InnovationSpec;
    use approx::assert_relative_eq;

    #[test]
    fn geometric_theta_sums() {
        let model = ProcessModel::linear(CoefficientSequence::geometric(0.5).unwrap(), InnovationSpec::normal());
        let theta = analytic_theta_sequence(&model, 2.0).unwrap().unwrap();
        for m in [0usize, 1, 5, 13, 14, 40] {
            assert_relative_eq!(theta.big_theta(m).value, 2f64.powi(1 - m as i32), max_relative = 1e-12);
        }
        for n in [0i64, 3, 20] {
            assert_relative_eq!(theta.lambda(n).value, 2.0 - 2f64.powi(-n as i32), max_relative = 1e-12);
        }
        assert_eq!(theta.lambda(-1).value, 0.0);
    }

    #[test]
    fn zero_sequence() {
        let z = TailedSequence::new(vec![0.0; 5], Some(Decay::Vanishing), Provenance::Exact);
        assert_eq!(z.big_theta(0).value, 0.0);
        assert_eq!(z.lambda(10).value, 0.0);
    }

    #[test]
    fn dyadic_theta_total() {
        let model = ProcessModel::linear(CoefficientSequence::dyadic_sparse(1.5).unwrap(), InnovationSpec::normal());
        let theta = analytic_theta_sequence(&model, 2.0).unwrap().unwrap();
        assert_relative_eq!(theta.big_theta(0).value, 2.612_375_348_685_488, max_relative = 1e-9);
    }

    #[test]
    fn lambda_plus_theta_is_total() {
        let model = ProcessModel::linear(CoefficientSequence::polynomial(2.0).unwrap(), InnovationSpec::normal());
        let theta = analytic_theta_sequence(&model, 2.0).unwrap().unwrap();
        let total = theta.big_theta(0).value;
        for n in [0usize, 10, 100] {
            assert_relative_eq!(
                theta.lambda(n as i64).value + theta.big_theta(n + 1).value,
                total,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn monotone_pools_noise() {
        let s = TailedSequence::with_se(vec![1.0, 0.4, 0.5, 0.1], vec![0.1; 4], None, Provenance::Estimated);
        let m = s.monotone();
        for (got, want) in m.values().iter().zip([1.0, 0.45, 0.45, 0.1]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
        assert!(m.horizon_limited());
    }
}
