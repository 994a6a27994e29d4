//! Filter coefficients `a_i` of linear processes and their tail sums
//! `A_j = sum_{i >= j} a_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{hurwitz_zeta, Decay};

/// Default relative L2 tolerance for truncating infinite filters:
/// the smallest `L` with `sqrt(sum_{i>L} a_i^2 / sum a_i^2) <= tol`.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-4;
/// Default cap on the truncation lag of dense filters.
pub const DEFAULT_MAX_LAG: usize = 4096;
/// Dyadic-sparse filters keep coefficients at `2^k` for `k` up to this level.
const MAX_DYADIC_LEVEL: u32 = 48;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientKind {
    /// `a_0, ..., a_L` given explicitly; zero afterwards.
    Explicit { values: Vec<f64> },
    /// `a_i = rho^i`.
    Geometric { rho: f64 },
    /// `a_i = (1 + i)^(-beta)`.
    Polynomial { beta: f64 },
    /// `a_i = (i + 2)^(-1) ln(i + 2)^(-alpha)`; the shift keeps `a_0` finite.
    LogDamped { alpha: f64 },
    /// `a_i = k^(-c)` when `i = 2^k`, `k >= 1`; zero otherwise.
    DyadicSparse { c: f64 },
}

impl CoefficientKind {
    fn validate(&self) -> Result<()> {
        match self {
            CoefficientKind::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::invalid("coefficient_values", "empty list"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("coefficient_values", "non-finite entry"));
                }
            }
            CoefficientKind::Geometric { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::invalid("coefficient_rho", format!("|rho| < 1 required, got {rho}")));
                }
            }
            CoefficientKind::Polynomial { beta } => {
                if !(*beta > 0.5) {
                    return Err(Error::invalid("coefficient_beta", format!("beta > 1/2 required, got {beta}")));
                }
            }
            CoefficientKind::LogDamped { alpha } => {
                if !(*alpha > 0.5) {
                    return Err(Error::invalid("coefficient_alpha", format!("alpha > 1/2 required, got {alpha}")));
                }
            }
            CoefficientKind::DyadicSparse { c } => {
                if !(*c > 0.5) {
                    return Err(Error::invalid("coefficient_c", format!("c > 1/2 required, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Untruncated coefficient `a_i`.
    pub fn coefficient(&self, i: u64) -> f64 {
        match self {
            CoefficientKind::Explicit { values } => values.get(i as usize).copied().unwrap_or(0.0),
            CoefficientKind::Geometric { rho } => rho.powf(i as f64),
            CoefficientKind::Polynomial { beta } => (1.0 + i as f64).powf(-beta),
            CoefficientKind::LogDamped { alpha } => {
                let x = i as f64 + 2.0;
                1.0 / (x * x.ln().powf(*alpha))
            }
            CoefficientKind::DyadicSparse { c } => {
                if i >= 2 && i.is_power_of_two() {
                    (i.trailing_zeros() as f64).powf(-c)
                } else {
                    0.0
                }
            }
        }
    }

    /// Asymptotic shape of `|a_i|`.
    pub fn decay(&self) -> Decay {
        match *self {
            CoefficientKind::Explicit { .. } => Decay::Vanishing,
            CoefficientKind::Geometric { rho } => {
                if rho == 0.0 {
                    Decay::Vanishing
                } else {
                    Decay::geometric(1.0, rho.abs())
                }
            }
            CoefficientKind::Polynomial { beta } => Decay::polynomial(1.0, beta),
            CoefficientKind::LogDamped { alpha } => Decay::Regular {
                scale: 1.0,
                ratio: 1.0,
                power: 1.0,
                log_power: alpha,
            },
            CoefficientKind::DyadicSparse { c } => Decay::Dyadic {
                scale: 1.0,
                doubling: 0.0,
                power: c,
            },
        }
    }

    /// `sum_{i > lag} a_i^2` for the untruncated sequence.
    fn square_tail(&self, lag: u64) -> f64 {
        match *self {
            CoefficientKind::Explicit { ref values } => {
                values.iter().skip(lag as usize + 1).map(|a| a * a).sum()
            }
            CoefficientKind::Geometric { rho } => {
                let r2 = rho * rho;
                r2.powf(lag as f64 + 1.0) / (1.0 - r2)
            }
            CoefficientKind::Polynomial { beta } => hurwitz_zeta(2.0 * beta, lag as f64 + 2.0),
            CoefficientKind::LogDamped { .. } | CoefficientKind::DyadicSparse { .. } => {
                let shape = self.decay().pow(2.0);
                // the shape is exact for dyadic-sparse; for log-damped it is
                // evaluated at the shifted index
                match self {
                    CoefficientKind::DyadicSparse { .. } => shape.tail_from(lag as usize + 1),
                    _ => shape.tail_from(lag as usize + 3),
                }
            }
        }
    }
}

/// A coefficient sequence truncated at lag `L` for simulation.
///
/// Nonzero coefficients are stored sparsely as `(lag, a_lag)` pairs, which
/// lets dyadic-sparse filters reach lags far beyond any dense buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSequence {
    kind: CoefficientKind,
    truncation_lag: u64,
    support: Vec<(u64, f64)>,
}

impl CoefficientSequence {
    /// Truncates with the default tolerance and lag cap.
    pub fn new(kind: CoefficientKind) -> Result<Self> {
        Self::with_truncation(kind, None, DEFAULT_MAX_LAG)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(CoefficientKind::Explicit { values })
    }

    pub fn geometric(rho: f64) -> Result<Self> {
        Self::new(CoefficientKind::Geometric { rho })
    }

    pub fn polynomial(beta: f64) -> Result<Self> {
        Self::new(CoefficientKind::Polynomial { beta })
    }

    pub fn log_damped(alpha: f64) -> Result<Self> {
        Self::new(CoefficientKind::LogDamped { alpha })
    }

    pub fn dyadic_sparse(c: f64) -> Result<Self> {
        Self::new(CoefficientKind::DyadicSparse { c })
    }

    /// `lag` fixes the truncation lag explicitly; otherwise it is chosen by
    /// the default tolerance, capped at `max_lag` for dense kinds.
    pub fn with_truncation(kind: CoefficientKind, lag: Option<u64>, max_lag: usize) -> Result<Self> {
        kind.validate()?;
        let truncation_lag = match (&kind, lag) {
            (CoefficientKind::Explicit { values }, None) => values.len() as u64 - 1,
            (CoefficientKind::Explicit { values }, Some(l)) => l.min(values.len() as u64 - 1),
            (_, Some(l)) => l,
            (CoefficientKind::DyadicSparse { c }, None) => {
                let total = hurwitz_zeta(2.0 * c, 1.0);
                let mut level = 1u32;
                while level < MAX_DYADIC_LEVEL
                    && hurwitz_zeta(2.0 * c, level as f64 + 1.0) > DEFAULT_TRUNCATION_TOL.powi(2) * total
                {
                    level += 1;
                }
                1u64 << level
            }
            (_, None) => {
                let mut tail = kind.square_tail(0);
                let target = DEFAULT_TRUNCATION_TOL.powi(2) * (tail + kind.coefficient(0).powi(2));
                let mut l = 0u64;
                while (l as usize) < max_lag && tail > target {
                    l += 1;
                    tail -= kind.coefficient(l).powi(2);
                }
                l
            }
        };
        let support = match &kind {
            CoefficientKind::DyadicSparse { .. } => (1..=63u32)
                .map(|k| 1u64 << k)
                .take_while(|&i| i <= truncation_lag)
                .map(|i| (i, kind.coefficient(i)))
                .collect(),
            _ => (0..=truncation_lag)
                .map(|i| (i, kind.coefficient(i)))
                .filter(|&(_, a)| a != 0.0)
                .collect(),
        };
        Ok(Self {
            kind,
            truncation_lag,
            support,
        })
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn truncation_lag(&self) -> u64 {
        self.truncation_lag
    }

    /// Nonzero `(lag, a_lag)` pairs up to the truncation lag, ascending in lag.
    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    /// Untruncated `a_i`.
    pub fn coefficient(&self, i: u64) -> f64 {
        self.kind.coefficient(i)
    }

    /// `a_i` as used in simulation (zero beyond the truncation lag).
    pub fn truncated(&self, i: u64) -> f64 {
        if i > self.truncation_lag {
            0.0
        } else {
            self.kind.coefficient(i)
        }
    }

    /// `sum_{i > L} a_i^2`: the squared L2 truncation error per unit innovation variance.
    pub fn truncation_square_tail(&self) -> f64 {
        self.kind.square_tail(self.truncation_lag)
    }

    pub fn decay(&self) -> Decay {
        self.kind.decay()
    }

    /// `sum_{i >= j} a_i^2` for the untruncated sequence.
    pub fn square_tail_from(&self, j: u64) -> f64 {
        if j == 0 {
            self.kind.coefficient(0).powi(2) + self.kind.square_tail(0)
        } else {
            self.kind.square_tail(j - 1)
        }
    }

    /// `A_j = sum_{i >= j} a_i` of the untruncated sequence.
    pub fn tail_sum(&self, j: u64) -> Result<f64> {
        let jf = j as f64;
        match self.kind {
            CoefficientKind::Explicit { ref values } => Ok(values.iter().skip(j as usize).sum()),
            CoefficientKind::Geometric { rho } => Ok(rho.powf(jf) / (1.0 - rho)),
            CoefficientKind::Polynomial { beta } => {
                if beta <= 1.0 {
                    Err(Error::NonSummable(format!("polynomial filter with beta = {beta} <= 1")))
                } else {
                    Ok(hurwitz_zeta(beta, jf + 1.0))
                }
            }
            CoefficientKind::LogDamped { alpha } => {
                if alpha <= 1.0 {
                    Err(Error::NonSummable(format!("log-damped filter with alpha = {alpha} <= 1")))
                } else {
                    // explicit head, Euler-Maclaurin tail of x^-1 (ln x)^-alpha
                    let head = 4096u64;
                    let mut acc = 0.0;
                    for i in j..j + head {
                        acc += self.kind.coefficient(i);
                    }
                    let m = (j + head) as f64 + 2.0;
                    let f = 1.0 / (m * m.ln().powf(alpha));
                    Ok(acc + m.ln().powf(1.0 - alpha) / (alpha - 1.0) + 0.5 * f)
                }
            }
            CoefficientKind::DyadicSparse { c } => {
                if c <= 1.0 {
                    Err(Error::NonSummable(format!("dyadic-sparse filter with c = {c} <= 1")))
                } else {
                    let k0 = if j <= 2 {
                        1
                    } else {
                        64 - (j - 1).leading_zeros() as u64
                    };
                    Ok(hurwitz_zeta(c, k0 as f64))
                }
            }
        }
    }

    /// `A_j` of the truncated (simulated) filter.
    pub fn truncated_tail_sum(&self, j: u64) -> f64 {
        self.support.iter().filter(|&&(i, _)| i >= j).map(|&(_, a)| a).sum()
    }

    /// `A_0` of the truncated filter.
    pub fn truncated_total(&self) -> f64 {
        self.truncated_tail_sum(0)
    }

    pub fn label(&self) -> String {
        match &self.kind {
            CoefficientKind::Explicit { values } => {
                let parts: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
                format!("explicit({})", parts.join(";"))
            }
            CoefficientKind::Geometric { rho } => format!("geometric({rho})"),
            CoefficientKind::Polynomial { beta } => format!("polynomial({beta})"),
            CoefficientKind::LogDamped { alpha } => format!("log-damped({alpha})"),
            CoefficientKind::DyadicSparse { c } => format!("dyadic-sparse({c})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_parameters_outside_the_square_summable_range() {
        assert!(CoefficientSequence::geometric(1.0).is_err());
        assert!(CoefficientSequence::polynomial(0.5).is_err());
        assert!(CoefficientSequence::log_damped(0.4).is_err());
        assert!(CoefficientSequence::dyadic_sparse(0.5).is_err());
        assert!(CoefficientSequence::explicit(vec![]).is_err());
        assert!(CoefficientSequence::explicit(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn geometric_truncation_meets_tolerance() {
        let a = CoefficientSequence::geometric(0.5).unwrap();
        // relative tail is 2^-(L+1)
        assert_eq!(a.truncation_lag(), 13);
        let rel = (a.truncation_square_tail() / (4.0 / 3.0)).sqrt();
        assert!(rel <= DEFAULT_TRUNCATION_TOL);
        assert_relative_eq!(a.tail_sum(0).unwrap(), 2.0);
        assert_relative_eq!(a.tail_sum(3).unwrap(), 0.25);
    }

    #[test]
    fn polynomial_tail_sums_match_direct_summation() {
        let a = CoefficientSequence::polynomial(2.0).unwrap();
        let direct: f64 = (5..2_000_000u64).map(|i| a.coefficient(i)).sum::<f64>() + 1.0 / 2_000_001.0;
        assert_relative_eq!(a.tail_sum(5).unwrap(), direct, max_relative = 1e-9);
        assert!(CoefficientSequence::polynomial(0.8).unwrap().tail_sum(0).is_err());
    }

    #[test]
    fn log_damped_tail_sum_is_close_to_direct_summation() {
        let a = CoefficientSequence::log_damped(3.0).unwrap();
        let n = 5_000_000u64;
        let direct: f64 = (10..n).map(|i| a.coefficient(i)).sum::<f64>();
        let m = n as f64 + 2.0;
        let tail = m.ln().powf(-2.0) / 2.0;
        assert_relative_eq!(a.tail_sum(10).unwrap(), direct + tail, max_relative = 1e-6);
    }

    #[test]
    fn dyadic_sparse_layout() {
        let a = CoefficientSequence::dyadic_sparse(1.5).unwrap();
        assert_eq!(a.coefficient(0), 0.0);
        assert_eq!(a.coefficient(1), 0.0);
        assert_eq!(a.coefficient(2), 1.0);
        assert_eq!(a.coefficient(3), 0.0);
        assert_relative_eq!(a.coefficient(8), 3f64.powf(-1.5));
        assert!(a.support().iter().all(|&(i, _)| i.is_power_of_two()));
        assert_relative_eq!(a.tail_sum(0).unwrap(), 2.612_375_348_685_488, epsilon = 1e-10);
        // A_5 sums levels k >= 3
        assert_relative_eq!(
            a.tail_sum(5).unwrap(),
            2.612_375_348_685_488 - 1.0 - 2f64.powf(-1.5),
            epsilon = 1e-10
        );
    }

    #[test]
    fn explicit_lists_are_exact() {
        let a = CoefficientSequence::explicit(vec![1.0, 0.5, 0.0, 0.25]).unwrap();
        assert_eq!(a.truncation_lag(), 3);
        assert_eq!(a.support(), &[(0, 1.0), (1, 0.5), (3, 0.25)]);
        assert_eq!(a.tail_sum(1).unwrap(), 0.75);
        assert_eq!(a.truncation_square_tail(), 0.0);
        assert_eq!(a.truncated_total(), 1.75);
    }
}
