//! Asymptotic decay shapes of nonnegative sequences and convergence of the
//! series built from them.
//!
//! Summability conditions are evaluated as "explicit partial sum over the
//! observed horizon + tail from an asymptotic shape". The shape also decides
//! whether the series converges at all, by the usual comparison tests.

use serde::{Deserialize, Serialize};

const EXP_EPS: f64 = 1e-9;

/// Asymptotic shape of a nonnegative sequence `x_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Decay {
    /// Zero beyond the observed horizon.
    Vanishing,
    /// `x_n ~ scale * ratio^n * n^(-power) * (ln n)^(-log_power)`, `ratio <= 1`.
    Regular {
        scale: f64,
        ratio: f64,
        power: f64,
        log_power: f64,
    },
    /// Supported on `n = 2^k`, `k >= 1`: `x_{2^k} = scale * 2^(k * doubling) * k^(-power)`.
    Dyadic { scale: f64, doubling: f64, power: f64 },
    /// Not summable, or otherwise infinite.
    Divergent,
}

impl Decay {
    pub fn geometric(scale: f64, ratio: f64) -> Self {
        Decay::Regular {
            scale,
            ratio,
            power: 0.0,
            log_power: 0.0,
        }
    }

    pub fn polynomial(scale: f64, power: f64) -> Self {
        Decay::Regular {
            scale,
            ratio: 1.0,
            power,
            log_power: 0.0,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => Decay::Regular {
                scale: scale * factor,
                ratio,
                power,
                log_power,
            },
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => Decay::Dyadic {
                scale: scale * factor,
                doubling,
                power,
            },
            other => other,
        }
    }

    /// Shape of `x_n^b`.
    pub fn pow(self, b: f64) -> Self {
        match self {
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => Decay::Regular {
                scale: scale.powf(b),
                ratio: ratio.powf(b),
                power: power * b,
                log_power: log_power * b,
            },
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => Decay::Dyadic {
                scale: scale.powf(b),
                doubling: doubling * b,
                power: power * b,
            },
            other => other,
        }
    }

    /// Shape of `n^w (ln n)^v x_n`.
    pub fn weighted(self, w: f64, v: f64) -> Self {
        match self {
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => Decay::Regular {
                scale,
                ratio,
                power: power - w,
                log_power: log_power - v,
            },
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => Decay::Dyadic {
                scale: scale * std::f64::consts::LN_2.powf(v),
                doubling: doubling + w,
                power: power - v,
            },
            other => other,
        }
    }

    pub fn is_summable(&self) -> bool {
        match *self {
            Decay::Vanishing => true,
            Decay::Divergent => false,
            Decay::Regular {
                ratio,
                power,
                log_power,
                ..
            } => {
                ratio < 1.0 - EXP_EPS
                    || power > 1.0 + EXP_EPS
                    || ((power - 1.0).abs() <= EXP_EPS && log_power > 1.0 + EXP_EPS)
            }
            Decay::Dyadic { doubling, power, .. } => {
                doubling < -EXP_EPS || (doubling.abs() <= EXP_EPS && power > 1.0 + EXP_EPS)
            }
        }
    }

    /// Shape of the tail sums `sum_{i >= n} x_i`.
    pub fn tail_sums(self) -> Self {
        if !self.is_summable() {
            return Decay::Divergent;
        }
        match self {
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => {
                if ratio < 1.0 - EXP_EPS {
                    Decay::Regular {
                        scale: scale / (1.0 - ratio),
                        ratio,
                        power,
                        log_power,
                    }
                } else if power > 1.0 + EXP_EPS {
                    Decay::Regular {
                        scale: scale / (power - 1.0),
                        ratio: 1.0,
                        power: power - 1.0,
                        log_power,
                    }
                } else {
                    Decay::Regular {
                        scale: scale / (log_power - 1.0),
                        ratio: 1.0,
                        power: 0.0,
                        log_power: log_power - 1.0,
                    }
                }
            }
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => {
                let ln2 = std::f64::consts::LN_2;
                if doubling < -EXP_EPS {
                    // sum_{k >= log2 n} 2^{kd} k^{-p} ~ n^d (log2 n)^{-p} / (1 - 2^d)
                    Decay::Regular {
                        scale: scale * ln2.powf(power) / (1.0 - 2f64.powf(doubling)),
                        ratio: 1.0,
                        power: -doubling,
                        log_power: power,
                    }
                } else {
                    Decay::Regular {
                        scale: scale * ln2.powf(power - 1.0) / (power - 1.0),
                        ratio: 1.0,
                        power: 0.0,
                        log_power: power - 1.0,
                    }
                }
            }
            other => other,
        }
    }

    /// Asymptotic value at `n`.
    pub fn value_at(&self, n: usize) -> f64 {
        match *self {
            Decay::Vanishing => 0.0,
            Decay::Divergent => f64::INFINITY,
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => {
                let x = (n as f64).max(1.0);
                let log_term = if log_power == 0.0 {
                    1.0
                } else {
                    x.max(3.0).ln().powf(-log_power)
                };
                let geo = if ratio == 1.0 { 1.0 } else { ratio.powf(n as f64) };
                scale * geo * x.powf(-power) * log_term
            }
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => {
                if n >= 2 && n.is_power_of_two() {
                    let k = n.trailing_zeros() as f64;
                    scale * 2f64.powf(k * doubling) * k.powf(-power)
                } else {
                    0.0
                }
            }
        }
    }

    /// Approximate `sum_{i >= m} x_i` (infinite when not summable).
    pub fn tail_from(&self, m: usize) -> f64 {
        if !self.is_summable() {
            return f64::INFINITY;
        }
        match *self {
            Decay::Vanishing => 0.0,
            Decay::Divergent => f64::INFINITY,
            Decay::Regular {
                scale,
                ratio,
                power,
                log_power,
            } => {
                let m = m.max(1);
                if ratio < 1.0 - EXP_EPS && power == 0.0 && log_power == 0.0 {
                    return scale * ratio.powf(m as f64) / (1.0 - ratio);
                }
                // explicit head, then an integral remainder from the midpoint
                let head_len = 2000usize;
                let mut acc = 0.0;
                for i in m..m + head_len {
                    let t = self.value_at(i);
                    acc += t;
                    if ratio < 1.0 - EXP_EPS && t <= acc * 1e-17 {
                        return acc;
                    }
                }
                let x = (m + head_len) as f64 - 0.5;
                let rest = if ratio < 1.0 - EXP_EPS {
                    self.value_at(m + head_len) / (1.0 - ratio)
                } else if power > 1.0 + EXP_EPS {
                    scale * x.powf(1.0 - power) * x.ln().powf(-log_power) / (power - 1.0)
                } else {
                    scale * x.ln().powf(1.0 - log_power) / (log_power - 1.0)
                };
                acc + rest
            }
            Decay::Dyadic {
                scale,
                doubling,
                power,
            } => {
                let k0 = dyadic_start(m);
                if doubling.abs() <= EXP_EPS {
                    scale * hurwitz_zeta(power, k0 as f64)
                } else {
                    let mut acc = 0.0;
                    let mut k = k0 as f64;
                    loop {
                        let t = scale * 2f64.powf(k * doubling) * k.powf(-power);
                        acc += t;
                        if t <= acc * 1e-17 || k > 4000.0 {
                            break;
                        }
                        k += 1.0;
                    }
                    acc
                }
            }
        }
    }
}

/// Smallest `k >= 1` with `2^k >= m`.
fn dyadic_start(m: usize) -> usize {
    if m <= 2 {
        1
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

/// Hurwitz zeta `sum_{k >= 0} (k + a)^(-s)` for `s > 1`, `a > 0`,
/// by explicit summation followed by an Euler-Maclaurin remainder.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1, a > 0");
    let n = 32usize;
    let mut acc = 0.0;
    for k in 0..n {
        acc += (k as f64 + a).powf(-s);
    }
    let x = n as f64 + a;
    acc + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * x.powf(-s - 5.0) / 30240.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hurwitz_matches_known_values() {
        // zeta(2) = pi^2 / 6, zeta(3/2) = 2.6123753486854883
        assert_relative_eq!(hurwitz_zeta(2.0, 1.0), std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-13);
        assert_relative_eq!(hurwitz_zeta(1.5, 1.0), 2.612_375_348_685_488, epsilon = 1e-11);
        // zeta(2, 3) = zeta(2) - 1 - 1/4
        assert_relative_eq!(
            hurwitz_zeta(2.0, 3.0),
            std::f64::consts::PI.powi(2) / 6.0 - 1.25,
            epsilon = 1e-13
        );
    }

    #[test]
    fn geometric_tail_is_exact() {
        let d = Decay::geometric(1.0, 0.5);
        assert_relative_eq!(d.tail_from(3), 0.25, epsilon = 1e-15);
        assert!(d.is_summable());
    }

    #[test]
    fn polynomial_tail_matches_zeta() {
        let d = Decay::polynomial(1.0, 2.0);
        assert_relative_eq!(d.tail_from(10), hurwitz_zeta(2.0, 10.0), max_relative = 1e-7);
    }

    #[test]
    fn comparison_tests() {
        assert!(!Decay::polynomial(1.0, 0.8).is_summable());
        assert!(!Decay::polynomial(1.0, 1.0).is_summable());
        let log_damped = Decay::Regular {
            scale: 1.0,
            ratio: 1.0,
            power: 1.0,
            log_power: 2.0,
        };
        assert!(log_damped.is_summable());
        assert!(!log_damped.pow(0.5).is_summable());
        // k * (1+k)^-2 is harmonic
        assert!(!Decay::polynomial(1.0, 2.0).weighted(1.0, 0.0).is_summable());
        assert!(Decay::geometric(1.0, 0.5).weighted(1.0, 0.0).is_summable());
    }

    #[test]
    fn dyadic_shapes() {
        let d = Decay::Dyadic {
            scale: 1.0,
            doubling: 0.0,
            power: 1.5,
        };
        assert!(d.is_summable());
        assert_relative_eq!(d.tail_from(0), 2.612_375_348_685_488, epsilon = 1e-11);
        assert_eq!(d.value_at(8), 3f64.powf(-1.5));
        assert_eq!(d.value_at(9), 0.0);
        // sum_k 2^k k^-c diverges
        assert!(!d.weighted(1.0, 0.0).is_summable());
        // tail sums of the dyadic sequence decay like (log n)^{-1/2}
        match d.tail_sums() {
            Decay::Regular { power, log_power, .. } => {
                assert_eq!(power, 0.0);
                assert_relative_eq!(log_power, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tail_sums_of_polynomial() {
        match Decay::polynomial(2.0, 3.0).tail_sums() {
            Decay::Regular { scale, power, .. } => {
                assert_relative_eq!(scale, 1.0);
                assert_relative_eq!(power, 2.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(Decay::polynomial(1.0, 0.8).tail_sums(), Decay::Divergent);
    }
}
