//! Summability conditions on `theta_{n,q}`, `Theta_{n,q}`, the coupling
//! measures and the filter coefficients, evaluated as an explicit partial sum
//! over the known horizon plus the tail implied by an asymptotic shape.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientKind, CoefficientSequence};
use crate::error::{Error, Result};
use crate::estimators::{DependenceProfile, GmcFit, MeasureKind};
use crate::innovation::difference_lq_norm;
use crate::model::{Kernel, ModelKind, ProcessModel};
use crate::sequence::{analytic_theta_sequence, coefficient_sequence, geometric_sequence, Provenance, TailedSequence};
use crate::series::Decay;

/// Explicit terms summed before the asymptotic remainder of the log-type series.
const LOG_SERIES_HEAD: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionId {
    /// `Theta_{0,q} < inf`.
    Eq2,
    /// `sum_k k^{-min(1, (q+4)/(2q+2))} Theta_{k,q}^{q/(q+1)} < inf`.
    Eq9,
    /// `sum_k k^{-alpha q} / l(2^k)^q < inf` with the logarithmic choices of `l`.
    Eq11,
    /// `sum_{i>=2} [Theta_{2^i,q} / (log i)^{1/2}]^q < inf`.
    Eq15,
    /// `sum_{i>=1} (sum_{j>=i} a_j^2)^{1/2} < inf`.
    Eq23,
    /// `sum_k (beta~_k + k alpha~_k) < inf`.
    Eq30,
    /// `sum_k k beta~_k < inf`.
    Eq31,
    /// Geometric-moment contraction of the innovation chain.
    Gmc33,
}

impl ConditionId {
    pub const ALL: [ConditionId; 8] = [
        ConditionId::Eq2,
        ConditionId::Eq9,
        ConditionId::Eq11,
        ConditionId::Eq15,
        ConditionId::Eq23,
        ConditionId::Eq30,
        ConditionId::Eq31,
        ConditionId::Gmc33,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConditionId::Eq2 => "eq2",
            ConditionId::Eq9 => "eq9",
            ConditionId::Eq11 => "eq11",
            ConditionId::Eq15 => "eq15",
            ConditionId::Eq23 => "eq23",
            ConditionId::Eq30 => "eq30",
            ConditionId::Eq31 => "eq31",
            ConditionId::Gmc33 => "gmc33",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    HoldsAtHorizon,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult {
    pub id: ConditionId,
    pub verdict: Verdict,
    /// Value of the series (partial sum plus tail), or the partial sum when it diverges.
    pub margin: f64,
    /// Number of explicit terms behind the verdict.
    pub horizon: usize,
    pub detail: String,
}

/// Geometric-moment contraction evidence: rate `r` with its provenance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionInput {
    pub c: f64,
    pub r: f64,
    pub provenance: Provenance,
}

impl From<GmcFit> for ContractionInput {
    fn from(fit: GmcFit) -> Self {
        Self {
            c: fit.c,
            r: fit.r,
            provenance: Provenance::Estimated,
        }
    }
}

/// Ingredients for the condition checks, all at one moment order `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionInputs {
    pub q: f64,
    pub theta: Option<TailedSequence>,
    pub beta_tilde: Option<TailedSequence>,
    pub alpha_tilde: Option<TailedSequence>,
    pub coefficients: Option<CoefficientSequence>,
    pub contraction: Option<ContractionInput>,
    /// `delta` of the slowly varying functions used for condition (11).
    pub delta: f64,
}

impl ConditionInputs {
    pub fn empty(q: f64) -> Self {
        Self {
            q,
            theta: None,
            beta_tilde: None,
            alpha_tilde: None,
            coefficients: None,
            contraction: None,
            delta: 0.1,
        }
    }

    /// Closed-form ingredients: exact for linear filters and AR(1) chains,
    /// Lipschitz upper bounds for transforms and the sine chain. Chain-driven
    /// filters only contribute their coefficients and contraction rate.
    pub fn from_model(model: &ProcessModel, q: f64) -> Result<Self> {
        let spec = model.innovations();
        spec.ensure_moment(q)?;
        let mut inputs = Self::empty(q);
        inputs.theta = analytic_theta_sequence(model, q)?;
        let diff = difference_lq_norm(spec, q)?;
        let diff_prov = if diff.exact { Provenance::Exact } else { Provenance::UpperBound };
        match model.kind() {
            ModelKind::LinearIid { coefficients } | ModelKind::LipschitzTransform { coefficients, .. } => {
                let prov = if model.is_linear_iid() { diff_prov } else { Provenance::UpperBound };
                let beta = coefficient_sequence(coefficients, diff.value, prov);
                inputs.alpha_tilde = Some(shifted(&beta));
                inputs.beta_tilde = Some(beta);
                inputs.coefficients = Some(coefficients.clone());
            }
            ModelKind::IteratedRandomFunction { chain } => {
                let rho = chain.kernel.rho().abs();
                let prov = match chain.kernel {
                    Kernel::Ar1 { .. } => diff_prov,
                    Kernel::ContractingSine { .. } => Provenance::UpperBound,
                };
                let beta = geometric_sequence(diff.value, rho, prov);
                inputs.alpha_tilde = Some(shifted(&beta));
                inputs.beta_tilde = Some(beta);
            }
            ModelKind::LinearDependentInnovations { coefficients, .. } => {
                inputs.coefficients = Some(coefficients.clone());
            }
        }
        if let Some(chain) = model.chain() {
            inputs.contraction = Some(ContractionInput {
                c: 1.0,
                r: chain.kernel.lipschitz_constant().powf(q),
                provenance: Provenance::UpperBound,
            });
        }
        Ok(inputs)
    }

    /// Estimated ingredients from a dependence profile (after isotonic
    /// adjustment), plus an optional contraction fit.
    pub fn from_profile(profile: &DependenceProfile, coefficients: Option<&CoefficientSequence>, gmc: Option<GmcFit>) -> Self {
        let mut inputs = Self::empty(profile.q);
        inputs.theta = Some(profile.theta_upper().monotone());
        inputs.beta_tilde = Some(profile.sequence(MeasureKind::BetaTilde).monotone());
        inputs.alpha_tilde = Some(profile.sequence(MeasureKind::AlphaTilde).monotone());
        inputs.coefficients = coefficients.cloned();
        inputs.contraction = gmc.map(ContractionInput::from);
        inputs
    }
}

/// `y_k = x_{k+1}`: the bound `alpha~_k <= beta~_{k+1}` obtained by
/// conditioning the coupled difference at `k + 1` on the shared past.
fn shifted(seq: &TailedSequence) -> TailedSequence {
    let values: Vec<f64> = seq.values().iter().skip(1).copied().collect();
    let se: Vec<f64> = seq.standard_errors().iter().skip(1).copied().collect();
    let tail = seq.tail().map(|t| match t {
        Decay::Regular {
            scale,
            ratio,
            power,
            log_power,
        } if ratio < 1.0 => Decay::Regular {
            scale: scale * ratio,
            ratio,
            power,
            log_power,
        },
        other => other,
    });
    let provenance = match seq.provenance() {
        Provenance::Exact => Provenance::Exact,
        _ => Provenance::UpperBound,
    };
    TailedSequence::with_se(values, se, tail, provenance)
}

fn decide(id: ConditionId, converges: bool, provenance: Provenance, margin: f64, horizon: usize, detail: String) -> ConditionResult {
    let verdict = match (converges, provenance) {
        (true, _) => Verdict::HoldsAtHorizon,
        (false, Provenance::Exact) => Verdict::Violated,
        (false, _) => Verdict::Inconclusive,
    };
    ConditionResult {
        id,
        verdict,
        margin,
        horizon,
        detail,
    }
}

fn missing(id: ConditionId, what: &str) -> ConditionResult {
    ConditionResult {
        id,
        verdict: Verdict::Inconclusive,
        margin: f64::NAN,
        horizon: 0,
        detail: format!("{what} not available"),
    }
}

/// Evaluates one condition at moment order `q`; `q` must match the inputs.
pub fn check_condition(inputs: &ConditionInputs, id: ConditionId, q: f64) -> Result<ConditionResult> {
    if (inputs.q - q).abs() > 1e-12 {
        return Err(Error::MomentMismatch {
            expected: inputs.q,
            requested: q,
        });
    }
    Ok(match id {
        ConditionId::Eq2 => match &inputs.theta {
            None => missing(id, "theta"),
            Some(theta) => {
                let tail = theta.tail_or_vanishing();
                let converges = tail.is_summable();
                let margin = if converges { theta.big_theta(0).value } else { theta.values().iter().sum() };
                decide(id, converges, theta.provenance(), margin, theta.len(), format!("Theta_0 with {} tail", shape_name(&tail)))
            }
        },
        ConditionId::Eq9 => match &inputs.theta {
            None => missing(id, "theta"),
            Some(theta) => eq9(theta, q),
        },
        ConditionId::Eq11 => match &inputs.theta {
            None => missing(id, "theta"),
            Some(theta) => eq11(theta, q, inputs.delta),
        },
        ConditionId::Eq15 => match &inputs.theta {
            None => missing(id, "theta"),
            Some(theta) => eq15(theta, q),
        },
        ConditionId::Eq23 => match &inputs.coefficients {
            None => missing(id, "filter coefficients"),
            Some(a) => eq23(a),
        },
        ConditionId::Eq30 => match (&inputs.beta_tilde, &inputs.alpha_tilde) {
            (Some(b), Some(a)) => weighted_sum(id, &[(b, 0.0), (a, 1.0)]),
            _ => missing(id, "beta~ and alpha~"),
        },
        ConditionId::Eq31 => match &inputs.beta_tilde {
            None => missing(id, "beta~"),
            Some(b) => weighted_sum(id, &[(b, 1.0)]),
        },
        ConditionId::Gmc33 => match &inputs.contraction {
            None => missing(id, "innovation chain"),
            Some(c) => decide(
                id,
                c.r < 1.0,
                c.provenance,
                c.r,
                0,
                format!("contraction rate r = {:.6} ({})", c.r, c.provenance.name()),
            ),
        },
    })
}

/// All conditions in catalog order.
pub fn check_all(inputs: &ConditionInputs) -> Result<Vec<ConditionResult>> {
    ConditionId::ALL.iter().map(|&id| check_condition(inputs, id, inputs.q)).collect()
}

fn shape_name(d: &Decay) -> &'static str {
    match d {
        Decay::Vanishing => "vanishing",
        Decay::Regular { ratio, .. } if *ratio < 1.0 => "geometric",
        Decay::Regular { .. } => "polynomial/logarithmic",
        Decay::Dyadic { .. } => "dyadic",
        Decay::Divergent => "non-decaying",
    }
}

/// `sum_{k>=1} k^w x_k` over one or more sequences.
fn weighted_sum(id: ConditionId, parts: &[(&TailedSequence, f64)]) -> ConditionResult {
    let mut margin = 0.0;
    let mut converges = true;
    let mut provenance = Provenance::Exact;
    let mut horizon = usize::MAX;
    for &(seq, w) in parts {
        let n = seq.len();
        horizon = horizon.min(n);
        provenance = provenance.combine(seq.provenance());
        margin += (1..n).map(|k| (k as f64).powf(w) * seq.values()[k]).sum::<f64>();
        let tail = seq.tail_or_vanishing().weighted(w, 0.0);
        if tail.is_summable() {
            margin += tail.tail_from(n.max(1));
        } else {
            converges = false;
        }
    }
    decide(id, converges, provenance, margin, horizon, String::new())
}

fn eq9(theta: &TailedSequence, q: f64) -> ConditionResult {
    let id = ConditionId::Eq9;
    let e = 1f64.min((q + 4.0) / (2.0 * q + 2.0));
    let b = q / (q + 1.0);
    let n = theta.len();
    let partial: f64 = (1..n).map(|k| (k as f64).powf(-e) * theta.big_theta(k).value.powf(b)).sum();
    let tail = theta.tail_or_vanishing().tail_sums().pow(b).weighted(-e, 0.0);
    let converges = tail.is_summable();
    let margin = if converges { partial + tail.tail_from(n.max(1)) } else { partial };
    decide(id, converges, theta.provenance(), margin, n, format!("exponent {e:.4}, power {b:.4}"))
}

/// Uses `l(n) = (log n)^{1/q - alpha} (log log n)^{(1+delta)/q}` for `q > 2`
/// (with `alpha` read off the `Theta` tail) and
/// `l_q(n) = (log n)^{1/q} (log log n)^{(1+delta)/q}` for `1 < q <= 2`.
fn eq11(theta: &TailedSequence, q: f64, delta: f64) -> ConditionResult {
    let id = ConditionId::Eq11;
    let big = theta.tail_or_vanishing().tail_sums();
    if matches!(big, Decay::Divergent) {
        let detail = "Theta_n is not bounded, the premise on Theta fails".to_string();
        return decide(id, false, theta.provenance(), f64::INFINITY, theta.len(), detail);
    }
    let alpha = if q > 2.0 {
        // the premise Theta_n = O((log n)^{-alpha}) for some 0 <= alpha < 1/q
        let s = match big {
            Decay::Regular {
                ratio,
                power,
                log_power,
                ..
            } if ratio >= 1.0 && power <= 0.0 => log_power.max(0.0),
            _ => f64::INFINITY,
        };
        s.min(1.0 / q * 0.999)
    } else {
        0.0
    };
    let ln2 = std::f64::consts::LN_2;
    let term = |k: f64| -> f64 {
        let ln_n = k * ln2;
        let ell = ln_n.powf(1.0 / q - alpha) * ln_n.ln().powf((1.0 + delta) / q);
        k.powf(-alpha * q) / ell.powf(q)
    };
    let head: f64 = (2..LOG_SERIES_HEAD).map(|k| term(k as f64)).sum();
    // terms behave like (ln 2)^{alpha q - 1} k^{-1} (ln k)^{-(1+delta)}
    let remainder = Decay::Regular {
        scale: ln2.powf(alpha * q - 1.0),
        ratio: 1.0,
        power: 1.0,
        log_power: 1.0 + delta,
    }
    .tail_from(LOG_SERIES_HEAD);
    let (premise, which) = if q > 2.0 {
        (true, format!("l(n) = (log n)^(1/q - {alpha:.4}) (log log n)^((1+{delta})/q)"))
    } else {
        (theta.tail_or_vanishing().is_summable(), format!("l_q(n) = (log n)^(1/q) (log log n)^((1+{delta})/q)"))
    };
    decide(id, premise, theta.provenance(), head + remainder, LOG_SERIES_HEAD, which)
}

/// First tries the sufficient substitution `Theta_n^q = O(1/log n)`; if it
/// fails, decides the dyadic series directly from the `Theta` tail shape.
fn eq15(theta: &TailedSequence, q: f64) -> ConditionResult {
    let id = ConditionId::Eq15;
    let big = theta.tail_or_vanishing().tail_sums();
    let substitution = match big.pow(q).weighted(0.0, 1.0) {
        Decay::Vanishing => true,
        Decay::Regular {
            ratio,
            power,
            log_power,
            ..
        } => ratio < 1.0 || power > 0.0 || log_power >= -1e-9,
        Decay::Dyadic { .. } | Decay::Divergent => false,
    };
    // dyadic series value: explicit over i = 2..=62, then the log-shape remainder
    let term = |i: u32| -> f64 {
        let t = theta.big_theta(1usize << i).value;
        (t / (i as f64).ln().sqrt()).powf(q)
    };
    let head: f64 = (2..=62).map(term).sum();
    let (converges, remainder) = match big {
        Decay::Vanishing => (true, 0.0),
        Decay::Divergent => (false, f64::INFINITY),
        Decay::Regular {
            scale,
            ratio,
            power,
            log_power,
        } => {
            if ratio < 1.0 || power > 0.0 {
                (true, 0.0)
            } else {
                // Theta_{2^i} ~ c (i ln 2)^{-s}: terms ~ c^q (ln 2)^{-sq} i^{-sq} (ln i)^{-q/2}
                let shape = Decay::Regular {
                    scale: scale.powf(q) * std::f64::consts::LN_2.powf(-log_power * q),
                    ratio: 1.0,
                    power: log_power * q,
                    log_power: q / 2.0,
                };
                (shape.is_summable(), shape.tail_from(63))
            }
        }
        Decay::Dyadic { .. } => (false, f64::INFINITY),
    };
    let holds = substitution || converges;
    let margin = if holds { head + remainder } else { head };
    let detail = if substitution {
        "Theta_n^q = O(1/log n) holds".to_string()
    } else {
        "Theta_n^q = O(1/log n) fails; decided on the dyadic series".to_string()
    };
    decide(id, holds, theta.provenance(), margin, 62, detail)
}

fn eq23(a: &CoefficientSequence) -> ConditionResult {
    let id = ConditionId::Eq23;
    let n = (a.truncation_lag().min(4096) + 1) as usize;
    let partial: f64 = (1..n).map(|i| a.square_tail_from(i as u64).sqrt()).sum();
    let tail = if matches!(a.kind(), CoefficientKind::Explicit { .. }) {
        Decay::Vanishing
    } else {
        a.decay().pow(2.0).tail_sums().pow(0.5)
    };
    let converges = tail.is_summable();
    let margin = if converges { partial + tail.tail_from(n) } else { partial };
    decide(id, converges, Provenance::Exact, margin, n, String::new())
}
