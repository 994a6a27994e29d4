//! Martingale approximation `S_n = M_n + R_n` of partial sums, in closed form
//! for linear filters and by nested Monte Carlo otherwise, together with the
//! moment bounds on `S_n`, `R_n` and `max_k |S_k|` expressed through `theta`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientKind, CoefficientSequence};
use crate::conditions::{check_condition, ConditionId, ConditionInputs, Verdict};
use crate::coupling::InnerDraws;
use crate::error::{Error, Result};
use crate::innovation::{analytic_lq_norm, derive_seed, IndexedInnovationStream, InnovationSource};
use crate::model::{analytic_sigma, generate_path, partial_sums, Forecaster, ProcessModel};
use crate::sequence::{analytic_theta_sequence, Provenance, TailedSequence};
#[cfg(test)]
use crate::sequence::geometric_sequence;
use crate::stats::{lq_norm, Estimate};

/// Cap on the automatically chosen nested horizon.
pub const MAX_AUTO_HORIZON: usize = 200;
/// The automatic horizon is the first lag with `Theta_{H+1} <= AUTO_HORIZON_FRACTION * sigma`.
pub const AUTO_HORIZON_FRACTION: f64 = 1e-3;

/// `B_q = 18 q^{3/2} (q-1)^{-1/2}` for `q != 2` and `B_2 = 1`.
pub fn b_q(q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("B_q needs q > 1, got {q}")));
    }
    if q == 2.0 {
        return Ok(1.0);
    }
    Ok(18.0 * q.powf(1.5) / (q - 1.0).sqrt())
}

/// `q' = min(2, q)`.
pub fn q_prime(q: f64) -> f64 {
    q.min(2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstructionKind {
    ClosedFormLinear,
    NestedMonteCarlo { horizon: usize, inner: usize },
}

/// Paths `S_0..S_n`, `M_0..M_n`, `R_0..R_n` and the increments `D_1..D_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleDecomposition {
    pub s: Vec<f64>,
    pub m: Vec<f64>,
    pub r: Vec<f64>,
    pub d: Vec<f64>,
    pub q: f64,
    pub construction: ConstructionKind,
    /// Bound on `||D_k - D^_k||_q` from truncating the projection sum.
    pub truncation_bound: f64,
    /// `||D_0||_2`, exact (se 0) when known in closed form.
    pub sigma: Estimate,
    /// `||D_0||_q`.
    pub c_q: Estimate,
}

impl MartingaleDecomposition {
    fn assemble(s: Vec<f64>, d: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = partial_sums(&d);
        let r: Vec<f64> = s.iter().zip(&m).map(|(a, b)| a - b).collect();
        (s, m, r)
    }
}

/// Closed form `D_k = A_0 eps_k` for a linear filter driven by `stream`.
///
/// `A_0` is taken from the truncated filter so that `R_n = S_n - M_n` stays
/// bounded; `sigma` and `c_q` use the untruncated `A_0`.
pub fn linear_decomposition(
    coefficients: &CoefficientSequence,
    stream: &IndexedInnovationStream,
    n: usize,
    q: f64,
) -> Result<MartingaleDecomposition> {
    let spec = *stream.spec();
    let a0 = coefficients.tail_sum(0)?;
    let model = ProcessModel::linear(coefficients.clone(), spec);
    let path = generate_path(&model, n, stream);
    let a0_trunc = coefficients.truncated_total();
    let mut eps = vec![0.0; n];
    stream.fill(1, &mut eps);
    let d: Vec<f64> = eps.iter().map(|e| a0_trunc * e).collect();
    let (s, m, r) = MartingaleDecomposition::assemble(path.s, d.clone());
    let eps_q = analytic_lq_norm(&spec, q)?;
    let truncation_bound = match coefficients.kind() {
        CoefficientKind::Explicit { .. } => 0.0,
        _ => (a0 - a0_trunc).abs() * eps_q,
    };
    Ok(MartingaleDecomposition {
        s,
        m,
        r,
        d,
        q,
        construction: ConstructionKind::ClosedFormLinear,
        truncation_bound,
        sigma: Estimate::exact(a0.abs() * analytic_lq_norm(&spec, 2.0)?),
        c_q: Estimate::exact(a0.abs() * eps_q),
    })
}

/// `A_i = sum_{j >= i} a_j` for `i = 0..count` via a running recursion.
fn tail_sums_upto(coefficients: &CoefficientSequence, count: usize) -> Result<Vec<f64>> {
    let mut a = Vec::with_capacity(count);
    let mut acc = coefficients.tail_sum(0)?;
    for i in 0..count {
        a.push(acc);
        acc -= coefficients.coefficient(i as u64);
    }
    Ok(a)
}

/// `Xi_n = sqrt(sum_{i=1}^n A_i^2 + sum_{i>n} (A_i - A_{i-n})^2)`, the
/// `L^2` norm of `R_n` per unit innovation variance.
pub fn xi_n(coefficients: &CoefficientSequence, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let sq = match *coefficients.kind() {
        CoefficientKind::Geometric { rho } => {
            let a0 = 1.0 / (1.0 - rho);
            let r2 = rho * rho;
            let first = a0 * a0 * r2 * (1.0 - r2.powf(nf)) / (1.0 - r2);
            let second = (1.0 - rho.powf(nf)).powi(2) * a0 * a0 * r2 / (1.0 - r2);
            first + second
        }
        CoefficientKind::Explicit { ref values } => {
            let a = tail_sums_upto(coefficients, n + values.len() + 1)?;
            let first: f64 = a[1..=n].iter().map(|v| v * v).sum();
            let second: f64 = (n + 1..a.len()).map(|i| (a[i] - a[i - n]).powi(2)).sum();
            first + second
        }
        _ => {
            let horizon = n + (4 * n).max(4096);
            let a = tail_sums_upto(coefficients, horizon + 1)?;
            let first: f64 = a[1..=n].iter().map(|v| v * v).sum();
            let second: f64 = (n + 1..=horizon).map(|i| (a[i] - a[i - n]).powi(2)).sum();
            // beyond the horizon A_{i-n} - A_i = sum of n consecutive a_j; for
            // dyadic-sparse filters at most one of them is nonzero
            let window = match coefficients.kind() {
                CoefficientKind::DyadicSparse { .. } => nf,
                _ => nf * nf,
            };
            first + second + window * coefficients.square_tail_from(horizon as u64 + 1 - n as u64)
        }
    };
    Ok(sq.sqrt())
}

/// Controls of the nested construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NestedSettings {
    /// Projection horizon `H`; `None` picks it from the `Theta` tail.
    pub horizon: Option<usize>,
    /// Inner conditional-mean draws per increment.
    pub inner: usize,
    pub inner_seed: u64,
}

impl Default for NestedSettings {
    fn default() -> Self {
        Self {
            horizon: None,
            inner: 256,
            inner_seed: 1,
        }
    }
}

/// Smallest `H` with `Theta_{H+1} <= fraction * scale`, capped.
pub fn auto_horizon(theta: &TailedSequence, scale: f64) -> usize {
    let target = AUTO_HORIZON_FRACTION * scale;
    (0..MAX_AUTO_HORIZON)
        .find(|&h| theta.big_theta(h + 1).value <= target)
        .unwrap_or(MAX_AUTO_HORIZON)
}

/// `D^_k = sum_{i=k}^{k+H} P_k g(xi_i)`, each projection estimated as the
/// difference of conditional means given `F_k` and `F_{k-1}`. Future
/// innovations at `k+1..k+H` are shared between the two conditional means;
/// the innovation at `k` gets its own draw. Antithetic pairs are used for
/// symmetric innovations.
pub fn nested_increment<S: InnovationSource + ?Sized>(
    model: &ProcessModel,
    src: &S,
    k: i64,
    horizon: usize,
    draws: &InnerDraws,
    inner: usize,
) -> Estimate {
    let now = Forecaster::new(model, src, k, horizon.max(1));
    let before = Forecaster::new(model, src, k - 1, horizon + 1);
    let units = draws.units(inner);
    let signs = draws.signs();
    let w = 1.0 / signs.len() as f64;
    let mut future = vec![0.0; horizon + 1];
    let mut out_now = vec![0.0; horizon];
    let mut out_before = vec![0.0; horizon + 1];
    let mut scratch = Vec::with_capacity(horizon + 1);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for j in 0..units {
        draws.fill(j, &mut future);
        let mut unit = 0.0;
        for &sign in signs {
            now.trajectory(&future[1..], sign, &mut out_now, &mut scratch);
            before.trajectory(&future, sign, &mut out_before, &mut scratch);
            let v: f64 = out_now.iter().sum::<f64>() - out_before.iter().sum::<f64>();
            unit += w * v;
        }
        sum += unit;
        sum_sq += unit * unit;
    }
    let nf = units as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Estimate {
        value: now.current() + mean,
        se: (var / nf).sqrt(),
    }
}

/// Nested Monte Carlo decomposition of `X_1..X_n` drawn from `src`.
///
/// `theta` supplies `theta_{n,q}` (exact or upper bounds) when no closed form
/// exists; it sets the automatic horizon and the truncation bound
/// `Theta_{H+1,q}`. Refuses when `Theta_{0,q}` is known to diverge.
pub fn nested_decomposition<S: InnovationSource + ?Sized>(
    model: &ProcessModel,
    src: &S,
    n: usize,
    q: f64,
    settings: NestedSettings,
    theta: Option<&TailedSequence>,
) -> Result<MartingaleDecomposition> {
    if settings.inner < 2 {
        return Err(Error::invalid("inner", "need at least 2 inner draws"));
    }
    let analytic = analytic_theta_sequence(model, q)?;
    let theta = analytic.as_ref().or(theta);
    if let Some(t) = theta {
        let mut inputs = ConditionInputs::empty(q);
        inputs.theta = Some(t.clone());
        let r = check_condition(&inputs, ConditionId::Eq2, q)?;
        if r.verdict == Verdict::Violated {
            return Err(Error::ConditionFailed {
                condition: "eq2".into(),
                detail: "sum of theta diverges; the martingale approximation does not exist".into(),
            });
        }
    }
    let scale = analytic_sigma(model)
        .or_else(|| theta.map(|t| t.big_theta(0).value))
        .unwrap_or(1.0);
    let horizon = match (settings.horizon, theta) {
        (Some(h), _) => h,
        (None, Some(t)) => auto_horizon(t, scale),
        (None, None) => MAX_AUTO_HORIZON,
    };
    let truncation_bound = theta.map_or(f64::INFINITY, |t| t.big_theta(horizon + 1).value);
    let x = crate::model::segment(model, src, 1, n);
    let spec = *model.innovations();
    let d: Vec<f64> = crate::stats::replicate_map(n, |i| {
        let k = i as i64 + 1;
        let draws = InnerDraws::new(derive_seed(settings.inner_seed, &[k as u64]), spec);
        nested_increment(model, src, k, horizon, &draws, settings.inner).value
    });
    let s = partial_sums(&x);
    let (s, m, r) = MartingaleDecomposition::assemble(s, d.clone());
    let sigma = match analytic_sigma(model) {
        Some(v) => Estimate::exact(v),
        None => lq_norm(&d, 2.0),
    };
    Ok(MartingaleDecomposition {
        s,
        m,
        r,
        c_q: lq_norm(&d, q),
        d,
        q,
        construction: ConstructionKind::NestedMonteCarlo {
            horizon,
            inner: settings.inner,
        },
        truncation_bound,
        sigma,
    })
}

/// `sigma = ||D_0||_2`: closed form when available, otherwise the sample
/// `L^2` norm of `replicates` independent nested increments `D^_1`.
pub fn estimate_sigma(model: &ProcessModel, settings: NestedSettings, replicates: usize, seed: u64) -> Result<Estimate> {
    if let Some(v) = analytic_sigma(model) {
        return Ok(Estimate::exact(v));
    }
    if replicates < 2 || settings.inner < 2 {
        return Err(Error::invalid("replicates", "need at least 2 replicates and 2 inner draws"));
    }
    let theta = analytic_theta_sequence(model, 2.0)?;
    let horizon = match (settings.horizon, &theta) {
        (Some(h), _) => h,
        (None, Some(t)) => auto_horizon(t, t.big_theta(0).value),
        (None, None) => MAX_AUTO_HORIZON,
    };
    let spec = *model.innovations();
    let d = crate::stats::replicate_map(replicates, |r| {
        let src = IndexedInnovationStream::original(derive_seed(seed, &[r as u64, 0]), spec);
        let draws = InnerDraws::new(derive_seed(seed, &[r as u64, 1]), spec);
        nested_increment(model, &src, 1, horizon, &draws, settings.inner).value
    });
    Ok(lq_norm(&d, 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundId {
    /// `||S_n||_q`.
    Eq1,
    /// `||S_n - M_n||_q`.
    Eq3,
    /// `||max_{k<=n} |S_k|||_q`.
    Eq4,
    /// `||E(D_k^2 | xi_0) - sigma^2||_{q/2}`.
    Eq28,
    /// `||P_0(D_k^2)||_{q/2}`.
    Eq29,
}

impl BoundId {
    pub fn name(&self) -> &'static str {
        match self {
            BoundId::Eq1 => "eq1",
            BoundId::Eq3 => "eq3",
            BoundId::Eq4 => "eq4",
            BoundId::Eq28 => "eq28",
            BoundId::Eq29 => "eq29",
        }
    }
}

/// Right-hand side of a moment bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundEvaluation {
    pub id: BoundId,
    pub n: usize,
    pub q: f64,
    /// On the scale of the bounded norm (the `q'`-th root already taken).
    pub rhs: f64,
    pub provenance: Provenance,
    /// The ingredients had no tail model and were treated as zero beyond their horizon.
    pub horizon_limited: bool,
}

/// Extra window positions summed explicitly beyond the sequence horizon.
const WINDOW_EXTRA: usize = 4096;

/// `(B_q^{q'} sum_{i >= -n} (Lambda_{i+n} - Lambda_i)^{q'})^{1/q'}` with
/// `Lambda_m = 0` for `m < 0`.
pub fn rhs_eq1(theta: &TailedSequence, n: usize, q: f64) -> Result<BoundEvaluation> {
    let b = b_q(q)?;
    let qp = q_prime(q);
    let mut total = 0.0;
    // i = -n..-1: windows Lambda_0..Lambda_{n-1}
    let mut lambda = 0.0;
    for m in 0..n {
        lambda += theta.get(m);
        total += lambda.powf(qp);
    }
    // i >= 0: w_i = theta_{i+1} + ... + theta_{i+n}, slid incrementally
    let last = theta.len() + 4 * n + WINDOW_EXTRA;
    let mut w: f64 = (1..=n).map(|j| theta.get(j)).sum();
    for i in 0..=last {
        total += w.max(0.0).powf(qp);
        w += theta.get(i + n + 1) - theta.get(i + 1);
    }
    // remainder over i > last: w_i <= Theta_{i+1} and, for nonincreasing theta, w_i <= n theta_{i+1}
    let tail = theta.tail_or_vanishing();
    let by_theta = tail.tail_sums().pow(qp);
    let by_window = tail.pow(qp).scaled((n as f64).powf(qp));
    let remainder = [by_theta, by_window]
        .iter()
        .filter(|d| d.is_summable())
        .map(|d| d.tail_from(last + 2))
        .fold(f64::INFINITY, f64::min);
    total += remainder;
    Ok(BoundEvaluation {
        id: BoundId::Eq1,
        n,
        q,
        rhs: b * total.powf(1.0 / qp),
        provenance: theta.provenance(),
        horizon_limited: theta.horizon_limited(),
    })
}

/// `(3 B_q^{q'} sum_{j=1}^n Theta_{j,q}^{q'})^{1/q'}`.
pub fn rhs_eq3(theta: &TailedSequence, n: usize, q: f64) -> Result<BoundEvaluation> {
    let b = b_q(q)?;
    let qp = q_prime(q);
    let explicit = n.min(theta.len() + WINDOW_EXTRA);
    let mut sum: f64 = (1..=explicit).map(|j| theta.big_theta(j).value.powf(qp)).sum();
    if n > explicit {
        let shape = theta.tail_or_vanishing().tail_sums().pow(qp);
        if shape.is_summable() {
            sum += shape.tail_from(explicit + 1) - shape.tail_from(n + 1);
        } else {
            sum += (explicit + 1..=n).map(|j| shape.value_at(j)).sum::<f64>();
        }
    }
    Ok(BoundEvaluation {
        id: BoundId::Eq3,
        n,
        q,
        rhs: (3.0 * b.powf(qp) * sum).powf(1.0 / qp),
        provenance: theta.provenance(),
        horizon_limited: theta.horizon_limited(),
    })
}

/// `(q B_q / (q - 1)) n^{1/q'} Theta_{0,q}`.
pub fn rhs_eq4(theta0: f64, n: usize, q: f64) -> Result<BoundEvaluation> {
    let b = b_q(q)?;
    Ok(BoundEvaluation {
        id: BoundId::Eq4,
        n,
        q,
        rhs: q * b / (q - 1.0) * (n as f64).powf(1.0 / q_prime(q)) * theta0,
        provenance: Provenance::Exact,
        horizon_limited: false,
    })
}

/// Coupling-measure profiles entering the conditional-variance bounds.
#[derive(Clone, Copy, Debug)]
pub struct CouplingProfiles<'a> {
    pub alpha_tilde: &'a TailedSequence,
    pub alpha_star: &'a TailedSequence,
    pub beta_tilde: &'a TailedSequence,
    pub beta_star: &'a TailedSequence,
}

/// Bounds on `||E(D_k^2 | xi_0) - sigma^2||_{q/2}` and `||P_0(D_k^2)||_{q/2}`:
/// `8 c_q beta*_k + 8 c_q sum_{i>=k} min(alpha*_i, alpha~_{i-k})` and
/// `8 c_q beta~_k + 8 c_q sum_{i>=k} alpha~_i`.
pub fn prop3_bounds(q: f64, k: usize, c_q: f64, p: CouplingProfiles) -> Result<(BoundEvaluation, BoundEvaluation)> {
    if !(q > 2.0) {
        return Err(Error::Domain(format!("conditional-variance bounds need q > 2, got {q}")));
    }
    let horizon = p.alpha_star.len().max(p.alpha_tilde.len() + k);
    let mut mins: f64 = (k..horizon).map(|i| p.alpha_star.get(i).min(p.alpha_tilde.get(i - k))).sum();
    let star_tail = p.alpha_star.tail_or_vanishing();
    let tilde_tail = p.alpha_tilde.tail_or_vanishing();
    mins += [
        (star_tail, horizon),
        (tilde_tail, horizon - k),
    ]
    .iter()
    .filter(|(d, _)| d.is_summable())
    .map(|(d, from)| d.tail_from(*from))
    .fold(f64::INFINITY, f64::min);
    let alpha_sum = p.alpha_tilde.big_theta(k).value;
    let provenance = [p.alpha_tilde, p.alpha_star, p.beta_tilde, p.beta_star]
        .iter()
        .fold(Provenance::Exact, |acc, s| acc.combine(s.provenance()));
    let limited = [p.alpha_tilde, p.alpha_star, p.beta_tilde, p.beta_star]
        .iter()
        .any(|s| s.horizon_limited());
    let eval = |id, rhs| BoundEvaluation {
        id,
        n: k,
        q,
        rhs,
        provenance,
        horizon_limited: limited,
    };
    Ok((
        eval(BoundId::Eq28, 8.0 * c_q * (p.beta_star.get(k) + mins)),
        eval(BoundId::Eq29, 8.0 * c_q * (p.beta_tilde.get(k) + alpha_sum)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovation::InnovationSpec;
    use crate::series::Decay;
    use crate::model::Kernel;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_eq!(b_q(2.0).unwrap(), 1.0);
        assert_relative_eq!(b_q(4.0).unwrap(), 144.0 / 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(b_q(3.0).unwrap(), 18.0 * 3f64.powf(1.5) / 2f64.sqrt(), max_relative = 1e-14);
        assert!(matches!(b_q(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn xi_examples() {
        let pair = CoefficientSequence::explicit(vec![1.0, 0.5]).unwrap();
        for n in [1, 2, 10] {
            assert_relative_eq!(xi_n(&pair, n).unwrap(), 0.5f64.sqrt(), max_relative = 1e-14);
        }
        let g = CoefficientSequence::geometric(0.5).unwrap();
        assert_relative_eq!(xi_n(&g, 1).unwrap(), (4.0f64 / 3.0).sqrt(), max_relative = 1e-14);
        let single = CoefficientSequence::explicit(vec![2.0]).unwrap();
        assert_eq!(xi_n(&single, 5).unwrap(), 0.0);
    }

    #[test]
    fn xi_general_path_matches_geometric_closed_form() {
        // an explicit list long enough to reproduce the geometric filter
        let values: Vec<f64> = (0..200).map(|i| 0.5f64.powi(i)).collect();
        let e = CoefficientSequence::explicit(values).unwrap();
        let g = CoefficientSequence::geometric(0.5).unwrap();
        for n in [1, 3, 17] {
            assert_relative_eq!(xi_n(&e, n).unwrap(), xi_n(&g, n).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_decomposition_identities() {
        let stream = IndexedInnovationStream::original(3, InnovationSpec::normal());
        let iid = CoefficientSequence::explicit(vec![1.0]).unwrap();
        let dec = linear_decomposition(&iid, &stream, 50, 2.0).unwrap();
        assert!(dec.r.iter().all(|&r| r.abs() < 1e-12));
        let pair = CoefficientSequence::explicit(vec![1.0, 0.5]).unwrap();
        let dec = linear_decomposition(&pair, &stream, 50, 2.0).unwrap();
        assert_eq!(dec.sigma.value, 1.5);
        for k in 0..=50 {
            assert_eq!(dec.r[k], dec.s[k] - dec.m[k]);
        }
        for k in 1..=50 {
            // R_k = -0.5 eps_k + 0.5 eps_0
            let want = 0.5 * (stream.at(0) - stream.at(k as i64));
            assert_relative_eq!(dec.r[k], want, epsilon = 1e-12);
        }
        let long = CoefficientSequence::polynomial(0.8).unwrap();
        assert!(linear_decomposition(&long, &stream, 10, 2.0).is_err());
    }

    #[test]
    fn nested_matches_closed_form_for_linear_filters() {
        let spec = InnovationSpec::normal();
        let a = CoefficientSequence::explicit(vec![1.0, -0.4, 0.3]).unwrap();
        let model = ProcessModel::linear(a.clone(), spec);
        let stream = IndexedInnovationStream::original(9, spec);
        let settings = NestedSettings {
            horizon: Some(4),
            inner: 8,
            inner_seed: 2,
        };
        let nested = nested_decomposition(&model, &stream, 40, 2.0, settings, None).unwrap();
        let closed = linear_decomposition(&a, &stream, 40, 2.0).unwrap();
        for k in 0..=40 {
            assert_relative_eq!(nested.r[k], closed.r[k], epsilon = 1e-12);
        }
        assert_eq!(nested.truncation_bound, 0.0);
    }

    #[test]
    fn nested_horizon_zero_in_iid_case_is_the_observation() {
        let spec = InnovationSpec::normal();
        let model = ProcessModel::linear(CoefficientSequence::explicit(vec![1.0]).unwrap(), spec);
        let stream = IndexedInnovationStream::original(5, spec);
        let settings = NestedSettings {
            horizon: Some(0),
            inner: 4,
            inner_seed: 1,
        };
        let dec = nested_decomposition(&model, &stream, 20, 2.0, settings, None).unwrap();
        for k in 1..=20 {
            assert_relative_eq!(dec.d[k - 1], stream.at(k as i64), epsilon = 1e-14);
        }
    }

    #[test]
    fn nested_ar1_increment() {
        let spec = InnovationSpec::normal();
        let model = ProcessModel::iterated(Kernel::Ar1 { rho: 0.5 }, spec, None, 0.0).unwrap();
        let stream = IndexedInnovationStream::original(11, spec);
        let settings = NestedSettings {
            horizon: Some(20),
            inner: 16,
            inner_seed: 4,
        };
        let dec = nested_decomposition(&model, &stream, 30, 2.0, settings, None).unwrap();
        let factor = 2.0 - 0.5f64.powi(20);
        let sine = ProcessModel::iterated(Kernel::ContractingSine { rho: 0.5 }, spec, None, 0.0).unwrap();
        let sigma = estimate_sigma(&sine, NestedSettings { inner: 32, ..Default::default() }, 400, 3).unwrap();
        assert!(sigma.value > 0.5 && sigma.value < 2.0 && sigma.se > 0.0, "{sigma:?}");
        for k in 1..=30 {
            assert_relative_eq!(dec.d[k - 1], factor * stream.at(k as i64), epsilon = 1e-10);
        }
        assert_relative_eq!(dec.truncation_bound, 0.5f64.powi(20), max_relative = 1e-12);
        assert_eq!(dec.sigma.value, 2.0);
    }

    #[test]
    fn nested_refuses_long_memory() {
        let spec = InnovationSpec::normal();
        let model = ProcessModel::linear(CoefficientSequence::polynomial(0.8).unwrap(), spec);
        let stream = IndexedInnovationStream::original(1, spec);
        let err = nested_decomposition(&model, &stream, 4, 2.0, NestedSettings::default(), None).unwrap_err();
        assert!(matches!(err, Error::ConditionFailed { .. }));
    }

    #[test]
    fn eq1_examples() {
        let iid = TailedSequence::new(vec![1.0], Some(Decay::Vanishing), Provenance::Exact);
        for n in [1, 4, 64] {
            assert_relative_eq!(rhs_eq1(&iid, n, 2.0).unwrap().rhs, (n as f64).sqrt(), max_relative = 1e-14);
        }
        let g = geometric_sequence(1.0, 0.5, Provenance::Exact);
        assert_relative_eq!(rhs_eq1(&g, 1, 2.0).unwrap().rhs, (4.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        let zero = TailedSequence::new(vec![0.0; 3], Some(Decay::Vanishing), Provenance::Exact);
        assert_eq!(rhs_eq1(&zero, 8, 4.0).unwrap().rhs, 0.0);
    }

    #[test]
    fn eq1_window_oracle() {
        // direct evaluation of the window sums for geometric theta and n = 3
        let g = geometric_sequence(1.0, 0.5, Provenance::Exact);
        let n = 3usize;
        let lam = |m: i64| if m < 0 { 0.0 } else { 2.0 - 0.5f64.powi(m as i32) };
        let direct: f64 = (-(n as i64)..2000).map(|i| (lam(i + n as i64) - lam(i)).powi(2)).sum();
        assert_relative_eq!(rhs_eq1(&g, n, 2.0).unwrap().rhs, direct.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn eq3_eq4_examples() {
        let g = geometric_sequence(1.0, 0.5, Provenance::Exact);
        assert_relative_eq!(rhs_eq3(&g, 1_000_000, 2.0).unwrap().rhs, 2.0, max_relative = 1e-9);
        let zero = TailedSequence::new(vec![0.0], Some(Decay::Vanishing), Provenance::Exact);
        assert_eq!(rhs_eq3(&zero, 10, 2.0).unwrap().rhs, 0.0);
        let one = TailedSequence::new(vec![0.0, 1.0], Some(Decay::Vanishing), Provenance::Exact);
        assert_relative_eq!(rhs_eq3(&one, 1, 4.0).unwrap().rhs, 3f64.sqrt() * b_q(4.0).unwrap(), max_relative = 1e-14);
        assert_eq!(rhs_eq4(2.0, 16, 2.0).unwrap().rhs, 16.0);
        assert_relative_eq!(rhs_eq4(1.0, 1, 4.0).unwrap().rhs, 4.0 / 3.0 * b_q(4.0).unwrap(), max_relative = 1e-14);
        assert_eq!(rhs_eq4(0.0, 5, 3.0).unwrap().rhs, 0.0);
    }

    #[test]
    fn prop3_examples() {
        let zero = TailedSequence::new(vec![0.0; 4], Some(Decay::Vanishing), Provenance::Exact);
        let p = CouplingProfiles {
            alpha_tilde: &zero,
            alpha_star: &zero,
            beta_tilde: &zero,
            beta_star: &zero,
        };
        let (a, b) = prop3_bounds(4.0, 2, 1.0, p).unwrap();
        assert_eq!((a.rhs, b.rhs), (0.0, 0.0));
        assert!(prop3_bounds(2.0, 1, 1.0, p).is_err());
        let at = geometric_sequence(0.5, 0.5, Provenance::Exact);
        let bt = geometric_sequence(1.0, 0.5, Provenance::Exact);
        let p = CouplingProfiles {
            alpha_tilde: &at,
            alpha_star: &at,
            beta_tilde: &bt,
            beta_star: &bt,
        };
        let (a, b) = prop3_bounds(4.0, 3, 2.0, p).unwrap();
        assert!(a.rhs.is_finite() && a.rhs > 0.0);
        // 16 (2^-3 + 0.5 * 2^-3 * 2)
        assert_relative_eq!(b.rhs, 16.0 * (0.125 + 0.125), max_relative = 1e-12);
    }
}
