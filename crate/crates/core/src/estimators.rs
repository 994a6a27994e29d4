//! Monte Carlo estimates of the coupling dependence measures
//! `beta~_k, beta*_k, alpha~_k, alpha*_k, omega_n`, the bracket they give for
//! `theta_{n,q}`, tail fits, and the geometric-moment contraction fit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coupling::{forecast_means, replicate_seeds, Coupled, CoupledWindow, CouplingKind, InnerDraws};
use crate::error::{Error, Result};
use crate::innovation::{derive_seed, difference_lq_norm, IndexedInnovationStream, InnovationFamily};
use crate::model::{analytic_theta, chain_segment, Kernel, ModelKind, ProcessModel};
use crate::sequence::{Provenance, TailedSequence};
use crate::series::Decay;
use crate::stats::{least_squares, lq_norm, replicate_map, Estimate};

const PURPOSE_MEASURES: u64 = 0x6d65_6173;
const PURPOSE_GMC: u64 = 0x0067_6d63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    ThetaExact,
    ThetaSandwichLower,
    ThetaSandwichUpper,
    Omega,
    AlphaTilde,
    AlphaStar,
    BetaTilde,
    BetaStar,
}

impl MeasureKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::ThetaExact => "theta-exact",
            MeasureKind::ThetaSandwichLower => "theta-sandwich-lower",
            MeasureKind::ThetaSandwichUpper => "theta-sandwich-upper",
            MeasureKind::Omega => "omega",
            MeasureKind::AlphaTilde => "alpha-tilde",
            MeasureKind::AlphaStar => "alpha-star",
            MeasureKind::BetaTilde => "beta-tilde",
            MeasureKind::BetaStar => "beta-star",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            MeasureKind::ThetaExact,
            MeasureKind::ThetaSandwichLower,
            MeasureKind::ThetaSandwichUpper,
            MeasureKind::Omega,
            MeasureKind::AlphaTilde,
            MeasureKind::AlphaStar,
            MeasureKind::BetaTilde,
            MeasureKind::BetaStar,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// One per-lag record of a dependence profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileEntry {
    pub lag: u64,
    pub kind: MeasureKind,
    pub q: f64,
    pub estimate: f64,
    pub se: f64,
    pub replicates: usize,
}

impl ProfileEntry {
    pub fn as_estimate(&self) -> Estimate {
        Estimate {
            value: self.estimate,
            se: self.se,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSettings {
    /// Largest lag `K`; beta is simulated to `K + 1`.
    pub max_lag: usize,
    pub replicates: usize,
    pub inner: usize,
    pub seed: u64,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self {
            max_lag: 10,
            replicates: 10_000,
            inner: 512,
            seed: 1,
        }
    }
}

/// Per-replicate coupled differences, indexed `[lag][replicate]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSamples {
    pub settings: MeasureSettings,
    pub beta_tilde: Vec<Vec<f64>>,
    pub beta_star: Vec<Vec<f64>>,
    pub alpha_tilde: Vec<Vec<f64>>,
    pub alpha_star: Vec<Vec<f64>>,
    /// `omega[0]` is the lag-0 g difference; `omega[n]` the `h_n` difference.
    pub omega: Vec<Vec<f64>>,
}

struct ReplicateDiffs {
    bt: Vec<f64>,
    bs: Vec<f64>,
    at: Vec<f64>,
    as_: Vec<f64>,
    om: Vec<f64>,
}

/// Simulates every coupled difference needed for a profile, one pass per
/// replicate, so that several moment orders can share the same draws.
pub fn simulate_coupled(model: &ProcessModel, settings: &MeasureSettings) -> Result<CoupledSamples> {
    if settings.replicates < 100 {
        return Err(Error::invalid("replicates", "need at least 100"));
    }
    if settings.inner < 2 {
        return Err(Error::invalid("inner", "need at least 2"));
    }
    let k_max = settings.max_lag;
    let reps = replicate_map(settings.replicates, |r| {
        let (seed, inner_seed) = replicate_seeds(settings.seed, PURPOSE_MEASURES, r);
        let tilde = CoupledWindow::from_seed(model, seed, CouplingKind::Tilde);
        let star = CoupledWindow::from_seed(model, seed, CouplingKind::Star);
        let (g, gt) = tilde.coupled_g_segment(k_max + 2);
        let (_, gs) = star.coupled_g_segment(k_max + 2);
        let bt: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| a - b).collect();
        let bs: Vec<f64> = g.iter().zip(&gs).map(|(a, b)| a - b).collect();
        let mut at = Vec::with_capacity(k_max + 1);
        let mut as_ = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max as u64 {
            let d = tilde.coupled_h_values(k, 1, settings.inner, derive_seed(inner_seed, &[0, k]));
            at.push(d.difference);
            let d = star.coupled_h_values(k, 1, settings.inner, derive_seed(inner_seed, &[1, k]));
            as_.push(d.difference);
        }
        let mut om = vec![bt[0]];
        if k_max >= 1 {
            let draws = InnerDraws::new(derive_seed(inner_seed, &[2]), *model.innovations());
            let (fo, fc) = tilde.forecasters(0, k_max);
            let means = forecast_means(&fo, &fc, k_max, &draws, settings.inner);
            om.extend(means.original.iter().zip(&means.coupled).map(|(a, b)| a - b));
        }
        ReplicateDiffs { bt, bs, at, as_, om }
    });
    let transpose = |f: &dyn Fn(&ReplicateDiffs) -> &Vec<f64>, len: usize| -> Vec<Vec<f64>> {
        (0..len).map(|lag| reps.iter().map(|rep| f(rep)[lag]).collect()).collect()
    };
    Ok(CoupledSamples {
        settings: *settings,
        beta_tilde: transpose(&|r| &r.bt, k_max + 2),
        beta_star: transpose(&|r| &r.bs, k_max + 2),
        alpha_tilde: transpose(&|r| &r.at, k_max + 1),
        alpha_star: transpose(&|r| &r.as_, k_max + 1),
        omega: transpose(&|r| &r.om, k_max + 1),
    })
}

/// Bracket `[omega_n / 2, min(omega_n, alpha~_{n-1})]` for `theta_{n,q}`.
/// At `n = 0` pass `beta~_0` as `omega` and no alpha.
pub fn theta_sandwich(omega: Estimate, alpha_prev: Option<Estimate>) -> (Estimate, Estimate) {
    let lower = Estimate {
        value: omega.value / 2.0,
        se: omega.se / 2.0,
    };
    let upper = match alpha_prev {
        Some(a) if a.value < omega.value => a,
        _ => omega,
    };
    (lower, upper)
}

/// Fitted decay of a tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModelKind {
    Geometric,
    Polynomial,
    Zero,
}

impl TailModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            TailModelKind::Geometric => "geometric",
            TailModelKind::Polynomial => "polynomial",
            TailModelKind::Zero => "zero",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFit {
    pub kind: TailModelKind,
    pub decay: Decay,
    pub rss: f64,
}

/// Fits geometric and polynomial decay on the last half of `values`
/// (index = lag) and keeps the one with smaller residual. All-zero tails
/// give the zero model; fewer than three positive points give `None`.
pub fn fit_tail(values: &[f64]) -> Option<TailFit> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let start = (n / 2).max(1);
    let window: Vec<(f64, f64)> = (start..n).map(|i| (i as f64, values[i])).collect();
    if window.iter().all(|&(_, v)| v == 0.0) {
        return Some(TailFit {
            kind: TailModelKind::Zero,
            decay: Decay::Vanishing,
            rss: 0.0,
        });
    }
    let positive: Vec<(f64, f64)> = window.into_iter().filter(|&(_, v)| v > 0.0).collect();
    if positive.len() < 3 {
        return None;
    }
    let x: Vec<f64> = positive.iter().map(|p| p.0).collect();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = positive.iter().map(|p| p.1.ln()).collect();
    let geo = least_squares(&x, &ly).ok()?;
    let pol = least_squares(&lx, &ly).ok()?;
    let fit = if geo.rss <= pol.rss {
        let ratio = geo.slope.exp();
        TailFit {
            kind: TailModelKind::Geometric,
            decay: if ratio < 1.0 {
                Decay::geometric(geo.intercept.exp(), ratio)
            } else {
                Decay::Divergent
            },
            rss: geo.rss,
        }
    } else {
        let power = -pol.slope;
        TailFit {
            kind: TailModelKind::Polynomial,
            decay: if power > 0.0 {
                Decay::polynomial(pol.intercept.exp(), power)
            } else {
                Decay::Divergent
            },
            rss: pol.rss,
        }
    };
    Some(fit)
}

/// `(Theta_m, Lambda_m)` of a sequence; `horizon_limited` when no tail model
/// backs the part beyond the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailSums {
    pub theta: Estimate,
    pub lambda: Estimate,
    pub horizon_limited: bool,
}

pub fn tail_sums(sequence: &TailedSequence, m: i64) -> TailSums {
    TailSums {
        theta: sequence.big_theta(m.max(0) as usize),
        lambda: sequence.lambda(m),
        horizon_limited: sequence.horizon_limited(),
    }
}

/// Per-lag estimates of the dependence measures at one moment order.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceProfile {
    pub q: f64,
    /// Largest lag with entries for every kind.
    pub horizon: u64,
    pub replicates: usize,
    pub inner: usize,
    pub entries: Vec<ProfileEntry>,
    /// Tail fitted to the sandwich upper bounds of theta.
    pub tail: Option<TailFit>,
}

impl DependenceProfile {
    /// Builds the profile at order `q` from shared coupled samples.
    pub fn from_samples(model: &ProcessModel, samples: &CoupledSamples, q: f64) -> Result<Self> {
        model.innovations().ensure_moment(q)?;
        let r = samples.settings.replicates;
        let k_max = samples.settings.max_lag;
        let mut entries = Vec::new();
        let mut push = |lag: usize, kind: MeasureKind, e: Estimate| {
            entries.push(ProfileEntry {
                lag: lag as u64,
                kind,
                q,
                estimate: e.value,
                se: e.se,
                replicates: r,
            })
        };
        let norms = |rows: &Vec<Vec<f64>>| -> Vec<Estimate> { rows.iter().map(|s| lq_norm(s, q)).collect() };
        let bt = norms(&samples.beta_tilde);
        let bs = norms(&samples.beta_star);
        let at = norms(&samples.alpha_tilde);
        let as_ = norms(&samples.alpha_star);
        let om = norms(&samples.omega);
        for lag in 0..=k_max {
            push(lag, MeasureKind::BetaTilde, bt[lag]);
            push(lag, MeasureKind::BetaStar, bs[lag]);
            push(lag, MeasureKind::AlphaTilde, at[lag]);
            push(lag, MeasureKind::AlphaStar, as_[lag]);
            push(lag, MeasureKind::Omega, om[lag]);
            let alpha_prev = if lag == 0 { None } else { Some(at[lag - 1]) };
            let (lo, up) = theta_sandwich(om[lag], alpha_prev);
            push(lag, MeasureKind::ThetaSandwichLower, lo);
            push(lag, MeasureKind::ThetaSandwichUpper, up);
            if let Some(t) = analytic_theta(model, lag as u64, q)? {
                if t.exact {
                    push(lag, MeasureKind::ThetaExact, Estimate::exact(t.value));
                }
            }
        }
        // beta at K + 1 is kept for the alpha~_K <= 2 beta~_{K+1} comparison
        push(k_max + 1, MeasureKind::BetaTilde, bt[k_max + 1]);
        push(k_max + 1, MeasureKind::BetaStar, bs[k_max + 1]);
        let mut profile = Self {
            q,
            horizon: k_max as u64,
            replicates: r,
            inner: samples.settings.inner,
            entries,
            tail: None,
        };
        profile.tail = fit_tail(&profile.values(MeasureKind::ThetaSandwichUpper));
        Ok(profile)
    }

    pub fn entry(&self, kind: MeasureKind, lag: u64) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.kind == kind && e.lag == lag)
    }

    /// Point estimates of one kind for lags `0..=horizon`.
    pub fn values(&self, kind: MeasureKind) -> Vec<f64> {
        (0..=self.horizon)
            .map(|lag| self.entry(kind, lag).map_or(0.0, |e| e.estimate))
            .collect()
    }

    pub fn standard_errors(&self, kind: MeasureKind) -> Vec<f64> {
        (0..=self.horizon)
            .map(|lag| self.entry(kind, lag).map_or(0.0, |e| e.se))
            .collect()
    }

    /// Sequence of one kind with its own fitted tail.
    pub fn sequence(&self, kind: MeasureKind) -> TailedSequence {
        let values = self.values(kind);
        let tail = fit_tail(&values).map(|t| t.decay);
        let provenance = match kind {
            MeasureKind::ThetaExact => Provenance::Exact,
            MeasureKind::ThetaSandwichUpper => Provenance::UpperBound,
            _ => Provenance::Estimated,
        };
        TailedSequence::with_se(values, self.standard_errors(kind), tail, provenance)
    }

    /// Upper bounds for `theta_{n,q}`: exact values when present, else the
    /// sandwich upper bound with its fitted tail.
    pub fn theta_upper(&self) -> TailedSequence {
        self.sequence(MeasureKind::ThetaSandwichUpper)
    }

    /// Columnar text: `lag,kind,q,estimate,se,replicates`.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("lag,kind,q,estimate,se,replicates\n");
        let mut rows = self.entries.clone();
        rows.sort_by(|a, b| a.lag.cmp(&b.lag).then(a.kind.cmp(&b.kind)));
        for e in rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{}",
                e.lag,
                e.kind.name(),
                e.q,
                e.estimate,
                e.se,
                e.replicates
            );
        }
        out
    }

    pub fn from_columnar(text: &str) -> Result<Vec<ProfileEntry>> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = |what: &str| Error::Config {
                field: format!("profile line {}", i + 1),
                message: what.to_string(),
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            entries.push(ProfileEntry {
                lag: cols[0].parse().map_err(|_| bad("lag"))?,
                kind: MeasureKind::parse(cols[1]).ok_or_else(|| bad("kind"))?,
                q: cols[2].parse().map_err(|_| bad("q"))?,
                estimate: cols[3].parse().map_err(|_| bad("estimate"))?,
                se: cols[4].parse().map_err(|_| bad("se"))?,
                replicates: cols[5].parse().map_err(|_| bad("replicates"))?,
            });
        }
        Ok(entries)
    }
}

/// Convenience: simulate and build a profile for each `q`.
pub fn dependence_profiles(model: &ProcessModel, qs: &[f64], settings: &MeasureSettings) -> Result<Vec<DependenceProfile>> {
    for &q in qs {
        model.innovations().ensure_moment(q)?;
    }
    let samples = simulate_coupled(model, settings)?;
    qs.iter().map(|&q| DependenceProfile::from_samples(model, &samples, q)).collect()
}

fn single_entry(kind: MeasureKind, lag: u64, q: f64, samples: &[f64]) -> ProfileEntry {
    let e = lq_norm(samples, q);
    ProfileEntry {
        lag,
        kind,
        q,
        estimate: e.value,
        se: e.se,
        replicates: samples.len(),
    }
}

fn check_replicates(q: f64, replicates: usize) -> Result<()> {
    if replicates < 100 {
        return Err(Error::invalid("replicates", "need at least 100"));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid("q", "need q >= 1"));
    }
    Ok(())
}

/// `beta~_k` or `beta*_k` at one lag.
pub fn estimate_beta(model: &ProcessModel, q: f64, k: u64, replicates: usize, kind: CouplingKind, seed: u64) -> Result<ProfileEntry> {
    check_replicates(q, replicates)?;
    model.innovations().ensure_moment(q)?;
    let samples = replicate_map(replicates, |r| {
        let (s, _) = replicate_seeds(seed, PURPOSE_MEASURES, r);
        let (a, b) = CoupledWindow::from_seed(model, s, kind).coupled_g_values(k);
        a - b
    });
    let mk = match kind {
        CouplingKind::Tilde => MeasureKind::BetaTilde,
        CouplingKind::Star => MeasureKind::BetaStar,
    };
    Ok(single_entry(mk, k, q, &samples))
}

/// `alpha~_k` or `alpha*_k` (one-step conditional means) at one lag.
pub fn estimate_alpha(
    model: &ProcessModel,
    q: f64,
    k: u64,
    replicates: usize,
    inner: usize,
    kind: CouplingKind,
    seed: u64,
) -> Result<ProfileEntry> {
    check_replicates(q, replicates)?;
    model.innovations().ensure_moment(q)?;
    if inner < 2 {
        return Err(Error::invalid("inner", "need at least 2"));
    }
    let samples = replicate_map(replicates, |r| {
        let (s, inner_seed) = replicate_seeds(seed, PURPOSE_MEASURES, r);
        CoupledWindow::from_seed(model, s, kind)
            .coupled_h_values(k, 1, inner, inner_seed)
            .difference
    });
    let mk = match kind {
        CouplingKind::Tilde => MeasureKind::AlphaTilde,
        CouplingKind::Star => MeasureKind::AlphaStar,
    };
    Ok(single_entry(mk, k, q, &samples))
}

/// Predictive dependence `omega_n = ||h_n(xi_0) - h_n(xi~_0)||_q`.
pub fn estimate_omega(model: &ProcessModel, q: f64, n: u64, replicates: usize, inner: usize, seed: u64) -> Result<ProfileEntry> {
    check_replicates(q, replicates)?;
    model.innovations().ensure_moment(q)?;
    if n < 1 || inner < 2 {
        return Err(Error::invalid("n", "need n >= 1 and inner >= 2"));
    }
    let samples = replicate_map(replicates, |r| {
        let (s, inner_seed) = replicate_seeds(seed, PURPOSE_MEASURES, r);
        CoupledWindow::from_seed(model, s, CouplingKind::Tilde)
            .coupled_h_values(0, n as usize, inner, inner_seed)
            .difference
    });
    Ok(single_entry(MeasureKind::Omega, n, q, &samples))
}

/// Closed-form value of a measure, where the model admits one: linear
/// filters and AR(1) chains (star couplings need Gaussian innovations).
/// Uses the truncated filter, matching what is simulated.
pub fn reference_measure(model: &ProcessModel, kind: MeasureKind, lag: u64, q: f64) -> Option<f64> {
    let spec = model.innovations();
    let diff = difference_lq_norm(spec, q).ok().filter(|d| d.exact)?.value;
    let gaussian = spec.family == InnovationFamily::StandardNormal;
    // star differences are Gaussian with variance 2 * v
    let star = |v: f64| -> Option<f64> { gaussian.then(|| v.sqrt() * diff) };
    match model.kind() {
        ModelKind::LinearIid { coefficients } => {
            let a = |i: u64| coefficients.truncated(i);
            let sq_from = |j: u64| -> f64 { coefficients.support().iter().filter(|p| p.0 >= j).map(|p| p.1 * p.1).sum() };
            match kind {
                MeasureKind::ThetaExact => analytic_theta(model, lag, q).ok().flatten().map(|t| t.value),
                MeasureKind::BetaTilde | MeasureKind::Omega => Some(a(lag).abs() * diff),
                MeasureKind::AlphaTilde => Some(a(lag + 1).abs() * diff),
                MeasureKind::BetaStar => star(sq_from(lag)),
                MeasureKind::AlphaStar => star(sq_from(lag + 1)),
                _ => None,
            }
        }
        ModelKind::IteratedRandomFunction { chain } => match chain.kernel {
            Kernel::Ar1 { rho } => {
                let r = rho.abs();
                let b = chain.burn_in as i32;
                let stat = (1.0 - rho.powi(2 * b)) / (1.0 - rho * rho);
                match kind {
                    MeasureKind::ThetaExact => analytic_theta(model, lag, q).ok().flatten().map(|t| t.value),
                    MeasureKind::BetaTilde | MeasureKind::Omega => Some(r.powi(lag as i32) * diff),
                    MeasureKind::AlphaTilde => Some(r.powi(lag as i32 + 1) * diff),
                    MeasureKind::BetaStar => star(stat).map(|v| v * r.powi(lag as i32)),
                    MeasureKind::AlphaStar => star(stat).map(|v| v * r.powi(lag as i32 + 1)),
                    _ => None,
                }
            }
            Kernel::ContractingSine { .. } => None,
        },
        _ => None,
    }
}

/// Least-squares fit of `log E|G(xi_n) - G(xi*_n)|^q ~ log C + n log r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmcFit {
    pub c: f64,
    pub r: f64,
    /// Residual sum of squares of the log-moment regression.
    pub residual: f64,
    /// Number of lags entering the fit.
    pub lags: usize,
}

/// Fits the geometric-moment contraction of the innovation chain over lags
/// `1..=n_max`. Only chain-based models qualify.
pub fn fit_gmc(model: &ProcessModel, q: f64, n_max: usize, replicates: usize, seed: u64) -> Result<GmcFit> {
    if model.chain().is_none() {
        return Err(Error::Domain(format!("{} has no innovation chain", model.label())));
    }
    if n_max < 4 {
        return Err(Error::invalid("n_max", "need at least 4 lags"));
    }
    check_replicates(q, replicates)?;
    model.innovations().ensure_moment(q)?;
    let spec = *model.innovations();
    let rows = replicate_map(replicates, |r| {
        let s = derive_seed(seed, &[PURPOSE_GMC, r as u64]);
        let base = IndexedInnovationStream::original(s, spec);
        let prime = base.prime();
        let star = Coupled::new(&base, &prime, CouplingKind::Star);
        let a = chain_segment(model, &base, 1, n_max).expect("chain model");
        let b = chain_segment(model, &star, 1, n_max).expect("chain model");
        a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(q)).collect::<Vec<f64>>()
    });
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in 0..n_max {
        let m = rows.iter().map(|row| row[n]).sum::<f64>() / replicates as f64;
        if m > 0.0 && m.is_finite() {
            xs.push((n + 1) as f64);
            ys.push(m.ln());
        }
    }
    if xs.is_empty() {
        return Err(Error::Degenerate("coupled chain differences vanish at every lag".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("fewer than two lags with positive difference moments".into()));
    }
    let fit = least_squares(&xs, &ys)?;
    Ok(GmcFit {
        c: fit.intercept.exp(),
        r: fit.slope.exp(),
        residual: fit.rss,
        lags: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSequence;
    use crate::innovation::InnovationSpec;
    use crate::model::Transform;
    use approx::assert_relative_eq;

    fn normal() -> InnovationSpec {
        InnovationSpec::normal()
    }

    fn within(e: &ProfileEntry, target: f64, k: f64) -> bool {
        (e.estimate - target).abs() <= k * e.se + 1e-12
    }

    #[test]
    fn beta_examples() {
        let geo = ProcessModel::linear(CoefficientSequence::geometric(0.5).unwrap(), normal());
        let e = estimate_beta(&geo, 2.0, 2, 20_000, CouplingKind::Tilde, 3).unwrap();
        assert!(within(&e, 0.25 * 2f64.sqrt(), 3.0), "{e:?}");
        let dyadic = ProcessModel::linear(CoefficientSequence::dyadic_sparse(1.5).unwrap(), normal());
        let e = estimate_beta(&dyadic, 2.0, 3, 1000, CouplingKind::Tilde, 3).unwrap();
        assert_eq!((e.estimate, e.se), (0.0, 0.0));
        let ar = ProcessModel::iterated(Kernel::Ar1 { rho: 0.5 }, normal(), None, 0.0).unwrap();
        let e = estimate_beta(&ar, 2.0, 4, 20_000, CouplingKind::Star, 5).unwrap();
        assert!(within(&e, 0.0625 * (8.0f64 / 3.0).sqrt(), 3.0), "{e:?}");
    }

    #[test]
    fn alpha_and_omega_examples() {
        let short = ProcessModel::linear(CoefficientSequence::explicit(vec![1.0, 0.5, 0.25]).unwrap(), normal());
        let e = estimate_alpha(&short, 2.0, 1, 20_000, 16, CouplingKind::Tilde, 1).unwrap();
        assert!(within(&e, 0.25 * 2f64.sqrt(), 3.0), "{e:?}");
        let ar = ProcessModel::iterated(Kernel::Ar1 { rho: 0.5 }, normal(), None, 0.0).unwrap();
        let e = estimate_alpha(&ar, 2.0, 0, 20_000, 16, CouplingKind::Tilde, 2).unwrap();
        assert!(within(&e, 0.5 * 2f64.sqrt(), 3.0), "{e:?}");
        let geo = ProcessModel::linear(CoefficientSequence::geometric(0.5).unwrap(), normal());
        let e = estimate_omega(&geo, 2.0, 3, 20_000, 16, 4).unwrap();
        assert!(within(&e, 0.125 * 2f64.sqrt(), 3.0), "{e:?}");
        let e = estimate_omega(&short, 2.0, 3, 1000, 16, 4).unwrap();
        assert_eq!(e.estimate, 0.0);
        let tanh = ProcessModel::transform(CoefficientSequence::explicit(vec![1.0, 0.5]).unwrap(), Transform::Tanh, normal()).unwrap();
        let e = estimate_omega(&tanh, 2.0, 1, 5000, 64, 6).unwrap();
        assert!(e.estimate <= 0.5 * 2f64.sqrt() + 3.0 * e.se, "{e:?}");
    }

    #[test]
    fn sandwich_cases() {
        let (lo, up) = theta_sandwich(Estimate::exact(0.0), Some(Estimate::exact(1.0)));
        assert_eq!((lo.value, up.value), (0.0, 0.0));
        let a = 0.125;
        let (lo, up) = theta_sandwich(Estimate::exact(a * 2f64.sqrt()), None);
        assert!(lo.value <= a && a <= up.value);
    }

    #[test]
    fn geometric_tail_sums() {
        let theta: Vec<f64> = (0..12).map(|i| 2f64.powi(-i)).collect();
        let fit = fit_tail(&theta).unwrap();
        assert_eq!(fit.kind, TailModelKind::Geometric);
        let seq = TailedSequence::new(theta, Some(fit.decay), Provenance::Exact);
        for m in [0i64, 3, 11] {
            let s = tail_sums(&seq, m);
            assert_relative_eq!(s.theta.value, 2f64.powi(1 - m as i32), max_relative = 1e-9);
            assert_relative_eq!(s.lambda.value, 2.0 - 2f64.powi(-m as i32), max_relative = 1e-12);
        }
        assert_eq!(fit_tail(&[0.0; 8]).unwrap().kind, TailModelKind::Zero);
        let poly: Vec<f64> = (0..40).map(|i| (1.0 + i as f64).powf(-2.0)).collect();
        assert_eq!(fit_tail(&poly).unwrap().kind, TailModelKind::Polynomial);
    }

    #[test]
    fn gmc_fit_for_ar1_and_sine() {
        let ar = ProcessModel::iterated(Kernel::Ar1 { rho: 0.5 }, normal(), None, 0.0).unwrap();
        let fit = fit_gmc(&ar, 2.0, 12, 2000, 1).unwrap();
        assert!((fit.r - 0.25).abs() < 1e-9, "{fit:?}");
        let sine = ProcessModel::iterated(Kernel::ContractingSine { rho: 0.5 }, normal(), None, 0.0).unwrap();
        let fit = fit_gmc(&sine, 2.0, 12, 2000, 1).unwrap();
        assert!(fit.r <= 0.30, "{fit:?}");
        let lin = ProcessModel::linear(CoefficientSequence::geometric(0.5).unwrap(), normal());
        assert!(fit_gmc(&lin, 2.0, 12, 2000, 1).is_err());
    }

    #[test]
    fn columnar_round_trip() {
        let geo = ProcessModel::linear(CoefficientSequence::geometric(0.5).unwrap(), normal());
        let settings = MeasureSettings {
            max_lag: 3,
            replicates: 200,
            inner: 8,
            seed: 2,
        };
        let p = dependence_profiles(&geo, &[2.0], &settings).unwrap().remove(0);
        let text = p.to_columnar();
        let back = DependenceProfile::from_columnar(&text).unwrap();
        assert_eq!(back.len(), p.entries.len());
        assert!(text.starts_with("lag,kind,q,estimate,se,replicates\n"));
    }
}
