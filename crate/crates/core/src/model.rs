//! Catalog of stationary causal processes `X_n = g(..., eps_{n-1}, eps_n)`.
//!
//! Four families: linear filters of i.i.d. innovations, Lipschitz transforms
//! of such filters, iterated random functions `eta_n = R(eta_{n-1}, eps_n)`,
//! and linear filters driven by an iterated-random-function chain.
//!
//! The infinite past is approximated by truncating filters at lag `L` and by
//! starting chains from a fixed state `B` steps before time 0. Every value is
//! a pure function of the innovation source, so coupled copies only need a
//! different source.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSequence;
use crate::error::{Error, Result};
use crate::innovation::{
    analytic_lq_norm, derive_seed, difference_lq_norm, InnovationFamily, InnovationSource, InnovationSpec,
    IndexedInnovationStream,
};

/// Innovations older than this many lags are looked up one by one instead of
/// being buffered.
const BUFFER_LAGS: u64 = 1 << 16;
/// Longest filter a chain-driven model accepts (the chain must be run over it).
const MAX_CHAIN_FILTER_LAG: u64 = 1 << 16;
const CENTERING_SAMPLES: usize = 1_000_000;
const CENTERING_SEED: u64 = 0x00c3_47e5_0f7a_11d5;
const BURN_IN_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "kebab-case")]
pub enum Transform {
    Abs,
    Tanh,
    SoftThreshold { threshold: f64 },
}

impl Transform {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Transform::Abs => x.abs(),
            Transform::Tanh => x.tanh(),
            Transform::SoftThreshold { threshold } => x.signum() * (x.abs() - threshold).max(0.0),
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        1.0
    }

    pub fn is_odd(&self) -> bool {
        !matches!(self, Transform::Abs)
    }

    pub fn label(&self) -> String {
        match self {
            Transform::Abs => "abs".into(),
            Transform::Tanh => "tanh".into(),
            Transform::SoftThreshold { threshold } => format!("soft-threshold({threshold})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "kebab-case")]
pub enum Kernel {
    /// `R(x, e) = rho x + e`.
    Ar1 { rho: f64 },
    /// `R(x, e) = rho sin(x) + e`.
    ContractingSine { rho: f64 },
}

impl Kernel {
    #[inline]
    pub fn step(&self, x: f64, e: f64) -> f64 {
        match *self {
            Kernel::Ar1 { rho } => rho * x + e,
            Kernel::ContractingSine { rho } => rho * x.sin() + e,
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            Kernel::Ar1 { rho } | Kernel::ContractingSine { rho } => rho,
        }
    }

    /// Lipschitz coefficient `L_eps` of `x -> R(x, eps)`; here it does not depend on `eps`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.rho().abs()
    }

    pub fn label(&self) -> String {
        match self {
            Kernel::Ar1 { rho } => format!("ar1({rho})"),
            Kernel::ContractingSine { rho } => format!("contracting-sine({rho})"),
        }
    }
}

/// Iterated-random-function chain `eta_n = R(eta_{n-1}, eps_n)` started at
/// `initial` at time `-burn_in`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSpec {
    pub kernel: Kernel,
    pub burn_in: u64,
    pub initial: f64,
    /// Stationary mean, subtracted from `eta`.
    pub mean: f64,
}

impl ChainSpec {
    /// Smallest burn-in with contraction error `|rho|^B <= 1e-8`, at least 16.
    pub fn default_burn_in(kernel: &Kernel) -> u64 {
        let r = kernel.lipschitz_constant();
        if r == 0.0 {
            16
        } else {
            ((BURN_IN_TOL.ln() / r.ln()).ceil() as u64).max(16)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    LinearIid {
        coefficients: CoefficientSequence,
    },
    LipschitzTransform {
        coefficients: CoefficientSequence,
        transform: Transform,
        centering: f64,
    },
    IteratedRandomFunction {
        chain: ChainSpec,
    },
    LinearDependentInnovations {
        coefficients: CoefficientSequence,
        chain: ChainSpec,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessModel {
    innovations: InnovationSpec,
    kind: ModelKind,
}

impl ProcessModel {
    pub fn linear(coefficients: CoefficientSequence, innovations: InnovationSpec) -> Self {
        Self {
            innovations,
            kind: ModelKind::LinearIid { coefficients },
        }
    }

    /// `g = K(sum a_j eps_{n-j}) - E K(...)`. The centering constant is zero
    /// for odd `K` with symmetric innovations, closed form for `|x|` with
    /// Gaussian innovations, and otherwise a frozen Monte Carlo estimate.
    pub fn transform(coefficients: CoefficientSequence, transform: Transform, innovations: InnovationSpec) -> Result<Self> {
        if let Transform::SoftThreshold { threshold } = transform {
            if !(threshold >= 0.0 && threshold.is_finite()) {
                return Err(Error::invalid("transform_threshold", "must be finite and nonnegative"));
            }
        }
        let centering = if transform.is_odd() && innovations.is_symmetric() {
            0.0
        } else if transform == Transform::Abs && innovations.family == InnovationFamily::StandardNormal {
            let var: f64 = coefficients.support().iter().map(|&(_, a)| a * a).sum();
            (2.0 * var / std::f64::consts::PI).sqrt()
        } else {
            let base = ProcessModel::linear(coefficients.clone(), innovations);
            let stream = IndexedInnovationStream::original(CENTERING_SEED, innovations);
            let path = segment(&base, &stream, 1, CENTERING_SAMPLES);
            path.iter().map(|&x| transform.apply(x)).sum::<f64>() / CENTERING_SAMPLES as f64
        };
        Ok(Self {
            innovations,
            kind: ModelKind::LipschitzTransform {
                coefficients,
                transform,
                centering,
            },
        })
    }

    /// Iterated random function; `burn_in` defaults to [`ChainSpec::default_burn_in`].
    pub fn iterated(kernel: Kernel, innovations: InnovationSpec, burn_in: Option<u64>, initial: f64) -> Result<Self> {
        let chain = make_chain(kernel, innovations, burn_in, initial)?;
        Ok(Self {
            innovations,
            kind: ModelKind::IteratedRandomFunction { chain },
        })
    }

    pub fn linear_dependent(
        coefficients: CoefficientSequence,
        kernel: Kernel,
        innovations: InnovationSpec,
        burn_in: Option<u64>,
    ) -> Result<Self> {
        if coefficients.truncation_lag() > MAX_CHAIN_FILTER_LAG {
            return Err(Error::invalid(
                "truncation_lag",
                format!("chain-driven filters need truncation lag <= {MAX_CHAIN_FILTER_LAG}"),
            ));
        }
        let chain = make_chain(kernel, innovations, burn_in, 0.0)?;
        Ok(Self {
            innovations,
            kind: ModelKind::LinearDependentInnovations { coefficients, chain },
        })
    }

    pub fn innovations(&self) -> &InnovationSpec {
        &self.innovations
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn coefficients(&self) -> Option<&CoefficientSequence> {
        match &self.kind {
            ModelKind::LinearIid { coefficients }
            | ModelKind::LipschitzTransform { coefficients, .. }
            | ModelKind::LinearDependentInnovations { coefficients, .. } => Some(coefficients),
            ModelKind::IteratedRandomFunction { .. } => None,
        }
    }

    pub fn chain(&self) -> Option<&ChainSpec> {
        match &self.kind {
            ModelKind::IteratedRandomFunction { chain } | ModelKind::LinearDependentInnovations { chain, .. } => {
                Some(chain)
            }
            _ => None,
        }
    }

    pub fn is_linear_iid(&self) -> bool {
        matches!(self.kind, ModelKind::LinearIid { .. })
    }

    /// First innovation index any value at time `>= 0` depends on, if finite.
    pub(crate) fn chain_start(&self) -> i64 {
        match &self.kind {
            ModelKind::IteratedRandomFunction { chain } => -(chain.burn_in as i64),
            ModelKind::LinearDependentInnovations { coefficients, chain } => {
                -(chain.burn_in as i64) - coefficients.truncation_lag() as i64
            }
            _ => i64::MIN,
        }
    }

    pub fn label(&self) -> String {
        let inn = self.innovations.name();
        match &self.kind {
            ModelKind::LinearIid { coefficients } => format!("linear[{}|{inn}]", coefficients.label()),
            ModelKind::LipschitzTransform {
                coefficients, transform, ..
            } => format!("transform[{}|{}|{inn}]", transform.label(), coefficients.label()),
            ModelKind::IteratedRandomFunction { chain } => format!("irf[{}|{inn}]", chain.kernel.label()),
            ModelKind::LinearDependentInnovations { coefficients, chain } => {
                format!("linear-dependent[{}|{}|{inn}]", coefficients.label(), chain.kernel.label())
            }
        }
    }
}

fn make_chain(kernel: Kernel, innovations: InnovationSpec, burn_in: Option<u64>, initial: f64) -> Result<ChainSpec> {
    let rho = kernel.rho();
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid("kernel_rho", format!("|rho| < 1 required, got {rho}")));
    }
    if !initial.is_finite() {
        return Err(Error::invalid("initial", "must be finite"));
    }
    let burn_in = burn_in.unwrap_or_else(|| ChainSpec::default_burn_in(&kernel));
    let mut chain = ChainSpec {
        kernel,
        burn_in,
        initial,
        mean: 0.0,
    };
    let symmetric = matches!(kernel, Kernel::ContractingSine { .. }) && innovations.is_symmetric() && initial == 0.0;
    if !matches!(kernel, Kernel::Ar1 { .. }) && !symmetric {
        // frozen estimate from one long chain
        let stream = IndexedInnovationStream::original(CENTERING_SEED, innovations);
        let mut eta = initial;
        for i in 0..burn_in as i64 {
            eta = kernel.step(eta, stream.at(i - burn_in as i64));
        }
        let mut acc = 0.0;
        for i in 0..CENTERING_SAMPLES as i64 {
            eta = kernel.step(eta, stream.at(i));
            acc += eta;
        }
        chain.mean = acc / CENTERING_SAMPLES as f64;
    }
    Ok(chain)
}

/// Values `X_start, ..., X_{start+len-1}` of `model` driven by `src`.
pub fn segment<S: InnovationSource + ?Sized>(model: &ProcessModel, src: &S, start: i64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    match &model.kind {
        ModelKind::LinearIid { coefficients } => {
            filter_into(coefficients, |lo, buf: &mut Vec<f64>| fill_from(src, lo, buf), src, start, &mut out);
        }
        ModelKind::LipschitzTransform {
            coefficients,
            transform,
            centering,
        } => {
            filter_into(coefficients, |lo, buf: &mut Vec<f64>| fill_from(src, lo, buf), src, start, &mut out);
            for x in out.iter_mut() {
                *x = transform.apply(*x) - centering;
            }
        }
        ModelKind::IteratedRandomFunction { chain } => {
            let s = model.chain_start();
            assert!(start > s, "chain values requested before the chain start");
            let mut eta = chain.initial;
            for i in s + 1..start {
                eta = chain.kernel.step(eta, src.at(i));
            }
            for (offset, slot) in out.iter_mut().enumerate() {
                eta = chain.kernel.step(eta, src.at(start + offset as i64));
                *slot = eta - chain.mean;
            }
        }
        ModelKind::LinearDependentInnovations { coefficients, chain } => {
            let s = model.chain_start();
            let lag = coefficients.truncation_lag() as i64;
            assert!(start - lag > s, "chain values requested before the chain start");
            // centered chain over [start - L, start + len - 1]
            let lo = start - lag;
            let mut eta = chain.initial;
            for i in s + 1..lo {
                eta = chain.kernel.step(eta, src.at(i));
            }
            let mut centered = Vec::with_capacity(len + lag as usize);
            for i in lo..start + len as i64 {
                eta = chain.kernel.step(eta, src.at(i));
                centered.push(eta - chain.mean);
            }
            let no_src = |_: i64| -> f64 { unreachable!("chain filters are fully buffered") };
            filter_into(
                coefficients,
                |from, buf: &mut Vec<f64>| {
                    let skip = (from - lo) as usize;
                    buf.clear();
                    buf.extend_from_slice(&centered[skip..]);
                },
                &no_src,
                start,
                &mut out,
            );
        }
    }
    out
}

fn fill_from<S: InnovationSource + ?Sized>(src: &S, lo: i64, buf: &mut Vec<f64>) {
    let len = buf.capacity();
    buf.clear();
    buf.resize(len, 0.0);
    src.fill(lo, buf);
}

/// Convolves the truncated filter with inputs `u`: `out[t] = sum_j a_j u_{start+t-j}`.
/// Inputs within `BUFFER_LAGS` of the window come from `fill(lo, buf)`, older
/// ones (sparse long filters only) from `far.at`.
fn filter_into<F, S>(coefficients: &CoefficientSequence, fill: F, far: &S, start: i64, out: &mut [f64])
where
    F: FnOnce(i64, &mut Vec<f64>),
    S: InnovationSource + ?Sized,
{
    let len = out.len();
    let buffered = coefficients.truncation_lag().min(BUFFER_LAGS);
    let lo = start - buffered as i64;
    let mut buf = Vec::with_capacity(len + buffered as usize);
    fill(lo, &mut buf);
    let support = coefficients.support();
    let split = support.partition_point(|&(j, _)| j <= buffered);
    let (near, distant) = support.split_at(split);
    for (t, slot) in out.iter_mut().enumerate() {
        // buf index of u_{start + t - j} is t + buffered - j
        let base = t + buffered as usize;
        let mut acc = 0.0;
        for &(j, a) in near {
            acc += a * buf[base - j as usize];
        }
        for &(j, a) in distant {
            acc += a * far.at(start + t as i64 - j as i64);
        }
        *slot = acc;
    }
}

/// A simulated path: `x[k-1] = X_k` for `k = 1..=n`, `s[k] = S_k` for `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

/// `X_1..X_n` and `S_0..S_n` with `S_0 = 0`.
pub fn generate_path<S: InnovationSource + ?Sized>(model: &ProcessModel, n: usize, src: &S) -> Path {
    let x = segment(model, src, 1, n);
    let s = partial_sums(&x);
    Path { x, s }
}

pub fn partial_sums(x: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(x.len() + 1);
    s.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        s.push(acc);
    }
    s
}

/// Conditional simulation from time `k`: the past (innovations up to `k`)
/// is fixed by a source, future innovations are supplied per draw.
///
/// Per-draw cost is O(m * min(m, nnz)) for filters and O(m) for chains.
#[derive(Clone, Debug)]
pub struct Forecaster<'m> {
    model: &'m ProcessModel,
    /// For filters: `past[t] = sum_{j >= t} a_j u_{k+t-j}`, `t = 0..=m`.
    past: Vec<f64>,
    /// Chain state `eta_k` (uncentered).
    eta: f64,
    horizon: usize,
}

impl<'m> Forecaster<'m> {
    pub fn new<S: InnovationSource + ?Sized>(model: &'m ProcessModel, src: &S, k: i64, horizon: usize) -> Self {
        let mut past = Vec::new();
        let mut eta = 0.0;
        match &model.kind {
            ModelKind::LinearIid { coefficients } | ModelKind::LipschitzTransform { coefficients, .. } => {
                let lag = coefficients.truncation_lag();
                past = if lag <= BUFFER_LAGS {
                    let mut buf = Vec::with_capacity(lag as usize + 1);
                    fill_from(src, k - lag as i64, &mut buf);
                    filter_past(coefficients, horizon, |i| buf[(lag - i) as usize])
                } else {
                    filter_past(coefficients, horizon, |i| src.at(k - i as i64))
                };
            }
            ModelKind::IteratedRandomFunction { chain } => {
                let s = model.chain_start();
                assert!(k > s, "conditioning time precedes the chain start");
                eta = chain.initial;
                for i in s + 1..=k {
                    eta = chain.kernel.step(eta, src.at(i));
                }
            }
            ModelKind::LinearDependentInnovations { coefficients, chain } => {
                let s = model.chain_start();
                let lag = coefficients.truncation_lag() as i64;
                assert!(k - lag > s, "conditioning time precedes the chain start");
                eta = chain.initial;
                for i in s + 1..k - lag {
                    eta = chain.kernel.step(eta, src.at(i));
                }
                let mut centered = Vec::with_capacity(lag as usize + 1);
                for i in k - lag..=k {
                    eta = chain.kernel.step(eta, src.at(i));
                    centered.push(eta - chain.mean);
                }
                past = filter_past(coefficients, horizon, |i| centered[(lag - i as i64) as usize]);
            }
        }
        Self {
            model,
            past,
            eta,
            horizon,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `X_k` itself.
    pub fn current(&self) -> f64 {
        match &self.model.kind {
            ModelKind::LinearIid { .. } => self.past[0],
            ModelKind::LipschitzTransform {
                transform, centering, ..
            } => transform.apply(self.past[0]) - centering,
            ModelKind::IteratedRandomFunction { chain } => self.eta - chain.mean,
            ModelKind::LinearDependentInnovations { .. } => self.past[0],
        }
    }

    /// Writes `X_{k+1}, ..., X_{k+m}` into `out[..m]` given the future
    /// innovations `sign * future[t]` at indices `k + 1 + t`.
    /// `scratch` must hold at least `m` values (used by chain-driven filters).
    pub fn trajectory(&self, future: &[f64], sign: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
        let m = out.len();
        debug_assert!(m <= self.horizon && future.len() >= m);
        match &self.model.kind {
            ModelKind::LinearIid { coefficients } => {
                near_convolve(coefficients, &self.past, future, sign, out);
            }
            ModelKind::LipschitzTransform {
                coefficients,
                transform,
                centering,
            } => {
                near_convolve(coefficients, &self.past, future, sign, out);
                for x in out.iter_mut() {
                    *x = transform.apply(*x) - centering;
                }
            }
            ModelKind::IteratedRandomFunction { chain } => {
                let mut eta = self.eta;
                for (slot, &f) in out.iter_mut().zip(future) {
                    eta = chain.kernel.step(eta, sign * f);
                    *slot = eta - chain.mean;
                }
            }
            ModelKind::LinearDependentInnovations { coefficients, chain } => {
                scratch.clear();
                let mut eta = self.eta;
                for &f in &future[..m] {
                    eta = chain.kernel.step(eta, sign * f);
                    scratch.push(eta - chain.mean);
                }
                near_convolve(coefficients, &self.past, scratch, 1.0, out);
            }
        }
    }
}

/// `past[t] = sum_{j >= t} a_j u_{k+t-j}` for `t = 0..=m`, where `u_{k-i}` is `u(i)`.
fn filter_past<U: Fn(u64) -> f64>(coefficients: &CoefficientSequence, m: usize, u: U) -> Vec<f64> {
    let support = coefficients.support();
    (0..=m as u64)
        .map(|t| {
            support
                .iter()
                .filter(|&&(j, _)| j >= t)
                .map(|&(j, a)| a * u(j - t))
                .sum()
        })
        .collect()
}

/// `out[t-1] = past[t] + sign * sum_{j < t} a_j future[t-1-j]`.
#[inline]
fn near_convolve(coefficients: &CoefficientSequence, past: &[f64], future: &[f64], sign: f64, out: &mut [f64]) {
    let support = coefficients.support();
    for (idx, slot) in out.iter_mut().enumerate() {
        let t = idx + 1;
        let mut acc = 0.0;
        for &(j, a) in support {
            if j as usize >= t {
                break;
            }
            acc += a * future[t - 1 - j as usize];
        }
        *slot = past[t] + sign * acc;
    }
}

/// Value of `theta_{n,q}` when it is known analytically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaValue {
    pub value: f64,
    /// `false` when `value` is only an upper bound.
    pub exact: bool,
}

/// Exact `theta_{n,q} = |a_n| ||eps_0||_q` for linear filters and AR(1)
/// chains; the Lipschitz bound `L |a_n| ||eps_0 - eps'_0||_q` (resp.
/// `|rho|^n ||eps_0 - eps'_0||_q`) for transforms and the sine chain;
/// `None` for chain-driven filters.
pub fn analytic_theta(model: &ProcessModel, n: u64, q: f64) -> Result<Option<ThetaValue>> {
    let spec = model.innovations();
    spec.ensure_moment(q)?;
    let value = match &model.kind {
        ModelKind::LinearIid { coefficients } => ThetaValue {
            value: coefficients.coefficient(n).abs() * analytic_lq_norm(spec, q)?,
            exact: true,
        },
        ModelKind::LipschitzTransform {
            coefficients, transform, ..
        } => ThetaValue {
            value: transform.lipschitz_constant() * coefficients.coefficient(n).abs() * difference_lq_norm(spec, q)?.value,
            exact: false,
        },
        ModelKind::IteratedRandomFunction { chain } => match chain.kernel {
            Kernel::Ar1 { rho } => ThetaValue {
                value: rho.abs().powf(n as f64) * analytic_lq_norm(spec, q)?,
                exact: true,
            },
            Kernel::ContractingSine { rho } => ThetaValue {
                value: rho.abs().powf(n as f64) * difference_lq_norm(spec, q)?.value,
                exact: false,
            },
        },
        ModelKind::LinearDependentInnovations { .. } => return Ok(None),
    };
    Ok(Some(value))
}

/// Long-run standard deviation `sigma = ||D_0||` when known in closed form.
pub fn analytic_sigma(model: &ProcessModel) -> Option<f64> {
    match &model.kind {
        ModelKind::LinearIid { coefficients } => coefficients.tail_sum(0).ok().map(f64::abs),
        ModelKind::IteratedRandomFunction { chain } => match chain.kernel {
            Kernel::Ar1 { rho } => Some(1.0 / (1.0 - rho)),
            Kernel::ContractingSine { .. } => None,
        },
        ModelKind::LinearDependentInnovations { coefficients, chain } => match chain.kernel {
            Kernel::Ar1 { rho } => coefficients.tail_sum(0).ok().map(|a| (a / (1.0 - rho)).abs()),
            Kernel::ContractingSine { .. } => None,
        },
        ModelKind::LipschitzTransform { .. } => None,
    }
}

/// Innovation chain values `eta_k - mean` for `k = start..start+len`, for
/// chain-based models.
pub fn chain_segment<S: InnovationSource + ?Sized>(model: &ProcessModel, src: &S, start: i64, len: usize) -> Option<Vec<f64>> {
    let chain = model.chain()?;
    let s = -(chain.burn_in as i64);
    let mut eta = chain.initial;
    for i in s + 1..start {
        eta = chain.kernel.step(eta, src.at(i));
    }
    let mut out = Vec::with_capacity(len);
    for i in start..start + len as i64 {
        eta = chain.kernel.step(eta, src.at(i));
        out.push(eta - chain.mean);
    }
    Some(out)
}

/// Seed for the centering/mean estimates; exposed so tests can reproduce them.
pub fn centering_seed() -> u64 {
    derive_seed(CENTERING_SEED, &[])
}
