//! Coupled innovation histories and conditional means evaluated on them.
//!
//! A tilde couple replaces only `eps_0` by `eps'_0`; a star couple replaces
//! every `eps_i` with `i <= 0`. Conditional means `h_m(xi_k)` are estimated
//! by averaging over simulated futures, with the same future draws used for
//! both members of a couple. For symmetric innovation families each future
//! is also used with flipped sign (antithetic pairs).

use serde::{Deserialize, Serialize};

use crate::innovation::{derive_seed, CopyTag, IndexedInnovationStream, InnovationSource, InnovationSpec};
use crate::model::{segment, Forecaster, ProcessModel};

/// Index stride between successive inner futures of one inner stream.
const FUTURE_STRIDE: i64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// Only `eps_0` is replaced.
    Tilde,
    /// Every `eps_i`, `i <= 0`, is replaced.
    Star,
}

/// Innovation source of the coupled history.
#[derive(Clone, Copy, Debug)]
pub struct Coupled<'a, B: ?Sized, P: ?Sized> {
    base: &'a B,
    prime: &'a P,
    kind: CouplingKind,
}

impl<'a, B: InnovationSource + ?Sized, P: InnovationSource + ?Sized> Coupled<'a, B, P> {
    pub fn new(base: &'a B, prime: &'a P, kind: CouplingKind) -> Self {
        Self { base, prime, kind }
    }
}

impl<B: InnovationSource + ?Sized, P: InnovationSource + ?Sized> InnovationSource for Coupled<'_, B, P> {
    #[inline]
    fn at(&self, index: i64) -> f64 {
        let replaced = match self.kind {
            CouplingKind::Tilde => index == 0,
            CouplingKind::Star => index <= 0,
        };
        if replaced {
            self.prime.at(index)
        } else {
            self.base.at(index)
        }
    }
}

/// Monte Carlo estimate of a conditional mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalMeanEstimate {
    pub value: f64,
    /// Number of future draws (both members of each antithetic pair count).
    pub inner: usize,
    /// Standard deviation of the averaged draw units over `sqrt(units)`.
    pub inner_se: f64,
}

/// Source of simulated futures for the inner Monte Carlo.
#[derive(Clone, Debug)]
pub struct InnerDraws {
    stream: IndexedInnovationStream,
    antithetic: bool,
}

impl InnerDraws {
    pub fn new(seed: u64, spec: InnovationSpec) -> Self {
        Self {
            stream: IndexedInnovationStream::new(seed, spec, CopyTag::Original),
            antithetic: spec.is_symmetric(),
        }
    }

    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    /// Signs applied to each future of a draw unit.
    pub fn signs(&self) -> &'static [f64] {
        if self.antithetic {
            &[1.0, -1.0]
        } else {
            &[1.0]
        }
    }

    /// Number of draw units needed for at least `inner` draws.
    pub fn units(&self, inner: usize) -> usize {
        let per = self.signs().len();
        inner.div_ceil(per).max(2)
    }

    /// Future innovations of unit `j` (indices `k+1, k+2, ...` map to `out[0], out[1], ...`).
    pub fn fill(&self, j: usize, out: &mut [f64]) {
        self.stream.fill(j as i64 * FUTURE_STRIDE, out);
    }
}

/// Means of `X_{k+1..k+m}` conditional on both members of a couple.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryMeans {
    pub original: Vec<f64>,
    pub coupled: Vec<f64>,
    pub original_se: Vec<f64>,
    pub coupled_se: Vec<f64>,
    /// Standard error of `original[t] - coupled[t]` (paired over draws).
    pub difference_se: Vec<f64>,
    pub inner: usize,
}

#[derive(Default, Clone)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean_se(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

/// Averages the conditional trajectories of two forecasters over shared futures.
pub fn forecast_means(original: &Forecaster, coupled: &Forecaster, m: usize, draws: &InnerDraws, inner: usize) -> TrajectoryMeans {
    let units = draws.units(inner);
    let signs = draws.signs();
    let mut future = vec![0.0; m];
    let mut out_o = vec![0.0; m];
    let mut out_c = vec![0.0; m];
    let mut unit_o = vec![0.0; m];
    let mut unit_c = vec![0.0; m];
    let mut scratch = Vec::with_capacity(m);
    let mut mo = vec![Moments::default(); m];
    let mut mc = vec![Moments::default(); m];
    let mut md = vec![Moments::default(); m];
    let w = 1.0 / signs.len() as f64;
    for j in 0..units {
        draws.fill(j, &mut future);
        unit_o.iter_mut().for_each(|v| *v = 0.0);
        unit_c.iter_mut().for_each(|v| *v = 0.0);
        for &sign in signs {
            original.trajectory(&future, sign, &mut out_o, &mut scratch);
            coupled.trajectory(&future, sign, &mut out_c, &mut scratch);
            for t in 0..m {
                unit_o[t] += w * out_o[t];
                unit_c[t] += w * out_c[t];
            }
        }
        for t in 0..m {
            mo[t].push(unit_o[t]);
            mc[t].push(unit_c[t]);
            md[t].push(unit_o[t] - unit_c[t]);
        }
    }
    let mut res = TrajectoryMeans {
        original: Vec::with_capacity(m),
        coupled: Vec::with_capacity(m),
        original_se: Vec::with_capacity(m),
        coupled_se: Vec::with_capacity(m),
        difference_se: Vec::with_capacity(m),
        inner: units * signs.len(),
    };
    for t in 0..m {
        let (a, sa) = mo[t].mean_se(units);
        let (b, sb) = mc[t].mean_se(units);
        let (_, sd) = md[t].mean_se(units);
        res.original.push(a);
        res.coupled.push(b);
        res.original_se.push(sa);
        res.coupled_se.push(sb);
        res.difference_se.push(sd);
    }
    res
}

/// Conditional means `h_m` on both members of a couple at lag `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledMeans {
    pub original: ConditionalMeanEstimate,
    pub coupled: ConditionalMeanEstimate,
    pub difference: f64,
    pub difference_se: f64,
}

/// Result of comparing a conditional-mean difference at `inner` and `2 * inner` draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingDiagnostic {
    pub single: f64,
    pub doubled: f64,
    pub relative_change: f64,
    /// Relative change below 10%.
    pub accepted: bool,
}

/// A model together with an original history and an independent copy.
#[derive(Clone, Debug)]
pub struct CoupledWindow<'m, B, P> {
    model: &'m ProcessModel,
    base: B,
    prime: P,
    kind: CouplingKind,
}

impl<'m> CoupledWindow<'m, IndexedInnovationStream, IndexedInnovationStream> {
    /// Original stream with `seed` and its prime copy.
    pub fn from_seed(model: &'m ProcessModel, seed: u64, kind: CouplingKind) -> Self {
        let base = IndexedInnovationStream::original(seed, *model.innovations());
        let prime = base.prime();
        Self::new(model, base, prime, kind)
    }
}

impl<'m, B: InnovationSource, P: InnovationSource> CoupledWindow<'m, B, P> {
    pub fn new(model: &'m ProcessModel, base: B, prime: P, kind: CouplingKind) -> Self {
        Self { model, base, prime, kind }
    }

    pub fn model(&self) -> &'m ProcessModel {
        self.model
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn coupled_source(&self) -> Coupled<'_, B, P> {
        Coupled::new(&self.base, &self.prime, self.kind)
    }

    /// `(g(xi_k), g(coupled xi_k))`.
    pub fn coupled_g_values(&self, k: u64) -> (f64, f64) {
        let a = segment(self.model, &self.base, k as i64, 1)[0];
        let b = segment(self.model, &self.coupled_source(), k as i64, 1)[0];
        (a, b)
    }

    /// `g` on both histories for lags `0..len`.
    pub fn coupled_g_segment(&self, len: usize) -> (Vec<f64>, Vec<f64>) {
        (
            segment(self.model, &self.base, 0, len),
            segment(self.model, &self.coupled_source(), 0, len),
        )
    }

    /// Forecasters at lag `k` with horizon `m` on both histories.
    pub fn forecasters(&self, k: u64, m: usize) -> (Forecaster<'m>, Forecaster<'m>) {
        (
            Forecaster::new(self.model, &self.base, k as i64, m),
            Forecaster::new(self.model, &self.coupled_source(), k as i64, m),
        )
    }

    /// `h_m(xi_k)` on both histories with `inner` shared future draws from `inner_seed`.
    pub fn coupled_h_values(&self, k: u64, m: usize, inner: usize, inner_seed: u64) -> CoupledMeans {
        assert!(m >= 1 && inner >= 2, "need m >= 1 and inner >= 2");
        let draws = InnerDraws::new(inner_seed, *self.model.innovations());
        let (fo, fc) = self.forecasters(k, m);
        let means = forecast_means(&fo, &fc, m, &draws, inner);
        let t = m - 1;
        CoupledMeans {
            original: ConditionalMeanEstimate {
                value: means.original[t],
                inner: means.inner,
                inner_se: means.original_se[t],
            },
            coupled: ConditionalMeanEstimate {
                value: means.coupled[t],
                inner: means.inner,
                inner_se: means.coupled_se[t],
            },
            difference: means.original[t] - means.coupled[t],
            difference_se: means.difference_se[t],
        }
    }

    /// Compares the conditional-mean difference at `inner` and `2 * inner` draws.
    pub fn doubling_diagnostic(&self, k: u64, m: usize, inner: usize, inner_seed: u64) -> DoublingDiagnostic {
        let single = self.coupled_h_values(k, m, inner, inner_seed).difference;
        let doubled = self.coupled_h_values(k, m, 2 * inner, inner_seed).difference;
        let scale = single.abs().max(doubled.abs());
        let relative_change = if scale <= 1e-12 { 0.0 } else { (doubled - single).abs() / scale };
        DoublingDiagnostic {
            single,
            doubled,
            relative_change,
            accepted: relative_change < 0.1,
        }
    }
}

/// Seeds of the original history and of the inner futures for replicate `r`.
pub fn replicate_seeds(root: u64, purpose: u64, r: usize) -> (u64, u64) {
    (
        derive_seed(root, &[purpose, r as u64, 0]),
        derive_seed(root, &[purpose, r as u64, 1]),
    )
}
