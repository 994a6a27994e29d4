//! Counter-addressed i.i.d. innovation streams.
//!
//! The value at integer index `i` is a pure function of `(seed, copy tag, i)`:
//! a SplitMix64 finalizer turns the triple into a generator state, and a
//! distribution from `rand_distr` draws one variate from that state. Random
//! access to any index (including the negative "infinite past") therefore
//! costs O(1) and needs no state replay, which is what the coupling
//! constructions rely on.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a path of structural indices
/// (replicate number, purpose tag, ...). Distinct paths give unrelated seeds.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(root ^ 0x5851_f42d_4c95_7f2d), |acc, &x| {
        mix64(acc ^ mix64(x.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// SplitMix64 generator positioned at a single key. Used for one variate
/// (plus whatever rejection steps the distribution needs).
struct KeyedRng {
    state: u64,
}

impl RngCore for KeyedRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Innovation distribution; every family is centered with unit variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InnovationFamily {
    StandardNormal,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    CenteredUniform,
    /// Student t with `df > 4` degrees of freedom, scaled by `sqrt((df - 2) / df)`.
    StudentT { df: f64 },
    /// `Exp(1) - 1`.
    CenteredExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub family: InnovationFamily,
}

impl InnovationSpec {
    pub fn new(family: InnovationFamily) -> Result<Self> {
        if let InnovationFamily::StudentT { df } = family {
            if !(df > 4.0) || !df.is_finite() {
                return Err(Error::invalid("df", format!("student-t needs df > 4, got {df}")));
            }
        }
        Ok(Self { family })
    }

    pub fn normal() -> Self {
        Self {
            family: InnovationFamily::StandardNormal,
        }
    }

    pub fn uniform() -> Self {
        Self {
            family: InnovationFamily::CenteredUniform,
        }
    }

    pub fn exponential() -> Self {
        Self {
            family: InnovationFamily::CenteredExponential,
        }
    }

    pub fn student_t(df: f64) -> Result<Self> {
        Self::new(InnovationFamily::StudentT { df })
    }

    /// Supremum of the finite moment orders (`+inf` for light-tailed families).
    pub fn q_max(&self) -> f64 {
        match self.family {
            InnovationFamily::StudentT { df } => df,
            _ => f64::INFINITY,
        }
    }

    /// Whether `E|eps|^q` is finite.
    pub fn supports_moment(&self, q: f64) -> bool {
        match self.family {
            InnovationFamily::StudentT { df } => q < df,
            _ => true,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.family, InnovationFamily::CenteredExponential)
    }

    pub fn name(&self) -> String {
        match self.family {
            InnovationFamily::StandardNormal => "normal".into(),
            InnovationFamily::CenteredUniform => "uniform".into(),
            InnovationFamily::StudentT { df } => format!("student-t({df})"),
            InnovationFamily::CenteredExponential => "exponential".into(),
        }
    }

    pub(crate) fn ensure_moment(&self, q: f64) -> Result<()> {
        if self.supports_moment(q) {
            Ok(())
        } else {
            Err(Error::UnsupportedMoment {
                q,
                q_max: self.q_max(),
                family: self.name(),
            })
        }
    }
}

/// Exact `||eps||_q` from closed-form absolute moments.
pub fn analytic_lq_norm(spec: &InnovationSpec, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {q}")));
    }
    spec.ensure_moment(q)?;
    if q == 2.0 {
        // every family has unit variance
        return Ok(1.0);
    }
    let moment = match spec.family {
        InnovationFamily::StandardNormal => normal_abs_moment(q),
        InnovationFamily::CenteredUniform => 3f64.powf(q / 2.0) / (q + 1.0),
        InnovationFamily::StudentT { df } => {
            let log_t = (q / 2.0) * df.ln() + ln_gamma((q + 1.0) / 2.0) + ln_gamma((df - q) / 2.0)
                - 0.5 * PI.ln()
                - ln_gamma(df / 2.0);
            (log_t + (q / 2.0) * ((df - 2.0) / df).ln()).exp()
        }
        InnovationFamily::CenteredExponential => {
            // E|E - 1|^q = e^{-1} [Gamma(q + 1) + int_0^1 u^q e^u du]
            let mut series = 0.0;
            let mut factorial = 1.0;
            for j in 0..60 {
                if j > 0 {
                    factorial *= j as f64;
                }
                series += 1.0 / (factorial * (q + j as f64 + 1.0));
            }
            (gamma(q + 1.0) + series) / std::f64::consts::E
        }
    };
    Ok(moment.powf(1.0 / q))
}

fn normal_abs_moment(q: f64) -> f64 {
    2f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / PI.sqrt()
}

/// `||eps_0 - eps'_0||_q` for an independent copy. `exact` is false when only
/// the Minkowski bound `2 ||eps||_q` is available (Student t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceNorm {
    pub value: f64,
    pub exact: bool,
}

pub fn difference_lq_norm(spec: &InnovationSpec, q: f64) -> Result<DifferenceNorm> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {q}")));
    }
    spec.ensure_moment(q)?;
    let exact = |moment: f64| DifferenceNorm {
        value: moment.powf(1.0 / q),
        exact: true,
    };
    Ok(match spec.family {
        InnovationFamily::StandardNormal => exact(2f64.powf(q / 2.0) * normal_abs_moment(q)),
        // triangular on [-2 sqrt 3, 2 sqrt 3]
        InnovationFamily::CenteredUniform => {
            exact((2.0 * 3f64.sqrt()).powf(q) * 2.0 / ((q + 1.0) * (q + 2.0)))
        }
        // Laplace(1)
        InnovationFamily::CenteredExponential => exact(gamma(q + 1.0)),
        InnovationFamily::StudentT { .. } => DifferenceNorm {
            value: 2.0 * analytic_lq_norm(spec, q)?,
            exact: false,
        },
    })
}

/// Which member of a coupled pair a stream represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CopyTag {
    Original,
    Prime,
}

impl CopyTag {
    fn salt(self) -> u64 {
        match self {
            CopyTag::Original => 0x243f_6a88_85a3_08d3,
            CopyTag::Prime => 0x1319_8a2e_0370_7344,
        }
    }
}

/// Anything that yields an innovation for each integer index.
pub trait InnovationSource: Sync {
    fn at(&self, index: i64) -> f64;

    fn fill(&self, start: i64, out: &mut [f64]) {
        for (offset, slot) in out.iter_mut().enumerate() {
            *slot = self.at(start + offset as i64);
        }
    }
}

impl<F> InnovationSource for F
where
    F: Fn(i64) -> f64 + Sync,
{
    fn at(&self, index: i64) -> f64 {
        self(index)
    }
}

#[derive(Clone, Copy, Debug)]
enum Sampler {
    Normal,
    Uniform,
    StudentT { dist: StudentT<f64>, scale: f64 },
    Exponential,
}

/// Deterministic, integer-indexed innovation stream.
#[derive(Clone, Debug)]
pub struct IndexedInnovationStream {
    seed: u64,
    spec: InnovationSpec,
    tag: CopyTag,
    key: u64,
    sampler: Sampler,
}

impl IndexedInnovationStream {
    pub fn new(seed: u64, spec: InnovationSpec, tag: CopyTag) -> Self {
        let sampler = match spec.family {
            InnovationFamily::StandardNormal => Sampler::Normal,
            InnovationFamily::CenteredUniform => Sampler::Uniform,
            InnovationFamily::StudentT { df } => Sampler::StudentT {
                dist: StudentT::new(df).expect("df validated by InnovationSpec"),
                scale: ((df - 2.0) / df).sqrt(),
            },
            InnovationFamily::CenteredExponential => Sampler::Exponential,
        };
        Self {
            seed,
            spec,
            tag,
            key: mix64(seed ^ tag.salt()),
            sampler,
        }
    }

    pub fn original(seed: u64, spec: InnovationSpec) -> Self {
        Self::new(seed, spec, CopyTag::Original)
    }

    /// The independent copy `(eps'_i)` sharing this stream's seed.
    pub fn prime(&self) -> Self {
        Self::new(self.seed, self.spec, CopyTag::Prime)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &InnovationSpec {
        &self.spec
    }

    pub fn tag(&self) -> CopyTag {
        self.tag
    }

    #[inline]
    pub fn innovation_at(&self, index: i64) -> f64 {
        let mut rng = KeyedRng {
            state: mix64(self.key ^ (index as u64).wrapping_mul(GOLDEN_GAMMA)),
        };
        match &self.sampler {
            Sampler::Normal => StandardNormal.sample(&mut rng),
            Sampler::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            Sampler::StudentT { dist, scale } => dist.sample(&mut rng) * scale,
            Sampler::Exponential => {
                let e: f64 = Exp1.sample(&mut rng);
                e - 1.0
            }
        }
    }
}

impl InnovationSource for IndexedInnovationStream {
    #[inline]
    fn at(&self, index: i64) -> f64 {
        self.innovation_at(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn repeated_queries_are_bit_identical() {
        let s = IndexedInnovationStream::original(7, InnovationSpec::normal());
        assert_eq!(s.at(0).to_bits(), s.at(0).to_bits());
        let t = IndexedInnovationStream::original(7, InnovationSpec::normal());
        for i in -50..50 {
            assert_eq!(s.at(i).to_bits(), t.at(i).to_bits());
        }
    }

    #[test]
    fn uniform_support() {
        let s = IndexedInnovationStream::original(3, InnovationSpec::uniform());
        let bound = 3f64.sqrt();
        for i in -10_000..10_000 {
            let x = s.at(i);
            assert!((-bound..=bound).contains(&x), "{x}");
        }
    }

    #[test]
    fn normal_sample_mean_within_clt_bound() {
        let s = IndexedInnovationStream::original(11, InnovationSpec::normal());
        let n = 1_000_000;
        let mean = (0..n).map(|i| s.at(i)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
    }

    #[test]
    fn families_have_unit_variance() {
        let specs = [
            InnovationSpec::normal(),
            InnovationSpec::uniform(),
            InnovationSpec::exponential(),
            InnovationSpec::student_t(8.0).unwrap(),
        ];
        for spec in specs {
            let s = IndexedInnovationStream::original(5, spec);
            let n = 400_000;
            let (mut m1, mut m2) = (0.0, 0.0);
            for i in 0..n {
                let x = s.at(i);
                m1 += x;
                m2 += x * x;
            }
            m1 /= n as f64;
            m2 /= n as f64;
            assert!(m1.abs() < 0.01, "{}: mean {m1}", spec.name());
            assert!((m2 - 1.0).abs() < 0.03, "{}: second moment {m2}", spec.name());
        }
    }

    #[test]
    fn original_and_prime_are_uncorrelated() {
        let s = IndexedInnovationStream::original(1, InnovationSpec::normal());
        let p = s.prime();
        let n = 200_000;
        let c = (0..n).map(|i| s.at(i) * p.at(i)).sum::<f64>() / n as f64;
        assert!(c.abs() < 5.0 / (n as f64).sqrt(), "cross moment {c}");
        assert_ne!(s.at(0), p.at(0));
    }

    #[test]
    fn closed_form_norms() {
        assert_relative_eq!(analytic_lq_norm(&InnovationSpec::normal(), 2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            analytic_lq_norm(&InnovationSpec::normal(), 4.0).unwrap(),
            3f64.powf(0.25),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            analytic_lq_norm(&InnovationSpec::uniform(), 4.0).unwrap(),
            1.8f64.powf(0.25),
            epsilon = 1e-12
        );
        assert_relative_eq!(analytic_lq_norm(&InnovationSpec::exponential(), 2.0).unwrap(), 1.0, epsilon = 1e-12);
        let t = InnovationSpec::student_t(7.0).unwrap();
        assert_relative_eq!(analytic_lq_norm(&t, 2.0).unwrap(), 1.0, epsilon = 1e-12);
        // kurtosis of t_7 is 3 + 6/(7-4) = 5
        assert_relative_eq!(analytic_lq_norm(&t, 4.0).unwrap(), 5f64.powf(0.25), epsilon = 1e-12);
    }

    #[test]
    fn difference_norms_have_variance_two() {
        for spec in [InnovationSpec::normal(), InnovationSpec::uniform(), InnovationSpec::exponential()] {
            let d = difference_lq_norm(&spec, 2.0).unwrap();
            assert!(d.exact);
            assert_relative_eq!(d.value, 2f64.sqrt(), epsilon = 1e-12);
        }
        let t = difference_lq_norm(&InnovationSpec::student_t(6.0).unwrap(), 2.0).unwrap();
        assert!(!t.exact && t.value >= 2f64.sqrt());
    }

    #[test]
    fn unsupported_moment_is_rejected() {
        let t = InnovationSpec::student_t(5.0).unwrap();
        assert!(matches!(analytic_lq_norm(&t, 5.0), Err(Error::UnsupportedMoment { .. })));
        assert!(analytic_lq_norm(&t, 4.5).is_ok());
        assert!(InnovationSpec::student_t(4.0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(9, &[3, 4]), derive_seed(9, &[3, 4]));
    }
}
