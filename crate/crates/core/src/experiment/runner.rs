//! Executes the checks of an experiment and writes one report per check.

use std::path::PathBuf;

use rayon::prelude::*;

use super::config::{Check, ExperimentConfig};
use super::report::{write_report, Row, RowVerdict};
use crate::conditions::{check_all, ConditionInputs, Verdict};
use crate::error::{Error, Result};
use crate::estimators::{dependence_profiles, fit_gmc, reference_measure, DependenceProfile, MeasureKind, MeasureSettings};
use crate::innovation::{analytic_lq_norm, derive_seed};
use crate::martingale::{estimate_sigma, rhs_eq1, rhs_eq3, rhs_eq4, xi_n, NestedSettings};
use crate::model::{ModelKind, ProcessModel};
use crate::sequence::{analytic_theta_sequence, TailedSequence};
use crate::stats::ks_two_sample;
use crate::verify::{
    clt_check, dyadic_block_norms, lil_experiment, rate_fit, simulate_ensemble, verify_borel_cantelli_sum, verify_maximal_dyadic,
    CltOutcome, LilCalibration, RateFunction,
};

/// Standard errors allowed between an estimate and its closed form.
pub const REFERENCE_SE: f64 = 4.0;
/// Combined standard errors allowed in the estimated coupling inequalities.
pub const INEQUALITY_SE: f64 = 6.0;
/// Standard errors allowed above a moment bound.
pub const BOUND_SE: f64 = 3.0;
/// Dyadic scales `2^0..2^EQ8_LEVELS` of the exceedance sums.
pub const EQ8_LEVELS: u32 = 10;
/// Lags entering the contraction fit.
pub const GMC_LAGS: usize = 20;
/// Allowed excess of the fitted contraction rate over `|rho|^q`.
pub const GMC_SLACK: f64 = 1.2;
/// First index of the LIL statistic, as a fraction of the path length.
pub const LIL_START_DIVISOR: usize = 1 << 10;

const PROFILE_PURPOSE: u64 = 0x7072_6f66;

fn check_seed(cfg: &ExperimentConfig, check: Check) -> u64 {
    let tag = Check::ALL.iter().position(|c| *c == check).expect("listed") as u64;
    derive_seed(cfg.seed, &[tag])
}

/// Shared state of one run.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: ProcessModel,
    label: String,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(&self, check: impl Into<String>, q: f64, n: u64, emp: Option<f64>, se: Option<f64>, theory: Option<f64>, verdict: RowVerdict) -> Row {
        Row::new(check, &self.label, q, n, emp, se, theory, verdict, self.cfg.seed)
    }

    fn skip(&self, check: impl Into<String>, q: f64, n: u64, reason: impl Into<String>) -> Row {
        self.row(check, q, n, None, None, None, RowVerdict::skipped(reason))
    }

    fn settings(&self) -> MeasureSettings {
        MeasureSettings {
            max_lag: self.cfg.lags,
            replicates: self.cfg.replicates,
            inner: self.cfg.inner,
            seed: derive_seed(self.cfg.seed, &[PROFILE_PURPOSE]),
        }
    }

    /// Dependence profiles at every configured `q`, shared draws.
    fn profiles(&self) -> Result<Vec<DependenceProfile>> {
        dependence_profiles(&self.model, &self.cfg.q, &self.settings())
    }

    /// `theta_{n,q}`: closed form when available, else the profile upper bound.
    fn theta(&self, q: f64, profiles: &mut Option<Vec<DependenceProfile>>) -> Result<TailedSequence> {
        if let Some(t) = analytic_theta_sequence(&self.model, q)? {
            return Ok(t);
        }
        if profiles.is_none() {
            *profiles = Some(self.profiles()?);
        }
        let p = profiles
            .as_ref()
            .and_then(|ps| ps.iter().find(|p| p.q == q))
            .expect("profile for every configured q");
        Ok(p.theta_upper().monotone())
    }
}

/// Rows of one check; errors other than I/O become skipped rows.
pub fn run_check(cfg: &ExperimentConfig, model: &ProcessModel, check: Check) -> Result<Vec<Row>> {
    let ctx = Ctx {
        cfg,
        model: model.clone(),
        label: model.label(),
    };
    let seed = check_seed(cfg, check);
    let out = match check {
        Check::Measures => measures(&ctx),
        Check::Bounds => bounds(&ctx, seed),
        Check::Maximal => maximal(&ctx, seed),
        Check::Lil => lil(&ctx, seed),
        Check::Rates => rates(&ctx, seed),
        Check::Clt => clt(&ctx, seed),
        Check::Conditions => conditions(&ctx, seed),
        Check::Gmc => gmc(&ctx, seed),
    };
    match out {
        Ok(rows) if rows.is_empty() => Ok(vec![ctx.skip(check.name(), cfg.q[0], 0, "nothing to check")]),
        Ok(rows) => Ok(rows),
        Err(e @ (Error::Io { .. } | Error::Csv { .. })) => Err(e),
        Err(e) => Ok(vec![ctx.skip(check.name(), cfg.q[0], 0, e.to_string())]),
    }
}

/// Files written by [`run`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<PathBuf>,
    pub profiles: Vec<PathBuf>,
}

/// Runs every configured check and writes `<output>/<check>.csv`. Checks run
/// concurrently; report bytes do not depend on the worker count.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let model = cfg.build_model()?;
    let checks = cfg.checks_sorted();
    let io = |path: &PathBuf| {
        let path = path.clone();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(&cfg.output).map_err(io(&cfg.output))?;
    let results: Vec<Result<Vec<Row>>> = checks.par_iter().map(|&c| run_check(cfg, &model, c)).collect();
    let mut reports = Vec::new();
    for (check, rows) in checks.iter().zip(results) {
        let path = cfg.output.join(format!("{}.csv", check.name()));
        write_report(&path, &rows?)?;
        reports.push(path);
    }
    let mut profiles = Vec::new();
    if checks.contains(&Check::Measures) {
        let dir = cfg.output.join("profiles");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        if let Ok(ps) = dependence_profiles(&model, &cfg.q, &Ctx { cfg, model: model.clone(), label: String::new() }.settings()) {
            for p in ps {
                let path = dir.join(format!("q{}.csv", p.q));
                std::fs::write(&path, p.to_columnar()).map_err(io(&path))?;
                profiles.push(path);
            }
        }
    }
    Ok(RunOutput { reports, profiles })
}

const MEASURE_ROWS: [(MeasureKind, &str); 7] = [
    (MeasureKind::ThetaSandwichLower, "theta-lower"),
    (MeasureKind::ThetaSandwichUpper, "theta-upper"),
    (MeasureKind::BetaTilde, "beta-tilde"),
    (MeasureKind::BetaStar, "beta-star"),
    (MeasureKind::AlphaTilde, "alpha-tilde"),
    (MeasureKind::AlphaStar, "alpha-star"),
    (MeasureKind::Omega, "omega"),
];

fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn measures(ctx: &Ctx) -> Result<Vec<Row>> {
    let profiles = ctx.profiles()?;
    let mut rows = Vec::new();
    for p in &profiles {
        let q = p.q;
        for lag in 0..=p.horizon {
            let theta = crate::model::analytic_theta(&ctx.model, lag, q)?;
            for (kind, name) in MEASURE_ROWS {
                let e = p.entry(kind, lag).expect("complete profile");
                let check = format!("measures:{name}");
                let tol = |se: f64, r: f64| REFERENCE_SE * se + 1e-12 * r.abs().max(1.0);
                let (reference, verdict) = match kind {
                    MeasureKind::ThetaSandwichLower => match theta {
                        Some(t) => (Some(t.value), RowVerdict::from_bool(e.estimate <= t.value + tol(e.se, t.value))),
                        None => (None, RowVerdict::skipped("no closed-form reference")),
                    },
                    MeasureKind::ThetaSandwichUpper => match theta {
                        Some(t) if t.exact => (Some(t.value), RowVerdict::from_bool(e.estimate >= t.value - tol(e.se, t.value))),
                        _ => (None, RowVerdict::skipped("no closed-form reference")),
                    },
                    _ => match reference_measure(&ctx.model, kind, lag, q) {
                        Some(r) => (Some(r), RowVerdict::from_bool((e.estimate - r).abs() <= tol(e.se, r))),
                        None => (None, RowVerdict::skipped("no closed-form reference")),
                    },
                };
                rows.push(ctx.row(check, q, lag, Some(e.estimate), Some(e.se), reference, verdict));
            }
            // alpha_k <= 2 beta_{k+1} for both couplings
            for (alpha, beta, name) in [
                (MeasureKind::AlphaTilde, MeasureKind::BetaTilde, "jensen-tilde"),
                (MeasureKind::AlphaStar, MeasureKind::BetaStar, "jensen-star"),
            ] {
                let a = p.entry(alpha, lag).expect("complete profile");
                let b = p.entry(beta, lag + 1).expect("beta at K + 1");
                let bound = 2.0 * b.estimate;
                let se = combined_se(a.se, 2.0 * b.se);
                let pass = a.estimate <= bound + INEQUALITY_SE * se;
                rows.push(ctx.row(format!("measures:{name}"), q, lag, Some(a.estimate), Some(a.se), Some(bound), RowVerdict::from_bool(pass)));
            }
            // omega_k / 2 <= alpha~_{k-1}: the two sides of the theta bracket are ordered
            if lag >= 1 {
                let om = p.entry(MeasureKind::Omega, lag).expect("complete profile");
                let a = p.entry(MeasureKind::AlphaTilde, lag - 1).expect("complete profile");
                let se = combined_se(om.se / 2.0, a.se);
                let pass = om.estimate / 2.0 <= a.estimate + INEQUALITY_SE * se;
                rows.push(ctx.row("measures:sandwich", q, lag, Some(om.estimate / 2.0), Some(om.se / 2.0), Some(a.estimate), RowVerdict::from_bool(pass)));
            }
        }
    }
    Ok(rows)
}

fn bounds(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let linear = ctx.model.is_linear_iid();
    let ensemble = simulate_ensemble(&ctx.model, &cfg.lengths, cfg.replicates, seed, linear)?;
    let mut profiles = None;
    let mut rows = Vec::new();
    for &q in &cfg.q {
        let theta = ctx.theta(q, &mut profiles)?;
        let theta0 = theta.big_theta(0).value;
        for (i, &n) in cfg.lengths.iter().enumerate() {
            let n64 = n as u64;
            let bound_row = |name: &str, emp: crate::stats::Estimate, rhs: f64| {
                let pass = emp.value <= rhs + BOUND_SE * emp.se;
                ctx.row(format!("bounds:{name}"), q, n64, Some(emp.value), Some(emp.se), Some(rhs), RowVerdict::from_bool(pass))
            };
            let eq1 = rhs_eq1(&theta, n, q)?;
            rows.push(bound_row("eq1", ensemble.sum_norm(i, q), eq1.rhs));
            let eq4 = rhs_eq4(theta0, n, q)?;
            rows.push(bound_row("eq4", ensemble.max_norm(i, q), eq4.rhs));
            match ensemble.residual_norm(i, q) {
                Some(r) => {
                    let eq3 = rhs_eq3(&theta, n, q)?;
                    rows.push(bound_row("eq3", r, eq3.rhs));
                }
                None => rows.push(ctx.skip("bounds:eq3", q, n64, "residual needs a closed-form martingale part")),
            }
            if q == 2.0 {
                match (ensemble.residual_norm(i, q), ctx.model.coefficients()) {
                    (Some(r), Some(c)) if linear => {
                        let xi = xi_n(c, n)? * analytic_lq_norm(ctx.model.innovations(), 2.0)?;
                        let pass = (r.value - xi).abs() <= REFERENCE_SE * r.se + 1e-12;
                        rows.push(ctx.row("bounds:xi", q, n64, Some(r.value), Some(r.se), Some(xi), RowVerdict::from_bool(pass)));
                    }
                    _ => rows.push(ctx.skip("bounds:xi", q, n64, "closed form only for linear filters")),
                }
            }
        }
    }
    Ok(rows)
}

fn maximal(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    for &q in &cfg.q {
        for d in 0..=cfg.maximal_levels {
            let (blocks, lhs) = dyadic_block_norms(&ctx.model, d, q, cfg.replicates, derive_seed(seed, &[d as u64]));
            let c = verify_maximal_dyadic(&blocks, lhs, q)?;
            rows.push(ctx.row("maximal:eq6", q, 1 << d, Some(c.lhs.value), Some(c.lhs.se), Some(c.rhs.value), RowVerdict::from_bool(c.pass)));
        }
    }
    let top = 1u64 << EQ8_LEVELS;
    if !ctx.model.is_linear_iid() {
        for &q in &cfg.q {
            for &delta in &cfg.deltas {
                rows.push(ctx.skip(format!("maximal:eq8[delta={delta}]"), q, top, "residual needs a closed-form martingale part"));
            }
        }
        return Ok(rows);
    }
    let lengths: Vec<usize> = (0..=EQ8_LEVELS).map(|j| 1usize << j).collect();
    let ens = simulate_ensemble(&ctx.model, &lengths, cfg.replicates, derive_seed(seed, &[u64::MAX]), true)?;
    let r_max = ens.r_max.as_ref().expect("residuals requested");
    for &q in &cfg.q {
        let norms: Vec<f64> = (0..lengths.len()).map(|i| ens.residual_norm(i, q).expect("residuals").value).collect();
        for &delta in &cfg.deltas {
            let check = format!("maximal:eq8[delta={delta}]");
            let c = verify_borel_cantelli_sum(&norms, r_max, q, delta)?;
            let se = (c.total_count as f64).sqrt() / c.paths as f64;
            let verdict = match c.pass {
                Some(p) => RowVerdict::from_bool(p),
                None => RowVerdict::skipped("dyadic moment sum diverges"),
            };
            rows.push(ctx.row(check, q, top, Some(c.mean_count), Some(se), c.bound, verdict));
        }
    }
    Ok(rows)
}

fn nested_settings(cfg: &ExperimentConfig, seed: u64) -> NestedSettings {
    NestedSettings {
        horizon: cfg.horizon,
        inner: cfg.inner,
        inner_seed: derive_seed(seed, &[1]),
    }
}

fn lil(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let n = cfg.lil_length;
    let q = 2.0;
    let sigma = estimate_sigma(&ctx.model, nested_settings(cfg, seed), cfg.replicates, derive_seed(seed, &[2]))?;
    let n_min = (n / LIL_START_DIVISOR).max(16);
    let mut r = lil_experiment(&ctx.model, n, cfg.paths, n_min, derive_seed(seed, &[3]))?;
    r.sigma = Some(sigma.value);
    let cal = LilCalibration::default();
    let mut rows = Vec::new();
    let n64 = n as u64;
    match r.normalized_median() {
        Some(m) => rows.push(ctx.row("lil:abs", q, n64, Some(m), Some(sigma.se), Some(1.0), RowVerdict::from_bool(cal.contains(m)))),
        None => rows.push(ctx.skip("lil:abs", q, n64, "degenerate long-run variance")),
    }
    match (&r.martingale, r.sigma) {
        (Some(m), Some(s)) if s > 0.0 => {
            let med = crate::stats::quantile(m, 0.5) / s;
            rows.push(ctx.row("lil:martingale", q, n64, Some(med), None, Some(1.0), RowVerdict::from_bool(cal.contains(med))));
        }
        _ => rows.push(ctx.skip("lil:martingale", q, n64, "martingale part needs a linear filter")),
    }
    // upper and lower limits have the same law
    let ks = ks_two_sample(&r.plus, &r.minus);
    let crit = 1.63 * (2.0 / cfg.paths as f64).sqrt();
    rows.push(ctx.row("lil:symmetry", q, n64, Some(ks), None, Some(crit), RowVerdict::from_bool(ks <= crit)));
    Ok(rows)
}

fn rates(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let linear = ctx.model.is_linear_iid();
    let lengths: Vec<usize> = cfg.lengths.iter().copied().filter(|&n| n >= 16).collect();
    let ens = simulate_ensemble(&ctx.model, &lengths, cfg.paths, seed, linear)?;
    let top = lengths.iter().copied().max().unwrap_or(0) as u64;
    let mut rows = Vec::new();
    let fit_row = |check: &str, q: f64, maxima: &[Vec<f64>], rate: RateFunction| -> Row {
        match rate_fit(&lengths, maxima, rate, cfg.rate_level) {
            Ok(f) => ctx.row(check, q, top, Some(f.exponent), None, Some(f.theoretical), RowVerdict::from_bool(f.pass)),
            Err(e) => ctx.skip(check, q, top, e.to_string()),
        }
    };
    rows.push(fit_row("rates:partial-sum", 2.0, &ens.s_max, RateFunction::Lil));
    match (&ens.r_max, ctx.model.coefficients()) {
        (Some(r_max), Some(c)) => {
            let square_summable = c.decay().tail_sums().pow(2.0).is_summable();
            for &q in &cfg.q {
                let rate = if square_summable {
                    RateFunction::Bounded
                } else {
                    RateFunction::Nu { q }
                };
                rows.push(fit_row("rates:residual", q, r_max, rate));
            }
        }
        _ => {
            for &q in &cfg.q {
                rows.push(ctx.skip("rates:residual", q, top, "residual needs a closed-form martingale part"));
            }
        }
    }
    Ok(rows)
}

fn clt(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let n = cfg.clt_length as u64;
    let sigma = estimate_sigma(&ctx.model, nested_settings(cfg, seed), cfg.replicates, derive_seed(seed, &[2]))?;
    if !(sigma.value > 0.0) {
        return Ok(vec![ctx.skip("clt:ks", 2.0, n, "degenerate long-run variance")]);
    }
    let row = match clt_check(&ctx.model, cfg.clt_length, cfg.paths, sigma.value, derive_seed(seed, &[3]))? {
        CltOutcome::Checked { ks, threshold, pass, .. } => ctx.row("clt:ks", 2.0, n, Some(ks), None, Some(threshold), RowVerdict::from_bool(pass)),
        CltOutcome::Skipped { reason } => ctx.skip("clt:ks", 2.0, n, reason),
    };
    Ok(vec![row])
}

fn conditions(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let estimated = matches!(ctx.model.kind(), ModelKind::LinearDependentInnovations { .. });
    let profiles = if estimated { Some(ctx.profiles()?) } else { None };
    let mut rows = Vec::new();
    for &q in &cfg.q {
        let inputs = match &profiles {
            Some(ps) => {
                let p = ps.iter().find(|p| p.q == q).expect("profile for every configured q");
                let fit = fit_gmc(&ctx.model, q, GMC_LAGS, cfg.replicates, derive_seed(seed, &[q.to_bits()])).ok();
                ConditionInputs::from_profile(p, ctx.model.coefficients(), fit)
            }
            None => ConditionInputs::from_model(&ctx.model, q)?,
        };
        for r in check_all(&inputs)? {
            let verdict = match r.verdict {
                Verdict::HoldsAtHorizon => RowVerdict::Pass,
                Verdict::Violated => RowVerdict::Fail,
                Verdict::Inconclusive => RowVerdict::skipped(r.detail.clone()),
            };
            let margin = Some(r.margin).filter(|m| m.is_finite());
            rows.push(ctx.row(format!("conditions:{}", r.id.name()), q, r.horizon as u64, margin, None, None, verdict));
        }
    }
    Ok(rows)
}

fn gmc(ctx: &Ctx, seed: u64) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    let lags = GMC_LAGS as u64;
    for &q in &cfg.q {
        let Some(chain) = ctx.model.chain() else {
            rows.push(ctx.skip("gmc:rate", q, lags, "model has no innovation chain"));
            continue;
        };
        let bound = chain.kernel.lipschitz_constant().powf(q);
        let fit = fit_gmc(&ctx.model, q, GMC_LAGS, cfg.replicates, derive_seed(seed, &[q.to_bits()]))?;
        let pass = fit.r < 1.0 && fit.r <= bound * GMC_SLACK;
        rows.push(ctx.row("gmc:rate", q, lags, Some(fit.r), None, Some(bound), RowVerdict::from_bool(pass)));
    }
    Ok(rows)
}
