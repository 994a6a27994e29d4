use std::path::Path;

use sipcheck::experiment::report::read_report;
use sipcheck::experiment::{report_summary, run, Check, ExperimentConfig, RowVerdict};

fn config(dir: &Path, body: &str) -> ExperimentConfig {
    let text = format!("id = \"t\"\nseed = 1\noutput = \"out\"\n{body}");
    ExperimentConfig::parse(&text, dir).unwrap()
}

#[test]
fn eq1_ratio_is_one_for_iid_sums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "checks = [\"bounds\"]\nq = [2.0]\nmodel = \"linear\"\ncoefficients = \"explicit\"\ncoefficient_values = [1.0]\nlengths = [16, 256]\nreplicates = 4000\n",
    );
    run(&cfg).unwrap();
    let rows = read_report(&cfg.output.join("bounds.csv")).unwrap();
    let eq1: Vec<_> = rows.iter().filter(|r| r.check == "bounds:eq1").collect();
    assert_eq!(eq1.len(), 2);
    for r in eq1 {
        let se = r.se.unwrap() / r.theoretical.unwrap();
        assert!((r.ratio.unwrap() - 1.0).abs() <= 3.0 * se, "{r:?}");
        assert_eq!(r.verdict, RowVerdict::Pass);
    }
}

#[test]
fn long_memory_fails_the_summability_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "checks = [\"conditions\"]\nq = [2.0]\nmodel = \"linear\"\ncoefficients = \"polynomial\"\ncoefficient_beta = 0.8\n",
    );
    run(&cfg).unwrap();
    let rows = read_report(&cfg.output.join("conditions.csv")).unwrap();
    let eq2 = rows.iter().find(|r| r.check == "conditions:eq2").unwrap();
    assert_eq!(eq2.verdict, RowVerdict::Fail);
    let s = report_summary(&cfg.output).unwrap();
    assert_eq!(s.exit_code(), 1);
    assert!(s.text.contains("conditions:eq2"));
}

#[test]
fn every_check_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    // chain-driven filter: several checks can only be skipped
    let cfg = config(
        dir.path(),
        r#"checks = ["measures", "bounds", "maximal", "lil", "rates", "clt", "conditions", "gmc"]
q = [2.0]
model = "linear-dependent"
coefficients = "explicit"
coefficient_values = [1.0, 0.5]
kernel = "ar1"
kernel_rho = 0.3
lags = 3
lengths = [16, 32, 64, 128, 256]
replicates = 200
inner = 8
paths = 20
maximal_levels = 2
"#,
    );
    let out = run(&cfg).unwrap();
    assert_eq!(out.reports.len(), Check::ALL.len());
    assert_eq!(out.profiles.len(), 1);
    for check in Check::ALL {
        let rows = read_report(&cfg.output.join(format!("{}.csv", check.name()))).unwrap();
        assert!(!rows.is_empty(), "{}", check.name());
        assert!(rows.iter().all(|r| r.check.starts_with(check.name())));
    }
    let rates = read_report(&cfg.output.join("rates.csv")).unwrap();
    assert!(rates.iter().all(|r| matches!(r.verdict, RowVerdict::Skipped(_))));
    let clt = read_report(&cfg.output.join("clt.csv")).unwrap();
    assert!(matches!(&clt[0].verdict, RowVerdict::Skipped(r) if r.contains("paths")));
}

#[test]
fn seed_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let body = "checks = [\"bounds\"]\nq = [2.0]\nmodel = \"linear\"\ncoefficients = \"geometric\"\ncoefficient_rho = 0.3\nlengths = [8]\nreplicates = 200\n";
    let a = config(&dir.path().join("a"), body);
    let mut b = config(&dir.path().join("b"), body);
    b.seed = 2;
    run(&a).unwrap();
    run(&b).unwrap();
    let ra = read_report(&a.output.join("bounds.csv")).unwrap();
    let rb = read_report(&b.output.join("bounds.csv")).unwrap();
    assert_ne!(ra[0].empirical, rb[0].empirical);
    assert_eq!(rb[0].seed, 2);
}
