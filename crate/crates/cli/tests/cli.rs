use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sipcheck");

const CONFIG: &str = r#"
id = "cli"
seed = 4
output = "out"
checks = ["measures", "bounds", "conditions"]
q = [2.0]
model = "linear"
coefficients = "geometric"
coefficient_rho = 0.5
lags = 3
lengths = [1, 4, 16]
replicates = 300
inner = 8
"#;

fn sipcheck(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn worker_count_does_not_change_reports() {
    let mut all = Vec::new();
    for jobs in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), CONFIG);
        let out = sipcheck(&["run", &cfg, "--jobs", jobs]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        all.push(reports(&dir.path().join("out")));
    }
    assert_eq!(all[0].len(), 3);
    assert_eq!(all[0], all[1]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    assert!(sipcheck(&["run", &cfg]).status.success());
    let base = reports(&dir.path().join("out"));
    assert!(sipcheck(&["run", &cfg, "--seed", "99"]).status.success());
    let other = reports(&dir.path().join("out"));
    let bounds = String::from_utf8(other[0].1.clone()).unwrap();
    assert!(bounds.lines().nth(1).unwrap().ends_with(",99"));
    assert_ne!(base[0].1, other[0].1);
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("q = [2.0]", "q = [2.0, 7.0]") + "innovations = \"student-t\"\ninnovation_df = 6.0\n";
    let cfg = write_config(dir.path(), &text);
    let out = sipcheck(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`q[1]`"), "{err}");

    let cfg = write_config(dir.path(), &format!("{CONFIG}coefficent_rho = 0.2\n"));
    let err = String::from_utf8_lossy(&sipcheck(&["run", &cfg]).stderr).into_owned();
    assert!(err.contains("`coefficent_rho`"), "{err}");
}

#[test]
fn report_exit_codes() {
    let header = "check,model,q,n,empirical,se,theoretical,ratio,verdict,seed\n";
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.csv"), format!("{header}a:x,m,2,1,1,,,,pass,1\n")).unwrap();
    let out = sipcheck(&["report", &d.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0));

    std::fs::write(d.join("b.csv"), format!("{header}b:y,m,2,1,,,,,skipped: no reference,1\n")).unwrap();
    let out = sipcheck(&["report", &d.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("total"));

    std::fs::write(d.join("c.csv"), format!("{header}c:z,m,2,8,3,0.1,1,3,fail,1\n")).unwrap();
    let out = sipcheck(&["report", &d.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("c:z m q=2 n=8"));

    let out = sipcheck(&["report", &d.join("missing").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
}
