//! CSV verification reports and their summary.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const HEADER: [&str; 10] = [
    "check",
    "model",
    "q",
    "n",
    "empirical",
    "se",
    "theoretical",
    "ratio",
    "verdict",
    "seed",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowVerdict {
    Pass,
    Fail,
    Skipped(String),
}

impl RowVerdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            RowVerdict::Pass
        } else {
            RowVerdict::Fail
        }
    }

    pub fn skipped(reason: impl Into<String>) -> Self {
        RowVerdict::Skipped(reason.into())
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(RowVerdict::Pass),
            "fail" => Some(RowVerdict::Fail),
            _ => s.strip_prefix("skipped: ").map(|r| RowVerdict::Skipped(r.to_string())),
        }
    }
}

impl fmt::Display for RowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowVerdict::Pass => f.write_str("pass"),
            RowVerdict::Fail => f.write_str("fail"),
            RowVerdict::Skipped(reason) => write!(f, "skipped: {reason}"),
        }
    }
}

/// One line of a report. `check` is `<group>:<item>`, e.g. `bounds:eq1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub check: String,
    pub model: String,
    pub q: f64,
    /// Path length or lag.
    pub n: u64,
    pub empirical: Option<f64>,
    pub se: Option<f64>,
    pub theoretical: Option<f64>,
    pub ratio: Option<f64>,
    pub verdict: RowVerdict,
    pub seed: u64,
}

impl Row {
    /// Row with `ratio = empirical / theoretical` filled in when both exist.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        check: impl Into<String>,
        model: &str,
        q: f64,
        n: u64,
        empirical: Option<f64>,
        se: Option<f64>,
        theoretical: Option<f64>,
        verdict: RowVerdict,
        seed: u64,
    ) -> Self {
        let clean = |x: Option<f64>| x.filter(|v| !v.is_nan());
        let (empirical, se, theoretical) = (clean(empirical), clean(se), clean(theoretical));
        let ratio = match (empirical, theoretical) {
            (Some(e), Some(t)) if t != 0.0 => Some(e / t),
            (Some(0.0), Some(_)) => Some(1.0),
            _ => None,
        };
        Self {
            check: check.into(),
            model: model.to_string(),
            q,
            n,
            empirical,
            se,
            theoretical,
            ratio,
            verdict,
            seed,
        }
    }

    pub fn group(&self) -> &str {
        self.check.split(':').next().unwrap_or(&self.check)
    }

    fn fields(&self) -> [String; 10] {
        [
            self.check.clone(),
            self.model.clone(),
            format_float(Some(self.q)),
            self.n.to_string(),
            format_float(self.empirical),
            format_float(self.se),
            format_float(self.theoretical),
            format_float(self.ratio),
            self.verdict.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// 17 significant digits; empty when absent.
pub fn format_float(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

fn parse_float(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// Stable sort by (check, model, n).
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| a.check.cmp(&b.check).then_with(|| a.model.cmp(&b.model)).then(a.n.cmp(&b.n)));
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Rows rendered as CSV text with the fixed header, after sorting.
pub fn render(rows: &[Row]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for row in &rows {
        w.write_record(row.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_report(path: &Path, rows: &[Row]) -> Result<()> {
    std::fs::write(path, render(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Config {
            field: path.display().to_string(),
            message: "unexpected report header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| Error::Config {
            field: format!("{}:{}", path.display(), i + 2),
            message: format!("bad {what}"),
        };
        let float = |j: usize, what: &str| parse_float(&rec[j]).map_err(|_| bad(what));
        rows.push(Row {
            check: rec[0].to_string(),
            model: rec[1].to_string(),
            q: float(2, "q")?.ok_or_else(|| bad("q"))?,
            n: rec[3].parse().map_err(|_| bad("n"))?,
            empirical: float(4, "empirical")?,
            se: float(5, "se")?,
            theoretical: float(6, "theoretical")?,
            ratio: float(7, "ratio")?,
            verdict: RowVerdict::parse(&rec[8]).ok_or_else(|| bad("verdict"))?,
            seed: rec[9].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(rows)
}

/// Top-level `*.csv` files of `dir`, sorted by name.
pub fn report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

/// Conditions listed in the checklist, in display order.
const CHECKLIST: [&str; 7] = ["eq2", "eq9", "eq15", "eq23", "eq30", "eq31", "gmc33"];

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub counts: BTreeMap<String, Counts>,
    pub failures: Vec<Row>,
    pub text: String,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

fn short(v: &RowVerdict) -> &'static str {
    match v {
        RowVerdict::Pass => "pass",
        RowVerdict::Fail => "FAIL",
        RowVerdict::Skipped(_) => "skip",
    }
}

pub fn summarize(rows: &[Row]) -> Summary {
    let mut counts: BTreeMap<String, Counts> = BTreeMap::new();
    let mut failures = Vec::new();
    for row in rows {
        let c = counts.entry(row.group().to_string()).or_default();
        match row.verdict {
            RowVerdict::Pass => c.pass += 1,
            RowVerdict::Fail => {
                c.fail += 1;
                failures.push(row.clone());
            }
            RowVerdict::Skipped(_) => c.skipped += 1,
        }
    }
    let mut text = String::new();
    let _ = writeln!(text, "{:<12} {:>6} {:>6} {:>8}", "check", "pass", "fail", "skipped");
    for (group, c) in &counts {
        let _ = writeln!(text, "{group:<12} {:>6} {:>6} {:>8}", c.pass, c.fail, c.skipped);
    }
    let total = counts.values().fold(Counts::default(), |a, c| Counts {
        pass: a.pass + c.pass,
        fail: a.fail + c.fail,
        skipped: a.skipped + c.skipped,
    });
    let _ = writeln!(text, "{:<12} {:>6} {:>6} {:>8}", "total", total.pass, total.fail, total.skipped);

    if !failures.is_empty() {
        let _ = writeln!(text, "\nfailed rows:");
        for r in &failures {
            let _ = writeln!(
                text,
                "  {} {} q={} n={} empirical={} theoretical={} ratio={}",
                r.check,
                r.model,
                r.q,
                r.n,
                format_float(r.empirical),
                format_float(r.theoretical),
                format_float(r.ratio),
            );
        }
    }

    // model -> q -> condition -> verdict
    let mut checklist: BTreeMap<&str, BTreeMap<String, BTreeMap<&str, &RowVerdict>>> = BTreeMap::new();
    for r in rows {
        if let Some(cond) = r.check.strip_prefix("conditions:") {
            if let Some(name) = CHECKLIST.iter().find(|c| **c == cond) {
                checklist
                    .entry(r.model.as_str())
                    .or_default()
                    .entry(r.q.to_string())
                    .or_default()
                    .insert(name, &r.verdict);
            }
        }
    }
    if !checklist.is_empty() {
        let _ = writeln!(text, "\nconditions:");
        let _ = write!(text, "  {:<48} {:>4}", "model", "q");
        for c in CHECKLIST {
            let _ = write!(text, " {c:>6}");
        }
        text.push('\n');
        for (model, by_q) in &checklist {
            for (q, verdicts) in by_q {
                let _ = write!(text, "  {model:<48} {q:>4}");
                for c in CHECKLIST {
                    let _ = write!(text, " {:>6}", verdicts.get(c).map_or("-", |v| short(v)));
                }
                text.push('\n');
            }
        }
    }
    Summary { counts, failures, text }
}

/// Reads every report in `dir` and summarizes them.
pub fn report_summary(dir: &Path) -> Result<Summary> {
    let files = report_files(dir)?;
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no reports in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in files {
        rows.extend(read_report(&f)?);
    }
    Ok(summarize(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(check: &str, n: u64, v: RowVerdict) -> Row {
        Row::new(check, "m", 2.0, n, Some(1.0), Some(0.1), Some(2.0), v, 7)
    }

    #[test]
    fn render_and_read_back() {
        let rows = vec![
            row("b:x", 4, RowVerdict::Pass),
            row("a:y", 9, RowVerdict::skipped("no reference, sorry")),
            row("b:x", 1, RowVerdict::Fail),
        ];
        let text = render(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("check,model,q,n,empirical,se,theoretical,ratio,verdict,seed"));
        assert_eq!(
            lines.next(),
            Some("a:y,m,2.0000000000000000e0,9,1.0000000000000000e0,1.0000000000000001e-1,2.0000000000000000e0,5.0000000000000000e-1,\"skipped: no reference, sorry\",7")
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_report(&p, &rows).unwrap();
        let back = read_report(&p).unwrap();
        let mut sorted = rows.clone();
        sort_rows(&mut sorted);
        assert_eq!(back, sorted);
    }

    #[test]
    fn ratio_needs_both_sides() {
        let r = Row::new("c:d", "m", 2.0, 0, None, None, Some(1.0), RowVerdict::Pass, 0);
        assert_eq!(r.ratio, None);
        let r = Row::new("c:d", "m", 2.0, 0, Some(f64::NAN), None, Some(1.0), RowVerdict::Pass, 0);
        assert_eq!(r.empirical, None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(summarize(&[row("a:b", 1, RowVerdict::Pass)]).exit_code(), 0);
        let s = summarize(&[row("a:b", 1, RowVerdict::Pass), row("a:c", 1, RowVerdict::Fail)]);
        assert_eq!(s.exit_code(), 1);
        assert!(s.text.contains("a:c m q=2 n=1"));
        let s = summarize(&[row("a:b", 1, RowVerdict::skipped("x")), row("a:c", 1, RowVerdict::skipped("y"))]);
        assert_eq!(s.exit_code(), 0);
        assert_eq!(s.counts["a"].skipped, 2);
    }

    #[test]
    fn checklist_lists_conditions() {
        let rows = [
            row("conditions:eq2", 64, RowVerdict::Pass),
            row("conditions:eq31", 64, RowVerdict::Fail),
        ];
        let s = summarize(&rows);
        let line = s.text.lines().find(|l| l.trim_start().starts_with("m ")).unwrap();
        assert!(line.contains("pass") && line.contains("FAIL"), "{line}");
    }
}
