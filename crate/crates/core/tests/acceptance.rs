//! End-to-end acceptance run: eleven numbered criteria, each printed as
//! one pass/fail line (run with `--nocapture` to see them on success).
//! Every criterion carries a wall-clock budget; exceeding it fails the
//! line. Tolerances live in the library's harness module.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use elliptic_dyson_core::harness::{run_suite, CheckRecord, Report, RunConfig, Suite};

struct Line {
    name: &'static str,
    pass: bool,
    elapsed: Duration,
    detail: String,
}

/// Worst tolerance-usage ratio across records, and whether all passed.
fn digest(records: &[&CheckRecord]) -> (bool, String) {
    if records.is_empty() {
        return (false, "no records matched".into());
    }
    let all = records.iter().all(|r| r.pass);
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    for r in records {
        let ratio = if r.measured.is_finite() {
            (r.measured - r.expected).abs() / r.tolerance.max(1e-300)
        } else {
            f64::INFINITY
        };
        if ratio >= worst {
            worst = ratio;
            worst_name = &r.name;
        }
    }
    let mut s = String::new();
    let _ = write!(
        s,
        "{} checks, worst margin {:.2} ({})",
        records.len(),
        worst,
        worst_name
    );
    if !all {
        let failed: Vec<&str> = records
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        let _ = write!(s, "; FAILED: {}", failed.join(", "));
    }
    (all, s)
}

fn select<'a>(report: &'a Report, prefixes: &[&str]) -> Vec<&'a CheckRecord> {
    report
        .records
        .iter()
        .filter(|r| prefixes.iter().any(|p| r.name.starts_with(p)))
        .collect()
}

fn line_from_suite(name: &'static str, budget: Duration, suite: Suite, prefixes: &[&str]) -> Line {
    let cfg = RunConfig {
        suite,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let result = run_suite(&cfg);
    let elapsed = start.elapsed();
    match result {
        Ok(report) => {
            let (mut pass, mut detail) = digest(&select(&report, prefixes));
            if elapsed > budget {
                pass = false;
                let _ = write!(detail, "; over budget {:.0?}", budget);
            }
            Line {
                name,
                pass,
                elapsed,
                detail,
            }
        }
        Err(err) => Line {
            name,
            pass: false,
            elapsed,
            detail: format!("suite error: {err}"),
        },
    }
}

fn lines_from_shared_suite(suite: Suite, parts: &[(&'static str, Duration, &[&str])]) -> Vec<Line> {
    let cfg = RunConfig {
        suite,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let result = run_suite(&cfg);
    let elapsed = start.elapsed();
    match result {
        Ok(report) => parts
            .iter()
            .map(|(name, budget, prefixes)| {
                let (mut pass, mut detail) = digest(&select(&report, prefixes));
                if elapsed > *budget {
                    pass = false;
                    let _ = write!(detail, "; over budget {:.0?}", budget);
                }
                Line {
                    name,
                    pass,
                    elapsed,
                    detail,
                }
            })
            .collect(),
        Err(err) => parts
            .iter()
            .map(|(name, _, _)| Line {
                name,
                pass: false,
                elapsed,
                detail: format!("suite error: {err}"),
            })
            .collect(),
    }
}

fn determinism_line(name: &'static str) -> Line {
    let cfg = RunConfig {
        suite: Suite::All,
        mc_paths: 2000,
        dt: 1e-3,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let run = |threads: Option<&str>| -> Result<(String, bool), String> {
        match threads {
            Some(v) => std::env::set_var("ELLIPTIC_DYSON_THREADS", v),
            None => std::env::remove_var("ELLIPTIC_DYSON_THREADS"),
        }
        let report = run_suite(&cfg).map_err(|e| e.to_string())?;
        Ok((report.render(), report.all_pass()))
    };
    let outcome = (|| -> Result<String, String> {
        let (first, ok1) = run(Some("1"))?;
        let (second, ok2) = run(Some("1"))?;
        let (eight, ok8) = run(Some("8"))?;
        std::env::remove_var("ELLIPTIC_DYSON_THREADS");
        if first != second {
            return Err("reports differ between two single-worker runs".into());
        }
        if first != eight {
            return Err("reports differ between 1 and 8 workers".into());
        }
        if !(ok1 && ok2 && ok8) {
            return Err("reduced-count suite runs contain failing checks".into());
        }
        Ok(format!(
            "3 reduced-count full-suite runs byte-identical ({} bytes, 1 vs 8 workers)",
            first.len()
        ))
    })();
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) => Line {
            name,
            pass: true,
            elapsed,
            detail,
        },
        Err(detail) => Line {
            name,
            pass: false,
            elapsed,
            detail,
        },
    }
}

#[test]
fn acceptance_criteria() {
    let secs = Duration::from_secs;
    let mut lines: Vec<Line> = vec![
        line_from_suite(
            "01 determinant-factorization",
            secs(10),
            Suite::Identities,
            &["factorization/"],
        ),
        line_from_suite(
            "02 theta-identities",
            secs(5),
            Suite::Identities,
            &["theta/"],
        ),
        line_from_suite(
            "03 interpolation-biorthogonality",
            secs(5),
            Suite::Identities,
            &["interp/"],
        ),
        line_from_suite(
            "04 martingale-normalization",
            secs(120),
            Suite::MartingaleMc,
            &["martingale-mc/"],
        ),
        line_from_suite(
            "05 backward-equation-residual",
            secs(60),
            Suite::Kolmogorov,
            &["kolmogorov/"],
        ),
        line_from_suite(
            "06 integral-normalization",
            secs(180),
            Suite::IntegralIdentity,
            &["integral-identity/"],
        ),
    ];
    let shared = lines_from_shared_suite(
        Suite::KernelVsMc,
        &[
            (
                "07 kernel-vs-histogram",
                secs(300),
                &["kernel-vs-mc/"] as &[&str],
            ),
            ("09 endpoint-pinning", secs(180), &["pinning"]),
        ],
    );
    let mut shared = shared.into_iter();
    let line7 = shared.next().expect("two shared lines");
    let line9 = shared.next().expect("two shared lines");
    lines.push(line7);
    lines.push(line_from_suite(
        "08 equilibrium-relaxation",
        secs(120),
        Suite::Relaxation,
        &["equilibrium/", "relaxation/"],
    ));
    lines.push(line9);
    lines.push(line_from_suite(
        "10 fredholm-gauge-and-bounds",
        secs(60),
        Suite::Identities,
        &["fredholm/"],
    ));
    lines.push(determinism_line("11 report-determinism"));

    lines.sort_by(|a, b| a.name.cmp(b.name));
    println!("acceptance criteria:");
    for line in &lines {
        println!(
            "  [{}] {} ({:.1}s) {}",
            if line.pass { "PASS" } else { "FAIL" },
            line.name,
            line.elapsed.as_secs_f64(),
            line.detail
        );
    }
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
    assert!(
        failed.is_empty(),
        "acceptance criteria failed: {}",
        failed.join(", ")
    );
}
