//! End-to-end tests driving the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static DIR_SEQ: AtomicU32 = AtomicU32::new(0);

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "minni-cli-test-{}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minni"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn synth_summary(dir: &Path, frac: &str) -> PathBuf {
    let path = dir.join(format!("summary-{frac}.json"));
    let out = run(&[
        "summarize",
        "--synth",
        "--mu-obs",
        "0.7320",
        "--frac-missing",
        frac,
        "--n-observed",
        "3828",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "summarize failed: {out:?}");
    path
}

#[test]
fn summarize_synth_emits_expected_fields() {
    let dir = scratch_dir();
    let path = synth_summary(&dir, "0.376");
    let json = fs::read_to_string(&path).unwrap();
    assert!(json.contains("\"mu_obs\":0.732"));
    assert!(json.contains("\"frac_missing\":0.376"));
    assert!(json.contains("\"outcome_kind\":\"binary\""));
    assert!(json.contains("\"se_obs\":0.0071587"), "got {json}");
}

#[test]
fn summarize_reads_csv_records() {
    let dir = scratch_dir();
    let csv = dir.join("data.csv");
    fs::write(&csv, "outcome\n1\n0\nNA\n1\n\n").unwrap();
    let out = run(&["summarize", "--input", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("\"n_total\":5"), "got {text}");
    assert!(text.contains("\"n_missing\":2"));
}

#[test]
fn minni_pipeline_reports_the_survey_index() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0.376");
    let out = run(&[
        "minni",
        "--summary",
        summary.to_str().unwrap(),
        "--scale",
        "difference",
        "--k-se",
        "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("MinNI (difference) = (0.14, 0.14)"),
        "got {text}"
    );
    assert!(text.contains("\"feasible\":true"));

    let out = run(&[
        "minni",
        "--summary",
        summary.to_str().unwrap(),
        "--scale",
        "ratio",
        "--k-se",
        "1",
        "--json",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        !text.contains("MinNI ("),
        "--json suppresses the human line"
    );
    assert!(text.contains("\"scale\":\"ratio\""));
    assert!(text.contains("\"index\":[1.19"), "got {text}");
}

#[test]
fn minni_without_missing_data_exits_one() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0");
    let out = run(&[
        "minni",
        "--summary",
        summary.to_str().unwrap(),
        "--scale",
        "difference",
        "--k-se",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(
        err.contains("no sensitivity analysis needed"),
        "stderr: {err}"
    );

    // With --json the diagnostic moves to stdout as JSON.
    let out = run(&[
        "minni",
        "--summary",
        summary.to_str().unwrap(),
        "--scale",
        "difference",
        "--k-se",
        "1",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("{\"error\":"));
}

#[test]
fn surface_grid_matches_published_column() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0.376");
    let args = [
        "surface",
        "--summary",
        summary.to_str().unwrap(),
        "--pi0",
        "0.5",
        "--exp-beta1",
        "2,3",
        "--exp-gamma1",
        "2,3",
    ];
    let out = run(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "pi0,exp_beta1,exp_gamma1,bias");
    let expected = [-0.0088, -0.0139, -0.0138, -0.0218];
    for (line, want) in lines.zip(expected) {
        let bias: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((bias - want).abs() < 1e-4, "line {line} vs {want}");
    }

    // Identical invocation, byte-identical output.
    let again = run(&args);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn isobols_writes_both_documents() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0.376");
    let csv = dir.join("curves.csv");
    let svg = dir.join("curves.svg");
    let out = run(&[
        "isobols",
        "--summary",
        summary.to_str().unwrap(),
        "--plane",
        "ed-rd",
        "--levels-se",
        "1,2",
        "--samples",
        "64",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("plane,level,point_index,x,y\n"));
    assert!(csv_text.contains("ed_rd,1,"));
    let svg_text = fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<?xml"));
    assert!(svg_text.contains("<path"));

    // Surface plane with default table-anchored ranges.
    let svg2 = dir.join("isobols.svg");
    let out = run(&[
        "isobols",
        "--summary",
        summary.to_str().unwrap(),
        "--plane",
        "surface",
        "--levels-se",
        "1,2",
        "--grid",
        "64",
        "--svg",
        svg2.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(fs::read_to_string(&svg2).unwrap().contains("</svg>"));
}

#[test]
fn isobols_requires_an_output_flag() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0.376");
    let out = run(&["isobols", "--summary", summary.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strata_reports_per_stratum_rows() {
    let dir = scratch_dir();
    let csv = dir.join("strata.csv");
    let mut data = String::from("outcome,stratum\n");
    // Stratum a: 6 observed (4 ones), 4 missing; stratum b: complete.
    for _ in 0..4 {
        data.push_str("1,a\n");
    }
    for _ in 0..2 {
        data.push_str("0,a\n");
    }
    for _ in 0..4 {
        data.push_str("NA,a\n");
    }
    for _ in 0..10 {
        data.push_str("1,b\n");
    }
    fs::write(&csv, &data).unwrap();
    let out = run(&[
        "strata",
        "--input",
        csv.to_str().unwrap(),
        "--k-se",
        "1",
        "--ed",
        "0.3",
        "--rd",
        "0.2",
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "stratum,weight,bias,minni_ed,minni_rd,feasible"
    );
    let row_a = lines.next().unwrap();
    assert!(row_a.starts_with("a,0.5,"), "row: {row_a}");
    assert!(row_a.ends_with("true"));
    let row_b = lines.next().unwrap();
    // Stratum b has nothing missing: no index, note carried in JSON mode.
    assert!(row_b.starts_with("b,0.5,"), "row: {row_b}");
    assert!(row_b.ends_with("NA"));

    let out = run(&[
        "strata",
        "--input",
        csv.to_str().unwrap(),
        "--k-se",
        "1",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("no sensitivity analysis needed"));
}

#[test]
fn variance_prints_the_gap() {
    let out = run(&[
        "variance", "--vd-yu", "0.1", "--vd-ug", "0.05", "--ed", "0.3", "--rd", "0.2", "--pr-g1",
        "0.6",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "{\"variance_gap\":0.010664}");
}

#[test]
fn oracle_passes_and_is_deterministic() {
    let args = [
        "oracle",
        "--binary",
        "400",
        "--categorical",
        "400",
        "--seed",
        "7",
        "--json",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{a:?}");
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("\"pass\":true"));
}

#[test]
fn config_file_supplies_defaults_but_flags_win() {
    let dir = scratch_dir();
    let summary = synth_summary(&dir, "0.376");
    let config = dir.join("run.conf");
    fs::write(
        &config,
        format!(
            "summary={}\nscale=ratio\nk-se=1\n",
            summary.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&["minni", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("\"scale\":\"ratio\""));

    // An explicit flag overrides the config value.
    let out = run(&[
        "minni",
        "--config",
        config.to_str().unwrap(),
        "--scale",
        "difference",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("\"scale\":\"difference\""));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
