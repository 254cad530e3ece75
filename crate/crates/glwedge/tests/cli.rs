use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn glwedge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glwedge"))
        .current_dir(dir)
        .args(args)
        .env_remove("GLWEDGE_CACHE")
        .output()
        .expect("running glwedge")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("reading output")).expect("valid JSON")
}

fn significant_digits(field: &str) -> usize {
    let mantissa = field.trim_start_matches('-').split(['e', 'E']).next().unwrap();
    mantissa.chars().filter(char::is_ascii_digit).count()
}

#[test]
fn profile1d_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = glwedge(dir.path(), &["profile1d", "--ell", "10", "--n", "1001", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,f,F,K"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1001);
    for field in rows[500].split(',') {
        assert_eq!(significant_digits(field), 17, "{field}");
    }
    let s = json(&dir.path().join("p.json"));
    for key in ["b", "alpha", "energy", "e_corr_integral", "e_corr_closed", "ell_bar", "t_m", "K_min", "d_ell"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    let alpha = s["alpha"].as_f64().unwrap();
    assert!(alpha < 0.0 && alpha > -1.5);
    assert_eq!(s["surface_regime"], true);
}

#[test]
fn b_outside_surface_regime_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = glwedge(dir.path(), &["--b", "0.5", "profile1d", "--ell", "8", "--n", "401", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b outside surface regime"));
    assert_eq!(json(&dir.path().join("p.json"))["surface_regime"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(glwedge(dir.path(), &["profile1d", "--bogus"]).status.code(), Some(64));
    assert_eq!(glwedge(dir.path(), &["nosuchcommand"]).status.code(), Some(64));
    assert_eq!(glwedge(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(glwedge(dir.path(), &["profile1d", "--ell", "-3"]).status.code(), Some(2));
    assert_eq!(glwedge(dir.path(), &["profile1d", "--n", "1"]).status.code(), Some(2));
    assert_eq!(glwedge(dir.path(), &["strip", "--variant", "periodic"]).status.code(), Some(2));
    assert_eq!(glwedge(dir.path(), &["corner"]).status.code(), Some(2));
    assert_eq!(glwedge(dir.path(), &["--config", "missing.toml", "profile1d"]).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[global]\nb = 1.4\n\n[profile1d]\nell = 9.0\nn = 601\n").unwrap();
    let out = glwedge(dir.path(), &["--config", "run.toml", "profile1d", "--ell", "11", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("p.json"));
    assert_eq!(s["b"].as_f64(), Some(1.4));
    assert_eq!(s["ell"].as_f64(), Some(11.0));
    assert_eq!(s["n"].as_u64(), Some(601));

    std::fs::write(dir.path().join("bad.toml"), "[global]\nbee = 1.4\n").unwrap();
    assert_eq!(glwedge(dir.path(), &["--config", "bad.toml", "profile1d"]).status.code(), Some(2));
}

#[test]
fn warm_cache_is_identical_and_faster() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--cache-dir", "cache", "profile1d", "--ell", "12", "--n", "4801", "--out"];
    let run = |out: &str| {
        let start = Instant::now();
        let o = glwedge(dir.path(), &[&args[..], &[out]].concat());
        assert_eq!(o.status.code(), Some(0));
        start.elapsed().as_secs_f64()
    };
    let cold = run("cold.csv");
    let warm = (0..3).map(|i| run(&format!("warm{i}.csv"))).fold(f64::INFINITY, f64::min);
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("cold.csv"), read("warm0.csv"));
    assert_eq!(read("cold.json"), read("warm0.json"));
    assert!(std::fs::read_dir(dir.path().join("cache")).unwrap().count() > 0);
    assert!(cold > 5.0 * warm, "cold {cold:.3} s, warm {warm:.3} s");
}

#[test]
fn strip_writes_levels_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = glwedge(dir.path(), &["strip", "--L", "2", "--ell", "6", "--h", "0.25", "--refine", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("s.json"));
    assert_eq!(s["levels"].as_array().unwrap().len(), 2);
    assert!(s["energy"].as_f64().unwrap() < 0.0);
    let field = std::fs::read_to_string(dir.path().join("s_field.csv")).unwrap();
    assert!(field.lines().count() > 10);
}

#[test]
fn corner_single_and_conjecture_table() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["corner", "--beta", "2.0", "--schedule", "single", "--L", "6", "--ell", "4", "--h", "0.25", "--out", "c.json"];
    let out = glwedge(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&dir.path().join("c.json"));
    assert_eq!(c["mode"], "single");
    assert!(c["row"]["e"].as_f64().unwrap().is_finite());
    assert!(c["conjecture"].as_f64().unwrap() < 0.0);

    let out = glwedge(dir.path(), &["conjecture", "--betas", "2.9", "--ells", "4,5", "--h", "0.25", "--out", "t.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("beta,e_corner,conjecture,abs_dev,rel_dev"));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("t.json").exists());
}

#[test]
fn assemble_shapes_and_open_domains() {
    let dir = tempfile::tempdir().unwrap();
    let out = glwedge(dir.path(), &["assemble", "--shape", "disk", "--size", "1", "--eps", "0.1", "--out", "d.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&dir.path().join("d.json"))["report"];
    let (o1, smooth) = (r["order_one"].as_f64().unwrap(), r["smooth_equivalent"].as_f64().unwrap());
    assert!((o1 - smooth).abs() < 1e-12);

    let open = r#"{"arcs": [{"length": 1.0, "curvature": {"kind": "const", "value": 0.0}},
                            {"length": 1.0, "curvature": {"kind": "const", "value": 0.0}}],
                   "corners": [1.5707963267948966, 1.5707963267948966]}"#;
    std::fs::write(dir.path().join("open.json"), open).unwrap();
    let out = glwedge(dir.path(), &["assemble", "--domain", "open.json", "--eps", "0.1", "--out", "o.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o.json").exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["conjecture", "--betas", "2.5,2.9", "--ells", "4,5", "--h", "0.25"];
    for (threads, out) in [("1", "t1.csv"), ("4", "t4.csv")] {
        let o = glwedge(dir.path(), &[&["--threads", threads], &common[..], &["--out", out]].concat());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let parse = |name: &str| -> Vec<f64> {
        let s = std::fs::read_to_string(dir.path().join(name)).unwrap();
        s.lines().skip(1).flat_map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
    };
    let (a, b) = (parse("t1.csv"), parse("t4.csv"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
    }
}
