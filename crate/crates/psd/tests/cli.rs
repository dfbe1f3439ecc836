use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psd::cache::{cache_load, encode};
use psd_core::params::GammaExponent;
use psd_core::primes::ps_enumerate_oracle;
use serde_json::Value;

const TINY: &str = "\
# X = 17^(13/6), about 464
q0 = 17
gamma = 0.98
lambda1 = 1
lambda2 = 1.4142135623730951
lambda3 = -2
epsilon_user = 0.05
";

fn psd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psd"))
        .args(args)
        .env_remove("PSD_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ps_primes_match_the_oracle() {
    let o = psd(&["ps-primes", "--gamma", "0.9", "--limit", "5000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed: Vec<u64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    let oracle: Vec<u64> = ps_enumerate_oracle(5000, GammaExponent::new(0.9).unwrap()).primes().collect();
    assert_eq!(printed, oracle);

    let o = psd(&["ps-primes", "--gamma", "0.9", "--limit", "5000", "--range", "1000:2000"]);
    let ranged: Vec<u64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    let expect: Vec<u64> = oracle.iter().copied().filter(|&p| p > 1000 && p <= 2000).collect();
    assert_eq!(ranged, expect);
}

#[test]
fn cache_is_written_reused_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("c.psp1");
    let args = ["ps-primes", "--gamma", "0.9", "--limit", "3000", "--cache", s(&cache)];
    let first = psd(&args);
    assert_eq!(code(&first), 0);
    let g = GammaExponent::new(0.9).unwrap();
    let loaded = cache_load(&cache, g, 3000).unwrap();
    assert_eq!(encode(&loaded, 3000), fs::read(&cache).unwrap());
    assert_eq!(stdout(&psd(&args)), stdout(&first));

    let wrong_gamma = psd(&["ps-primes", "--gamma", "0.91", "--limit", "3000", "--cache", s(&cache)]);
    assert_eq!(code(&wrong_gamma), 1);
    assert!(stderr(&wrong_gamma).contains("gamma"), "{}", stderr(&wrong_gamma));

    let bytes = fs::read(&cache).unwrap();
    fs::write(&cache, &bytes[..bytes.len() - 5]).unwrap();
    let truncated = psd(&args);
    assert_eq!(code(&truncated), 1);
    assert!(stderr(&truncated).contains("checksum"), "{}", stderr(&truncated));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.conf", &TINY.replace("gamma = 0.98", "gamma: 0.98"));
    let o = psd(&["run", "--config", s(&bad), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let missing = write_config(dir.path(), "missing.conf", &TINY.replace("lambda3 = -2\n", ""));
    let o = psd(&["sums", "--config", s(&missing), "--kind", "S"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("required key `lambda3`"), "{}", stderr(&o));

    let unknown = write_config(dir.path(), "unknown.conf", &format!("{TINY}lambda4 = 3\n"));
    let o = psd(&["sums", "--config", s(&unknown), "--kind", "S"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown key `lambda4`"));
}

#[test]
fn hypothesis_violations_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.conf", &TINY.replace("0.98", "1.2").replace("lambda3 = -2", "lambda3 = 2"));
    let o = psd(&["sums", "--config", s(&cfg), "--kind", "I"]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("37/38 < gamma < 1") && err.contains("same sign"), "{err}");

    let cfg = write_config(dir.path(), "e.conf", &TINY.replace("0.98", "0.9"));
    assert_eq!(code(&psd(&["sums", "--config", s(&cfg), "--kind", "I"])), 3);
    let o = psd(&["--exploratory", "sums", "--config", s(&cfg), "--kind", "I", "--alpha-grid", "0:0.1:3"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn primes_stage_writes_cache_and_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", TINY);
    let out = dir.path().join("run");
    let o = psd(&["run", "--config", s(&cfg), "--out", s(&out), "--stages", "primes"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 2, "{names:?}");
    assert_eq!(names[0], "manifest.json");
    assert!(names[1].ends_with(".psp1"));
    let m = manifest(&out);
    assert_eq!(m["complete"], true);
    assert_eq!(m["stages"][0]["outputs"][0]["file"], names[1].as_str());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", TINY);
    let digests = |name: &str| {
        let out = dir.path().join(name);
        let o = psd(&["run", "--config", s(&cfg), "--out", s(&out), "--alpha-grid", "0:0.5:41", "--t-grid", "0.05:100:50"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m = manifest(&out);
        assert_eq!(m["complete"], true);
        let mut d = Vec::new();
        for stage in m["stages"].as_array().unwrap() {
            for f in stage["outputs"].as_array().unwrap() {
                let file = f["file"].as_str().unwrap().to_string();
                let bytes = fs::read(out.join(&file)).unwrap();
                assert_eq!(psd::report::sha256_hex(&bytes), f["sha256"].as_str().unwrap());
                d.push((file, f["sha256"].as_str().unwrap().to_string()));
            }
        }
        d
    };
    let a = digests("a");
    assert_eq!(a, digests("b"));
    let files: Vec<&str> = a.iter().map(|(f, _)| f.as_str()).collect();
    for expected in ["gamma_decomp.csv", "triples.csv", "dichotomy.csv", "sums_S.csv", "kernel_theta.csv"] {
        assert!(files.contains(&expected), "{files:?}");
    }
}

#[test]
fn failing_stage_leaves_an_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    // 18 is not a convergent denominator of 1/sqrt 2
    let cfg = write_config(dir.path(), "t.conf", &TINY.replace("q0 = 17", "q0 = 18"));
    let out = dir.path().join("run");
    let o = psd(&["run", "--config", s(&cfg), "--out", s(&out), "--stages", "kernel,dichotomy"]);
    assert_eq!(code(&o), 3);
    let m = manifest(&out);
    assert_eq!(m["complete"], false);
    assert!(m["error"].as_str().unwrap().contains("convergent denominator"));
    assert_eq!(m["stages"][0]["name"], "kernel");
    assert_eq!(m["stages"][1]["summary"]["failed"], true);
}

#[test]
fn convergent_index_selects_q0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", &TINY.replace("q0 = 17", "q0 = 18"));
    let o = psd(&["cf", "--config", s(&cfg), "--terms", "8"]);
    assert_eq!(code(&o), 0);
    let qs: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(3).unwrap().to_string()).collect();
    assert_eq!(qs, ["1", "1", "3", "7", "17", "41", "99", "239"]);

    let o = psd(&["dichotomy", "--config", s(&cfg), "--convergent-index", "4", "--t-grid", "0.05:50:20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "t,a1,q1,a2,q2,class1,class2,case");
    assert_eq!(text.lines().count(), 21);
    assert!(stderr(&o).contains("unexplained 0"));
}

#[test]
fn cf_of_a_value() {
    let o = psd(&["cf", "--x", "3.141592653589793", "--terms", "4"]);
    let rows: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(rows[0], "index,partial_quotient,a,q,residual");
    let aq: Vec<(String, String)> = rows[1..]
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    assert_eq!(aq, [("3", "1"), ("22", "7"), ("333", "106"), ("355", "113")].map(|(a, q)| (a.to_string(), q.to_string())));
    let o = psd(&["cf", "--x", "3.141592653589793", "--convergent-index", "9"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn kernel_tables_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let theta = dir.path().join("theta.csv");
    let transform = dir.path().join("transform.csv");
    let o = psd(&[
        "kernel", "--epsilon", "0.5", "--k", "4", "--verify",
        "--emit-theta", s(&theta), "--emit-transform", s(&transform),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("bound_violations = 0"));
    let t = fs::read_to_string(&theta).unwrap();
    assert_eq!(t.lines().next(), Some("y,theta"));
    for line in t.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[0].abs() <= 0.375 {
            assert_eq!(v[1], 1.0);
        }
        if v[0].abs() >= 0.5 {
            assert_eq!(v[1], 0.0);
        }
    }
    let x = fs::read_to_string(&transform).unwrap();
    assert_eq!(x.lines().next(), Some("x,transform,bound"));
    assert_eq!(x.lines().count(), 10_001);
}

#[test]
fn sums_csv_is_conjugate_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", TINY);
    let rows = |grid: &str| -> Vec<Vec<f64>> {
        let o = psd(&["sums", "--config", s(&cfg), "--kind", "S", &format!("--alpha-grid={grid}")]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        stdout(&o).lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
    };
    let pos = rows("0.1:0.3:5");
    let neg = rows("-0.3:-0.1:5");
    for (p, n) in pos.iter().zip(neg.iter().rev()) {
        assert_eq!(p[0], -n[0]);
        assert!((p[1] - n[1]).abs() < 1e-12 * p[3].max(1.0));
        assert!((p[2] + n[2]).abs() < 1e-12 * p[3].max(1.0));
    }
}

#[test]
fn gamma_decomp_reports_and_emits_triples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", TINY);
    let triples = dir.path().join("triples.csv");
    let man = dir.path().join("m.json");
    let o = psd(&[
        "gamma-decomp", "--config", s(&cfg), "--emit-triples", s(&triples), "--manifest", s(&man), "--pieces", "1,2,3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table: Vec<(String, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    let get = |k: &str| table.iter().find(|(n, _)| n == k).map(|(_, v)| *v).unwrap();
    assert!(get("closure_relative_error") <= 0.01);
    // piece 3 is non-empty this small; the unit-constant tail bound does not cover it here
    assert!(get("gamma3_tail_bound") > 0.0);
    assert!(get("gamma3_re").abs() <= 1e-6 * get("gamma_direct"));
    assert!(get("j_minus_b") <= get("phi_bound"));

    let t = fs::read_to_string(&triples).unwrap();
    assert_eq!(t.lines().next(), Some("p1,p2,p3,form_value,weight"));
    for line in t.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let p: Vec<f64> = f[..3].iter().map(|x| x.parse().unwrap()).collect();
        let form = p[0] + 1.4142135623730951 * p[1] - 2.0 * p[2];
        assert!(form.abs() < 0.05);
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(&man).unwrap()).unwrap();
    assert_eq!(m["stages"][1]["summary"]["formula_epsilon_vacuous"], true);
    assert!(m["parameters"]["epsilon_formula"].as_f64().unwrap() > 1.0);
}

#[test]
fn eps_user_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.conf", &TINY.replace("epsilon_user = 0.05\n", ""));
    assert_eq!(code(&psd(&["sums", "--config", s(&cfg), "--kind", "I"])), 3);
    let o = psd(&["sums", "--config", s(&cfg), "--kind", "I", "--eps-user", "0.05", "--alpha-grid", "0:0.1:2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
