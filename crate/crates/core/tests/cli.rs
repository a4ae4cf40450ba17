use std::process::{Command, Output};

fn mwg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn concavity_prints_the_table() {
    let o = mwg(&["concavity"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("# convention=published\n"));
    assert_eq!(s.lines().count(), 20);
    let lit = stdout(&mwg(&["concavity", "--convention", "literal"]));
    assert!(lit.starts_with("# convention=literal\n"));
    assert_ne!(s, lit);
}

#[test]
fn exit_codes() {
    assert_eq!(mwg(&["sample", "--problem", "cox", "--side", "8", "--tile", "3"]).status.code(), Some(2));
    assert_eq!(mwg(&["sample", "--tau=-1"]).status.code(), Some(2));
    assert_eq!(mwg(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mwg(&["sample", "--config", "/nonexistent/x.toml"]).status.code(), Some(1));
    let e = mwg(&["sample", "--problem", "gauss1d", "--sampler", "pcn", "--q", "4"]);
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("pcn"));
    assert_eq!(mwg(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_overrides_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"gauss1d\"\nsampler = \"mwg\"\nn = 16\nq = 4\ntau = 0.2\nsteps = 400\ninit = \"draw\"\n").unwrap();
    let out = dir.path().join("out");
    let o = mwg(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "0.1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["tau"], 0.1);
    assert_eq!(v["config"]["n"], 16);
    assert_eq!(v["n_blocks"], 4);
    let chain = std::fs::read_to_string(out.join("chain.csv")).unwrap();
    assert!(chain.starts_with("x0,x1,"));
    assert!(chain.contains("\n#acc_rate="));
    let on_disk: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, v);

    let r = mwg(&["iact", out.join("chain.csv").to_str().unwrap(), "--col", "3"]);
    assert_eq!(r.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(rep["n"], 400);
    assert!(rep["iact"].as_f64().unwrap() >= 1.0);
    assert_eq!(mwg(&["iact", out.join("chain.csv").to_str().unwrap(), "--col", "99"]).status.code(), Some(2));
}

#[test]
fn sweep_tau_csv() {
    let o = mwg(&[
        "sweep-tau",
        "--problem",
        "gauss1d",
        "--n",
        "16",
        "--samplers",
        "mala,mwg",
        "--block-sizes",
        "2,4",
        "--taus",
        "0.05,0.2",
        "--steps",
        "300",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "sampler,block_size,tau,acceptance,acceptance_se,iact,iact_se,cost_per_ess");
    // mala: one block size; mwg: two
    assert_eq!(lines.len(), 1 + 2 + 4);
    assert!(lines[1].starts_with("mala,16,"));
}

#[test]
fn couple_and_map() {
    let o = mwg(&[
        "couple", "--n", "16", "--ell", "0.25", "--q", "4", "--tau", "0.05", "--replicas", "8", "--sweeps", "60",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["fit"]["rate_hat"].as_f64().unwrap() < 1.0);
    assert!(v["margin"].as_f64().unwrap() > 0.0);

    let m = mwg(&["map", "--problem", "cox", "--side", "8", "--tile", "4"]);
    assert_eq!(m.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&stdout(&m)).unwrap();
    assert_eq!(r["converged"], true);
    assert_eq!(r["x_map"].as_array().unwrap().len(), 64);
}
