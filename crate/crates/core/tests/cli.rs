use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_csa-game");
const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/symmetric.toml");
const SMALL: [&str; 4] = ["--set", "model.n_paths=400", "--set", "model.n_steps=10"];

fn csa(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_in(mode: &str, out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![mode, "--config", CONFIG, "--out", out];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    csa(&args)
}

fn header(path: PathBuf) -> String {
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).lines().next().unwrap().to_string()
}

/// Every output file except the manifest, which records its own output directory.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let game = dir.path().join("game");
    assert_eq!(run_in("simulate", &sim, &[]).status.code(), Some(0));
    assert_eq!(header(sim.join("paths.csv")), "path,step,time,x,lambda_a,lambda_b,bank");
    assert_eq!(header(sim.join("defaults.csv")), "path,tau_a,tau_b,tau,stop_step");
    run_in("game", &game, &[]);
    assert_eq!(header(game.join("exposure.csv")), "path,time,s_rf,s,cva,dva,bcva,coll");
    assert_eq!(header(game.join("regimes.csv")), "path,step,time,regime,mover");
    assert_eq!(header(game.join("policy.csv")), "player,path,step,time");
    assert_eq!(header(game.join("costs.csv")), "path,player,running,switching,terminal,total");
    assert_eq!(header(game.join("values.csv")), "player,regime,l,step,time,mean_value,coefficients");
    let outcome: serde_json::Value = serde_json::from_slice(&fs::read(game.join("outcome.json")).unwrap()).unwrap();
    for key in ["certificate", "j_a", "j_b", "margin_a", "margin_b", "iterations", "banal"] {
        assert!(outcome.get(key).is_some(), "outcome.json lacks {key}");
    }
}

#[test]
fn exit_codes_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");

    assert_eq!(run_in("validate", &out, &[]).status.code(), Some(0));

    let bad = run_in("validate", &out, &["--set", "model.rho_x_la=0.99", "--set", "model.rho_x_lb=-0.99", "--set", "model.rho_la_lb=0.99"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("positive semi-definite"));

    let hp3 = run_in(
        "validate",
        &out,
        &["--set", "solver.mode=symmetric", "--set", "costs.A.c_to0=0.0", "--set", "costs.B.c_to0=0.0"],
    );
    assert_eq!(hp3.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&hp3.stdout).contains("Hp3"));

    let unknown = run_in("validate", &out, &["--set", "model.volatility=0.2"]);
    assert_eq!(unknown.status.code(), Some(2));

    let missing = csa(&["validate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(1));

    let nomode = csa(&["--config", CONFIG]);
    assert_eq!(nomode.status.code(), Some(2));
}

#[test]
fn manifest_reproduces_outputs_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(run_in("game", &first, &["--threads", "1"]).status.success());
    let manifest = first.join("manifest.toml");
    assert!(fs::read_to_string(&manifest).unwrap().starts_with("# csa-game"));

    let second = dir.path().join("second");
    let out = csa(&["game", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--threads", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (a, b) = (outputs(&first), outputs(&second));
    assert_eq!(a.len(), b.len());
    for ((na, ca), (nb, cb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
}
