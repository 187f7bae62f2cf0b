use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_calderon"));
    // keep the caller's overrides out of the runs
    for (k, _) in std::env::vars() {
        if k.starts_with("CALDERON_") {
            c.env_remove(k);
        }
    }
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path, env: &[(&str, &str)]) -> Output {
    let mut c = bin();
    c.arg(sub).arg("--config").arg(config).arg("--out").arg(out);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(str::to_string).collect()
}

const GRID: &str = "[lattice]\nd = 3\nn = 8\n";

#[test]
fn grid_writes_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "grid.toml", GRID);
    let out = tmp.path().join("out");
    let o = run("grid", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(&header(&out.join("grid.csv"))[..4], ["h", "eps_a", "eps_d", "s_norm"]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("grid.json")).unwrap()).unwrap();
    assert!(json.is_object());
}

#[test]
fn carleman_scan_has_provenance_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "scan.toml",
        "[lattice]\nd = 3\nn = 8\n[scan]\ndirection = [1, 0, 0]\ns_min = 1.0\ns_max = 2.0\ncount = 2\nl2_only = true\n",
    );
    let out = tmp.path().join("out");
    let o = run("carleman-scan", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("h,eps_a,eps_d,s_norm,"));
    assert!(lines[1].starts_with("0.125,0.0,0.0,"));
    assert!(!text.contains('\r'));
}

#[test]
fn missing_key_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[lattice]\nd = 3\n");
    let o = run("grid", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lattice.n"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_fails() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dtn.toml",
        "seed = 5\n[lattice]\nd = 2\nn = 16\n[potential]\nkind = \"random\"\namplitude = 1.0\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("dtn", &cfg, &a, &[]).status.success());
    assert!(run("dtn", &cfg, &b, &[]).status.success());
    for name in ["dtn.csv", "dtn.json", "dtn.bin", "potential.calf"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn environment_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "grid.toml", GRID);
    let out = tmp.path().join("out");
    let o = run("grid", &cfg, &out, &[("CALDERON_LATTICE__N", "10")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0.1,"), "{text}");
}

#[test]
fn random_potential_needs_a_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dtn.toml",
        "[lattice]\nd = 2\nn = 16\n[potential]\nkind = \"random\"\namplitude = 1.0\n",
    );
    let out = tmp.path().join("out");
    let o = run("dtn", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
    let o = run("dtn", &cfg, &out, &[("CALDERON_SEED", "3")]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn stored_potential_feeds_reconstruct() {
    let tmp = TempDir::new().unwrap();
    let grid = "[lattice]\nd = 3\nn = 10\n[domain]\nlo = 0.3\nhi = 0.6\nmargin = 1\n";
    let dtn = write_config(
        tmp.path(),
        "dtn.toml",
        &format!("{grid}[potential]\nkind = \"mode\"\namplitude = 0.5\nxi = [1, 0, 0]\n"),
    );
    let first = tmp.path().join("first");
    let o = run("dtn", &dtn, &first, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::copy(first.join("potential.calf"), tmp.path().join("q1.calf")).unwrap();

    let rec = write_config(
        tmp.path(),
        "rec.toml",
        &format!("{grid}[potential]\nkind = \"file\"\npath = \"q1.calf\"\n[reconstruct]\nm = 1.0\nmax_frequency = 1.0\n"),
    );
    let out = tmp.path().join("rec");
    let o = run("reconstruct", &rec, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cols = header(&out.join("reconstruct.csv"));
    for c in ["h", "eps_a", "eps_d", "s_norm", "xi0", "xi1", "xi2", "exact_re", "est_re", "error", "budget", "mu"] {
        assert!(cols.iter().any(|x| x == c), "missing column {c}: {cols:?}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    for k in ["h", "lambda", "mu", "mu_tilde", "regime", "all_within_budget", "fitted_constants"] {
        assert!(summary.get(k).is_some(), "summary lacks {k}");
    }

    // the same field given inline reproduces the report
    let inline = write_config(
        tmp.path(),
        "inline.toml",
        &format!("{grid}[potential]\nkind = \"mode\"\namplitude = 0.5\nxi = [1, 0, 0]\n[reconstruct]\nm = 1.0\nmax_frequency = 1.0\n"),
    );
    let out2 = tmp.path().join("inline");
    assert!(run("reconstruct", &inline, &out2, &[]).status.success());
    assert_eq!(
        std::fs::read(out.join("reconstruct.csv")).unwrap(),
        std::fs::read(out2.join("reconstruct.csv")).unwrap()
    );
}

#[test]
fn singular_interior_exits_with_diagnostics() {
    let tmp = TempDir::new().unwrap();
    // W is the index box 4..8 at h = 1/16, whose 3×3 interior has this Dirichlet eigenvalue
    let lam = 8.0 * 256.0 * (std::f64::consts::PI / 8.0).sin().powi(2);
    let cfg = write_config(
        tmp.path(),
        "sing.toml",
        &format!(
            "[lattice]\nd = 2\nn = 16\n[domain]\nlo = 0.25\nhi = 0.5\n[potential]\nkind = \"constant\"\namplitude = {lam:?}\n"
        ),
    );
    let out = tmp.path().join("out");
    let o = run("dtn", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["command"], "dtn");
    assert_eq!(diag["config"]["lattice"]["n"], 16);
    assert!(diag["error"].as_str().unwrap().len() > 0);
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = TempDir::new().unwrap();
    for (sub, file) in [("grid", "grid.toml"), ("sigma", "sigma.toml"), ("reconstruct", "reconstruct.toml")] {
        let o = run(sub, &root.join(file), &tmp.path().join(sub), &[]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
    }
}
