use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochwave"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .env_remove("STOCHWAVE_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    let text = format!("output_dir = {:?}\n{body}", dir.join("runs"));
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const HIT: &str = r#"
seed = 4
[model]
k = 1
d = 2
beta = 0.5
[grid]
L = 2.0
n_space = 64
n_time = 16
[hitprob]
n_paths = 150
window = { t_min = 0.5, t_max = 1.0, space_lo = [-0.5], space_hi = [0.5] }
targets = [
  { dim = 2, primitives = [ { type = "ball", center = [0.0, 0.0], radius = 0.1 } ] },
  { dim = 2, primitives = [ { type = "ball", center = [0.0, 0.0], radius = 0.4 } ] },
]
"#;

#[test]
fn exponents_classifies_polar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.toml", "seed = 1\n[model]\nk = 1\nd = 5\nbeta = 1.0\n");
    let o = run(&["exponents"], &cfg);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("Polar"));
}

#[test]
fn out_of_range_beta_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", &HIT.replace("beta = 0.5", "beta = 2.5"));
    let o = run(&["hitprob"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("(C1)") && err.contains("model"), "{err}");
}

#[test]
fn unknown_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.toml", &HIT.replace("n_time = 16", "n_time = 16\nsteps = 3"));
    assert_eq!(run(&["hitprob"], &cfg).status.code(), Some(2));
}

#[test]
fn non_converged_capacity_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
seed = 1
[model]
k = 1
d = 1
beta = 0.5
[capacity]
gamma = 0.5
n_grid = 400
tol = 1e-9
max_iter = 5
target = { dim = 1, primitives = [ { type = "box", min = [0.0], max = [1.0] } ] }
"#;
    let cfg = write(dir.path(), "c.toml", body);
    assert_eq!(run(&["capacity"], &cfg).status.code(), Some(3));
}

#[test]
fn reruns_hit_the_cache_and_ids_ignore_key_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HIT);
    let first = run(&["hitprob"], &cfg);
    assert!(first.status.success(), "{first:?}");
    let id = stdout(&first).lines().last().unwrap().split_whitespace().nth(1).unwrap().to_string();

    let again = run(&["hitprob"], &cfg);
    assert!(again.status.success());
    assert!(stdout(&again).starts_with(&format!("cached {id}")));

    let reordered = HIT.replace("k = 1\nd = 2\nbeta = 0.5", "beta = 0.5\nd = 2\nk = 1");
    let cfg2 = write(dir.path(), "h2.toml", &reordered);
    let o = run(&["hitprob", "--workers", "1"], &cfg2);
    assert!(stdout(&o).starts_with(&format!("cached {id}")), "{}", stdout(&o));

    let csv_path = dir.path().join("runs").join(format!("hitprob-{}", &id[..16])).join("hitprob.csv");
    let before = std::fs::read(&csv_path).unwrap();
    let forced = run(&["hitprob", "--force"], &cfg);
    assert!(forced.status.success());
    assert_eq!(std::fs::read(&csv_path).unwrap(), before);
    let text = String::from_utf8(before).unwrap();
    assert!(text.starts_with(&format!("# run_id={id}\n")));
}

#[test]
fn manifest_lists_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HIT);
    let o = run(&["hitprob"], &cfg);
    let path = stdout(&o).lines().last().unwrap().split_whitespace().nth(2).unwrap().to_string();
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(Path::new(&path).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "hitprob");
    let arts: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(arts.contains(&"hitprob.csv") && arts.contains(&"hitprob.json"));
    assert!(m["config"].get("output_dir").is_none());
}
