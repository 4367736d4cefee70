use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn drx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drx"))
        .args(args)
        .output()
        .expect("drx runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Case {
    dir: TempDir,
}

impl Case {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], config: &Path, out: &str) -> Output {
        let mut a: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        a.push(config.to_str().unwrap().into());
        a.push("--out".into());
        a.push(self.out(out).to_str().unwrap().into());
        let refs: Vec<&str> = a.iter().map(|s| s.as_str()).collect();
        drx(&refs)
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TWO_POINT: &str = "[model]\nm = 2\n[initial]\nkind = \"two_point\"\na = 2\n";
const SUBCRITICAL: &str = "[model]\nm = 2\n[initial]\nkind = \"raw\"\npath = \"sub.txt\"\n";

#[test]
fn evolve_point_mass_at_zero() {
    let c = Case::new();
    let cfg = c.config("p.toml", "[model]\nm = 2\n[initial]\nkind = \"point\"\nk = 0\n[evolve]\nn_max = 5\n");
    let o = c.run(&["evolve"], &cfg, "o");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&c.out("o").join("trace.csv"));
    assert_eq!(&header[..3], ["n", "tilted_mass", "tilted_mean"]);
    assert_eq!(header.len(), 10 + 8);
    assert_eq!(rows.len(), 6);
    let col = header.iter().position(|h| h == "log_pi").unwrap();
    assert!(rows.iter().all(|r| r[col].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn evolve_two_point_first_generation() {
    let c = Case::new();
    let cfg = c.config("t.toml", &format!("{TWO_POINT}[evolve]\nn_max = 1\n"));
    let o = c.run(&["evolve", "--emit-plotdata"], &cfg, "o");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&c.out("o").join("trace.csv"));
    let get = |name: &str| rows[1][header.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();
    // raw {0: 16/25, 1: 8/25, 3: 1/25}
    assert!((get("tilted_mass") - 8.0 / 5.0).abs() < 1e-15);
    assert!((get("p_zero") - 16.0 / 25.0).abs() < 1e-15);
    assert!((get("mean") - 11.0 / 25.0).abs() < 1e-15);
    let plot = fs::read_to_string(c.out("o").join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 2);
}

#[test]
fn usage_and_config_errors_exit_1() {
    let c = Case::new();
    let o = drx(&["evolve", c.out("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let bad = c.config("bad.toml", "[model]\nm = 2\nbogus = 1\n[initial]\nkind = \"point\"\nk = 0\n");
    assert_eq!(code(&c.run(&["evolve"], &bad, "o")), 1);
    let m1 = c.config("m1.toml", "[model]\nm = 1\n[initial]\nkind = \"point\"\nk = 0\n");
    assert_eq!(code(&c.run(&["evolve"], &m1, "o")), 1);
    let no_file = c.config("nf.toml", "[model]\nm = 2\n[initial]\nkind = \"raw\"\npath = \"nope.txt\"\n");
    assert_eq!(code(&c.run(&["evolve"], &no_file, "o")), 1);
    assert_eq!(code(&drx(&["frobnicate"])), 1);
    assert_eq!(code(&drx(&["verify", "--suite", "nonsense", "x.toml"])), 1);
    assert_eq!(code(&drx(&["--help"])), 0);
}

#[test]
fn numeric_guard_exits_3_with_generation() {
    let c = Case::new();
    let cfg = c.config(
        "g.toml",
        &format!("{TWO_POINT}[evolve]\nn_max = 20\nsupport_cap = 16\ntail_epsilon = 0.0\n"),
    );
    let o = c.run(&["evolve"], &cfg, "o");
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("generation 4"), "{}", stderr(&o));
}

#[test]
fn verify_lemma42_on_subcritical_fixture() {
    let c = Case::new();
    fs::write(c.dir.path().join("sub.txt"), "0.9, 0.0, 0.1\n").unwrap();
    let cfg = c.config("s.toml", &format!("{SUBCRITICAL}[evolve]\nn_max = 100\n"));
    let o = c.run(&["verify", "--suite", "lemma42"], &cfg, "o");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = json(&c.out("o").join("lemma42.json"));
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["fitted_constants"]["bound"], 2.0);
    assert_eq!(rep["details_csv_path"], "lemma42.csv");
    assert!(c.out("o").join("lemma42.csv").exists());
}

#[test]
fn verify_lemma42_on_critical_law_is_a_usage_error() {
    let c = Case::new();
    let cfg = c.config("t.toml", TWO_POINT);
    assert_eq!(code(&c.run(&["verify", "--suite", "lemma42"], &cfg, "o")), 1);
}

#[test]
fn verify_lemma27_rejects_small_y() {
    let c = Case::new();
    let cfg = c.config("l.toml", "[model]\nm = 2\n[lemma27]\ny = [5.0]\n");
    let o = c.run(&["verify", "--suite", "lemma27"], &cfg, "o");
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("3m"), "{}", stderr(&o));
}

#[test]
fn verify_all_on_fixtures() {
    let c = Case::new();
    fs::write(c.dir.path().join("sub.txt"), "0.9\n0\n0.1\n").unwrap();
    let sub = c.config("s.toml", &format!("{SUBCRITICAL}[evolve]\nn_max = 64\n"));
    let o = c.run(&["verify", "--suite", "all"], &sub, "sub");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["conservation", "bounds", "thm23", "lemma42", "lemma51", "lemma27"] {
        assert_eq!(json(&c.out("sub").join(format!("{name}.json")))["pass"], true, "{name}");
    }

    let tp = c.config(
        "t.toml",
        &format!("{TWO_POINT}[evolve]\nn_max = 64\n[verify]\ndominability_m = [4, 8, 16]\nroot_spread_max = 3.0\n"),
    );
    let o = c.run(&["verify", "--suite", "all"], &tp, "tp");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("skip lemma42"));
    assert_eq!(json(&c.out("tp").join("dominability.json"))["pass"], true);
}

#[test]
fn failed_check_exits_2_and_still_writes_report() {
    let c = Case::new();
    fs::write(c.dir.path().join("sub.txt"), "0.9 0 0.1").unwrap();
    let cfg = c.config(
        "s.toml",
        &format!("{SUBCRITICAL}[evolve]\nn_max = 32\n[verify]\nroot_spread_max = 1.0\n"),
    );
    let o = c.run(&["verify", "--suite", "thm23"], &cfg, "o");
    assert_eq!(code(&o), 2);
    assert_eq!(json(&c.out("o").join("thm23.json"))["pass"], false);
}

#[test]
fn sweep_alpha() {
    let c = Case::new();
    let cfg = c.config(
        "w.toml",
        "[model]\nm = 2\n[sweep]\nalphas = [3.0]\nk_cap = 4000\nn_max = 64\nn_lo = 8\nn_hi = 64\n",
    );
    let o = c.run(&["sweep-alpha", "--emit-plotdata"], &cfg, "o");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&c.out("o").join("sweep.csv"));
    assert_eq!(header, ["alpha", "slope", "target", "abs_err", "n_lo", "n_hi"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert!(rows[0][1].parse::<f64>().unwrap() > 0.5);
    assert!(c.out("o").join("plot_alpha_3.csv").exists());

    let empty = c.config("e.toml", "[model]\nm = 2\n[sweep]\nalphas = []\n");
    assert_eq!(code(&c.run(&["sweep-alpha"], &empty, "e")), 1);
    assert_eq!(code(&c.run(&["sweep-alpha", "--alphas", "4.5"], &cfg, "e")), 1);
}

#[test]
fn mc_runs_are_reproducible_and_guarded() {
    let c = Case::new();
    let cfg = c.config(
        "m.toml",
        &format!("{TWO_POINT}[mc]\nn = 6\nsamples = 20000\nseed = 11\n"),
    );
    let a = c.run(&["mc"], &cfg, "a");
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let b = c.run(&["mc"], &cfg, "b");
    assert_eq!(code(&b), 0);
    let read = |d: &str, f: &str| fs::read(c.out(d).join(f)).unwrap();
    assert_eq!(read("a", "mc.csv"), read("b", "mc.csv"));
    let (header, _) = read_csv(&c.out("a").join("mc.csv"));
    assert_eq!(header, ["n", "samples", "seed", "mean_hat", "stderr_mean", "p_zero_hat", "stderr_p0"]);
    let (_, rows) = read_csv(&c.out("a").join("mc_compare.csv"));
    assert!(rows[0][3].parse::<f64>().unwrap().abs() <= 4.0);

    let deep = c.config("d.toml", &format!("{TWO_POINT}[mc]\nn = 27\nsamples = 1\nseed = 1\n"));
    let o = c.run(&["mc"], &deep, "d");
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("too deep"), "{}", stderr(&o));

    let unseeded = c.config("u.toml", &format!("{TWO_POINT}[mc]\nn = 2\nsamples = 10\n"));
    assert_eq!(code(&c.run(&["mc"], &unseeded, "u")), 1);
    let no_section = c.config("n.toml", TWO_POINT);
    assert_eq!(code(&c.run(&["mc"], &no_section, "n")), 1);
}

#[test]
fn effective_config_reproduces_outputs() {
    let c = Case::new();
    fs::create_dir(c.dir.path().join("laws")).unwrap();
    fs::write(c.dir.path().join("laws/sub.txt"), "0.9, 0.0, 0.1").unwrap();
    let cfg = c.config(
        "r.toml",
        "[model]\nm = 2\n[initial]\nkind = \"raw\"\npath = \"laws/sub.txt\"\n[evolve]\nn_max = 40\ntail_epsilon = 1e-15\n",
    );
    assert_eq!(code(&c.run(&["evolve", "--emit-plotdata"], &cfg, "first")), 0);
    let eff = c.out("first").join("effective_config.toml");
    let o = c.run(&["evolve"], &eff, "second");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["trace.csv", "plot.csv"] {
        assert_eq!(
            fs::read(c.out("first").join(f)).unwrap(),
            fs::read(c.out("second").join(f)).unwrap(),
            "{f}"
        );
    }
    let text = fs::read_to_string(&eff).unwrap();
    assert!(text.contains("plotdata = true"));
}

#[test]
fn lemma27_command() {
    let c = Case::new();
    let cfg = c.config("l.toml", "[model]\nm = 3\n[lemma27]\nl_max = 10\n");
    let o = c.run(&["lemma27"], &cfg, "o");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&c.out("o").join("lemma27.csv"));
    assert_eq!(header, ["m", "l", "y", "lhs", "ratio"]);
    assert_eq!(rows.len(), 3 * 7);
    assert_eq!(json(&c.out("o").join("lemma27.json"))["params"]["y"], serde_json::json!([9.0, 18.0, 36.0]));
}
