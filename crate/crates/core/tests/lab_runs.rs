use std::fs;
use std::path::{Path, PathBuf};

use heatlab::lab::{
    run, run_experiment, Experiment, LabConfig, RunOptions, EXIT_ASSERT, EXIT_CONFIG, EXIT_PASS,
};
use heatlab::Error;

fn atoms_cfg(k: usize, amplitude: f64, generator: &str) -> String {
    format!(
        "[experiment]\nkind = atoms\nseed = 3\n\n[grid]\nd = 1\nn = 2048\nl = 10\n\n[params]\na = 3\np = 2\nk = {k}\n\n\
         [input]\ngenerator = {generator}\nwidth = 0.8\namplitude = {amplitude}\ncenter = 0.3\n"
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_to(cfg: &Path, out: &Path) -> (i32, Vec<PathBuf>) {
    let opts = RunOptions {
        out: Some(out.to_path_buf()),
        seed: None,
    };
    let (code, res) = run(cfg, &opts);
    (code, res.map(|o| o.files).unwrap_or_default())
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn config_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "[experiment]\nkind = atoms\n[grid]\nd = 1\nbogus = 4\n",
            5,
            "unknown key",
        ),
        (
            "[experiment]\nkind = atoms\n\n[grid]\nd = one\nn = 8\nl = 2\n",
            5,
            "cannot parse",
        ),
        (
            "[experiment]\nkind = atoms\n[nonsense]\nx = 1\n",
            3,
            "unknown section",
        ),
        (
            "[experiment]\nkind = atoms\nthis line has no equals sign\n",
            3,
            "key = value",
        ),
        ("[experiment]\nkind = warp\n", 2, "unknown experiment"),
        (
            "[experiment]\nkind = qp\n[qp]\nt_range = 0.5, 2\n",
            4,
            "inside (0, 1)",
        ),
    ];
    for (i, (text, line, msg)) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("bad{i}.cfg"), text);
        match LabConfig::load(&p) {
            Err(Error::Config {
                line: got, msg: m, ..
            }) => {
                assert_eq!(got, *line, "case {i}: {m}");
                assert!(m.contains(msg), "case {i}: {m}");
            }
            other => panic!("case {i}: expected a config error, got {other:?}"),
        }
        let (code, _) = run_to(&p, &dir.path().join("o"));
        assert_eq!(code, EXIT_CONFIG);
    }
}

#[test]
fn subcommand_must_match_the_declared_kind() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.cfg", &atoms_cfg(4, 1.0, "gaussian"));
    let cfg = LabConfig::load(&p).unwrap();
    let opts = RunOptions {
        out: Some(dir.path().join("o")),
        seed: None,
    };
    let e = run_experiment(Experiment::Embed, Some(&cfg), &opts).unwrap_err();
    assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.cfg", &atoms_cfg(4, 1.0, "gaussian"));
    let (c1, f1) = run_to(&p, &dir.path().join("one"));
    let (c2, f2) = run_to(&p, &dir.path().join("two"));
    assert_eq!((c1, c2), (EXIT_PASS, EXIT_PASS));
    assert_eq!(f1.len(), f2.len());
    for (a, b) in f1.iter().zip(&f2) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(
            fs::read(a).unwrap(),
            fs::read(b).unwrap(),
            "{}",
            a.display()
        );
    }
}

#[test]
fn seeded_qp_runs_repeat_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment]\nkind = qp\nseed = 11\n[qp]\ndims = 1\np = 1.5\ninstances = 4\natoms_max = 3\nscan = 0.5, 1\n";
    let p = write(dir.path(), "q.cfg", text);
    let cfg = LabConfig::load(&p).unwrap();
    let go = |name: &str, seed: Option<u64>| {
        let opts = RunOptions {
            out: Some(dir.path().join(name)),
            seed,
        };
        run_experiment(Experiment::Qp, Some(&cfg), &opts).unwrap();
        fs::read(dir.path().join(name).join("bct.csv")).unwrap()
    };
    assert_eq!(go("a", None), go("b", None));
    assert_eq!(go("c", Some(11)), go("a", None));
    assert_ne!(go("d", Some(12)), go("a", None));
}

#[test]
fn extending_k_only_appends_rows() {
    let dir = tempfile::tempdir().unwrap();
    let short = write(dir.path(), "k4.cfg", &atoms_cfg(4, 1.0, "gaussian"));
    let long = write(dir.path(), "k5.cfg", &atoms_cfg(5, 1.0, "gaussian"));
    assert_eq!(run_to(&short, &dir.path().join("k4")).0, EXIT_PASS);
    assert_eq!(run_to(&long, &dir.path().join("k5")).0, EXIT_PASS);
    let a = lines(&dir.path().join("k4").join("convex.csv"));
    let b = lines(&dir.path().join("k5").join("convex.csv"));
    assert!(b.len() > a.len());
    assert_eq!(&b[..a.len()], &a[..]);
    // atom rows keep their content; only the deepest old level gains vertical children
    let a = lines(&dir.path().join("k4").join("atoms.csv"));
    let b = lines(&dir.path().join("k5").join("atoms.csv"));
    assert!(b.len() > a.len());
    let deepest = a[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .max()
        .unwrap()
        .to_string();
    for (old, new) in a.iter().zip(&b) {
        if old.split(',').next() == Some(deepest.as_str()) {
            assert_eq!(
                old.rsplit_once(',').unwrap().0,
                new.rsplit_once(',').unwrap().0
            );
            assert!(old.ends_with(",\"\""), "{old}");
        } else {
            assert_eq!(old, new);
        }
    }
}

#[test]
fn partition_audit_balances_on_generators() {
    let dir = tempfile::tempdir().unwrap();
    for (i, gen) in ["gaussian", "near_delta"].iter().enumerate() {
        let mut text = atoms_cfg(4, 1.0, gen);
        if *gen == "near_delta" {
            text = text.replace("width = 0.8\namplitude = 1\n", "sigma = 0.05\n");
        }
        let p = write(dir.path(), &format!("g{i}.cfg"), &text);
        let cfg = LabConfig::load(&p).unwrap();
        let opts = RunOptions {
            out: Some(dir.path().join(format!("g{i}"))),
            seed: None,
        };
        let o = run_experiment(Experiment::Atoms, Some(&cfg), &opts).unwrap();
        let audit = o
            .checks
            .iter()
            .find(|c| c.name == "partition_audit")
            .unwrap();
        assert!(audit.pass, "{gen}: {}", audit.detail);
        assert!(o.pass(), "{gen}: {:?}", o.checks);
    }
}

#[test]
fn zero_field_gives_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment]\nkind = embed\n[grid]\nd = 1\nn = 512\nl = 10\n[params]\na = 3\np = 2\nk = 4\n\
                [input]\ngenerator = zero\n[embed]\nk_min = 2\nk_max = 4\nmode = bounded\natoms = true\n";
    let p = write(dir.path(), "z.cfg", text);
    let (code, files) = run_to(&p, &dir.path().join("z"));
    assert_eq!(code, EXIT_PASS);
    let emb = lines(&dir.path().join("z").join("embedding.csv"));
    assert!(emb.len() > 1);
    for row in &emb[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let term: f64 = cols[2].parse().unwrap();
        let sum: f64 = cols[3].parse().unwrap();
        assert_eq!((term, sum), (0.0, 0.0), "{row}");
    }
    assert!(files.iter().any(|f| f.ends_with("manifest.txt")));
}

#[test]
fn convex_ratio_ignores_the_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let ratio = |amp: f64, name: &str| -> f64 {
        let p = write(
            dir.path(),
            &format!("{name}.cfg"),
            &atoms_cfg(4, amp, "gaussian"),
        );
        assert_eq!(run_to(&p, &dir.path().join(name)).0, EXIT_PASS);
        let manifest = fs::read_to_string(dir.path().join(name).join("manifest.txt")).unwrap();
        manifest
            .lines()
            .find_map(|l| l.strip_prefix("convex_ratio = "))
            .unwrap()
            .parse()
            .unwrap()
    };
    let (a, b) = (ratio(1.0, "one"), ratio(5.0, "five"));
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} {b}");
}

#[test]
fn failing_tolerance_is_an_assertion_failure() {
    let dir = tempfile::tempdir().unwrap();
    // a quadratic growth demand cannot be met by a bounded field
    let text = "[experiment]\nkind = embed\n[grid]\nd = 1\nn = 512\nl = 10\n[params]\na = 3\np = 2\nk = 4\n\
                [input]\ngenerator = gaussian\nwidth = 1\n[embed]\nmode = divergent\n[tolerances]\ngrowth = 1000\n";
    let p = write(dir.path(), "f.cfg", text);
    assert_eq!(run_to(&p, &dir.path().join("f")).0, EXIT_ASSERT);
}
