use std::path::Path;
use std::process::{Command, Output};

use ergolab::experiments::random_piecewise;
use ergolab::{Automorphism, CellSpace};

fn ergolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn conjugate_piecewise_input_with_own_spec_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pw.txt");
    let base = Automorphism::rotation(CellSpace::new(48).unwrap());
    std::fs::write(&file, random_piecewise(&base, 5, 21).unwrap().to_text()).unwrap();
    let o = ergolab(&["conjugate", "--input", path(&file), "--n", "6", "--eps", "1/10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("distance 0/1\n"), "{text}");
    assert!(text.contains("ok true\n"));
}

#[test]
fn tower_taller_than_shortest_cycle_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("perm.txt");
    // cycles of length 3 and 5
    let perm = Automorphism::from_images(vec![1, 2, 0, 4, 5, 6, 7, 3]).unwrap();
    std::fs::write(&file, perm.to_text()).unwrap();
    let o = ergolab(&["tower", "--input", path(&file), "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("aperiodic"));
    let o = ergolab(&["tower", "--input", path(&file), "--n", "3", "--eps", "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sample_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = ergolab(&["sample", "--N", "24", "--M", "5", "--trials", "1", "--seed", "7", "--threads", threads, "--out", path(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv, std::fs::read_to_string(&b).unwrap());
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("trial,system,N_steps,defect,DN,eps,member\n"));
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let o = ergolab(&["tower", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# tower run\nN = 12\nn = 5\neps = 1/2\n").unwrap();
    let o = ergolab(&["tower", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("error_mass 1/6\n"), "{}", stdout(&o));

    let o = ergolab(&["tower", "--config", path(&cfg), "--N", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("error_mass 0/1\n"), "{}", stdout(&o));

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(ergolab(&["tower", "--config", path(&cfg)]).status.code(), Some(1));
}

#[test]
fn roundtrip_output_parses_back() {
    let o = ergolab(&["roundtrip", "--scenario", "compact", "--N", "6", "--M", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let sys = ergolab::SkewSystem::from_text(&stdout(&o)).unwrap();
    assert_eq!(sys.grid_size(), 24);
}
