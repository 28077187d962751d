use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "id = t\nnc = 4\nnf = 16\nepsilon = 0.05\n\n[coefficient]\nkind = random\ngrid_n = 16\nseed = 3\n\n[forcing]\nf = 1 + x*y\n\n[studies]\nratio_nc = 2, 4\nconvergence_nc = 2, 4\n";

fn msfem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msfem"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), config).unwrap();
    dir
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_with_two() {
    let dir = setup("nc = 4\nnf = 30\n[coefficient]\nkind = multiscale\n");
    let o = msfem(dir.path(), &["offline", "--config", "run.conf"]);
    assert_eq!(o.status.code(), Some(2));
    let line = stderr(&o);
    assert!(line.starts_with("error stage=config kind=config msg=\""), "{line}");
    assert_eq!(line.lines().count(), 1);
}

#[test]
fn online_needs_an_artifact() {
    let dir = setup(TINY);
    let o = msfem(dir.path(), &["online", "--config", "run.conf"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = msfem(dir.path(), &["online", "--config", "run.conf", "--artifact", "missing.msba"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error stage=online kind=io"));
}

#[test]
fn corrupt_artifact_is_an_io_error() {
    let dir = setup(TINY);
    fs::write(dir.path().join("bad.msba"), b"MSBA\x01\x00\x00\x00garbage-garbage").unwrap();
    let o = msfem(dir.path(), &["online", "--config", "run.conf", "--artifact", "bad.msba"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn mismatched_artifact_is_rejected() {
    let dir = setup(TINY);
    let o = msfem(dir.path(), &["offline", "--config", "run.conf", "--artifact", "a.msba"]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(dir.path().join("other.conf"), TINY.replace("seed = 3", "seed = 4")).unwrap();
    let o = msfem(dir.path(), &["online", "--config", "other.conf", "--artifact", "a.msba"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn online_reuses_the_offline_artifact() {
    let dir = setup(TINY);
    let o = msfem(dir.path(), &["offline", "--config", "run.conf", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let art = dir.path().join("out/t.msba");
    let spectra = fs::read_to_string(dir.path().join("out/t_spectra.csv")).unwrap();
    assert!(spectra.starts_with("edge_id,k,sigma\n"));
    let before = (fs::read(&art).unwrap(), fs::metadata(&art).unwrap().modified().unwrap());
    for _ in 0..2 {
        let o = msfem(
            dir.path(),
            &["online", "--config", "run.conf", "--out", "out", "--artifact", "out/t.msba", "--bubble", "--dump"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("offline_reused=true"));
        assert!(!stderr(&o).contains("offline id="));
    }
    let after = (fs::read(&art).unwrap(), fs::metadata(&art).unwrap().modified().unwrap());
    assert_eq!(before, after);
    let report = fs::read_to_string(dir.path().join("out/t_report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), msfem::solve::REPORT_HEADER);
    assert!(lines.next().unwrap().starts_with("t,4,16,0.05,optimal,"));
    let dump = fs::read_to_string(dir.path().join("out/t_solution.csv")).unwrap();
    assert_eq!(dump.lines().count(), 1 + 17 * 17);
}

#[test]
fn info_summarizes_an_artifact() {
    let dir = setup(TINY);
    assert!(msfem(dir.path(), &["offline", "--config", "run.conf", "--artifact", "a.msba"]).status.success());
    let o = msfem(dir.path(), &["info", "--config", "run.conf", "--artifact", "a.msba"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("n_nodal=9"), "{out}");
}

fn all_outputs(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let out = format!("out{threads}");
    let runs: [&[&str]; 5] = [
        &["offline"],
        &["online", "--bubble", "--dump"],
        &["reference"],
        &["study-forcing-ratio"],
        &["study-convergence"],
    ];
    for cmd in runs {
        let mut args = cmd.to_vec();
        args.extend(["--config", "run.conf", "--out", &out, "--threads", threads, "--seed", "9"]);
        let art = format!("{out}/t.msba");
        if cmd[0] == "online" {
            args.extend(["--artifact", &art]);
        }
        let o = msfem(dir, &args);
        assert!(o.status.success(), "{cmd:?}: {}", stderr(&o));
    }
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join(&out))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&p).unwrap();
            if name.ends_with("_report.csv") {
                // drop the wall-clock column
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .map(|l| &l[..l.rfind(',').unwrap()])
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            (name, bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = setup(TINY);
    let one = all_outputs(dir.path(), "1");
    let four = all_outputs(dir.path(), "4");
    let names: Vec<&str> = one.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["t.msba", "t_convergence.csv", "t_forcing_ratio.csv", "t_reference.csv", "t_report.csv", "t_solution.csv", "t_spectra.csv"]
    );
    assert_eq!(one, four);
}

#[test]
fn seed_flag_changes_the_coefficient() {
    let dir = setup(TINY);
    for seed in ["1", "2"] {
        let o = msfem(dir.path(), &["reference", "--config", "run.conf", "--out", seed, "--seed", seed]);
        assert!(o.status.success());
    }
    let a = fs::read(dir.path().join("1/t_reference.csv")).unwrap();
    let b = fs::read(dir.path().join("2/t_reference.csv")).unwrap();
    assert_ne!(a, b);
}
