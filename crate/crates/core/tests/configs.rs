use std::path::PathBuf;

use msfem::coefficient::default_inclusions;
use msfem::config::{parse_config, Epsilon};
use msfem::{CoefficientSpec, Error};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn high_contrast_config_matches_bundled_inclusions() {
    let text = std::fs::read_to_string(configs_dir().join("high_contrast.conf")).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(
        cfg.coefficient,
        CoefficientSpec::HighContrast {
            inclusions: default_inclusions()
        }
    );
}

#[test]
fn epsilon_token_resolves_to_coarse_size() {
    let c = parse_config("nc = 8\nnf = 64\nepsilon = H\n[coefficient]\nkind = multiscale\n").unwrap();
    assert_eq!(c.epsilon, Epsilon::CoarseSize);
    assert_eq!(c.resolved_eps(), 0.125);
}

#[test]
fn errors_name_the_line() {
    let cases = [
        ("nc = 4\nnf = 32\nbogus = 1\n[coefficient]\nkind = multiscale\n", 3),
        ("nc = 4\nnf = 32\n[coefficient]\nkind = constant\nc = -1\n", 5),
        ("nc = 4\nnf = 32\n[coefficient]\nkind = multiscale\n[forcing]\nf = sin(x\n", 6),
        ("nc = 4\nnf = 32\n[coefficient]\nkind = high_contrast\n[inclusions]\n0.1, 0.2, 0.05, 0.3, 10\n", 6),
        ("nc = 4\nnf = 32\nepsilon = 0\n[coefficient]\nkind = multiscale\n", 3),
    ];
    for (text, line) in cases {
        match parse_config(text) {
            Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}
