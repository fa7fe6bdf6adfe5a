use std::path::{Path, PathBuf};

use clap::Parser;
use diffsar::optimize::ReconSchedule;
use diffsar::shade::NoiseConfig;
use diffsar_cli::config::{RunConfig, ShaderChoice};
use diffsar_cli::Cli;

fn overrides(args: &[&str]) -> diffsar_cli::config::Overrides {
    let mut argv = vec!["diffsar"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["gradcheck", "--all"]);
    Cli::try_parse_from(argv).unwrap().overrides
}

fn resolve(file: Option<&Path>, env: Option<&Path>, args: &[&str]) -> RunConfig {
    let o = overrides(args);
    RunConfig::resolve(o.config.as_deref().or(file), env, &o).unwrap()
}

fn write(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn schedule(edit: fn(&mut ReconSchedule)) -> String {
    let mut s = ReconSchedule::default();
    edit(&mut s);
    format!(r#""schedule": {}"#, serde_json::to_string(&s).unwrap())
}

/// field name, JSON body of the file, flag arguments, and a probe that
/// renders the field for comparison
type Row = (
    &'static str,
    fn() -> String,
    &'static [&'static str],
    fn(&RunConfig) -> String,
);

const ROWS: &[Row] = &[
    (
        "seed",
        || r#""seed": 11"#.into(),
        &["--seed", "12"],
        |c| c.seed.to_string(),
    ),
    (
        "height",
        || r#""height": 40"#.into(),
        &["--height", "48"],
        |c| c.height.to_string(),
    ),
    (
        "width",
        || r#""width": 40"#.into(),
        &["--width", "48"],
        |c| c.width.to_string(),
    ),
    (
        "spacing",
        || r#""spacing": 0.1"#.into(),
        &["--spacing", "0.2"],
        |c| c.spacing.to_string(),
    ),
    (
        "views",
        || r#""views": 12"#.into(),
        &["--views", "36"],
        |c| format!("{:?}", c.views),
    ),
    (
        "elevations",
        || r#""grid": {"elevations": 3}"#.into(),
        &["--elevations", "2"],
        |c| c.grid.elevations.to_string(),
    ),
    (
        "azimuths",
        || r#""grid": {"azimuths": 12}"#.into(),
        &["--azimuths", "8"],
        |c| c.grid.azimuths.to_string(),
    ),
    (
        "sigmas",
        || r#""sigmas": [0.001]"#.into(),
        &["--sigmas", "0,1e-5"],
        |c| format!("{:?}", c.sigmas),
    ),
    (
        "noise",
        || {
            let n = NoiseConfig {
                sigma_z: 0.1,
                ..NoiseConfig::default()
            };
            format!(r#""noise": {}"#, serde_json::to_string(&n).unwrap())
        },
        &["--no-noise"],
        |c| format!("{:?}", c.noise),
    ),
    (
        "shader",
        || r#""shader": {"kind": "learned", "weights": "a.json"}"#.into(),
        &["--shader-weights", "b.json"],
        |c| format!("{:?}", c.shader),
    ),
    (
        "iterations_l1",
        || schedule(|s| s.levels[0].iterations = 7),
        &["--iterations-l1", "3"],
        |c| c.schedule.levels[0].iterations.to_string(),
    ),
    (
        "iterations_l2",
        || schedule(|s| s.levels[1].iterations = 9),
        &["--iterations-l2", "4"],
        |c| c.schedule.levels[1].iterations.to_string(),
    ),
    (
        "lr",
        || schedule(|s| s.lr = 0.5),
        &["--lr", "0.25"],
        |c| c.schedule.lr.to_string(),
    ),
    (
        "checkpoint_every",
        || r#""checkpoint_every": 10"#.into(),
        &["--checkpoint-every", "0"],
        |c| c.checkpoint_every.to_string(),
    ),
    (
        "resolution",
        || r#""voxel": {"resolution": 32, "pad": 0.1, "window": 3}"#.into(),
        &["--resolution", "16"],
        |c| c.voxel.resolution.to_string(),
    ),
    (
        "window",
        || r#""voxel": {"resolution": 64, "pad": 0.1, "window": 1}"#.into(),
        &["--window", "2"],
        |c| c.voxel.window.to_string(),
    ),
    (
        "out",
        || r#""out": "from-file""#.into(),
        &["--out", "from-flag"],
        |c| c.out.display().to_string(),
    ),
];

#[test]
fn every_field_resolves_flag_over_file_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let default = RunConfig::default();
    for (i, (name, body, flags, probe)) in ROWS.iter().enumerate() {
        let file = write(
            dir.path(),
            &format!("c{i}.json"),
            &format!("{{{}}}", body()),
        );
        let from_default = probe(&resolve(None, None, &[]));
        let from_file = probe(&resolve(Some(&file), None, &[]));
        let from_flag = probe(&resolve(Some(&file), None, flags));
        assert_eq!(from_default, probe(&default), "{name}: default");
        assert_ne!(
            from_file, from_default,
            "{name}: file value must differ from the default"
        );
        assert_ne!(from_flag, from_file, "{name}: flag must win over the file");
        // the flag alone also beats the default
        assert_eq!(
            probe(&resolve(None, None, flags)),
            from_flag,
            "{name}: flag without file"
        );
    }
}

#[test]
fn flags_do_not_disturb_other_fields() {
    let c = resolve(None, None, &["--seed", "5"]);
    assert_eq!(
        c,
        RunConfig {
            seed: 5,
            ..RunConfig::default()
        }
    );
}

#[test]
fn env_file_applies_and_explicit_config_wins() {
    let dir = tempfile::tempdir().unwrap();
    let env = write(dir.path(), "env.json", r#"{"height": 24, "seed": 3}"#);
    let explicit = write(dir.path(), "explicit.json", r#"{"height": 16}"#);
    let from_env = resolve(None, Some(&env), &[]);
    assert_eq!((from_env.height, from_env.seed), (24, 3));
    let c = resolve(None, Some(&env), &["--config", explicit.to_str().unwrap()]);
    // the explicit file replaces the environment file entirely
    assert_eq!((c.height, c.seed), (16, 0));
}

#[test]
fn learned_shader_flag_sets_the_weights_path() {
    let c = resolve(None, None, &["--shader-weights", "w.json"]);
    assert_eq!(
        c.shader,
        ShaderChoice::Learned {
            weights: "w.json".into()
        }
    );
}

#[test]
fn invalid_values_are_validation_errors() {
    for args in [
        &["--height", "0"][..],
        &["--spacing=-1"],
        &["--views", "217"],
        &["--sigmas=-1e-3"],
    ] {
        let o = overrides(args);
        let err = RunConfig::resolve(None, None, &o).unwrap_err();
        assert_eq!(diffsar_cli::exit_code(&err), 2, "{args:?}: {err}");
    }
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = overrides(&["--config", "/nonexistent/cfg.json"]);
    let err = RunConfig::resolve(o.config.as_deref(), None, &o).unwrap_err();
    assert_eq!(diffsar_cli::exit_code(&err), 4);
    assert!(err.to_string().contains("/nonexistent/cfg.json"));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"height": "tall"}"#);
    let err = RunConfig::resolve(Some(&bad), None, &overrides(&[])).unwrap_err();
    assert_eq!(diffsar_cli::exit_code(&err), 2);
}
