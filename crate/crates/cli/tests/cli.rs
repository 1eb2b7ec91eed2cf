use std::path::Path;
use std::process::Command;

use owc_aloha::{DispersionKind, SystemConfig};
use owc_aloha_cli::config::ExperimentKind;
use owc_aloha_cli::{
    load_config, parse_config, parse_csv, presets, run_experiment, write_csv, ConfigError, Mode, Overrides, RowMode,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_owc-aloha"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn same_to_12_digits(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-12 * a.abs().max(b.abs())
}

#[test]
fn empty_config_is_the_reference_cell() {
    let spec = parse_config("[optics]\n").unwrap();
    assert_eq!(spec.points.len(), 1);
    let p = spec.points[0];
    let want = SystemConfig::reference();
    let (got, want) = (p.system.frontend, want.frontend);
    assert!((got.tx_power - 30e-3).abs() < 1e-18);
    assert!((got.detector_area - 1e-4).abs() < 1e-20);
    assert_eq!(got.responsivity, 0.4);
    assert_eq!(got.filter_gain, 1.0);
    assert_eq!(got.lens_index, 1.5);
    assert!((got.field_of_view - want.field_of_view).abs() < 1e-15);
    assert!((got.semi_angle - want.semi_angle).abs() < 1e-15);
    assert_eq!(got.conversion_efficiency, 0.8);
    assert_eq!(got.noise_psd, 1e-21);
    assert_eq!(got.bandwidth, 200e3);
    assert_eq!((p.system.geometry.radius, p.system.geometry.height), (4.0, 3.0));
    assert_eq!((p.protocol.users, p.protocol.access_prob, p.protocol.capture), (50, 0.05, true));
    assert_eq!((p.fbl.blocklength, p.fbl.rate, p.fbl.target_error), (64, 0.5, 1e-3));
    assert_eq!(p.fbl.dispersion, DispersionKind::NearestNeighbor);
    assert_eq!(spec.run.mode, Mode::Analytic);
    assert_eq!(spec.sweep_label(), "none");
}

#[test]
fn field_of_view_violations_are_named() {
    let err = parse_config("[optics]\nPsi_deg = 100\n").unwrap_err();
    assert!(matches!(&err, ConfigError::Invalid { path, .. } if path == "optics.Psi_deg"), "{err}");
    assert!(err.to_string().contains("field-of-view"), "{err}");

    let err = parse_config("[optics]\nPsi_deg = 30\n[cell]\nD_m = 4\nL_m = 3\n").unwrap_err();
    assert!(err.to_string().contains("field-of-view invariant"), "{err}");
}

#[test]
fn unknown_keys_are_rejected_with_valid_names() {
    let err = parse_config("[sweep]\nparam = \"pa_typo\"\nvalues = [0.1]\n").unwrap_err();
    match &err {
        ConfigError::UnknownKey { key, valid, .. } => {
            assert_eq!(key, "pa_typo");
            assert!(valid.contains("p_a") && valid.contains("Phi_half_deg"));
        }
        e => panic!("unexpected error {e}"),
    }
    let err = parse_config("[protocol]\np_A = 0.1\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse { .. }));
    assert!(err.to_string().contains("p_A"), "{err}");
}

#[test]
fn other_invariants_carry_field_paths() {
    let cases = [
        ("[code]\nn = 64\nallow_short_blocklength = false\n", "code.n"),
        ("[protocol]\np_a = 1.5\n", "protocol.p_a"),
        ("[sweep]\nparam = \"p_a\"\nmin = 0.1\nmax = 0.2\nstep = 0\n", "sweep.step"),
        ("[run]\nmode = \"mc\"\n", "run.seed"),
        ("[sweep]\nparam = \"L_m\"\nvalues = [3.0, -1.0]\n", "cell.L_m"),
    ];
    for (text, path) in cases {
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().starts_with(path), "{text}: {err}");
    }
}

#[test]
fn single_point_sweep_gives_one_row() {
    let spec = parse_config("[sweep]\nparam = \"p_a\"\nvalues = [0.1]\n").unwrap();
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((r.sweep_param.as_str(), r.sweep_value, r.mode), ("p_a", Some(0.1), RowMode::Analytic));
    assert!(r.standard_errors.is_none());
    for v in [r.epsilon, r.throughput, r.p_out, r.reliability] {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn both_mode_interleaves_in_ascending_order_and_round_trips() {
    let spec = parse_config(
        "[sweep]\nparam = \"p_a\"\nvalues = [0.2, 0.05]\n[run]\nmode = \"both\"\nseed = 7\nslots = 20000\n",
    )
    .unwrap();
    let rows = run_experiment(&spec).unwrap();
    let order: Vec<(Option<f64>, RowMode)> = rows.iter().map(|r| (r.sweep_value, r.mode)).collect();
    assert_eq!(
        order,
        vec![
            (Some(0.05), RowMode::Analytic),
            (Some(0.05), RowMode::MonteCarlo),
            (Some(0.2), RowMode::Analytic),
            (Some(0.2), RowMode::MonteCarlo),
        ]
    );
    assert!(rows[1].standard_errors.is_some());

    let mut out = Vec::new();
    write_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), rows.len() + 1);
    assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
    let back = parse_csv(&text).unwrap();
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((&a.sweep_param, a.sweep_value, a.mode), (&b.sweep_param, b.sweep_value, b.mode));
        for (x, y) in [(a.epsilon, b.epsilon), (a.throughput, b.throughput), (a.p_out, b.p_out), (a.reliability, b.reliability)] {
            assert!(same_to_12_digits(x, y), "{x} vs {y}");
        }
        match (a.standard_errors, b.standard_errors) {
            (None, None) => {}
            (Some(s), Some(t)) => assert!(same_to_12_digits(s.epsilon, t.epsilon) && same_to_12_digits(s.p_out, t.p_out)),
            _ => panic!("standard errors lost in the round trip"),
        }
    }
}

#[test]
fn outage_preset_saturates_at_high_activity() {
    let spec = load_config(None, Some("fig8-outage"), &Overrides::default()).unwrap();
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 50);
    let high: Vec<_> = rows.iter().filter(|r| r.sweep_value.unwrap() > 0.35).collect();
    assert!(!high.is_empty());
    for r in high {
        assert!(r.p_out >= 0.99, "p_a = {:?}: P_out = {}", r.sweep_value, r.p_out);
    }
}

#[test]
fn every_preset_validates_and_documents_assumptions() {
    for name in presets::names() {
        let spec = load_config(None, Some(name), &Overrides::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let meta = spec.meta.unwrap_or_else(|| panic!("{name}: no [meta]"));
        assert!(meta.figure.is_some() && !meta.assumptions.is_empty(), "{name}");
        if name == "fig2" {
            assert_eq!(spec.run.experiment, ExperimentKind::SinrCdf);
            assert_eq!(spec.run.u_a_values, vec![2, 4, 8]);
        }
    }
    assert!(matches!(presets::get("fig99"), Err(ConfigError::UnknownPreset { .. })));
}

#[test]
fn config_file_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "over.toml", "[protocol]\nU = 20\n");
    let spec = load_config(Some(&path), Some("fig8-outage"), &Overrides::default()).unwrap();
    assert!(spec.points.iter().all(|p| p.protocol.users == 20));
    assert_eq!(spec.sweep_label(), "p_a");
    let cli = Overrides { mode: Some(Mode::Mc), seed: Some(3), output: None };
    let spec = load_config(Some(&path), Some("fig8-outage"), &cli).unwrap();
    assert_eq!((spec.run.mode, spec.run.seed), (Mode::Mc, Some(3)));
}

#[test]
fn show_preset_prints_the_preset_data() {
    let out = bin().args(["run", "--show-preset", "fig9-nocapture"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), presets::get("fig9-nocapture").unwrap());
}

#[test]
fn validate_only_skips_computation_and_exit_codes_classify_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("never.csv");
    let good = write(dir.path(), "good.toml", "[run]\nmode = \"mc\"\nseed = 1\n");
    let status = bin().arg("run").arg(&good).arg("--validate-only").arg("--out").arg(&csv).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(!csv.exists());

    let bad = write(dir.path(), "bad.toml", "[optics]\nPsi_deg = 100\n");
    let out = bin().arg("run").arg(&bad).arg("--validate-only").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("optics.Psi_deg"));

    // no SINR below 1e12 reaches this rate
    let numeric = write(dir.path(), "numeric.toml", "[sweep]\nparam = \"R\"\nvalues = [60.0]\n");
    let out = bin().arg("run").arg(&numeric).arg("--out").arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!csv.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("R = 60"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.toml",
        "[protocol]\nU = 20\n[sweep]\nparam = \"p_a\"\nvalues = [0.05, 0.1]\n[run]\nmode = \"both\"\nseed = 11\nslots = 20000\n",
    );
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = bin().arg("run").arg(&cfg).arg("--out").arg(&path).status().unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let (first, second) = (run("a.csv"), run("b.csv"));
    assert_eq!(first, second);
    let meta = std::fs::read_to_string(dir.path().join("a.meta.toml")).unwrap();
    assert!(meta.contains(owc_aloha::montecarlo::RNG_ALGORITHM) && meta.contains("seed = 11"), "{meta}");
    let other = bin().arg("run").arg(&cfg).args(["--seed", "12"]).output().unwrap();
    assert_ne!(other.stdout, first);
}

#[test]
fn sinr_cdf_experiment_writes_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cdf.toml", "[run]\nslots = 20000\ncdf_points = 50\nu_a_values = [2, 3]\n");
    let path = dir.path().join("cdf.csv");
    let out = bin().arg("run").arg(&cfg).args(["--preset", "fig2", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(owc_aloha_cli::output::CDF_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 100);
    for r in &rows {
        let (a, e): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((a - e).abs() < 0.03, "{r:?}");
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("U_a = 3"));
}
