use std::path::Path;
use std::process::Command as Process;

use nuclear_waveguide_cli::{parse_scenario, run, Command, RunOutput, Tolerances};

const STACK: &str = "[stack]\ntop = Mo\nbottom = Mo\nlayer = B4C 15.8 nm\nlayer = Fe 1 nm resonant\nlayer = B4C 15.8 nm\n";

fn execute(text: &str, command: Command, overrides: &[&str]) -> RunOutput {
    let scenario = parse_scenario(text).unwrap();
    let mut tol = Tolerances::default();
    for o in overrides {
        tol.set_from(o).unwrap();
    }
    run(&scenario, command, text, Path::new("."), &tol).unwrap()
}

fn rows(out: &RunOutput, name: &str) -> Vec<Vec<f64>> {
    let text = &out.artifact(name).unwrap_or_else(|| panic!("{name} missing")).contents;
    text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

fn local_minima(x: &[f64], v: &[f64]) -> Vec<f64> {
    (1..v.len() - 1).filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1]).map(|i| x[i]).collect()
}

#[test]
fn modes_table_shows_decoupled_odd_mode() {
    let out = execute(STACK, Command::Modes, &[]);
    let modes = rows(&out, "modes.csv");
    assert_eq!(modes.len(), 3);
    let strong = modes.iter().filter(|r| r[5] > 1e-4).count();
    let weak = modes.iter().filter(|r| r[5] < 1e-6).count();
    assert_eq!((strong, weak), (2, 1));
    assert!(out.artifact("mode_profiles.dat").unwrap().contents.starts_with("# z_nm re_u1 im_u1"));
    assert_eq!(out.manifest["summary"]["guided_modes"], 3);
}

#[test]
fn bulk_field_has_fixed_position_beat_minima() {
    let text = format!(
        "[species]\ndensity = 1.8e27 m-3\n{STACK}[bulk]\nx_start = 20 um\nx_stop = 120 um\nx_count = 201\n\
         t_start = 0.5 gamma\nt_stop = 2 gamma\nt_count = 4\nomega_start = -5 gamma\nomega_stop = 5 gamma\nomega_count = 11\n"
    );
    let out = execute(&text, Command::Bulk, &["fft_half_span=50", "fft_spacing=0.05"]);
    let beat = out.manifest["summary"]["beat_length_m"].as_f64().unwrap();
    let field = rows(&out, "field2d.csv");
    assert_eq!(field.len(), 201 * 4);
    let mut per_time = Vec::new();
    for k in 0..4 {
        let x: Vec<f64> = field.iter().skip(k).step_by(4).map(|r| r[0]).collect();
        let v: Vec<f64> = field.iter().skip(k).step_by(4).map(|r| r[4]).collect();
        per_time.push(local_minima(&x, &v));
    }
    let first = &per_time[0];
    assert!(first.len() >= 4, "{first:?}");
    let spacing = (first[first.len() - 1] - first[0]) / (first.len() - 1) as f64;
    assert!(((spacing - beat) / beat).abs() < 0.05, "spacing {spacing} vs beat {beat}");
    for later in &per_time[1..] {
        assert_eq!(later.len(), first.len());
        for (a, b) in first.iter().zip(later) {
            assert!((a - b).abs() < 1.5e-6, "minimum moved from {a} to {b}");
        }
    }
    assert_eq!(rows(&out, "spectrum.csv").len(), 11);
    assert_eq!(out.manifest["tolerances"]["fft_spacing"], 0.05);
    assert_eq!(out.manifest["tolerances"]["fft_half_span"], 50.0);
}

#[test]
fn constructive_layout_peaks_higher_and_destructive_beats_less() {
    let text = format!(
        "{STACK}[strips]\nlayout = both\ncount = 10\nwidth = 0.1 um\noffset = 1 um\nx_start = 0 um\nx_stop = 240 um\nx_count = 1201\n\
         t_start = 0 gamma\nt_stop = 3 gamma\nt_count = 31\nomega_count = 21\nomega_start = -5 gamma\nomega_stop = 5 gamma\n"
    );
    let out = execute(&text, Command::Strips, &[]);
    let s = &out.manifest["summary"]["layouts"];
    let peak = |k: &str| s[k]["peak_on_resonance_abs2"].as_f64().unwrap();
    let vis = |k: &str| s[k]["downstream_visibility"].as_f64().unwrap();
    assert!(peak("constructive") > peak("destructive"));
    assert!(vis("destructive") < vis("constructive"));
    let layout = rows(&out, "layout_destructive.csv");
    assert_eq!(layout.len(), 10);
    let beat = out.manifest["summary"]["beat_length_m"].as_f64().unwrap();
    assert!(((layout[1][1] - layout[0][1]) - beat / 2.0).abs() < 1e-12);
    assert_eq!(rows(&out, "time_constructive.csv").len(), 31);
    // profile columns agree with the per-layout CSV
    let plot = &out.artifact("strips_profile.dat").unwrap().contents;
    assert!(plot.starts_with("# x_um abs2_constructive abs2_destructive\n"));
}

#[test]
fn custom_layout_from_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pos.csv"), "index,x\n0,0.0\n1,1.0e-5\n2,2.5e-5\n").unwrap();
    let text = format!("{STACK}[strips]\nlayout = custom\nwidth = 1 um\nlayout_file = pos.csv\nt_count = 3\nt_start = 0 gamma\nt_stop = 1 gamma\n");
    let scenario = parse_scenario(&text).unwrap();
    let out = run(&scenario, Command::Strips, &text, dir.path(), &Tolerances::default()).unwrap();
    let layout = rows(&out, "layout_custom.csv");
    assert_eq!(layout.iter().map(|r| r[1]).collect::<Vec<_>>(), vec![0.0, 1e-5, 2.5e-5]);
    assert!((out.manifest["summary"]["observe_m"].as_f64().unwrap() - 2.6e-5).abs() < 1e-15);
}

#[test]
fn sweep_converges_to_solid_layer() {
    let text = format!("{STACK}[sweep]\ncounts = 1, 4, 16\ntotal_width = 2 um\nt_start = 0 gamma\nt_stop = 4 gamma\nt_count = 401\n");
    let out = execute(&text, Command::Sweep, &[]);
    let sweep = rows(&out, "sweep.csv");
    let windows: Vec<f64> = sweep.iter().map(|r| r[2]).collect();
    let deviations: Vec<f64> = sweep.iter().map(|r| r[3]).collect();
    assert!(windows.windows(2).all(|w| w[1] > w[0]), "{windows:?}");
    assert!(deviations.windows(2).all(|w| w[1] < w[0]), "{deviations:?}");
    assert_eq!(out.manifest["tolerances"]["agreement"], 0.01);
}

#[test]
fn runs_are_deterministic() {
    let text = format!("{STACK}[strips]\nlayout = destructive\ncount = 3\nwidth = 0.5 um\nt_count = 5\nt_start = 0 gamma\nt_stop = 1 gamma\n");
    let a = execute(&text, Command::Strips, &[]);
    let b = execute(&text, Command::Strips, &[]);
    assert_eq!(a.artifacts, b.artifacts);
    assert_eq!(a.manifest, b.manifest);
    let cell = a.artifact("time_destructive.csv").unwrap().contents.lines().nth(2).unwrap().split(',').next().unwrap().to_string();
    let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn binary_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cavity.cfg");
    std::fs::write(&cfg, STACK).unwrap();
    let out_dir = dir.path().join("out");
    let status = Process::new(env!("CARGO_BIN_EXE_nwg"))
        .args(["modes", "--threads", "1", "--tolerance", "mode_root=1e-9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["modes.csv", "mode_profiles.dat", "two_mode.csv", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "modes");
    assert_eq!(manifest["tolerances"]["mode_root"], 1e-9);
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn binary_reports_scenario_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    std::fs::write(&cfg, "").unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_nwg")).args(["modes", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stack.top"));
    std::fs::write(&cfg, STACK).unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_nwg"))
        .args(["bulk", "--tolerance", "bogus=1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown tolerance"));
    let out = Process::new(env!("CARGO_BIN_EXE_nwg")).args(["bulk", "--config"]).arg(&cfg).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("no [bulk] section"));
}

#[test]
fn bundled_scenarios_parse() {
    for name in ["reference_cavity.cfg", "natural_iron_bulk.cfg"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
        parse_scenario(&std::fs::read_to_string(path).unwrap()).unwrap();
    }
}
