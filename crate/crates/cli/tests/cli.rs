use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use quantwave::config::{ArraySpec, RunConfig};
use quantwave::grid::Grid;
use quantwave::io::{read_channel_data, read_medium, write_channel_data};
use quantwave::service::{encode_request, read_response, Status};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantwave"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::preset("us-ring").unwrap();
    cfg.grid = Grid {
        n_x: 40,
        n_z: 40,
        dx: 5e-4,
        pml_width: 6,
    };
    cfg.n_t = 80;
    cfg.array = ArraySpec::Ring {
        n_c: 4,
        semi_axis_x: 12.0,
        semi_axis_z: 12.0,
    };
    let path = dir.join("run.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn simulate_preset_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("water.json");
    let o = run(&["simulate", "--preset", "us-ring", "--out", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("<= 0.707107"));
    assert_eq!(read_channel_data(&out).unwrap().shape(), (8, 240, 8));

    let out = dir.path().join("radar.json");
    let o = run(&["simulate", "--preset", "radar", "--out", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(read_channel_data(&out).unwrap().shape(), (8, 800, 8));
}

#[test]
fn zero_source_gives_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cd.json");
    let o = run(&["simulate", "--config", s(&cfg), "--zero-source", "--out", s(&out)]);
    assert!(o.status.success());
    assert!(read_channel_data(&out).unwrap().values.iter().all(|&v| v == 0.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cd.json");
    let o = run(&["simulate", "--config", s(&cfg), "--uniform", "9000,1000", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("> 0.707107"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"unit_system": "si"}"#).unwrap();
    let o = run(&["simulate", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["simulate", "--config", s(&cfg), "--medium", "/nonexistent", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5));

    let o = run(&["simulate", "--preset", "nope", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dataset_evaluate_and_invert() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let scenario = dir.path().join("scenario.json");
    let mut sc = quantwave::phantoms::ScenarioConfig::preset("liver-ovals").unwrap();
    sc.shape = quantwave::phantoms::ShapeSpec::Ovals {
        count: 1,
        semi_axis: (4.0, 6.0),
    };
    fs::write(&scenario, sc.to_json()).unwrap();
    let data = dir.path().join("data");
    let o = run(&["gen-dataset", "--scenario", s(&scenario), "--config", s(&cfg), "--n", "2", "--out", s(&data), "--seed", "5"]);
    assert!(o.status.success(), "{o:?}");
    let gt = data.join("sample_00000");

    let o = run(&["evaluate", "--est", s(&gt), "--gt", s(&gt)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["properties"][0]["nrmse"], 0.0);
    assert_eq!(report["properties"][0]["psnr"], "inf");
    assert_eq!(report["properties"][1]["ssim"], 1.0);

    let fwi = dir.path().join("fwi.json");
    fs::write(
        &fwi,
        r#"{"initial": {"kind": "uniform", "values": [1480, 1000]}, "iterations": 2,
            "bounds": [[1480, 1570], [1000, 1060]], "steps": ["auto", "frozen"]}"#,
    )
    .unwrap();
    let out = dir.path().join("inv");
    let cd = gt.join("cd.json");
    let o = run(&["invert-fwi", "--cd", s(&cd), "--config", s(&cfg), "--fwi", s(&fwi), "--gt", s(&gt), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(out.join("log.jsonl")).unwrap();
    let losses: Vec<f64> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["loss"].as_f64().unwrap())
        .collect();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    let (est, bounds) = read_medium(&out.join("medium")).unwrap();
    assert_eq!(bounds, [(1480.0, 1570.0), (1000.0, 1060.0)]);
    assert!(est.property(1).values().iter().all(|&v| v == 1000.0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["properties"].as_array().unwrap().len(), 2);
    assert!(report["runtime_seconds"].as_f64().unwrap() > 0.0);

    // CFL violation in the initial guess exits 3
    fs::write(
        &fwi,
        r#"{"initial": {"kind": "uniform", "values": [9000, 1000]}, "iterations": 1,
            "bounds": [[1000, 9000], [1000, 1060]]}"#,
    )
    .unwrap();
    let o = run(&["invert-fwi", "--cd", s(&cd), "--config", s(&cfg), "--fwi", s(&fwi), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn preprocess_reports_depth_shift() {
    let dir = tempfile::tempdir().unwrap();
    let values = ndarray::Array3::from_shape_fn((2, 400, 3), |(p, t, c)| ((t as f64) * 0.05 * (p + c + 1) as f64).sin());
    let cd = quantwave::channel::ChannelData::new(
        values,
        2.2978e-8,
        quantwave::grid::Modality::Acoustic,
        quantwave::grid::UnitSystem::Si,
        vec![(0, 0), (1, 0), (2, 0)],
    )
    .unwrap();
    let input = dir.path().join("raw.json");
    write_channel_data(&input, &cd).unwrap();
    let stats = dir.path().join("stats.json");
    fs::write(&stats, r#"{"mean": 0.0, "std": 2.0}"#).unwrap();
    let out = dir.path().join("pre.json");
    let o = run(&[
        "preprocess", "--cd", s(&input), "--cut", "120", "--cutoff", "5e6", "--order", "4", "--stats", s(&stats),
        "--c-background", "1540", "--dx", "1e-4", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("z_shift_pixels 42"));
    let pre = read_channel_data(&out).unwrap();
    assert_eq!(pre.shape(), (2, 280, 3));
    let stats = quantwave::channel::cd_stats(&[pre]).unwrap();
    assert!(stats.mean.abs() < 1e-5 && (stats.std - 2.0).abs() < 1e-5);
}

#[test]
fn serve_over_stdio_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cd.json");
    let o = run(&["simulate", "--config", s(&cfg), "--uniform", "1500,1010", "--out", s(&out)]);
    assert!(o.status.success());
    let expected = fs::read(dir.path().join("cd.bin")).unwrap();

    let mut child = bin()
        .args(["serve", "--config", s(&cfg)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let maps = [ndarray::Array2::from_elem((40, 40), 1500.0), ndarray::Array2::from_elem((40, 40), 1010.0)];
    let mut input = encode_request(&maps);
    input.extend(encode_request(&maps));
    child.stdin.take().unwrap().write_all(&input).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let n = expected.len() / 4;
    let mut r = std::io::Cursor::new(&o.stdout);
    for _ in 0..2 {
        let start = r.position() as usize + 8;
        let (status, _) = read_response(&mut r, n).unwrap();
        assert_eq!(status, Status::Ok);
        assert_eq!(&o.stdout[start..start + 4 * n], &expected[..]);
    }
}

#[cfg(unix)]
#[test]
fn serve_over_unix_socket() {
    use std::os::unix::net::UnixStream;
    use std::time::{Duration, Instant};

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sock = dir.path().join("fwd.sock");
    let mut child = bin().args(["serve", "--config", s(&cfg), "--socket", s(&sock)]).spawn().unwrap();
    let start = Instant::now();
    let mut stream = loop {
        match UnixStream::connect(&sock) {
            Ok(s) => break s,
            Err(_) if start.elapsed() < Duration::from_secs(20) => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("{e}"),
        }
    };
    let maps = [ndarray::Array2::from_elem((40, 40), 1500.0), ndarray::Array2::from_elem((40, 40), 1010.0)];
    stream.write_all(&encode_request(&maps)).unwrap();
    stream.write_all(&encode_request(&maps[..1])).unwrap();
    let (status, cd) = read_response(&mut stream, 4 * 80 * 4).unwrap();
    assert_eq!(status, Status::Ok);
    assert!(cd.unwrap().iter().any(|&v| v != 0.0));
    assert_eq!(read_response(&mut stream, 0).unwrap().0, Status::Shape);
    child.kill().unwrap();
    child.wait().unwrap();
}
