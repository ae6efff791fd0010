use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_occdepth"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo").join(name)
}

fn scene(dir: &Path, seed: u64) {
    let out = run(&[
        "scene",
        demo("two_layer.toml").to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const VIEWS: &str = "[input]\ncenter = \"center.pgm\"\nleft = \"left.pgm\"\nright = \"right.pgm\"\n";

#[test]
fn scene_writes_six_identical_files_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    scene(a.path(), 4);
    scene(b.path(), 4);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
    }
}

#[test]
fn occlusion_masks_are_empty_only_for_equal_disparities() {
    let dir = tempfile::tempdir().unwrap();
    let spec = |fg: u32| {
        format!(
            "width = 40\nheight = 20\n[[layer]]\nrect = [-20, 0, 60, 20]\ndisparity = 3\n\
             [[layer]]\nrect = [10, 5, 30, 15]\ndisparity = {fg}\n"
        )
    };
    for (fg, expect_nonzero) in [(4, true), (9, true)] {
        let p = dir.path().join(format!("s{fg}.toml"));
        std::fs::write(&p, spec(fg)).unwrap();
        let out_dir = dir.path().join(format!("o{fg}"));
        assert!(run(&["scene", p.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]).status.success());
        let mask = occdepth::imaging::load_mask(out_dir.join("occ_left.pgm")).unwrap();
        assert_eq!(mask.count() > 0, expect_nonzero);
    }
    // A single plane has no nearer layer.
    let p = dir.path().join("flat.toml");
    std::fs::write(&p, "width = 40\nheight = 20\n[[layer]]\nrect = [-20, 0, 60, 20]\ndisparity = 3\n").unwrap();
    let out_dir = dir.path().join("flat");
    assert!(run(&["scene", p.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]).status.success());
    for f in ["occ_left.pgm", "occ_right.pgm"] {
        assert_eq!(occdepth::imaging::load_mask(out_dir.join(f)).unwrap().count(), 0);
    }
}

#[test]
fn equal_layer_disparities_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "width = 8\nheight = 8\n[[layer]]\nrect = [0, 0, 8, 8]\ndisparity = 3\n[[layer]]\nrect = [2, 2, 4, 4]\ndisparity = 3\n").unwrap();
    assert_eq!(run(&["scene", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn estimate_smoke_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    scene(dir.path(), 0);
    let m = write_manifest(
        dir.path(),
        &format!("{VIEWS}[estimate]\nmode = \"sum\"\noptimizer = \"wta\"\nd_max = 10\n"),
    );
    let first = run(&["estimate", m.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let map = std::fs::read(dir.path().join("out/disparity.pgm")).unwrap();
    assert!(map.starts_with(b"P5\n96 64\n255\n"));
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["iterations"].as_array().unwrap().len(), 1);
    assert!(run(&["estimate", m.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(dir.path().join("out/disparity.pgm")).unwrap(), map);
}

#[test]
fn numbered_frames_give_one_map_each() {
    let dir = tempfile::tempdir().unwrap();
    for f in 0..3u64 {
        let fd = dir.path().join(format!("f{f}"));
        scene(&fd, f);
        for v in ["center", "left", "right", "gt_center"] {
            std::fs::rename(fd.join(format!("{v}.pgm")), dir.path().join(format!("{v}_{f}.pgm"))).unwrap();
        }
    }
    let m = write_manifest(
        dir.path(),
        "frames = [0, 1, 2]\n[input]\ncenter = \"center_{frame}.pgm\"\nleft = \"left_{frame}.pgm\"\n\
         right = \"right_{frame}.pgm\"\n[estimate]\nd_max = 10\n\
         [evaluate]\ngt = \"gt_center_{frame}.pgm\"\ngt_scale = 4\n",
    );
    let out = run(&["estimate", m.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(listed.len(), 3);
    for (i, l) in listed.iter().enumerate() {
        assert!(l.ends_with(&format!("disparity_{i}.pgm")), "{l}");
    }
    let eval = run(&["evaluate", m.to_str().unwrap()]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/evaluation.json")).unwrap()).unwrap();
    let reports = report.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        assert!(r["report"]["all"].as_f64().unwrap() < 5.0, "{r}");
    }
}

#[test]
fn sweep_row_count_is_the_grid_product() {
    let dir = tempfile::tempdir().unwrap();
    scene(dir.path(), 1);
    let m = write_manifest(
        dir.path(),
        &format!(
            "{VIEWS}[estimate]\noptimizer = \"wta\"\nd_max = 10\n[evaluate]\ngt = \"gt_center.pgm\"\ngt_scale = 4\n\
             [sweep]\nmodes = [\"sum\", \"occ_aware\"]\nlambdas = [1, 2, 3, 4]\nprecisions = [1, 2, 4]\n"
        ),
    );
    let out = run(&["sweep", m.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sequence,mode,precision,lambda,psnr_db,bad_nonocc,bad_all,bad_disc,runtime_ms"
    );
    assert_eq!(lines.count(), 24);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    // Header plus one line per precision.
    assert_eq!(summary.lines().count(), 4, "{summary}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Usage error.
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // Malformed manifest.
    let m = write_manifest(dir.path(), "[estimate]\nlambda = \"high\"\n");
    assert_eq!(run(&["estimate", m.to_str().unwrap()]).status.code(), Some(1));
    // Missing input file.
    let m = write_manifest(dir.path(), VIEWS);
    let out = run(&["estimate", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("center.pgm"));
    // Missing manifest.
    assert_eq!(run(&["sweep", dir.path().join("nope.toml").to_str().unwrap()]).status.code(), Some(2));
    // Corrupt image.
    scene(dir.path(), 0);
    std::fs::write(dir.path().join("left.pgm"), b"P5\n96 64\n255\nshort").unwrap();
    assert_eq!(run(&["estimate", m.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn debug_artifacts_when_enabled() {
    let dir = tempfile::tempdir().unwrap();
    scene(dir.path(), 2);
    let m = write_manifest(dir.path(), &format!("{VIEWS}[estimate]\nd_max = 10\noptimizer = \"wta\"\ndebug = true\n"));
    assert!(run(&["estimate", m.to_str().unwrap()]).status.success());
    let stats = std::fs::read_to_string(dir.path().join("out/debug/iter2_stats.txt")).unwrap();
    assert!(stats.lines().any(|l| l.starts_with("left_occluded=")));
}
