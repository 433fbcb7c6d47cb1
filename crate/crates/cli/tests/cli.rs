use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otproto::io::{read_map, write_map, DatasetManifest, Split};
use otproto::AnomalyMap;

fn otproto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otproto")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = otproto(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Run {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Run { _dir: dir, root }
    }

    fn p(&self, rel: &str) -> String {
        s(&self.root.join(rel))
    }

    fn synth(&self, extra: &[&str]) {
        let out = self.p("data");
        let mut args = vec!["synth", "--out", &out, "--image_height", "32", "--image_width", "32"];
        args.extend_from_slice(extra);
        ok(&args);
    }

    fn train(&self, out: &str, extra: &[&str]) -> String {
        let manifest = self.p("data/manifest.toml");
        let out = self.p(out);
        let mut args = vec!["train", "--manifest", &manifest, "--out", &out, "--n", "2", "--batch_size", "8"];
        args.extend_from_slice(extra);
        ok(&args)
    }

    fn infer(&self, out: &str, extra: &[&str]) {
        let manifest = self.p("data/manifest.toml");
        let (ck, out) = (self.p("ck"), self.p(out));
        let mut args = vec![
            "infer", "--manifest", &manifest, "--checkpoints", &ck, "--out", &out, "--image_height", "32", "--image_width", "32",
        ];
        args.extend_from_slice(extra);
        ok(&args);
    }

    fn eval(&self, maps: &str, out: &str) -> String {
        let manifest = self.p("data/manifest.toml");
        let (maps, out) = (self.p(maps), self.p(out));
        ok(&["eval", "--manifest", &manifest, "--maps", &maps, "--out", &out]);
        std::fs::read_to_string(self.root.join(out).join("report.kv")).unwrap()
    }
}

fn kv(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn help_lists_reference_defaults() {
    let help = ok(&["train", "--help"]);
    for needle in [
        "--n <N>",
        "--alpha_local",
        "[default: 16]",
        "[default: 0.95]",
        "[default: 0.3]",
        "[default: 0.01]",
        "[default: 100]",
        "[default: 50]",
        "[default: 64]",
    ] {
        assert!(help.contains(needle), "missing {needle:?} in\n{help}");
    }
    assert!(ok(&["infer", "--help"]).contains("[default: 224]"));
}

#[test]
fn usage_errors_exit_with_two() {
    let out = otproto(&["train", "--manifest", "m.toml", "--out", "o", "--no_such_flag", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = otproto(&["train", "--manifest", "/nonexistent/manifest.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest not found"));

    let run = Run::new();
    run.synth(&[]);
    let manifest = run.p("data/manifest.toml");
    let out = otproto(&["train", "--manifest", &manifest, "--out", &run.p("ck"), "--n", "8", "--batch_size", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_scales_give_four_checkpoints_and_a_parsable_log() {
    let run = Run::new();
    run.synth(&["--scales", "2:8x8,3:4x4"]);
    run.train("ck", &["--epochs", "2"]);
    let mut names: Vec<String> = std::fs::read_dir(run.root.join("ck"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".prdt"))
        .collect();
    names.sort();
    assert_eq!(names, ["s2_global.prdt", "s2_local.prdt", "s3_global.prdt", "s3_local.prdt"]);

    let log = std::fs::read_to_string(run.root.join("ck/train.log")).unwrap();
    assert!(log.lines().all(|l| l.starts_with("train ")));
    let epochs: Vec<&str> = log.lines().filter(|l| l.starts_with("train epoch ")).collect();
    assert_eq!(epochs.len(), 2 * 4);
    for line in epochs {
        for field in ["mean_cost=", "converged_fraction=", "scale=", "bank="] {
            assert!(line.contains(field), "{line}");
        }
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let run = Run::new();
    run.synth(&[]);
    let cfg = run.root.join("train.cfg");
    std::fs::write(&cfg, "# short run\nepochs = 1\nalpha_local = 0.5\n").unwrap();
    run.train("ck", &["--config", &s(&cfg), "--epochs", "2"]);
    let written = std::fs::read_to_string(run.root.join("ck/config.txt")).unwrap();
    assert!(written.contains("epochs = 2"), "{written}");
    assert!(written.contains("alpha_local = 0.5"), "{written}");
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let run = Run::new();
    run.synth(&[]);
    run.train("full", &["--epochs", "4"]);
    run.train("part", &["--epochs", "2"]);
    run.train("part", &["--epochs", "4", "--resume"]);
    for name in ["s2_global.prdt", "s2_local.prdt"] {
        let a = std::fs::read(run.root.join("full").join(name)).unwrap();
        let b = std::fs::read(run.root.join("part").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn training_samples_score_near_zero_without_noise() {
    let run = Run::new();
    run.synth(&["--noise", "0"]);
    run.train("ck", &["--epochs", "3", "--eta", "0"]);
    run.infer("inf", &["--split", "train", "--bank", "global"]);
    let m = DatasetManifest::load(&run.root.join("data/manifest.toml")).unwrap();
    for sample in m.split(Split::Train) {
        let map = read_map(&run.root.join(format!("inf/maps/{}.amap", sample.id))).unwrap();
        assert!(map.image_score() <= 1e-6, "{}: {}", sample.id, map.image_score());
    }
}

#[test]
fn identical_test_images_get_identical_maps() {
    let run = Run::new();
    run.synth(&[]);
    run.train("ck", &["--epochs", "1"]);
    let text = r#"
category = "twins"

[[samples]]
id = "t"
split = "train"
grids = [{ scale = 2, path = "grids/train_000_s2.fgrd" }]

[[samples]]
id = "x"
split = "test"
grids = [{ scale = 2, path = "grids/test_logical_000_s2.fgrd" }]

[[samples]]
id = "y"
split = "test"
grids = [{ scale = 2, path = "grids/test_logical_000_s2.fgrd" }]
"#;
    let manifest = run.root.join("data/twins.toml");
    std::fs::write(&manifest, text).unwrap();
    ok(&["infer", "--manifest", &s(&manifest), "--checkpoints", &run.p("ck"), "--out", &run.p("twins")]);
    let x = std::fs::read(run.root.join("twins/maps/x.amap")).unwrap();
    let y = std::fs::read(run.root.join("twins/maps/y.amap")).unwrap();
    assert_eq!(x, y);
    let scores = std::fs::read_to_string(run.root.join("twins/scores.tsv")).unwrap();
    assert_eq!(scores.lines().count(), 3);
}

#[test]
fn missing_checkpoint_names_the_scale() {
    let run = Run::new();
    run.synth(&["--scales", "2:8x8,3:4x4"]);
    run.train("ck", &["--epochs", "1"]);
    std::fs::remove_file(run.root.join("ck/s3_local.prdt")).unwrap();
    let manifest = run.p("data/manifest.toml");
    let out = otproto(&["infer", "--manifest", &manifest, "--checkpoints", &run.p("ck"), "--out", &run.p("inf")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scale 3"), "{err}");
}

#[test]
fn perfect_and_constant_maps() {
    let run = Run::new();
    run.synth(&["--kinds", "logical,structural"]);
    let m = DatasetManifest::load(&run.root.join("data/manifest.toml")).unwrap();
    for sample in m.split(Split::Test) {
        let mask = m.load_mask(sample).unwrap().unwrap();
        let perfect: Vec<f32> = mask.pixels.iter().map(|&p| if p != 0 { 1.0 } else { 0.0 }).collect();
        let flat = vec![0.5f32; perfect.len()];
        let path = |dir: &str| run.root.join(format!("{dir}/{}.amap", sample.id));
        write_map(&path("perfect"), &AnomalyMap::new(mask.height, mask.width, perfect).unwrap()).unwrap();
        write_map(&path("flat"), &AnomalyMap::new(mask.height, mask.width, flat).unwrap()).unwrap();
    }
    let report = run.eval("perfect", "ev_perfect");
    for group in ["all", "logical", "structural"] {
        for metric in ["image_auroc", "pixel_auroc", "au_spro"] {
            assert_eq!(kv(&report, &format!("synth.{group}.{metric}")), 1.0, "{group} {metric}");
        }
    }
    let report = run.eval("flat", "ev_flat");
    assert_eq!(kv(&report, "synth.all.image_auroc"), 0.5);
    assert!(std::fs::read_to_string(run.root.join("ev_flat/report.txt")).unwrap().contains("au_spro@0.05"));
}

#[test]
fn local_bank_localizes_misplaced_features_better() {
    let run = Run::new();
    run.synth(&[]);
    run.train("ck", &["--epochs", "20", "--alpha_local", "0.5"]);
    run.infer("global", &["--bank", "global"]);
    run.infer("local", &["--bank", "local"]);
    let g = run.eval("global/maps", "ev_global");
    let l = run.eval("local/maps", "ev_local");
    let (g, l) = (kv(&g, "synth.logical.au_spro"), kv(&l, "synth.logical.au_spro"));
    assert!(l > g, "local {l} vs global {g}");
}

#[test]
fn exports_cover_every_prototype_and_cell() {
    let run = Run::new();
    run.synth(&[]);
    run.train("ck", &["--epochs", "1"]);
    let manifest = run.p("data/manifest.toml");
    ok(&["export-protos", "--manifest", &manifest, "--checkpoints", &run.p("ck"), "--out", &run.p("ex")]);
    let prov = std::fs::read_to_string(run.root.join("ex/provenance_s2_local.tsv")).unwrap();
    assert_eq!(prov.lines().count(), 1 + 2 * 64);

    ok(&[
        "assignments", "--manifest", &manifest, "--checkpoints", &run.p("ck"), "--out", &run.p("as"), "--sample", "test_logical_000",
    ]);
    let a = std::fs::read_to_string(run.root.join("as/test_logical_000_s2_global.tsv")).unwrap();
    assert_eq!(a.lines().count(), 1 + 64);
    let r = std::fs::read_to_string(run.root.join("as/test_logical_000_s2_local_restore.tsv")).unwrap();
    assert_eq!(r.lines().count(), 1 + 64);
    assert!(r.lines().skip(1).all(|l| l.split('\t').nth(2).unwrap().starts_with("train_")));

    let out = otproto(&["assignments", "--manifest", &manifest, "--checkpoints", &run.p("ck"), "--out", &run.p("as"), "--sample", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}
