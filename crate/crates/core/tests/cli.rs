use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pragmatic_color::colorspace::{delta_e_rgb, Rgb};
use pragmatic_color::dataset::{load_samples, load_triples, mean_rgb, CorpusFiles};
use pragmatic_color::manifest::RunManifest;
use pragmatic_color::net::{param_count, Direction, ModelArtifact};

fn pragcolor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pragcolor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pragcolor(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> CorpusFiles {
    let out = dir.join("corpus");
    let mut args = vec!["synth", "--out", s(&out)];
    args.extend_from_slice(extra);
    let printed = ok(&args);
    assert_eq!(printed.lines().count(), 3);
    CorpusFiles {
        triples: out.join("triples.csv"),
        samples: out.join("samples.csv"),
        embeddings: out.join("embeddings.txt"),
    }
}

fn train(files: &CorpusFiles, direction: &str, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--triples",
        s(&files.triples),
        "--samples",
        s(&files.samples),
        "--embeddings",
        s(&files.embeddings),
        "--direction",
        direction,
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_round_trips_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(&dir.path().join("a"), &[]);
    let b = synth(&dir.path().join("b"), &[]);
    let triples = load_triples(&a.triples).unwrap();
    assert_eq!(triples.len(), 48);
    assert_eq!(load_samples(&a.samples).unwrap().len(), 8 + 48);
    for (x, y) in [(&a.triples, &b.triples), (&a.samples, &b.samples), (&a.embeddings, &b.embeddings)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

#[test]
fn synth_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.cfg");
    std::fs::write(&cfg, "num_refs = 3\nnum_mods = 2\n# tiny\nembed_dim = 4\n").unwrap();
    let files = synth(dir.path(), &["--config", s(&cfg)]);
    assert_eq!(load_triples(&files.triples).unwrap().len(), 6);
}

#[test]
fn train_one_epoch_writes_artifact_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let files = synth(dir.path(), &[]);
    let model = dir.path().join("speaker.pcg");
    train(&files, "speaker", &model, &["--epochs", "1", "--seed", "3"]);
    let artifact = ModelArtifact::load(&model).unwrap();
    assert_eq!(artifact.direction, Direction::Speaker);
    assert_eq!(artifact.net.count_params(), param_count(16, 30));
    assert_eq!(artifact.config.epochs, 1);
    assert_eq!(artifact.config.seed, 3);

    let trace = std::fs::read_to_string(dir.path().join("speaker.loss.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "epoch,loss");
    assert_eq!(lines.len(), 2);
    let loss: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(loss.is_finite() && loss > 0.0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let files = synth(dir.path(), &[]);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 5\nhidden = 4\n").unwrap();
    let model = dir.path().join("listener.json");
    train(&files, "listener", &model, &["--config", s(&cfg), "--epochs", "2"]);
    let artifact = ModelArtifact::load(&model).unwrap();
    assert_eq!(artifact.direction, Direction::Listener);
    assert_eq!(artifact.config.epochs, 2);
    assert_eq!(artifact.net.hidden(), 4);
    let trace = std::fs::read_to_string(dir.path().join("listener.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

struct Trained {
    _dir: tempfile::TempDir,
    files: CorpusFiles,
    speaker: PathBuf,
    listener: PathBuf,
}

fn trained(epochs: &str) -> Trained {
    let dir = tempfile::tempdir().unwrap();
    let files = synth(dir.path(), &[]);
    let speaker = dir.path().join("s.pcg");
    let listener = dir.path().join("l.pcg");
    train(&files, "speaker", &speaker, &["--epochs", epochs]);
    train(&files, "listener", &listener, &["--epochs", epochs, "--seed", "1"]);
    Trained {
        _dir: dir,
        files,
        speaker,
        listener,
    }
}

fn predict(t: &Trained, extra: &[&str]) -> String {
    let mut args = vec![
        "predict",
        "--speaker",
        s(&t.speaker),
        "--listener",
        s(&t.listener),
        "--samples",
        s(&t.files.samples),
        "--embeddings",
        s(&t.files.embeddings),
        "--ref-label",
        "ref2",
        "--modifier",
        "mod3",
    ];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn predict_single_candidate_has_probability_one() {
    let t = trained("2");
    let out = predict(&t, &["--n", "1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3, "{out}");
    assert!(lines[0].starts_with("chosen,"));
    assert_eq!(lines[1], "index,r,g,b,hex,s0,l1r,s2r");
    assert!(lines[2].ends_with(",1.000000,1.000000,1.000000"), "{}", lines[2]);
}

#[test]
fn predict_lambda_zero_matches_literal_only() {
    let t = trained("2");
    let pragmatic = predict(&t, &["--lambda", "0", "--seed", "11"]);
    let literal = predict(&t, &["--literal-only", "--seed", "11"]);
    let (p, l): (Vec<&str>, Vec<&str>) = (pragmatic.lines().collect(), literal.lines().collect());
    assert_eq!(p.len(), 12);
    assert_eq!(p[0], l[0]);
    for (a, b) in p[2..].iter().zip(&l[2..]) {
        let cut = |x: &str| x.rsplitn(3, ',').nth(2).unwrap().to_string();
        assert_eq!(cut(a), cut(b));
        assert!(b.ends_with(",-,-"));
    }
    // same seed, same output
    assert_eq!(pragmatic, predict(&t, &["--lambda", "0", "--seed", "11"]));
}

#[test]
fn trained_prediction_lands_on_constructed_target() {
    let t = trained("500");
    let out = predict(&t, &[]);
    let chosen: Vec<f64> = out.lines().next().unwrap().split(',').skip(1).take(3).map(|v| v.parse().unwrap()).collect();
    let samples = load_samples(&t.files.samples).unwrap();
    let target = mean_rgb(samples.get("mod3 ref2").unwrap(), None).unwrap();
    let de = delta_e_rgb(target, Rgb::new(chosen[0], chosen[1], chosen[2]));
    assert!(de < 1.0, "delta-E {de}");
}

#[test]
fn swatch_formats() {
    let dir = tempfile::tempdir().unwrap();
    let ppm = dir.path().join("bars.ppm");
    ok(&["swatch", "--colors", "#ffffff", "--out", s(&ppm), "--cell-width", "2", "--row-height", "2"]);
    let bytes = std::fs::read(&ppm).unwrap();
    assert_eq!(&bytes[..11], b"P6\n2 2\n255\n");
    assert!(bytes[11..].iter().all(|&b| b == 0xff));
    assert_eq!(bytes.len(), 11 + 12);

    let svg = dir.path().join("bars.svg");
    ok(&["swatch", "--colors", "#102030,40/50/60;#000000,#ffffff", "--format", "svg", "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<rect").count(), 4);
    assert!(text.contains("fill=\"#28323c\""));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| pragcolor(args).status.code().unwrap();
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["swatch", "--colors", "#12", "--out", "/tmp/never.ppm"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let files = synth(dir.path(), &[]);
    let data = |triples: &Path| {
        vec![
            "train".to_string(),
            "--triples".into(),
            s(triples).into(),
            "--samples".into(),
            s(&files.samples).into(),
            "--embeddings".into(),
            s(&files.embeddings).into(),
            "--direction".into(),
            "speaker".into(),
            "--out".into(),
            s(&dir.path().join("m.pcg")).into(),
        ]
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        pragcolor(&refs).status.code().unwrap()
    };
    assert_eq!(run(data(&missing)), 2);
    let mut bad_direction = data(&files.triples);
    bad_direction[8] = "sideways".into();
    assert_eq!(run(bad_direction), 1);

    let cfg = dir.path().join("diverge.cfg");
    std::fs::write(&cfg, "optimizer = sgd\nlearning_rate = 1e300\nepochs = 50\n").unwrap();
    let mut diverging = data(&files.triples);
    diverging.extend(["--config".into(), s(&cfg).into()]);
    let out = {
        let refs: Vec<&str> = diverging.iter().map(String::as_str).collect();
        pragcolor(&refs)
    };
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn eval_outputs_validate_and_manifest_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let files = synth(dir.path(), &["--held-out"]);
    let out = dir.path().join("eval");
    ok(&[
        "eval",
        "--triples",
        s(&files.triples),
        "--samples",
        s(&files.samples),
        "--embeddings",
        s(&files.embeddings),
        "--seeds",
        "4",
        "--epochs",
        "20",
        "--out",
        s(&out),
    ]);

    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "split,metric,mean,sd,n_triples,n_runs");
    assert_eq!(rows.len(), 1 + 2 * 2 * 6);
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3], "0.000000", "{row}");
        assert_eq!(cols[5], "1");
    }

    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/metrics.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&metrics).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let manifest = RunManifest::load(&out.join("manifest.json")).unwrap();
    manifest.verify().unwrap();
    assert_eq!(manifest.seeds, vec![4]);
    assert_eq!(manifest.models.len(), 2);
    assert_eq!(manifest.config.train.epochs, 20);
    assert!(manifest.finished_unix_ms >= manifest.started_unix_ms);
    for model in &manifest.models {
        let artifact = ModelArtifact::load(&model.path).unwrap();
        assert_eq!(artifact.net.count_params(), param_count(16, 30));
    }
}

#[test]
fn schema_rejects_malformed_metrics() {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/metrics.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let bad = serde_json::json!({
        "schema_version": 1,
        "sd_convention": "sample",
        "seeds": [],
        "results": [],
        "runs": []
    });
    assert!(!validator.is_valid(&bad));
}
