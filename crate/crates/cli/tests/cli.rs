//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use setembed::training::{HyperGrid, LossKind, ModelKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_setembed"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

/// Four items, three attributes, enough weight structure for every command.
fn ingest_noisy(ws: &Workspace) {
    ws.write(
        "obs.tsv",
        "m1\tcomedy\t3\nm2\tcomedy\t1\nm2\tromance\t2\nm3\tromance\t4\nm4\tdrama\n",
    );
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("obs.tsv"),
        "--kind",
        "noisy",
        "--out-prefix",
        &ws.arg("noisy"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "items=4\nattributes=3\nnnz=5\n");
}

const TRAIN_CFG: &str = "batch_size=2\nlearning_rate=0.5\nreg_coeff=0\nneg_items=2\nneg_attrs=1\nepochs=40\nloss=crossEntropy\nmargin=1.0\nseed=7\ndims=8\nbeta=0.01\ntau=1.0\n";

#[test]
fn ingest_reports_counts_and_rejects_bad_input() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    assert!(ws.path("noisy.matrix.tsv.manifest.json").exists());

    ws.write("empty.tsv", "");
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("empty.tsv"),
        "--kind",
        "noisy",
        "--out-prefix",
        &ws.arg("x"),
    ]);
    assert_eq!(out.status.code(), Some(2));

    ws.write("bad.tsv", "m1\tcomedy\njunk-line\n");
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("bad.tsv"),
        "--kind",
        "noisy",
        "--out-prefix",
        &ws.arg("x"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));
}

#[test]
fn ingest_expands_hierarchy_for_ground_truth() {
    let ws = Workspace::new();
    ws.write("gt.tsv", "m1\tsci-fi\nm2\tcomedy\n");
    ws.write("hier.tsv", "sci-fi\tfiction\n");
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("gt.tsv"),
        "--hierarchy",
        &ws.arg("hier.tsv"),
        "--kind",
        "groundtruth",
        "--out-prefix",
        &ws.arg("gt"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "items=2\nattributes=3\nnnz=3\n");

    // cyclic hierarchy is a data error
    ws.write("cycle.tsv", "a\tb\nb\ta\n");
    ws.write("gt2.tsv", "m1\ta\nm2\tb\n");
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("gt2.tsv"),
        "--hierarchy",
        &ws.arg("cycle.tsv"),
        "--kind",
        "groundtruth",
        "--out-prefix",
        &ws.arg("gt2"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_is_seed_deterministic_across_runs() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    ws.write("train.cfg", TRAIN_CFG);
    for name in ["a.ckpt", "b.ckpt"] {
        let out = run(&[
            "train",
            "--matrix",
            &ws.arg("noisy.matrix.tsv"),
            "--catalog",
            &ws.arg("noisy.catalog.tsv"),
            "--config",
            &ws.arg("train.cfg"),
            "--kind",
            "vector",
            "--out",
            &ws.arg(name),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(ws.path("a.ckpt")).unwrap();
    let b = std::fs::read(ws.path("b.ckpt")).unwrap();
    assert_eq!(a, b);
    assert!(ws.path("a.ckpt.log.tsv").exists());

    // --seed overrides the config seed
    let out = run(&[
        "train",
        "--seed",
        "99",
        "--matrix",
        &ws.arg("noisy.matrix.tsv"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--config",
        &ws.arg("train.cfg"),
        "--kind",
        "vector",
        "--out",
        &ws.arg("c.ckpt"),
    ]);
    assert!(out.status.success());
    assert_ne!(a, std::fs::read(ws.path("c.ckpt")).unwrap());
}

#[test]
fn zero_learning_rate_warns_and_freezes_parameters() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    ws.write(
        "frozen.cfg",
        &TRAIN_CFG.replace("learning_rate=0.5", "learning_rate=0"),
    );
    ws.write(
        "frozen1.cfg",
        &TRAIN_CFG
            .replace("learning_rate=0.5", "learning_rate=0")
            .replace("epochs=40", "epochs=1"),
    );
    for (cfg, out_name) in [("frozen.cfg", "f40.ckpt"), ("frozen1.cfg", "f1.ckpt")] {
        let out = run(&[
            "train",
            "--matrix",
            &ws.arg("noisy.matrix.tsv"),
            "--catalog",
            &ws.arg("noisy.catalog.tsv"),
            "--config",
            &ws.arg(cfg),
            "--kind",
            "vector",
            "--out",
            &ws.arg(out_name),
        ]);
        assert!(out.status.success());
        assert!(stderr(&out).contains("learning_rate is 0"));
    }
    assert_eq!(
        std::fs::read(ws.path("f40.ckpt")).unwrap(),
        std::fs::read(ws.path("f1.ckpt")).unwrap()
    );
}

#[test]
fn divergence_exits_with_code_three() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    ws.write(
        "explode.cfg",
        "batch_size=1\nlearning_rate=1e200\nreg_coeff=0\nneg_items=2\nneg_attrs=1\nepochs=20\nloss=hinge\nmargin=1.0\nseed=1\ndims=4\n",
    );
    let out = run(&[
        "train",
        "--matrix",
        &ws.arg("noisy.matrix.tsv"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--config",
        &ws.arg("explode.cfg"),
        "--kind",
        "vector",
        "--out",
        &ws.arg("d.ckpt"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

fn train_checkpoints(ws: &Workspace) {
    ingest_noisy(ws);
    ws.write("train.cfg", TRAIN_CFG);
    let out = run(&[
        "train",
        "--matrix",
        &ws.arg("noisy.matrix.tsv"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--config",
        &ws.arg("train.cfg"),
        "--kind",
        "vector",
        "--out",
        &ws.arg("vec.ckpt"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    ws.write(
        "box.cfg",
        &TRAIN_CFG
            .replace("loss=crossEntropy", "loss=boxBce")
            .replace("learning_rate=0.5", "learning_rate=1.0"),
    );
    let out = run(&[
        "train",
        "--matrix",
        &ws.arg("noisy.matrix.tsv"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--config",
        &ws.arg("box.cfg"),
        "--kind",
        "box",
        "--out",
        &ws.arg("box.ckpt"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn query_prints_ranked_items_deterministically() {
    let ws = Workspace::new();
    train_checkpoints(&ws);
    let args = [
        "query",
        "--checkpoint",
        &ws.arg("vec.ckpt"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--strategy",
        "probabilistic",
        "-k",
        "3",
        "comedy & !romance",
    ];
    let first = run(&args.clone());
    assert!(first.status.success(), "{}", stderr(&first));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("1\t"));
    assert_eq!(lines[0].split('\t').count(), 3);
    assert_eq!(stdout(&run(&args)), text);

    // k = 0 prints nothing and succeeds
    let out = run(&[
        "query",
        "--checkpoint",
        &ws.arg("box.ckpt"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--strategy",
        "box",
        "-k",
        "0",
        "comedy",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());

    // unknown attribute names the token, exit 2
    let out = run(&[
        "query",
        "--checkpoint",
        &ws.arg("vec.ckpt"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--strategy",
        "algebraic",
        "westerns",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("westerns"));

    // strategy/kind mismatch is a usage error
    let out = run(&[
        "query",
        "--checkpoint",
        &ws.arg("vec.ckpt"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--strategy",
        "box",
        "comedy",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn binary_checkpoints_round_trip_through_query() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    ws.write("train.cfg", TRAIN_CFG);
    for format in ["text", "binary"] {
        let out = run(&[
            "--format",
            format,
            "train",
            "--matrix",
            &ws.arg("noisy.matrix.tsv"),
            "--catalog",
            &ws.arg("noisy.catalog.tsv"),
            "--config",
            &ws.arg("train.cfg"),
            "--kind",
            "vector",
            "--out",
            &ws.arg(&format!("{format}.ckpt")),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let query = |ckpt: &str| {
        stdout(&run(&[
            "query",
            "--checkpoint",
            &ws.arg(ckpt),
            "--catalog",
            &ws.arg("noisy.catalog.tsv"),
            "--strategy",
            "algebraic",
            "-k",
            "4",
            "comedy",
        ]))
    };
    assert_eq!(query("text.ckpt"), query("binary.ckpt"));
}

#[test]
fn genbench_emits_deterministic_benchmarks_and_eval_consumes_them() {
    let ws = Workspace::new();
    ws.write(
        "gt.tsv",
        "m1\tsci-fi\nm2\tsci-fi\nm2\tcomedy\nm3\tcomedy\nm4\tdrama\nm4\tcomedy\n",
    );
    let out = run(&[
        "ingest",
        "--observations",
        &ws.arg("gt.tsv"),
        "--kind",
        "groundtruth",
        "--out-prefix",
        &ws.arg("gt"),
    ]);
    assert!(out.status.success());
    for name in ["b1.jsonl", "b2.jsonl"] {
        let out = run(&[
            "genbench",
            "--matrix",
            &ws.arg("gt.matrix.tsv"),
            "--catalog",
            &ws.arg("gt.catalog.tsv"),
            "--out",
            &ws.arg(name),
            "--lift-min",
            "0.5",
            "--contain-max",
            "0.9",
            "--min-result",
            "1",
            "--max-result",
            "10",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("singleton=3"));
    }
    assert_eq!(
        std::fs::read(ws.path("b1.jsonl")).unwrap(),
        std::fs::read(ws.path("b2.jsonl")).unwrap()
    );

    let out = run(&[
        "eval",
        "--benchmark",
        &ws.arg("b1.jsonl"),
        "--catalog",
        &ws.arg("gt.catalog.tsv"),
        "--lookup-matrix",
        &ws.arg("gt.matrix.tsv"),
        "--ks",
        "1,2",
        "--out",
        &ws.arg("report.tsv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(ws.path("report.tsv")).unwrap();
    assert!(report.starts_with("task\tmethod\tk\tmeanPrecision\tnumQueries\n"));
    // ground-truth lookup over its own benchmark is perfect at k=1
    assert!(report.contains("singleton\tlookup\t1\t1.000000"));
    assert!(stdout(&out).contains("singleton"));

    let out = run(&[
        "benchstats",
        "--benchmark",
        &ws.arg("b1.jsonl"),
        "--matrix",
        &ws.arg("gt.matrix.tsv"),
        "--catalog",
        &ws.arg("gt.catalog.tsv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("singleton\t3\t1.000"));

    // a second eval run reproduces the report byte for byte
    let out = run(&[
        "eval",
        "--benchmark",
        &ws.arg("b1.jsonl"),
        "--catalog",
        &ws.arg("gt.catalog.tsv"),
        "--lookup-matrix",
        &ws.arg("gt.matrix.tsv"),
        "--ks",
        "1,2",
        "--out",
        &ws.arg("report2.tsv"),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(ws.path("report.tsv")).unwrap(),
        std::fs::read(ws.path("report2.tsv")).unwrap()
    );
}

#[test]
fn completeness_reproduces_hand_fixture() {
    let ws = Workspace::new();
    // countO = 10, countO' = 6, overlap = 4 for the lone attribute
    let gt: String = (0..10).map(|i| format!("m{i}\tg\n")).collect();
    let noisy: String = (6..12).map(|i| format!("m{i}\tg\n")).collect();
    ws.write("o.tsv", &gt);
    ws.write("op.tsv", &noisy);
    let out = run(&[
        "completeness",
        "--ground-truth",
        &ws.arg("o.tsv"),
        "--noisy",
        &ws.arg("op.tsv"),
        "--min-overlap",
        "1",
        "--out",
        &ws.arg("compl.tsv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(ws.path("compl.tsv")).unwrap();
    assert!(report.contains("g\t10\t6\t4\t15.000000\t0.666667\t0.400000"));
    assert!(stdout(&out).contains("aggregateCompletenessO=0.666667"));
}

#[test]
fn search_trains_and_reports_best_trial() {
    let ws = Workspace::new();
    ingest_noisy(&ws);
    ws.write(
        "grid.cfg",
        "trials=2\nbatch_size=2\nlearning_rate=0.5\nreg_coeff=0\nneg_items=1\nneg_attrs=1\nloss=crossEntropy\nmargin=1.0\ndims=8\nepochs=30\nbeta=0.01\ntau=1.0\n",
    );
    ws.write(
        "val.jsonl",
        "{\"query\":\"comedy\",\"items\":[\"m1\",\"m2\"]}\n{\"query\":\"romance\",\"items\":[\"m2\",\"m3\"]}\n{\"query\":\"drama\",\"items\":[\"m4\"]}\n",
    );
    let out = run(&[
        "search",
        "--matrix",
        &ws.arg("noisy.matrix.tsv"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--grid",
        &ws.arg("grid.cfg"),
        "--kind",
        "vector",
        "--val-benchmark",
        &ws.arg("val.jsonl"),
        "--val-all",
        "--out-prefix",
        &ws.arg("searchrun"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("best trial precisionAt1="));
    assert!(ws.path("searchrun.ckpt").exists());
    assert!(ws.path("searchrun.config").exists());
    let trials = std::fs::read_to_string(ws.path("searchrun.trials.tsv")).unwrap();
    assert_eq!(trials.lines().count(), 3); // header + two trials

    // the produced checkpoint answers queries
    let out = run(&[
        "query",
        "--checkpoint",
        &ws.arg("searchrun.ckpt"),
        "--catalog",
        &ws.arg("noisy.catalog.tsv"),
        "--strategy",
        "algebraic",
        "-k",
        "1",
        "comedy",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn shipped_default_grids_parse_to_the_stock_search_space() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let vector =
        HyperGrid::from_kv_str(&std::fs::read_to_string(configs.join("default_grid_vector.cfg")).unwrap())
            .unwrap();
    vector.validate(ModelKind::Vector).unwrap();
    assert_eq!(vector.learning_rates, vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]);
    assert_eq!(vector.batch_sizes, vec![128, 256, 512, 1024]);
    assert_eq!(vector.reg_coeffs, vec![1e-4, 1e-3, 1e-2]);
    assert_eq!(vector.dims, vec![100]);
    assert_eq!(vector.losses, vec![LossKind::Hinge, LossKind::CrossEntropy]);

    let boxes =
        HyperGrid::from_kv_str(&std::fs::read_to_string(configs.join("default_grid_box.cfg")).unwrap())
            .unwrap();
    boxes.validate(ModelKind::Box).unwrap();
    assert_eq!(boxes.betas, vec![1e-4, 1e-3, 1e-2, 1.0]);
    assert_eq!(boxes.taus, vec![0.1, 0.5, 1.0]);
}

#[test]
fn catalog_mismatch_is_rejected() {
    let ws = Workspace::new();
    train_checkpoints(&ws);
    // a different catalog with the same shape
    ws.write(
        "other.catalog.tsv",
        "#catalog\titems=4\tattributes=3\nI\tx1\nI\tx2\nI\tx3\nI\tx4\nA\tcomedy\nA\tromance\nA\tdrama\n",
    );
    let out = run(&[
        "query",
        "--checkpoint",
        &ws.arg("vec.ckpt"),
        "--catalog",
        &ws.arg("other.catalog.tsv"),
        "--strategy",
        "algebraic",
        "comedy",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("catalog"));
}
