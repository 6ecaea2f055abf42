//! End-to-end tests of the `dgnn` binary: exit codes, artifact
//! formats, determinism, resume fidelity, and agreement with the
//! library on every reported number.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgnn_cli::checkpoint::Checkpoint;
use dgnn_cli::runs::{feature_table_after, lp_metrics, store_after};
use dgnn_core::data::load_events;
use dgnn_core::eval::{pairs_from_edges, temporal_split};
use dgnn_core::graph::NodeId;
use dgnn_core::model::ModelParams;
use dgnn_core::synth::{community_labels, stream_as_tsv, three_community_stream, SynthConfig};
use dgnn_core::train::params_seed;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small planted-community stream written in the edge-file format.
fn synth_file(dir: &Path, cfg: &SynthConfig) -> PathBuf {
    let path = dir.join("stream.tsv");
    std::fs::write(&path, stream_as_tsv(&three_community_stream(cfg))).unwrap();
    path
}

fn small_cfg() -> SynthConfig {
    SynthConfig {
        nodes: 30,
        communities: 3,
        events: 400,
        partners_per_node: 3,
        mean_gap: 0.05,
        seed: 77,
        ..SynthConfig::default()
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn validate_reports_counts_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());

    let out = run(&["validate", data.to_str().unwrap()]);
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("events: 400"), "{text}");
    assert!(text.contains("nodes: 30"), "{text}");
    assert!(text.contains("input_sorted: yes"), "{text}");

    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let out = run(&["validate", empty.to_str().unwrap()]);
    assert_ok(&out);
    assert!(stdout(&out).contains("events: 0"), "{}", stdout(&out));
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "a b 0\nonly two\n").unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let unsorted = dir.path().join("unsorted.tsv");
    std::fs::write(&unsorted, "a b 100\nb c 50\n").unwrap();
    let out = run(&["validate", unsorted.to_str().unwrap()]);
    assert_code(&out, 2);
    let out = run(&["validate", unsorted.to_str().unwrap(), "--sort"]);
    assert_ok(&out);
    assert!(stdout(&out).contains("sorted on load"), "{}", stdout(&out));
}

#[test]
fn config_file_resolution_and_flag_priority() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "dim=8\nepochs=2\nbatch=100\nseed=5\n# comment\n").unwrap();

    let out_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--dim",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let ckpt = Checkpoint::load(&out_dir.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.settings.hp.dim, 4, "flag beats config");
    assert_eq!(ckpt.settings.train.epochs, 2, "config beats default");
    assert_eq!(ckpt.settings.train.batch_size, 100);
    assert_eq!(ckpt.settings.train.seed, 5);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "epochs=2\nbogus=1\n").unwrap();
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let err = stderr(&out);
    assert!(err.contains("bogus") && err.contains("line 2"), "{err}");
}

#[test]
fn train_is_deterministic_and_lr_zero_freezes_params() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let common = [
        "--dim", "8", "--epochs", "2", "--batch", "100", "--seed", "3",
    ];

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let mut args = vec!["train", "--data", data.to_str().unwrap()];
        args.extend_from_slice(&common);
        args.extend_from_slice(&["--out", out_dir.to_str().unwrap()]);
        assert_ok(&run(&args));
    }
    assert_eq!(
        read(&a.join("metrics.csv")),
        read(&b.join("metrics.csv")),
        "fixed seed must give byte-identical metrics"
    );
    assert_eq!(
        std::fs::read(a.join("model.ckpt")).unwrap(),
        std::fs::read(b.join("model.ckpt")).unwrap(),
        "fixed seed must give byte-identical checkpoints"
    );
    let header = read(&a.join("metrics.csv"));
    assert!(header.starts_with("epoch,mean_loss,val_metric\n"), "{header}");

    let frozen = dir.path().join("frozen");
    let mut args = vec!["train", "--data", data.to_str().unwrap()];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--lr", "0", "--out", frozen.to_str().unwrap()]);
    assert_ok(&run(&args));
    let ckpt = Checkpoint::load(&frozen.join("model.ckpt")).unwrap();
    let init = ModelParams::init(8, 1, params_seed(3));
    assert_eq!(ckpt.last_flat, init.flatten(), "lr=0 must not move params");
    assert_eq!(ckpt.best.unwrap().flat, init.flatten());
}

#[test]
fn resume_reproduces_uninterrupted_training() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let base = ["--dim", "8", "--batch", "100", "--seed", "9"];

    let straight = dir.path().join("straight");
    let mut args = vec!["train", "--data", data.to_str().unwrap()];
    args.extend_from_slice(&base);
    args.extend_from_slice(&["--epochs", "3", "--out", straight.to_str().unwrap()]);
    assert_ok(&run(&args));

    let part = dir.path().join("part");
    let mut args = vec!["train", "--data", data.to_str().unwrap()];
    args.extend_from_slice(&base);
    args.extend_from_slice(&["--epochs", "2", "--out", part.to_str().unwrap()]);
    assert_ok(&run(&args));

    let resumed = dir.path().join("resumed");
    let part_ckpt = part.join("model.ckpt");
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--resume",
        part_ckpt.to_str().unwrap(),
        "--epochs",
        "3",
        "--out",
        resumed.to_str().unwrap(),
    ]);
    assert_ok(&out);

    assert_eq!(
        std::fs::read(straight.join("model.ckpt")).unwrap(),
        std::fs::read(resumed.join("model.ckpt")).unwrap(),
        "checkpoint round-trip plus one epoch must equal uninterrupted training"
    );
    let rows: Vec<String> = read(&resumed.join("metrics.csv"))
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(rows.len(), 2, "header plus the one resumed epoch: {rows:?}");
    assert!(rows[1].starts_with("2,"), "resumed row is epoch 2: {rows:?}");

    // Resuming past the target is an input error.
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--resume",
        part_ckpt.to_str().unwrap(),
        "--epochs",
        "1",
        "--out",
        resumed.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn eval_matches_the_library_on_every_number() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let run_dir = dir.path().join("run");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "2",
        "--batch",
        "100",
        "--seed",
        "7",
        "--out",
        run_dir.to_str().unwrap(),
    ]));

    let eval_dir = dir.path().join("eval");
    let ckpt_path = run_dir.join("model.ckpt");
    assert_ok(&run(&[
        "eval",
        "--checkpoint",
        ckpt_path.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--split",
        "test",
        "--dump-ranks",
        "--out",
        eval_dir.to_str().unwrap(),
    ]));

    // Independent pass over the same artifacts through the library.
    let ckpt = Checkpoint::load(&ckpt_path).unwrap();
    let settings = &ckpt.settings;
    let dataset = load_events(&data, settings.sort, settings.time_unit_seconds).unwrap();
    let split = temporal_split(&dataset.events);
    let params = ckpt.best_params().unwrap();
    let table = feature_table_after(split.train, &params, settings).unwrap();
    let pairs = pairs_from_edges(split.test);
    let (report, mrr, r20, r50) = lp_metrics(&pairs, &table).unwrap();

    let csv = read(&eval_dir.join("results.csv"));
    let tau = settings.hp.tau;
    let expected = format!(
        "metric,value,k,seed,variant,tau\n\
         mrr,{mrr:?},,7,full,{tau:?}\n\
         recall,{r20:?},20,7,full,{tau:?}\n\
         recall,{r50:?},50,7,full,{tau:?}\n"
    );
    assert_eq!(csv, expected);

    // The audit dump lists each ranked pair; its reciprocal ranks
    // average back to the reported MRR.
    let ranks = read(&eval_dir.join("ranks.csv"));
    let rows: Vec<&str> = ranks.lines().skip(1).collect();
    assert_eq!(rows.len(), report.results.len());
    let recomputed: f64 = rows
        .iter()
        .map(|r| 1.0 / r.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .sum::<f64>()
        / rows.len() as f64;
    assert!((recomputed - mrr).abs() < 1e-12, "{recomputed} vs {mrr}");

    let summary: serde_json::Value =
        serde_json::from_str(&read(&eval_dir.join("summary.json"))).unwrap();
    assert_eq!(summary["metrics"]["mrr"].as_f64().unwrap(), mrr);
    assert_eq!(
        summary["unseen_pairs"].as_u64().unwrap() as usize,
        report.unseen_pairs
    );
    assert_eq!(
        summary["pairs_ranked"].as_u64().unwrap() as usize,
        report.results.len()
    );
    assert_eq!(summary["task"], "link_prediction");
    assert_eq!(summary["split"], "test");
}

#[test]
fn export_roundtrips_every_vector() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let run_dir = dir.path().join("run");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--dim",
        "6",
        "--epochs",
        "1",
        "--batch",
        "100",
        "--seed",
        "11",
        "--out",
        run_dir.to_str().unwrap(),
    ]));

    let ckpt_path = run_dir.join("model.ckpt");
    let exported = dir.path().join("embeddings.tsv");
    assert_ok(&run(&[
        "export",
        "--checkpoint",
        ckpt_path.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        exported.to_str().unwrap(),
    ]));

    let ckpt = Checkpoint::load(&ckpt_path).unwrap();
    let dataset = load_events(&data, false, ckpt.settings.time_unit_seconds).unwrap();
    let params = ckpt.best_params().unwrap();
    let store = store_after(&dataset.events, &params, &ckpt.settings).unwrap();

    let text = read(&exported);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), dataset.n_nodes(), "one line per mapped node");
    for (idx, line) in lines.iter().enumerate() {
        let (name, rest) = line.split_once('\t').expect("name TAB values");
        assert_eq!(name, dataset.node_names[idx]);
        let values: Vec<f64> = rest
            .split(' ')
            .map(|v| v.parse().expect("round-trippable float"))
            .collect();
        assert_eq!(values.len(), 6, "d columns per row");
        let state = store.state(NodeId(idx as u32)).unwrap();
        assert_eq!(values, state.u.data(), "bit-identical reload");
    }

    let again = dir.path().join("embeddings2.tsv");
    assert_ok(&run(&[
        "export",
        "--checkpoint",
        ckpt_path.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]));
    assert_eq!(read(&exported), read(&again), "export is deterministic");
}

#[test]
fn ablation_table_and_tau_zero_equal_propagation_off() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let common = [
        "--dim", "6", "--epochs", "1", "--batch", "100", "--seed", "13",
    ];

    let ab_dir = dir.path().join("ablate");
    let mut args = vec!["ablate", "--data", data.to_str().unwrap()];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--variants", "prop", "--out", ab_dir.to_str().unwrap()]);
    assert_ok(&run(&args));
    let ablation = read(&ab_dir.join("ablation.csv"));
    let rows: Vec<&str> = ablation.lines().collect();
    assert_eq!(rows[0], "variant,mrr,recall_at_20,recall_at_50");
    assert!(rows[1].starts_with("full,"), "{ablation}");
    assert!(rows[2].starts_with("prop,"), "{ablation}");
    assert_eq!(rows.len(), 3);

    let sw_dir = dir.path().join("sweep");
    let mut args = vec!["sweep-tau", "--data", data.to_str().unwrap()];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--taus", "50,0", "--out", sw_dir.to_str().unwrap()]);
    assert_ok(&run(&args));
    let sweep = read(&sw_dir.join("sweep.csv"));
    let srows: Vec<&str> = sweep.lines().collect();
    assert_eq!(srows[0], "tau,mrr");
    assert!(srows[1].starts_with("0.0,"), "ascending: {sweep}");
    assert!(srows[2].starts_with("50.0,"), "{sweep}");

    // With every inter-event gap positive, a zero threshold admits no
    // neighbors, which is exactly propagation-off.
    let prop_mrr = rows[2].split(',').nth(1).unwrap();
    let tau0_mrr = srows[1].split(',').nth(1).unwrap();
    assert_eq!(prop_mrr, tau0_mrr);
}

#[test]
fn eval_rejects_a_mismatched_dataset() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(dir.path(), &small_cfg());
    let run_dir = dir.path().join("run");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--dim",
        "4",
        "--epochs",
        "1",
        "--batch",
        "100",
        "--out",
        run_dir.to_str().unwrap(),
    ]));

    let other = dir.path().join("other.tsv");
    std::fs::write(&other, "x y 0\ny z 86400\nz x 172800\n").unwrap();
    for split in ["test", "nonsense"] {
        let out = run(&[
            "eval",
            "--checkpoint",
            run_dir.join("model.ckpt").to_str().unwrap(),
            "--data",
            other.to_str().unwrap(),
            "--split",
            split,
            "--out",
            dir.path().join("eval").to_str().unwrap(),
        ]);
        assert_code(&out, 2);
    }
}

#[test]
fn node_classification_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = small_cfg();
    let data = synth_file(dir.path(), &cfg);
    let labels_path = dir.path().join("labels.tsv");
    let mut labels_text = String::new();
    for (node, community) in community_labels(&cfg) {
        labels_text.push_str(&format!("{node}\tc{community}\n"));
    }
    std::fs::write(&labels_path, labels_text).unwrap();

    let run_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--labels",
        labels_path.to_str().unwrap(),
        "--task",
        "nc",
        "--dim",
        "6",
        "--epochs",
        "2",
        "--batch",
        "100",
        "--seed",
        "21",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let ckpt = Checkpoint::load(&run_dir.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.n_classes, 3);

    let eval_dir = dir.path().join("eval");
    let out = run(&[
        "eval",
        "--checkpoint",
        run_dir.join("model.ckpt").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--labels",
        labels_path.to_str().unwrap(),
        "--split",
        "test",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = read(&eval_dir.join("results.csv"));
    assert!(csv.starts_with("metric,value,k,seed,variant,tau\nf1_micro,"), "{csv}");
    assert!(csv.contains("\nf1_macro,"), "{csv}");
    assert!(csv.contains(",21,full,"), "seed and variant recorded: {csv}");
    let summary: serde_json::Value =
        serde_json::from_str(&read(&eval_dir.join("summary.json"))).unwrap();
    assert_eq!(summary["classes"].as_u64(), Some(3));

    // Forgetting the label file is an input error, not a crash.
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--task",
        "nc",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("--labels"), "{}", stderr(&out));
}

/// Full-dataset statistics of the real message network, when present.
#[test]
#[ignore = "needs the real message-network dataset; set DGNN_UCI_PATH to its edge file"]
fn validate_real_dataset_statistics() {
    let path = std::env::var("DGNN_UCI_PATH").expect("DGNN_UCI_PATH");
    let out = run(&["validate", &path, "--sort"]);
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("events: 59835"), "{text}");
    assert!(text.contains("nodes: 1899"), "{text}");
    let days: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("duration_days: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((190.0..200.0).contains(&days), "duration {days}");
}
