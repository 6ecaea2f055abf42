//! End-to-end acceptance gate. Each test is one acceptance criterion
//! and the harness prints one pass/fail line per criterion. The last
//! two criteria exercise the real message-network dataset and only run
//! when `DGNN_UCI_PATH` points at its edge file
//! (`cargo test -p dgnn-core --test acceptance -- --ignored`).

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgnn_core::data::load_events;
use dgnn_core::eval::{
    evaluate_pairs, f1_scores, mrr, pairs_from_edges, rank_candidates, recall_at_k,
    temporal_split, Direction, FeatureMode, FeatureTable, TestPair,
};
use dgnn_core::graph::{GraphStore, InteractionEvent, NodeId, NodeState};
use dgnn_core::model::units::{
    attention_probe, interact, merge, mount_params, time_adjust_cell, update_unit,
};
use dgnn_core::model::{apply_event, apply_stream, BatchRunner, HyperParams, ModelParams};
use dgnn_core::ndmath::{finite_diff_check, Tape, Tensor, Var};
use dgnn_core::synth::{three_community_stream, SynthConfig};
use dgnn_core::train::{fit, lp_loss, store_seed, params_seed, TrainConfig};

fn ev(src: u32, dst: u32, t: f64) -> InteractionEvent {
    InteractionEvent {
        src: NodeId(src),
        dst: NodeId(dst),
        t,
    }
}

/// Random stream over `nodes` ids with uniform inter-event gaps and no
/// self-loops.
fn uniform_gap_stream(
    rng: &mut ChaCha8Rng,
    nodes: u32,
    events: usize,
    gap_lo: f64,
    gap_hi: f64,
) -> Vec<InteractionEvent> {
    let mut out = Vec::with_capacity(events);
    let mut t = 0.0;
    for _ in 0..events {
        t += rng.gen_range(gap_lo..gap_hi);
        let src = rng.gen_range(0..nodes);
        let dst = loop {
            let d = rng.gen_range(0..nodes);
            if d != src {
                break d;
            }
        };
        out.push(ev(src, dst, t));
    }
    out
}

/// Node ids in the order the engine first touches them (src before dst
/// within an event).
fn first_appearance(events: &[InteractionEvent]) -> Vec<NodeId> {
    let mut seen = BTreeSet::new();
    let mut order = Vec::new();
    for e in events {
        for v in [e.src, e.dst] {
            if seen.insert(v) {
                order.push(v);
            }
        }
    }
    order
}

/// Criterion 1: on a 20-event, 10-node stream (d=8, two negatives per
/// event, propagation on, threshold effectively infinite) the tape
/// gradient of the total link-prediction batch loss matches central
/// finite differences for every parameter scalar, max relative error
/// <= 1e-4, in under a minute.
#[test]
fn criterion_1_gradients_match_finite_differences() {
    let started = Instant::now();
    const DIM: usize = 8;
    const NODES: u32 = 10;
    const NEGATIVES: usize = 2;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let events = uniform_gap_stream(&mut rng, NODES, 20, 0.05, 0.5);
    // Negative endpoints are drawn once so the batch loss is a pure
    // function of the parameters.
    let negatives: Vec<Vec<NodeId>> = events
        .iter()
        .map(|e| {
            (0..NEGATIVES)
                .map(|_| loop {
                    let n = NodeId(rng.gen_range(0..NODES));
                    if n != e.dst {
                        break n;
                    }
                })
                .collect()
        })
        .collect();

    let hp = HyperParams {
        dim: DIM,
        tau: 1e9,
        ..HyperParams::default()
    };
    let params = ModelParams::init(DIM, 2, 0xACCE_1001);

    // One full batch, exactly as a training minibatch runs it: each
    // event's loss uses pre-event features, then the event is applied.
    let run = |p: &ModelParams, want_grads: bool| -> (f64, Vec<f64>) {
        let mut store = GraphStore::new(DIM, 0xACCE_2001);
        for v in 0..NODES {
            store.ensure_node(NodeId(v));
        }
        let mut runner = BatchRunner::new(&mut store, p, &hp).expect("runner");
        let lp = runner.param_vars().lp_proj;
        let mut total: Option<Var> = None;
        for (e, negs) in events.iter().zip(&negatives) {
            let u_src = runner.node_u(e.src).expect("src features");
            let u_dst = runner.node_u(e.dst).expect("dst features");
            let neg_us: Vec<Var> = negs
                .iter()
                .map(|&n| runner.node_u(n).expect("negative features"))
                .collect();
            let j = lp_loss(runner.tape_mut(), &lp, u_src, u_dst, &neg_us, false).expect("loss");
            total = Some(match total {
                None => j,
                Some(acc) => runner.tape_mut().add(acc, j).expect("sum"),
            });
            runner.process_event(*e).expect("event");
        }
        let root = total.expect("nonempty stream");
        let value = runner.tape().value(root).item();
        let grads = if want_grads {
            let g = runner.backward(root).expect("backward");
            let mut flat = Vec::new();
            for var in runner.param_vars().ordered() {
                flat.extend_from_slice(g.get_or_zeros(runner.tape(), var).data());
            }
            flat
        } else {
            Vec::new()
        };
        (value, grads)
    };

    let (_, grad_ad) = run(&params, true);
    let theta = params.flatten();
    assert_eq!(theta.len(), grad_ad.len(), "one gradient per parameter scalar");

    let mut probe = params.clone();
    let f = |t: &[f64]| {
        probe.assign_flat(t)?;
        Ok(run(&probe, false).0)
    };
    let worst = finite_diff_check(f, &theta, &grad_ad, 1e-5).expect("finite differences");
    assert!(
        worst <= 1e-4,
        "max relative gradient error {worst:e} over {} scalars",
        theta.len()
    );
    assert!(
        started.elapsed().as_secs() < 60,
        "took {:?}",
        started.elapsed()
    );
    println!(
        "criterion 1: PASS (max relative gradient error {worst:.2e} over {} parameter scalars, tolerance 1e-4)",
        theta.len()
    );
}

/// Criterion 2: with time intervals disabled the time-adjusted cell is
/// the input cell, within 1e-12, over 1,000 random draws; the update
/// unit degenerates to a standard recurrent step.
#[test]
fn criterion_2_disabled_time_intervals_leave_the_cell_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002);
    let hp_off = HyperParams {
        time_intervals_enabled: false,
        ..HyperParams::default()
    };
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let d = rng.gen_range(1..=8);
        let cell = Tensor::vector((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let w_d = Tensor::matrix(d, d, (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("square matrix");
        let b_d = Tensor::vector((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let dt = match trial % 4 {
            0 => 0.0,
            1 => rng.gen_range(0.0..1.0),
            2 => rng.gen_range(1.0..100.0),
            _ => rng.gen_range(100.0..1e7),
        };
        let mut tape = Tape::new();
        let cv = tape.leaf(cell.clone()).unwrap();
        let wv = tape.leaf(w_d).unwrap();
        let bv = tape.leaf(b_d).unwrap();
        let out = time_adjust_cell(&mut tape, wv, bv, cv, dt, &hp_off).unwrap();
        for (a, b) in tape.value(out).data().iter().zip(cell.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(
        worst <= 1e-12,
        "cell drifted by {worst:e} with intervals disabled"
    );

    // Sanity: the same machinery with intervals enabled does adjust the
    // cell for a positive interval, so the identity above is not an
    // artifact of a dead code path.
    let mut tape = Tape::new();
    let cell = Tensor::vector(vec![0.8, -0.3]);
    let cv = tape.leaf(cell.clone()).unwrap();
    let wv = tape
        .leaf(Tensor::matrix(2, 2, vec![0.5, -0.2, 0.1, 0.4]).unwrap())
        .unwrap();
    let bv = tape.leaf(Tensor::vector(vec![0.05, -0.1])).unwrap();
    let adjusted = time_adjust_cell(&mut tape, wv, bv, cv, 5.0, &HyperParams::default()).unwrap();
    assert_ne!(tape.value(adjusted).data(), cell.data());
    println!(
        "criterion 2: PASS (max cell drift {worst:.2e} over 1000 draws with intervals disabled, tolerance 1e-12)"
    );
}

/// Criterion 3: ranking metrics equal a brute-force full-sort oracle
/// exactly on 100 randomized instances of up to 500 candidates, and F1
/// micro/macro match a confusion-matrix oracle to 1e-12 on 50
/// randomized label sets.
#[test]
fn criterion_3_ranking_and_f1_match_independent_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0003);

    let mut engine_results = Vec::with_capacity(100);
    let mut oracle_ranks = Vec::with_capacity(100);
    for instance in 0..100 {
        let n = rng.gen_range(2..=500usize);
        let d = rng.gen_range(2..=8usize);
        let draw =
            |rng: &mut ChaCha8Rng| Tensor::vector((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let raw: Vec<(NodeId, Tensor, Tensor)> = (0..n)
            .map(|i| {
                let s = draw(&mut rng);
                let t = draw(&mut rng);
                (NodeId(i as u32), s, t)
            })
            .collect();
        let table = FeatureTable::from_rows(raw.clone());
        let direction = if rng.gen_bool(0.5) {
            Direction::FixSourceRankTargets
        } else {
            Direction::FixTargetRankSources
        };
        let pair = TestPair {
            query: NodeId(rng.gen_range(0..n as u32)),
            truth: NodeId(rng.gen_range(0..n as u32)),
            direction,
            t: 0.0,
        };
        let result = rank_candidates(&pair, &table, false).expect("rankable");

        // Brute force: score every candidate with independently coded
        // cosine, full-sort descending, place the truth optimistically.
        let query_feat = match direction {
            Direction::FixSourceRankTargets => &raw[pair.query.0 as usize].1,
            Direction::FixTargetRankSources => &raw[pair.query.0 as usize].2,
        };
        let score = |i: usize| -> f64 {
            let cand = match direction {
                Direction::FixSourceRankTargets => &raw[i].2,
                Direction::FixTargetRankSources => &raw[i].1,
            };
            let (mut dot, mut qq, mut cc) = (0.0, 0.0, 0.0);
            for (x, y) in query_feat.data().iter().zip(cand.data()) {
                dot += x * y;
                qq += x * x;
                cc += y * y;
            }
            if qq == 0.0 || cc == 0.0 {
                0.0
            } else {
                dot / (qq.sqrt() * cc.sqrt())
            }
        };
        let truth_score = score(pair.truth.0 as usize);
        let mut sorted: Vec<f64> = (0..n).map(score).collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
        let rank = sorted.iter().take_while(|&&s| s > truth_score).count() + 1;

        assert_eq!(result.rank, rank, "instance {instance} with {n} candidates");
        assert_eq!(result.candidates, n);
        engine_results.push(result);
        oracle_ranks.push(rank);
    }

    let oracle_mrr =
        oracle_ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / oracle_ranks.len() as f64;
    assert_eq!(mrr(&engine_results).unwrap(), oracle_mrr);
    for k in [20usize, 50] {
        let oracle_recall = oracle_ranks.iter().filter(|&&r| r <= k).count() as f64
            / oracle_ranks.len() as f64;
        assert_eq!(recall_at_k(&engine_results, k), oracle_recall, "recall@{k}");
    }

    for _ in 0..50 {
        let n_classes = rng.gen_range(2..=10usize);
        let len = rng.gen_range(1..=200usize);
        let truth: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_classes)).collect();
        let predicted: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_classes)).collect();
        let engine = f1_scores(&predicted, &truth, n_classes).expect("valid labels");

        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&p, &t) in predicted.iter().zip(&truth) {
            confusion[t][p] += 1;
        }
        let (mut tp_sum, mut fp_sum, mut fn_sum) = (0usize, 0usize, 0usize);
        let mut macro_sum = 0.0;
        for c in 0..n_classes {
            let tp = confusion[c][c];
            let fn_c = confusion[c].iter().sum::<usize>() - tp;
            let fp_c = (0..n_classes).map(|r| confusion[r][c]).sum::<usize>() - tp;
            tp_sum += tp;
            fp_sum += fp_c;
            fn_sum += fn_c;
            let denom = 2 * tp + fp_c + fn_c;
            macro_sum += if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            };
        }
        let micro_denom = 2 * tp_sum + fp_sum + fn_sum;
        let micro = if micro_denom == 0 {
            0.0
        } else {
            2.0 * tp_sum as f64 / micro_denom as f64
        };
        let macro_avg = macro_sum / n_classes as f64;
        assert!((engine.micro - micro).abs() <= 1e-12);
        assert!((engine.macro_avg - macro_avg).abs() <= 1e-12);
    }
    println!(
        "criterion 3: PASS (ranks, MRR, recall@k exact vs full-sort oracle on 100 instances; F1 micro/macro within 1e-12 on 50 label sets)"
    );
}

/// Criterion 4: over 1,000 events on a 50-node stream, each applied
/// event mutates only the endpoints and neighbors whose last
/// interaction is within the propagation threshold (full-store
/// snapshot diff, zero violations).
#[test]
fn criterion_4_events_touch_only_endpoints_and_recent_neighbors() {
    const DIM: usize = 4;
    const NODES: u32 = 50;
    const TAU: f64 = 5.0;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    // Bimodal gaps: bursts keep neighbors fresh, occasional long pauses
    // push them past the threshold, so both filter outcomes occur.
    let mut events = Vec::with_capacity(1000);
    let mut t = 0.0;
    for _ in 0..1000 {
        t += if rng.gen_bool(0.15) {
            rng.gen_range(2.0..9.0)
        } else {
            rng.gen_range(0.01..0.4)
        };
        let src = rng.gen_range(0..NODES);
        let dst = loop {
            let d = rng.gen_range(0..NODES);
            if d != src {
                break d;
            }
        };
        events.push(ev(src, dst, t));
    }

    let params = ModelParams::init(DIM, 2, 0xACCE_1004);
    let hp = HyperParams {
        dim: DIM,
        tau: TAU,
        ..HyperParams::default()
    };
    let mut store = GraphStore::new(DIM, 0xACCE_2004);
    let (mut fresh_total, mut stale_total, mut violations) = (0usize, 0usize, 0usize);

    for e in &events {
        let before: BTreeMap<NodeId, NodeState> = store
            .node_ids()
            .map(|v| (v, store.state(v).unwrap().clone()))
            .collect();
        let mut allowed: BTreeSet<NodeId> = [e.src, e.dst].into_iter().collect();
        for (n, t_last) in store.influenced_nodes(*e).iter_all() {
            if e.t - t_last <= TAU {
                allowed.insert(n);
                fresh_total += 1;
            } else {
                stale_total += 1;
            }
        }

        apply_event(&mut store, &params, &hp, *e).expect("event");

        for (v, old) in &before {
            let now = store.state(*v).unwrap();
            if now != old && !allowed.contains(v) {
                violations += 1;
            }
            // Only the endpoints' last-interaction clock may move.
            if now.last_event_time != old.last_event_time && *v != e.src && *v != e.dst {
                violations += 1;
            }
        }
        for v in store.node_ids() {
            if !before.contains_key(&v) && v != e.src && v != e.dst {
                violations += 1;
            }
        }
    }

    assert_eq!(violations, 0, "states changed outside the allowed sets");
    assert!(
        fresh_total > 0 && stale_total > 0,
        "threshold never cut both ways: fresh={fresh_total} stale={stale_total}"
    );
    println!(
        "criterion 4: PASS (1000 events, zero out-of-scope mutations; {fresh_total} fresh and {stale_total} stale neighbor visits)"
    );
}

/// Criterion 5: with propagation disabled (the flag the ablation
/// command drives) the engine's states are bit-identical to a pipeline
/// that never had a propagation step, and disabled attention weights
/// are uniform on a 3-neighbor probe.
#[test]
fn criterion_5_propagation_off_equals_update_only_pipeline_and_attention_uniform() {
    const DIM: usize = 6;
    const NODES: u32 = 40;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
    let events = uniform_gap_stream(&mut rng, NODES, 300, 0.02, 0.6);
    let params = ModelParams::init(DIM, 2, 0xACCE_1005);
    let hp = HyperParams {
        dim: DIM,
        propagation_enabled: false,
        ..HyperParams::default()
    };

    let mut engine_store = GraphStore::new(DIM, 0xACCE_2005);
    apply_stream(&mut engine_store, &params, &hp, &events, 64).expect("stream");

    // Update-only reference: interact, per-role recurrent update of the
    // two endpoints, merge, write back. No propagation code exists on
    // this path at all.
    let mut manual = GraphStore::new(DIM, 0xACCE_2005);
    for v in first_appearance(&events) {
        manual.ensure_node(v);
    }
    for e in &events {
        let src = manual.state(e.src).unwrap().clone();
        let dst = manual.state(e.dst).unwrap().clone();
        let dt_src = src.last_event_time.map_or(0.0, |last| e.t - last);
        let dt_dst = dst.last_event_time.map_or(0.0, |last| e.t - last);

        let mut tape = Tape::new();
        let pv = mount_params(&mut tape, &params).unwrap();
        let u_s = tape.leaf(src.u.clone()).unwrap();
        let u_d = tape.leaf(dst.u.clone()).unwrap();
        let c_ss = tape.leaf(src.c_src.clone()).unwrap();
        let h_ss = tape.leaf(src.h_src.clone()).unwrap();
        let h_st = tape.leaf(src.h_tgt.clone()).unwrap();
        let c_dt = tape.leaf(dst.c_tgt.clone()).unwrap();
        let h_dt = tape.leaf(dst.h_tgt.clone()).unwrap();
        let h_ds = tape.leaf(dst.h_src.clone()).unwrap();

        let e_info = interact(&mut tape, &pv.interact, u_s, u_d).unwrap();
        let (c_s2, h_s2) =
            update_unit(&mut tape, &pv.s_update, c_ss, h_ss, e_info, dt_src, &hp).unwrap();
        let (c_d2, h_d2) =
            update_unit(&mut tape, &pv.g_update, c_dt, h_dt, e_info, dt_dst, &hp).unwrap();
        let u_s2 = merge(&mut tape, &pv.merge, h_s2, h_st).unwrap();
        let u_d2 = merge(&mut tape, &pv.merge, h_ds, h_d2).unwrap();

        let new_src = NodeState {
            c_src: tape.value(c_s2).clone(),
            h_src: tape.value(h_s2).clone(),
            u: tape.value(u_s2).clone(),
            last_event_time: Some(e.t),
            ..src
        };
        let new_dst = NodeState {
            c_tgt: tape.value(c_d2).clone(),
            h_tgt: tape.value(h_d2).clone(),
            u: tape.value(u_d2).clone(),
            last_event_time: Some(e.t),
            ..dst
        };
        manual.set_state(e.src, new_src).unwrap();
        manual.set_state(e.dst, new_dst).unwrap();
    }

    assert_eq!(engine_store.len(), manual.len());
    for v in engine_store.node_ids().collect::<Vec<_>>() {
        assert_eq!(
            engine_store.state(v).unwrap(),
            manual.state(v).unwrap(),
            "node {v:?} diverged"
        );
    }

    // Attention probe: disabled weights are uniform over 3 neighbors.
    let neighbors = [
        Tensor::vector(vec![0.9, -0.2, 0.4]),
        Tensor::vector(vec![-0.5, 0.7, 0.1]),
        Tensor::vector(vec![0.2, 0.3, -0.8]),
    ];
    let center = Tensor::vector(vec![0.6, 0.6, -0.1]);
    let uniform = attention_probe(&neighbors, &center, false).unwrap();
    for &w in uniform.data() {
        assert!((w - 1.0 / 3.0).abs() <= 1e-12, "weight {w} not uniform");
    }
    // The same probe with attention enabled is not uniform, so the
    // disabled path is a real degeneration, not the general case.
    let attended = attention_probe(&neighbors, &center, true).unwrap();
    assert!(attended
        .data()
        .iter()
        .any(|&w| (w - 1.0 / 3.0).abs() > 1e-6));
    println!(
        "criterion 5: PASS (propagation-off states bit-identical to an update-only pipeline over 300 events; disabled attention uniform to 1e-12)"
    );
}

/// Criterion 6: on a seeded 3-community stream (300 nodes, 3,000
/// events, 90% intra-community), five epochs of training lift the MRR
/// on the held-out last 10% of events to at least 3x the MRR of frozen
/// random initial features, for each of 3 model seeds, in under ten
/// minutes.
#[test]
fn criterion_6_training_lifts_heldout_mrr_over_frozen_features() {
    let started = Instant::now();
    const DIM: usize = 64;

    // Two steady partners per node and minutes-scale gaps: state decay
    // is calibrated for day-scale idleness, so contacts must recur
    // faster than the memory fades for the stream to be learnable in
    // five epochs. Community size, event count, and the 90% intra rate
    // stay at their defaults.
    let synth = SynthConfig {
        partners_per_node: 2,
        mean_gap: 0.01,
        ..SynthConfig::default()
    };
    let events = three_community_stream(&synth);
    let split = temporal_split(&events);
    assert!(!split.degenerate);
    let pairs = pairs_from_edges(split.test);
    let hp = HyperParams {
        dim: DIM,
        ..HyperParams::default()
    };

    for seed in [1u64, 2, 3] {
        // Batch 50 takes 48 optimizer steps per epoch instead of the
        // default 12; the budget is five epochs, so steps are scarce.
        let cfg = TrainConfig {
            seed,
            batch_size: 50,
            lr: 2e-3,
            ..TrainConfig::default()
        };
        let outcome = fit(split.train, &cfg, &hp, 5, None).expect("training");

        // Trained features: re-stream the training prefix through the
        // fitted parameters, then project.
        let mut store = GraphStore::new(DIM, store_seed(seed));
        apply_stream(&mut store, &outcome.params, &hp, split.train, cfg.batch_size)
            .expect("feature stream");
        let table =
            FeatureTable::from_store(&store, &outcome.params, FeatureMode::Projected).unwrap();
        let report = evaluate_pairs(&pairs, &table, false).expect("ranking");
        let trained = mrr(&report.results).expect("rankable pairs");

        // Frozen baseline: the same nodes ranked by their random
        // initial features, untouched by any event or training.
        let init = ModelParams::init(DIM, 3, params_seed(seed));
        let mut frozen_store = GraphStore::new(DIM, store_seed(seed));
        for v in first_appearance(split.train) {
            frozen_store.ensure_node(v);
        }
        let frozen_table =
            FeatureTable::from_store(&frozen_store, &init, FeatureMode::Original).unwrap();
        let frozen_report = evaluate_pairs(&pairs, &frozen_table, false).expect("ranking");
        let frozen = mrr(&frozen_report.results).expect("rankable pairs");

        println!("criterion 6 seed {seed}: trained MRR {trained:.4} vs frozen {frozen:.4} (x{:.2})", trained / frozen);
        assert!(
            trained >= 3.0 * frozen,
            "seed {seed}: trained MRR {trained:.4} < 3x frozen {frozen:.4}"
        );
    }
    assert!(
        started.elapsed().as_secs() < 600,
        "took {:?}",
        started.elapsed()
    );
    println!("criterion 6: PASS (trained MRR >= 3x frozen random initial features, 3 seeds)");
}

/// Shared harness for the optional real-data criteria.
fn uci_events() -> Vec<InteractionEvent> {
    let path = std::env::var("DGNN_UCI_PATH")
        .expect("set DGNN_UCI_PATH to the message-network edge file");
    let ds = load_events(std::path::Path::new(&path), true, 86400.0).expect("load edge file");
    assert_eq!(ds.events.len(), 59_835, "expected the full message network");
    ds.events
}

/// Train on the stream prefix with the given variant, then rank the
/// held-out edges on projected features.
fn trained_test_mrr(
    train: &[InteractionEvent],
    test: &[InteractionEvent],
    hp: &HyperParams,
    seed: u64,
) -> f64 {
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let outcome = fit(train, &cfg, hp, 2, None).expect("training");
    let mut store = GraphStore::new(hp.dim, store_seed(seed));
    apply_stream(&mut store, &outcome.params, hp, train, cfg.batch_size).expect("feature stream");
    let table = FeatureTable::from_store(&store, &outcome.params, FeatureMode::Projected).unwrap();
    let report = evaluate_pairs(&pairs_from_edges(test), &table, false).expect("ranking");
    mrr(&report.results).expect("rankable pairs")
}

/// Criterion 7 (optional, real data): the full model beats the
/// no-intervals variant, which beats the no-propagation variant, on
/// held-out MRR in at least 2 of 3 seeds, with full-model MRR in
/// [0.01, 0.06].
#[test]
#[ignore = "needs the real message-network dataset; set DGNN_UCI_PATH to its edge file"]
fn criterion_7_real_data_ablation_ordering() {
    let events = uci_events();
    let split = temporal_split(&events);
    let full_hp = HyperParams::default();
    let no_intervals = HyperParams {
        time_intervals_enabled: false,
        ..full_hp
    };
    let no_propagation = HyperParams {
        propagation_enabled: false,
        ..full_hp
    };

    let (mut ordered, mut in_range) = (0, 0);
    for seed in [1u64, 2, 3] {
        let full = trained_test_mrr(split.train, split.test, &full_hp, seed);
        let ti = trained_test_mrr(split.train, split.test, &no_intervals, seed);
        let prop = trained_test_mrr(split.train, split.test, &no_propagation, seed);
        eprintln!("seed {seed}: full {full:.4}, no-intervals {ti:.4}, no-propagation {prop:.4}");
        if full > ti && ti > prop {
            ordered += 1;
        }
        if (0.01..=0.06).contains(&full) {
            in_range += 1;
        }
    }
    assert!(
        ordered >= 2,
        "full > no-intervals > no-propagation held in only {ordered}/3 seeds"
    );
    assert!(
        in_range >= 2,
        "full-model MRR left [0.01, 0.06] in {}/3 seeds",
        3 - in_range
    );
    println!(
        "criterion 7: PASS (ablation ordering full > no-intervals > no-propagation in {ordered}/3 seeds, MRR in range in {in_range}/3)"
    );
}

/// Criterion 8 (optional, real data): widening the propagation window
/// from one day to fifty lifts held-out MRR in at least 2 of 3 seeds.
#[test]
#[ignore = "needs the real message-network dataset; set DGNN_UCI_PATH to its edge file"]
fn criterion_8_real_data_threshold_sweep_shape() {
    let events = uci_events();
    let split = temporal_split(&events);
    let mut rises = 0;
    for seed in [1u64, 2, 3] {
        let narrow = trained_test_mrr(
            split.train,
            split.test,
            &HyperParams {
                tau: 1.0,
                ..HyperParams::default()
            },
            seed,
        );
        let wide = trained_test_mrr(split.train, split.test, &HyperParams::default(), seed);
        eprintln!("seed {seed}: tau=1 {narrow:.4}, tau=50 {wide:.4}");
        if wide > narrow {
            rises += 1;
        }
    }
    assert!(
        rises >= 2,
        "widening the propagation window helped in only {rises}/3 seeds"
    );
    println!("criterion 8: PASS (tau=50 beats tau=1 in {rises}/3 seeds)");
}
