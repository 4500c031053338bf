//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 7 to 10 share one batch of desk-scale sensing runs: three agents
//! times five fixed seeds, M = 8, M_Red = 16, 100 episodes of 100 steps.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use jcas::channels::{format_channels, parse_channels};
use jcas::checkpoint::{decode_net, encode_net, load_agent, net_from_json, net_to_json, save_agent, CheckpointMeta, NetFormat, TaskSource};
use jcas::cmd::{cmd_gen_scenario, cmd_train, AGENT_DIR, EPISODE_FILE};
use jcas::codebook::{load_codebook, save_codebook};
use jcas::config::{CliConfig, Overrides};
use jcas::core::agents::{Agent, AgentConfig, AgentKind};
use jcas::core::clustering::{assign, kmeans, CostMatrix, FeatureMatrix};
use jcas::core::env::{reward, BeamEnv, BeamEnvConfig, BeamTask};
use jcas::core::metrics::{area_under_curve, median, EpisodeRecord};
use jcas::core::nn::{Activation, DenseNet};
use jcas::core::pipeline::{run_sense_targets, Codebook, RunConfig, SerialRunner, TrainedBeam};
use jcas::core::radio::*;
use jcas::core::scenario::{generate_scene, Point, SceneParams, SensingTarget};
use jcas::scene::{load_scene, save_scene};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const M: usize = 8;
const M_RED: usize = 16;
const AOA: f64 = 0.4;
const GRID: usize = 361;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 1

fn random_net(rng: &mut ChaCha8Rng) -> DenseNet {
    let all = [Activation::Relu, Activation::TanhScaled, Activation::Sigmoid, Activation::Linear];
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=6)];
    let mut acts = Vec::new();
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=6));
        acts.push(all[rng.random_range(0..all.len())]);
    }
    DenseNet::new(&sizes, &acts, rng.random_range(0.5..4.0), rng).unwrap()
}

fn gradients() -> Outcome {
    const EPS: f64 = 1e-6;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut net = random_net(&mut rng);
        let batch = rng.random_range(1..=3);
        let x: Vec<f64> = (0..batch * net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..batch * net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &DenseNet, x: &[f64]| -> f64 { n.predict(x, batch).unwrap().iter().zip(&c).map(|(y, k)| y * k).sum() };
        net.forward_batch(&x, batch).unwrap();
        let back = net.backward(&c).unwrap();
        let params = net.flat_params();
        for (i, g) in back.params.flat().into_iter().enumerate() {
            let mut p = params.clone();
            p[i] += EPS;
            net.set_flat_params(&p).unwrap();
            let up = loss(&net, &x);
            p[i] -= 2.0 * EPS;
            net.set_flat_params(&p).unwrap();
            let down = loss(&net, &x);
            worst = worst.max(rel(g, (up - down) / (2.0 * EPS)));
        }
        net.set_flat_params(&params).unwrap();
        for (i, &g) in back.input.iter().enumerate() {
            let mut xp = x.clone();
            xp[i] += EPS;
            let up = loss(&net, &xp);
            xp[i] -= 2.0 * EPS;
            let down = loss(&net, &xp);
            worst = worst.max(rel(g, (up - down) / (2.0 * EPS)));
        }
    }
    let elapsed = start.elapsed();
    ensure(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("100 nets, max relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criterion 2

/// `(1/M) |Σ e^{-jφ} x|²` in real arithmetic.
fn oracle_gain(phases: &[f64], x: &[(f64, f64)]) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (&t, &(xr, xi)) in phases.iter().zip(x) {
        re += t.cos() * xr + t.sin() * xi;
        im += t.cos() * xi - t.sin() * xr;
    }
    (re * re + im * im) / phases.len() as f64
}

fn gain_oracles() -> Outcome {
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_matched = 0.0f64;
    for case in 0..1000 {
        let m = rng.random_range(1..=32);
        let phases: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
        let beam = BeamVector::new(phases.clone()).unwrap();
        let h: Vec<(f64, f64)> = (0..m).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let channel = ChannelVector::new(h.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap();
        if !close(comm_gain(&beam, &channel).unwrap(), oracle_gain(&phases, &h), 1e-10) {
            return Err(format!("case {case}: comm_gain"));
        }
        let wavelength = rng.random_range(0.01..1.0);
        let positions: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
        let geom = ArrayGeometry::new(positions.clone(), wavelength).unwrap();
        let theta = rng.random_range(-PI..PI);
        let b: Vec<(f64, f64)> = positions
            .iter()
            .map(|d| {
                let a = 2.0 * PI * d * theta.sin() / wavelength;
                (a.cos(), a.sin())
            })
            .collect();
        for (got, want) in array_response(&geom, theta).iter().zip(&b) {
            if (got.re - want.0).abs() > 1e-10 || (got.im - want.1).abs() > 1e-10 {
                return Err(format!("case {case}: array_response"));
            }
        }
        if !close(sensing_gain(&beam, &geom, theta).unwrap(), oracle_gain(&phases, &b), 1e-10) {
            return Err(format!("case {case}: sensing_gain"));
        }
        let matched = sensing_gain(&geom.matched_beam(theta), &geom, theta).unwrap();
        worst_matched = worst_matched.max((matched - m as f64).abs());
    }
    ensure(worst_matched <= 1e-9, format!("1000 cases within 1e-10, matched-beam error {worst_matched:.1e}"))
}

// ---------------------------------------------------------------- criterion 3

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn hungarian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..200 {
        let n = rng.random_range(1..=7);
        let integer = case % 2 == 0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if integer { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..10.0) })
                    .collect()
            })
            .collect();
        let z = CostMatrix::from_rows(&rows).unwrap();
        let value = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| rows[i][j]).sum() };
        let best = permutations(n).iter().map(|p| value(p)).fold(f64::NEG_INFINITY, f64::max);
        let a = assign(&z).unwrap();
        if value(&a.permutation) != best || a.value != best {
            return Err(format!("case {case}: {} vs optimum {best}", a.value));
        }
    }
    Ok("200 matrices up to 7x7 equal the exhaustive optimum".into())
}

// ---------------------------------------------------------------- criterion 4

fn kmeans_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for run in 0..100u64 {
        let n = rng.random_range(3..40);
        let dim = rng.random_range(1..5);
        let columns: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let k = rng.random_range(1..=n.min(5));
        let p = kmeans(&FeatureMatrix::new(columns).unwrap(), k, run).unwrap();
        if p.history.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("run {run}: distortion rose {:?}", p.history));
        }
    }
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..24).map(|i| i % 2).collect();
        let columns: Vec<Vec<f64>> = truth
            .iter()
            .map(|&t| (0..3).map(|_| if t == 0 { -4.0 } else { 4.0 } + rng.random_range(-0.5..0.5)).collect())
            .collect();
        let p = kmeans(&FeatureMatrix::new(columns).unwrap(), 2, seed).unwrap();
        let same = p.assignments.iter().zip(&truth).all(|(a, t)| a == t);
        let flipped = p.assignments.iter().zip(&truth).all(|(a, t)| a != t);
        if !(same || flipped) {
            return Err(format!("seed {seed}: planted clusters not recovered"));
        }
    }
    Ok("100 runs nonincreasing, 50/50 planted recoveries".into())
}

// ---------------------------------------------------------------- criterion 5

fn reward_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..10_000 {
        // Small integers force ties between the three quantities.
        let mut draw = || if i % 2 == 0 { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..8.0) };
        let (g, beta, prev) = (draw(), draw(), draw());
        let want = if g > beta { (1.0, g) } else if g > prev { (0.0, beta) } else { (-1.0, beta) };
        let (r, next) = reward(g, beta, prev);
        if (r.value(), next) != want {
            return Err(format!("({g}, {beta}, {prev}) gave {r:?}, {next}"));
        }
    }
    let env = BeamEnv::new(env_config(BeamTask::Sense { geometry: ArrayGeometry::half_wavelength(M, 0.1).unwrap(), aoa: AOA }, false)).unwrap();
    let mut traces = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = env.reset(&mut rng).unwrap();
        for _ in 0..100 {
            let a: Vec<f64> = (0..M + M_RED).map(|_| rng.random_range(-PI..PI)).collect();
            let o = env.step(&s, &a).unwrap();
            if o.next_state.beta < s.beta {
                return Err(format!("trace {seed}: threshold fell"));
            }
            s = o.next_state;
        }
        traces += 1;
    }
    Ok(format!("10000 triples exact, {traces} traces with nondecreasing threshold"))
}

// ---------------------------------------------------------------- criterion 6

fn env_config(task: BeamTask, quantize_in_loop: bool) -> BeamEnvConfig {
    BeamEnvConfig {
        num_antennas: M,
        num_redundant: M_RED,
        task,
        quantize_in_loop,
        codomain: PhaseCodomain::new(4).unwrap(),
        episode_length: 100,
    }
}

fn redundancy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let geometry = ArrayGeometry::half_wavelength(M, 0.1).unwrap();
    let channels: Vec<ChannelVector> = (0..3)
        .map(|_| ChannelVector::new((0..M).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap())
        .collect();
    let envs: Vec<BeamEnv> = [
        env_config(BeamTask::Sense { geometry, aoa: AOA }, false),
        env_config(BeamTask::Comm { channels }, true),
    ]
    .into_iter()
    .map(|c| BeamEnv::new(c).unwrap())
    .collect();
    for pair in 0..1000 {
        let env = &envs[pair % 2];
        let mut s = env.reset(&mut rng).unwrap();
        s.beta = rng.random_range(0.0..M as f64);
        let a: Vec<f64> = (0..M + M_RED).map(|_| rng.random_range(-PI..PI)).collect();
        let mut b = a.clone();
        for x in &mut b[M..] {
            *x = rng.random_range(-PI..PI);
        }
        let (oa, ob) = (env.step(&s, &a).unwrap(), env.step(&s, &b).unwrap());
        if oa.gain != ob.gain || oa.reward != ob.reward || oa.next_state.beta != ob.next_state.beta {
            return Err(format!("pair {pair} differs"));
        }
    }
    Ok("1000 pairs with identical gain, reward and threshold".into())
}

// ------------------------------------------------------------- criteria 7..10

struct DeskRun {
    kind: AgentKind,
    seed: u64,
    records: Vec<EpisodeRecord>,
    beam: TrainedBeam,
    elapsed: Duration,
}

fn desk_runs() -> Vec<DeskRun> {
    let geometry = ArrayGeometry::half_wavelength(M, 0.1).unwrap();
    let mut runs = Vec::new();
    for kind in AgentKind::ALL {
        for seed in SEEDS {
            let mut config = RunConfig::desk(kind, M, M_RED);
            config.seed = seed;
            let target = SensingTarget { time_index: 0, vehicle: 0, position: Point::new(AOA.cos(), AOA.sin()), aoa: AOA };
            let start = Instant::now();
            let out = run_sense_targets(vec![target], &geometry, &config, &SerialRunner, &|_, _| {}).unwrap();
            let elapsed = start.elapsed();
            let records = out.trainers[0].records().to_vec();
            let run = DeskRun { kind, seed, records, beam: out.beams[0].clone(), elapsed };
            println!(
                "  desk {:<10} seed {}: {} episodes, final gain {:.3}, AUC {:.1}, {:.1} s",
                kind.to_string(),
                seed,
                run.records.len(),
                run.records.last().unwrap().avg_gain,
                auc(&run),
                elapsed.as_secs_f64()
            );
            runs.push(run);
        }
    }
    runs
}

fn auc(run: &DeskRun) -> f64 {
    area_under_curve(&run.records.iter().map(|r| r.avg_gain).collect::<Vec<_>>())
}

fn of_kind(runs: &[DeskRun], kind: AgentKind) -> Vec<&DeskRun> {
    runs.iter().filter(|r| r.kind == kind).collect()
}

fn desk_learning(runs: &[DeskRun]) -> Outcome {
    let invase = of_kind(runs, AgentKind::Td3Invase);
    let finals: Vec<f64> = invase.iter().map(|r| r.records.last().unwrap().avg_gain).collect();
    let med = median(&finals).unwrap();
    let slowest = invase.iter().map(|r| r.elapsed).max().unwrap();
    let episodes = invase[0].records.len();
    ensure(
        med >= 0.7 * M as f64 && slowest < Duration::from_secs(15 * 60) && episodes <= 300,
        format!(
            "median final gain {med:.3} (need {:.1}), per-seed {finals:.2?}, {episodes} episodes, slowest run {:.1} s",
            0.7 * M as f64,
            slowest.as_secs_f64()
        ),
    )
}

fn selection_efficacy(runs: &[DeskRun]) -> Outcome {
    let invase = of_kind(runs, AgentKind::Td3Invase);
    let late = |r: &DeskRun, f: fn(&EpisodeRecord) -> Option<f64>| {
        let tail = &r.records[r.records.len().saturating_sub(50)..];
        tail.iter().map(|e| f(e).unwrap()).sum::<f64>() / tail.len() as f64
    };
    let tpr: Vec<f64> = invase.iter().map(|r| late(r, |e| e.tpr)).collect();
    let selected: Vec<f64> = invase.iter().map(|r| late(r, |e| e.selected_count)).collect();
    let (tpr_med, sel_med) = (median(&tpr).unwrap(), median(&selected).unwrap());
    ensure(
        tpr_med >= 60.0 && sel_med < (M + M_RED) as f64,
        format!("median late TPR {tpr_med:.1}% per-seed {tpr:.1?}, median selected {sel_med:.2} of {} per-seed {selected:.2?}", M + M_RED),
    )
}

fn baseline_ordering(runs: &[DeskRun]) -> Outcome {
    let aucs = |kind| of_kind(runs, kind).iter().map(|r| auc(r)).collect::<Vec<_>>();
    let (ours, td3, ddpg) = (aucs(AgentKind::Td3Invase), aucs(AgentKind::Td3), aucs(AgentKind::Ddpg));
    let wins = |other: &[f64]| ours.iter().zip(other).filter(|(a, b)| a >= b).count();
    let (w_td3, w_ddpg) = (wins(&td3), wins(&ddpg));
    ensure(
        w_td3 >= 3 && w_ddpg >= 3,
        format!("AUC >= TD3 on {w_td3}/5, >= DDPG on {w_ddpg}/5; TD3-INVASE {ours:.1?} TD3 {td3:.1?} DDPG {ddpg:.1?}"),
    )
}

fn directivity(runs: &[DeskRun]) -> Outcome {
    let geometry = ArrayGeometry::half_wavelength(M, 0.1).unwrap();
    let grid = angle_grid(GRID);
    let nearest = |theta: f64| {
        (0..GRID)
            .min_by(|&a, &b| circular_distance(grid[a], theta).total_cmp(&circular_distance(grid[b], theta)))
            .unwrap()
    };
    let cell_gap = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(GRID - d)
    };
    // A linear array cannot tell θ from π − θ, so either cell counts.
    let cells = [nearest(AOA), nearest(PI - AOA)];
    let mut hits = 0;
    let mut peaks = Vec::new();
    for r in of_kind(runs, AgentKind::Td3Invase) {
        let pattern = beam_pattern(&r.beam.beam, &geometry, &grid).unwrap();
        let peak = pattern_peak(&pattern).unwrap();
        peaks.push((r.seed, grid[peak]));
        if cells.iter().any(|&c| cell_gap(peak, c) <= 1) {
            hits += 1;
        }
    }
    ensure(hits >= 4, format!("{hits}/5 seeds within one cell of {AOA} or its mirror, (seed, peak) {peaks:.3?}"))
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

// --------------------------------------------------------------- criterion 11

const TINY: &str = r#"{
  "run": {
    "epochs": 1200, "buffering_epochs": 200, "episode_length": 40,
    "agent": { "num_antennas": 4, "num_redundant": 4, "batch_size": 16,
               "actor_hidden": [16], "critic_hidden": [16], "selector_hidden": [16] }
  },
  "scene": { "num_users": 8 }
}"#;

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let file: serde_json::Value = serde_json::from_str(TINY).unwrap();
    let flags = |out: &str| Overrides {
        seed: Some(11),
        out: Some(dir.path().join(out)),
        scenario: Some(dir.path().join("scen")),
        ..Overrides::default()
    };
    cmd_gen_scenario(&CliConfig::resolve(Some(file.clone()), &flags("scen")).unwrap()).map_err(|e| e.to_string())?;
    for out in ["a", "b"] {
        cmd_train(&CliConfig::resolve(Some(file.clone()), &flags(out)).unwrap()).map_err(|e| e.to_string())?;
    }
    let mut compared = 0;
    for entry in fs::read_dir(dir.path().join("a").join(AGENT_DIR)).unwrap() {
        let name = entry.unwrap().file_name();
        let csv = |run: &str| fs::read(dir.path().join(run).join(AGENT_DIR).join(&name).join(EPISODE_FILE)).unwrap();
        if csv("a") != csv("b") {
            return Err(format!("{name:?} episode CSVs differ"));
        }
        compared += 1;
    }
    ensure(compared == 3, format!("{compared} agent episode CSVs byte-identical across two runs"))
}

// --------------------------------------------------------------- criterion 12

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);

    let channels: Vec<ChannelVector> = (0..20)
        .map(|_| ChannelVector::new((0..M).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap())
        .collect();
    let back = parse_channels(&format_channels(&channels).unwrap()).unwrap();
    let worst = channels
        .iter()
        .zip(&back)
        .flat_map(|(a, b)| a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(format!("channel entries off by {worst:e}"));
    }

    let scene = generate_scene(&SceneParams::default(), 3).unwrap();
    save_scene(&scene, &dir.path().join("scene.json")).unwrap();
    if load_scene(&dir.path().join("scene.json")).unwrap() != scene {
        return Err("scene changed".into());
    }

    for _ in 0..50 {
        let net = random_net(&mut rng);
        let bin = decode_net(&encode_net(&net)).unwrap();
        let bits = |n: &DenseNet| n.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&bin) != bits(&net) || bin != net {
            return Err("binary checkpoint not bit-exact".into());
        }
        let json = net_from_json(&net_to_json(&net)).unwrap();
        if net.flat_params().iter().zip(json.flat_params()).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err("JSON checkpoint beyond 1e-12".into());
        }
    }
    let mut config = AgentConfig::new(AgentKind::Td3Invase, 4, 4, 100);
    config.actor_hidden = vec![6];
    config.critic_hidden = vec![6];
    config.selector_hidden = vec![6];
    let agent = Agent::new(config, 4).unwrap();
    let meta = CheckpointMeta {
        name: "sense-0".into(),
        seed: 4,
        env: BeamEnvConfig {
            num_antennas: 4,
            num_redundant: 4,
            task: BeamTask::Sense { geometry: ArrayGeometry::half_wavelength(4, 0.1).unwrap(), aoa: AOA },
            quantize_in_loop: false,
            codomain: PhaseCodomain::new(4).unwrap(),
            episode_length: 10,
        },
        task_source: TaskSource::Sense { target_index: 0 },
        beam: vec![0.0; 4],
        beam_gain: 0.0,
    };
    for format in [NetFormat::Binary, NetFormat::Json] {
        let path = dir.path().join(format.extension());
        let written = save_agent(&agent, &meta, &path, format).unwrap();
        let (manifest, back) = load_agent(&path).unwrap();
        let exact = format == NetFormat::Binary;
        for role in agent.roles() {
            let (a, b) = (agent.slot(role).unwrap(), back.slot(role).unwrap());
            let ok = a.net.flat_params().iter().zip(b.net.flat_params()).all(|(x, y)| if exact { x.to_bits() == y.to_bits() } else { (x - y).abs() <= 1e-12 });
            if !ok || manifest != written {
                return Err(format!("{format:?} agent checkpoint changed"));
            }
        }
    }

    let cd = PhaseCodomain::new(4).unwrap();
    let mut beam = || quantize(&BeamVector::new((0..M).map(|_| rng.random_range(-PI..PI)).collect()).unwrap(), &cd);
    let book = Codebook::assemble(cd, M, &[(0, beam()), (1, beam())], &[(0, beam())]).unwrap();
    save_codebook(&book, &dir.path().join("codebook.json")).unwrap();
    if load_codebook(&dir.path().join("codebook.json")).unwrap() != book {
        return Err("codebook changed".into());
    }
    Ok(format!("channels within {worst:.0e}, scene exact, 50 nets bit-exact binary and 1e-12 JSON, agents, codebook exact"))
}

// ---------------------------------------------------------------------- main

fn run(id: usize, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} criterion {id:>2} {name}: {detail}");
    ok
}

fn main() -> ExitCode {
    let mut passed = vec![
        run(1, "gradient correctness", gradients),
        run(2, "gain and array oracles", gain_oracles),
        run(3, "assignment optimality", hungarian),
        run(4, "k-means", kmeans_checks),
        run(5, "reward and threshold semantics", reward_semantics),
        run(6, "redundancy neutrality", redundancy),
    ];
    println!("  training desk-scale sensing runs ({} agents x {} seeds)", AgentKind::ALL.len(), SEEDS.len());
    let runs = desk_runs();
    passed.push(run(7, "desk-scale sensing learning", || desk_learning(&runs)));
    passed.push(run(8, "causal selection efficacy", || selection_efficacy(&runs)));
    passed.push(run(9, "baseline ordering", || baseline_ordering(&runs)));
    passed.push(run(10, "beam directivity", || directivity(&runs)));
    passed.push(run(11, "training determinism", determinism));
    passed.push(run(12, "format round-trips", round_trips));
    let n = passed.iter().filter(|&&p| p).count();
    println!("{n}/{} criteria passed", passed.len());
    if n == passed.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
