//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance -- 4 6` runs a subset. Pipeline outputs go
//! to a temporary directory unless `ACCEPTANCE_DIR` names one to keep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use advscen::adversary::{actor_objective_gradient, actor_update, critic_input, ActionValue, Batch, DdpgHyper};
use advscen::analysis::{dp_means, evaluate_policy, heuristic_lambda, js_divergence, kl_divergence};
use advscen::cli::{main_with, parse_config, EgoConfig, RunConfig};
use advscen::ego::{DqnPolicy, EgoPolicy, GapAcceptance};
use advscen::neural::{
    actor_shape, critic_shape, io, Activation, AdamState, LayerShape, Mlp, ACTOR_ACTIVATIONS, CRITIC_ACTIVATIONS,
};
use advscen::scenario::geometry::{footprint, rectangles_intersect, Point};
use advscen::scenario::{NaturalisticAdversary, ADV_ACTION_DIM, STATE_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_preset(name: &str) -> RunConfig {
    let bytes = std::fs::read(configs_dir().join(format!("{name}.json"))).expect("preset");
    parse_config(&bytes).expect("preset parses")
}

/// Shared pipeline runs, executed on first use.
struct Pipelines {
    root: PathBuf,
    _tmp: Option<tempfile::TempDir>,
    done: BTreeMap<String, i32>,
}

impl Pipelines {
    fn new() -> Self {
        match std::env::var_os("ACCEPTANCE_DIR") {
            Some(d) => {
                let root = PathBuf::from(d);
                std::fs::create_dir_all(&root).unwrap();
                Self { root, _tmp: None, done: BTreeMap::new() }
            }
            None => {
                let tmp = tempfile::tempdir().unwrap();
                Self { root: tmp.path().to_owned(), _tmp: Some(tmp), done: BTreeMap::new() }
            }
        }
    }

    fn run_config(&mut self, config: &Path, out: &str, args: &[&str]) -> i32 {
        let key = format!("{}|{out}|{}", config.display(), args.join(" "));
        if let Some(&code) = self.done.get(&key) {
            return code;
        }
        let mut argv = vec![
            "advscen".to_owned(),
            args[0].to_owned(),
            "--config".to_owned(),
            config.display().to_string(),
            "--output-dir".to_owned(),
            self.root.join(out).display().to_string(),
        ];
        argv.extend(args[1..].iter().map(|s| s.to_string()));
        let code = main_with(argv);
        self.done.insert(key, code);
        code
    }

    fn run(&mut self, preset: &str, out: &str, args: &[&str]) -> i32 {
        self.run_config(&configs_dir().join(format!("{preset}.json")), out, args)
    }

    fn dqn_weights(&mut self) -> Result<PathBuf, String> {
        match self.run("desk-dqn", "dqn", &["train-ego"]) {
            0 | 3 => Ok(self.root.join("dqn/ego/q_network.json")),
            c => Err(format!("train-ego exited {c}")),
        }
    }

    fn ensemble_eval(&mut self, preset: &str, out: &str) -> Result<Vec<PolicyRow>, String> {
        if preset.ends_with("dqn") {
            self.dqn_weights()?;
        }
        for cmd in ["train-adversaries", "evaluate"] {
            let c = self.run(preset, out, &[cmd]);
            if c != 0 {
                return Err(format!("{cmd} exited {c}"));
            }
        }
        read_csv(&self.root.join(out).join("eval/ensemble/policies.csv"))
    }
}

#[derive(Debug, serde::Deserialize)]
struct PolicyRow {
    policy_id: String,
    success_rate: f64,
    crash_rate: f64,
}

#[derive(Debug, serde::Deserialize)]
struct SweepRow {
    beta: f64,
    crash_rate: f64,
    crash_stderr: f64,
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| format!("{}: {e}", path.display()))
}

fn naturalistic_baseline(ego: &EgoPolicy, cfg: &RunConfig) -> Verdict {
    let r = evaluate_policy("naturalistic", &cfg.env(), &NaturalisticAdversary, ego, 500, cfg.base_seed)
        .map_err(|e| e.to_string())?;
    check(
        r.success_rate >= 0.95 && r.crash_rate <= 0.01,
        format!("500 episodes: success {:.3} (>= 0.95), crash {:.3} (<= 0.01)", r.success_rate, r.crash_rate),
    )
}

fn criterion_1(_: &mut Pipelines) -> Verdict {
    let cfg = load_preset("desk");
    let EgoConfig::GapAcceptance { thresholds } = cfg.ego else {
        return Err("desk preset does not use the gap-acceptance ego".into());
    };
    naturalistic_baseline(&EgoPolicy::Gap(GapAcceptance::new(thresholds)), &cfg)
}

fn criterion_2(p: &mut Pipelines) -> Verdict {
    let weights = p.dqn_weights()?;
    let training: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p.root.join("dqn/ego/training.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let q_network = io::load_from(&weights).map_err(|e| e.to_string())?;
    let cfg = load_preset("desk-dqn");
    let base = naturalistic_baseline(&EgoPolicy::Dqn(DqnPolicy { q_network }), &cfg);
    let note = format!("; trained {} episodes, converged {}", training["episodes"], training["converged"]);
    base.map(|s| s.clone() + &note).map_err(|s| s + &note)
}

fn criterion_3(p: &mut Pipelines) -> Verdict {
    let gap = p.ensemble_eval("desk", "gap")?;
    let dqn = p.ensemble_eval("desk-dqn", "dqn")?;
    let best_gap = gap.iter().min_by(|a, b| a.success_rate.total_cmp(&b.success_rate)).ok_or("empty gap ensemble")?;
    let best_dqn = dqn.iter().max_by(|a, b| a.crash_rate.total_cmp(&b.crash_rate)).ok_or("empty dqn ensemble")?;
    check(
        best_gap.success_rate <= 0.5 && best_dqn.crash_rate >= 0.4,
        format!(
            "gap ego best member {} success {:.3} (<= 0.50); dqn ego best member {} crash {:.3} (>= 0.40); {}+{} members, 200 episodes each",
            best_gap.policy_id,
            best_gap.success_rate,
            best_dqn.policy_id,
            best_dqn.crash_rate,
            gap.len(),
            dqn.len()
        ),
    )
}

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-6 || diff <= 1e-4 * analytic.abs().max(numeric.abs())
}

/// Scalar-loop forward pass over `batch` rows, appending every ReLU's
/// on/off state to `pattern`.
fn naive_forward(layers: &[LayerShape], p: &[f64], input: &[f64], batch: usize, pattern: &mut Vec<bool>) -> Vec<f64> {
    let mut out = Vec::new();
    for row in input.chunks_exact(input.len() / batch) {
        let mut x = row.to_vec();
        for layer in layers {
            x = (0..layer.outputs)
                .map(|o| {
                    let w = &p[layer.weight_offset + o * layer.inputs..][..layer.inputs];
                    let z = p[layer.bias_offset + o] + w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                    match layer.activation {
                        Activation::Relu => {
                            pattern.push(z > 0.0);
                            z.max(0.0)
                        }
                        Activation::Tanh => z.tanh(),
                        Activation::Identity => z,
                    }
                })
                .collect();
        }
        out.extend(x);
    }
    out
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Batch {
    Batch {
        states: random_vec(rng, n * STATE_DIM, 1.0),
        actions: random_vec(rng, n * ADV_ACTION_DIM, 1.0),
        rewards: random_vec(rng, n, 1.0),
        next_states: random_vec(rng, n * STATE_DIM, 1.0),
        terminals: vec![false; n],
    }
}

/// Compare `grads` with central differences of `f`, skipping parameters
/// whose stencil flips a ReLU. Returns (mismatches, skipped, worst relative
/// error).
fn gradient_mismatches(params: &[f64], grads: &[f64], f: impl Fn(&[f64], &mut Vec<bool>) -> f64) -> (usize, usize, f64) {
    let h = 1e-5;
    let mut base = Vec::new();
    f(params, &mut base);
    let (mut bad, mut skipped, mut worst) = (0, 0, 0.0f64);
    let mut p = params.to_vec();
    let mut pattern = Vec::with_capacity(base.len());
    for (i, &g) in grads.iter().enumerate() {
        let mut eval = |v: f64| {
            p[i] = v;
            pattern.clear();
            (f(&p, &mut pattern), pattern == base)
        };
        let (up, same_up) = eval(params[i] + h);
        let (down, same_down) = eval(params[i] - h);
        p[i] = params[i];
        if !(same_up && same_down) {
            skipped += 1;
            continue;
        }
        let n = (up - down) / (2.0 * h);
        if !close(g, n) {
            bad += 1;
        }
        let denom = g.abs().max(n.abs());
        if denom > 1e-6 {
            worst = worst.max((g - n).abs() / denom);
        }
    }
    (bad, skipped, worst)
}

fn criterion_4(_: &mut Pipelines) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let batch_n = 4;
    let (mut checked, mut bad, mut skipped, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
    let mut tally = |(b, s, w): (usize, usize, f64), n: usize| {
        checked += n;
        bad += b;
        skipped += s;
        worst = worst.max(w);
    };
    for net_seed in 0..10u64 {
        for (shape, acts) in [
            (actor_shape(STATE_DIM, ADV_ACTION_DIM), &ACTOR_ACTIVATIONS[..]),
            (critic_shape(STATE_DIM, ADV_ACTION_DIM), &CRITIC_ACTIVATIONS[..]),
        ] {
            let net = Mlp::init(&shape, acts, net_seed).map_err(|e| e.to_string())?;
            let input = random_vec(&mut rng, batch_n * shape[0], 1.0);
            let upstream = random_vec(&mut rng, batch_n * shape[shape.len() - 1], 1.0);
            let cache = net.forward_cached(&input, batch_n).map_err(|e| e.to_string())?;
            let grads = net.backward(&cache, &upstream).map_err(|e| e.to_string())?.params;
            let loss = |p: &[f64], pattern: &mut Vec<bool>| {
                naive_forward(net.layers(), p, &input, batch_n, pattern).iter().zip(&upstream).map(|(y, u)| y * u).sum()
            };
            tally(gradient_mismatches(net.params(), &grads, loss), grads.len());
        }

        let actor = Mlp::init(&actor_shape(STATE_DIM, ADV_ACTION_DIM), &ACTOR_ACTIVATIONS, 100 + net_seed).unwrap();
        let critic = Mlp::init(&critic_shape(STATE_DIM, ADV_ACTION_DIM), &CRITIC_ACTIVATIONS, 200 + net_seed).unwrap();
        let batch = random_batch(&mut rng, batch_n);
        let (_, grads) = actor_objective_gradient(&actor, &critic, &batch);
        let objective = |p: &[f64], pattern: &mut Vec<bool>| {
            let actions = naive_forward(actor.layers(), p, &batch.states, batch_n, pattern);
            let q = naive_forward(critic.layers(), critic.params(), &critic_input(&batch.states, &actions, batch_n), batch_n, pattern);
            q.iter().sum::<f64>() / batch_n as f64
        };
        tally(gradient_mismatches(actor.params(), &grads, objective), grads.len());
    }
    check(
        bad == 0 && skipped * 100 < checked,
        format!(
            "{checked} parameter gradients over 10 actor, critic and chained nets: {bad} beyond 1e-4 relative, worst {worst:.2e}, {skipped} skipped at ReLU kinks"
        ),
    )
}

struct QuadraticCritic([f64; 3]);

impl ActionValue for QuadraticCritic {
    fn value_and_action_grad(&self, _states: &[f64], actions: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t = self.0;
        let q = actions.chunks_exact(3).map(|a| -(0..3).map(|j| (a[j] - t[j]).powi(2)).sum::<f64>()).collect();
        let g = actions
            .chunks_exact(3)
            .zip(weights)
            .flat_map(|(a, &w)| (0..3).map(move |j| -2.0 * w * (a[j] - t[j])))
            .collect();
        (q, g)
    }
}

fn criterion_5(_: &mut Pipelines) -> Verdict {
    let target = [0.4, -0.7, 0.1];
    let critic = QuadraticCritic(target);
    let hyper = DdpgHyper::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let batch = random_batch(&mut rng, 64);
    let mut actor = Mlp::init(&actor_shape(STATE_DIM, ADV_ACTION_DIM), &ACTOR_ACTIVATIONS, 55).unwrap();
    let mut opt = AdamState::for_net(&actor, hyper.actor_lr);
    let deviation = |actor: &Mlp| {
        let out = actor.forward_batch(&batch.states, 64).unwrap();
        out.chunks_exact(3).flat_map(|a| (0..3).map(move |j| (a[j] - target[j]).abs())).fold(0.0, f64::max)
    };
    let mut converged_at = None;
    for update in 1..=500 {
        actor_update(&mut actor, &critic, &batch, 0.0, &mut opt);
        if converged_at.is_none() && deviation(&actor) < 0.05 {
            converged_at = Some(update);
        }
    }
    let last = deviation(&actor);
    check(
        last < 0.05,
        format!("max |mu(s) - a*| {last:.4} after 500 updates (< 0.05), first within tolerance at update {converged_at:?}"),
    )
}

fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum()
}

fn oracle_js(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * oracle_kl(p, &m) + 0.5 * oracle_kl(q, &m)
}

fn criterion_6(_: &mut Pipelines) -> Verdict {
    let js_hand = js_divergence(&[0.5, 0.5], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    let kl_hand = kl_divergence(&[0.5, 0.5], &[0.75, 0.25]).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    if (js_hand - 0.2157).abs() > 1e-4 || (js_hand - oracle_js(&[0.5, 0.5], &[1.0, 0.0])).abs() > 1e-6 {
        failures.push(format!("JSD hand case {js_hand}"));
    }
    if (kl_hand - 0.1438).abs() > 1e-4 || (kl_hand - (0.5 * (2.0f64 / 3.0).ln() + 0.5 * 2.0f64.ln())).abs() > 1e-6 {
        failures.push(format!("KL hand case {kl_hand}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_js = 0.0f64;
    for i in 0..100 {
        let n = rng.gen_range(2..50);
        let mut draw = |sparse: bool| {
            let v: Vec<f64> = (0..n).map(|_| if sparse && rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).collect();
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                let mut u = vec![0.0; n];
                u[0] = 1.0;
                u
            } else {
                v.into_iter().map(|x| x / s).collect()
            }
        };
        let p = draw(i % 2 == 0);
        let q = draw(i % 3 == 0);
        let pq = js_divergence(&p, &q).map_err(|e| e.to_string())?;
        let qp = js_divergence(&q, &p).map_err(|e| e.to_string())?;
        max_js = max_js.max(pq);
        if pq.to_bits() != qp.to_bits() {
            failures.push(format!("pair {i}: asymmetric {pq} vs {qp}"));
        }
        if !(0.0..=2.0f64.ln() + 1e-12).contains(&pq) {
            failures.push(format!("pair {i}: JSD {pq} out of bounds"));
        }
        if (pq - oracle_js(&p, &q)).abs() > 1e-9 {
            failures.push(format!("pair {i}: JSD {pq} vs oracle {}", oracle_js(&p, &q)));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("JSD hand {js_hand:.6}, KL hand {kl_hand:.6}; 100 random pairs symmetric and within [0, ln 2], max {max_js:.4}")
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_7(_: &mut Pipelines) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let bins = 36;
    let mut densities = Vec::new();
    let mut truth = Vec::new();
    for member in 0..30 {
        let group = member % 3;
        let v: Vec<f64> = (0..bins)
            .map(|b| {
                let home = b / 12 == group;
                let base = if home { 1.0 } else { 0.01 };
                base * rng.gen_range(0.8..1.2)
            })
            .collect();
        let s: f64 = v.iter().sum();
        densities.push(v.into_iter().map(|x| x / s).collect::<Vec<f64>>());
        truth.push(group);
    }
    let lambda = heuristic_lambda(&densities, 3).map_err(|e| e.to_string())?;
    let result = dp_means(&densities, lambda).map_err(|e| e.to_string())?;
    let mut mapping = BTreeMap::new();
    let consistent = truth.iter().zip(&result.assignments).all(|(t, a)| *mapping.entry(*a).or_insert(*t) == *t);
    let distinct: std::collections::BTreeSet<_> = mapping.values().collect();
    let agreement = consistent && distinct.len() == mapping.len();
    let monotone = result.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    check(
        result.k == 3 && agreement && monotone,
        format!(
            "lambda {lambda:.4}: k = {}, label agreement {}, objective {:?} non-increasing {monotone}",
            result.k,
            if agreement { "100%" } else { "broken" },
            result.objective.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>()
        ),
    )
}

const GRID: usize = 100;

fn contains(rect: (Point, f64, f64, f64), p: Point) -> bool {
    let (c, yaw, w, l) = rect;
    let (s, co) = yaw.sin_cos();
    let dx = p[0] - c[0];
    let dy = p[1] - c[1];
    let lx = dx * co + dy * s;
    let ly = -dx * s + dy * co;
    lx.abs() <= 0.5 * l && ly.abs() <= 0.5 * w
}

fn sample_points(rect: (Point, f64, f64, f64)) -> impl Iterator<Item = Point> {
    let (c, yaw, w, l) = rect;
    let (s, co) = yaw.sin_cos();
    (0..GRID * GRID).map(move |k| {
        let u = -0.5 * l + l * (k / GRID) as f64 / (GRID - 1) as f64;
        let v = -0.5 * w + w * (k % GRID) as f64 / (GRID - 1) as f64;
        [c[0] + u * co - v * s, c[1] + u * s + v * co]
    })
}

/// Signed overlap along the best separating direction among the four edge
/// normals: positive penetration depth or negative separation.
fn signed_depth(a: &[Point; 4], b: &[Point; 4]) -> f64 {
    let mut depth = f64::INFINITY;
    for rect in [a, b] {
        for i in 0..2 {
            let e = [rect[i + 1][0] - rect[i][0], rect[i + 1][1] - rect[i][1]];
            let n = (e[0] * e[0] + e[1] * e[1]).sqrt();
            let axis = [-e[1] / n, e[0] / n];
            let proj = |r: &[Point; 4]| {
                r.iter().map(|p| p[0] * axis[0] + p[1] * axis[1]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            depth = depth.min(ahi.min(bhi) - alo.max(blo));
        }
    }
    depth
}

fn criterion_8(_: &mut Pipelines) -> Verdict {
    let cfg = load_preset("desk").scenario;
    let (w, l) = (cfg.veh_width, cfg.veh_length);
    let spacing = l / (GRID - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut compared, mut excluded, mut disagreements, mut hits) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let pose = |rng: &mut ChaCha8Rng| ([rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0)], rng.gen_range(-3.2..3.2), w, l);
        let a = pose(&mut rng);
        let b = pose(&mut rng);
        let fa = footprint(a.0[0], a.0[1], a.1, w, l);
        let fb = footprint(b.0[0], b.0[1], b.1, w, l);
        let depth = signed_depth(&fa, &fb);
        if depth.abs() < spacing.max(0.01) {
            excluded += 1;
            continue;
        }
        let sampled = sample_points(a).any(|p| contains(b, p)) || sample_points(b).any(|p| contains(a, p));
        compared += 1;
        hits += usize::from(sampled);
        if sampled != rectangles_intersect(&fa, &fb) {
            disagreements += 1;
        }
    }
    check(
        disagreements == 0 && compared > 900,
        format!(
            "{compared} pairs compared ({hits} overlapping), {disagreements} disagreements, {excluded} near-tangent excluded (|depth| < {spacing:.3} m)"
        ),
    )
}

fn criterion_9(p: &mut Pipelines) -> Verdict {
    let c = p.run("desk", "gap", &["beta-sweep"]);
    if c != 0 {
        return Err(format!("beta-sweep exited {c}"));
    }
    let rows: Vec<SweepRow> = read_csv(&p.root.join("gap/beta_sweep/sweep.csv"))?;
    let at = |b: f64| rows.iter().find(|r| (r.beta - b).abs() < 1e-12).ok_or(format!("beta {b} missing"));
    let (lo, hi) = (at(0.1)?, at(2.0)?);
    let curve = rows.iter().map(|r| format!("{}: {:.3} +- {:.3}", r.beta, r.crash_rate, r.crash_stderr)).collect::<Vec<_>>();
    check(lo.crash_rate >= hi.crash_rate, format!("crash rate by beta [{}]", curve.join(", ")))
}

/// Every CSV/JSON under `dir` except manifests, keyed by relative path.
fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json"))
                && path.file_name() != Some("manifest.json".as_ref())
            {
                out.insert(path.strip_prefix(root).unwrap().to_owned(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn diff(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&PathBuf> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).map(|k| k.display().to_string()).collect()
}

fn criterion_10(p: &mut Pipelines) -> Verdict {
    let mut lines = Vec::new();
    let mut differing = Vec::new();

    // full desk ego training, twice into separate directories
    p.dqn_weights()?;
    let c = p.run("desk-dqn", "dqn-repeat", &["train-ego"]);
    if c != 0 && c != 3 {
        return Err(format!("repeated train-ego exited {c}"));
    }
    let (a, b) = (artifacts(&p.root.join("dqn/ego")), artifacts(&p.root.join("dqn-repeat/ego")));
    lines.push(format!("train-ego {} files", a.len()));
    differing.extend(diff(&a, &b).into_iter().map(|f| format!("ego/{f}")));

    // evaluate and cluster rerun in place on the desk ensemble
    p.ensemble_eval("desk", "gap")?;
    for (cmd, stage) in [("evaluate", "eval/ensemble"), ("cluster", "cluster")] {
        if p.run("desk", "gap", &[cmd]) != 0 {
            return Err(format!("{cmd} failed"));
        }
        let dir = p.root.join("gap").join(stage);
        let before = artifacts(&dir);
        let code = main_with([
            "advscen".to_owned(),
            cmd.to_owned(),
            "--config".to_owned(),
            configs_dir().join("desk.json").display().to_string(),
            "--output-dir".to_owned(),
            p.root.join("gap").display().to_string(),
        ]);
        if code != 0 {
            return Err(format!("repeated {cmd} exited {code}"));
        }
        let after = artifacts(&dir);
        lines.push(format!("{cmd} {} files", after.len()));
        differing.extend(diff(&before, &after).into_iter().map(|f| format!("{stage}/{f}")));
    }

    // adversary training and the sweep on a shortened desk config
    let mut short: serde_json::Value =
        serde_json::from_slice(&std::fs::read(configs_dir().join("desk.json")).unwrap()).unwrap();
    short["hyper"]["ensemble_size"] = 2.into();
    short["hyper"]["max_episodes"] = 40.into();
    short["beta_sweep"]["ensemble_size"] = 1.into();
    short["beta_sweep"]["evaluation_episodes"] = 20.into();
    let short_cfg = p.root.join("desk-short.json");
    std::fs::write(&short_cfg, serde_json::to_vec_pretty(&short).unwrap()).unwrap();
    for out in ["short-a", "short-b"] {
        for cmd in ["train-adversaries", "beta-sweep"] {
            let c = p.run_config(&short_cfg, out, &[cmd]);
            if c != 0 {
                return Err(format!("{cmd} on the short config exited {c}"));
            }
        }
    }
    let (a, b) = (artifacts(&p.root.join("short-a")), artifacts(&p.root.join("short-b")));
    lines.push(format!("train-adversaries and beta-sweep {} files", a.len()));
    differing.extend(diff(&a, &b));

    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!("byte-identical reruns: {}", lines.join(", "))
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}

type Criterion = fn(&mut Pipelines) -> Verdict;

fn main() {
    let criteria: [(usize, &str, Criterion); 10] = [
        (1, "gap-acceptance naturalistic baseline", criterion_1),
        (2, "DQN naturalistic baseline", criterion_2),
        (3, "adversarial degradation", criterion_3),
        (4, "gradient correctness", criterion_4),
        (5, "DDPG quadratic critic", criterion_5),
        (6, "divergences", criterion_6),
        (7, "DP-means oracle", criterion_7),
        (8, "collision oracle", criterion_8),
        (9, "beta sweep direction", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut pipelines = Pipelines::new();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = f(&mut pipelines);
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
