//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! `DRACER_ACCEPTANCE_ONLY=1,3` restricts the run to the listed criteria.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use common::{full_weights, gradient_check, small_feature_arch, small_image_arch};
use dracer::eval::{naive_evaluate, EvalConfig, Protocol};
use dracer::fabric::{
    run_all_in_one, run_sequential, Budget, Clock, EvaluatorConfig, Fabric, Fetched, LocalFabric, MetricsRow,
    RolloutWorker, RunSpec, Scheduling, StopSignal, StoreConfig, Trainer, WorkerConfig, WorkerLimits,
};
use dracer::geometry::{
    centerline_from_mesh, compute_centerline, extract_border_edges, generate_track, group_boundaries,
    match_boundaries, oval_polyline, CenterLine, Point2, TrackMesh, TrackSpec,
};
use dracer::randomize::RandomizationConfig;
use dracer::rl::{compute_gae, Architecture, Checkpoint, TrainerConfig};
use dracer::sim::{ActionSpace, Camera, CarState, ObsMode, SimConfig, Track, BACKGROUND, LINE, SURFACE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

type Criterion = fn(&Shared) -> Outcome;

fn main() -> ExitCode {
    let only: Option<BTreeSet<usize>> = std::env::var("DRACER_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Criterion); 9] = [
        (1, "oval feature training reaches 0.95 naive progress", oval_training),
        (2, "four workers beat one under a fixed wall budget", worker_scaling),
        (3, "robust evaluation gap and its shrinkage", robust_gap),
        (4, "boundary matching, midpoints and generated tracks", geometry),
        (5, "GAE against hand recursion", gae),
        (6, "PPO loss gradient against finite differences", gradients),
        (7, "concurrent workers and trainers through the store", store_concurrency),
        (8, "single-worker runs are byte-identical", determinism),
        (9, "renderer checks and image-mode training", image_mode),
    ];
    let shared = Shared::default();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|set| !set.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let outcome = run(&shared);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!("[{verdict}] {id} {name}: {} ({:.1}s)", outcome.detail, started.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn oval() -> Arc<Track> {
    Arc::new(Track::oval(8.0, 1.0, 0.6).expect("oval track"))
}

/// One 60k-step single-worker run with both protocols evaluated at every
/// published version.
struct TrainedRun {
    metrics: Vec<MetricsRow>,
    naive: BTreeMap<u64, f64>,
    robust: BTreeMap<u64, f64>,
    wall: Duration,
}

impl TrainedRun {
    fn train(seed: u64, randomization: RandomizationConfig) -> Self {
        let sim = SimConfig::features();
        let mut spec = RunSpec::new(oval(), sim.clone(), TrainerConfig::default(), seed, Budget::steps(60_000));
        spec.randomization = randomization;
        spec.evaluation = Some(EvaluatorConfig::both(sim));
        let started = Instant::now();
        let out = run_sequential(&spec).expect("training run");
        let wall = started.elapsed();
        let (mut naive, mut robust) = (BTreeMap::new(), BTreeMap::new());
        for r in out.eval_reports {
            match r.protocol {
                Protocol::Naive => naive.insert(r.version, r.mean_progress),
                Protocol::Robust => robust.insert(r.version, r.mean_progress),
            };
        }
        TrainedRun { metrics: out.metrics, naive, robust, wall }
    }

    /// Steps trained into each version; the initial version has none.
    fn steps_at(&self, version: u64) -> u64 {
        self.metrics.iter().find(|m| m.version == version).map_or(0, |m| m.steps)
    }

    fn versions(&self) -> Vec<u64> {
        self.naive.keys().copied().collect()
    }

    fn gap(&self, version: u64) -> f64 {
        self.naive[&version] - self.robust[&version]
    }
}

#[derive(Default)]
struct Shared {
    baseline: OnceLock<Vec<TrainedRun>>,
}

impl Shared {
    fn baseline(&self) -> &[TrainedRun] {
        self.baseline.get_or_init(|| SEEDS.iter().map(|&s| TrainedRun::train(s, RandomizationConfig::none())).collect())
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn oval_training(shared: &Shared) -> Outcome {
    let runs = shared.baseline();
    let mut finals = Vec::new();
    for run in runs {
        let version = run.versions().into_iter().filter(|&v| run.steps_at(v) <= 60_000).max().expect("a version");
        finals.push((version, run.steps_at(version), run.naive[&version]));
    }
    let mean = finals.iter().map(|f| f.2).sum::<f64>() / finals.len() as f64;
    let slowest = runs.iter().map(|r| r.wall).max().unwrap_or_default();
    let per_seed: Vec<String> = finals.iter().map(|(v, s, p)| format!("v{v}@{s} steps {p:.3}")).collect();
    Outcome::new(
        mean >= 0.95 && slowest < Duration::from_secs(600),
        format!("mean naive {mean:.3} [{}], slowest run {:.1}s", per_seed.join(", "), slowest.as_secs_f64()),
    )
}

fn worker_scaling(_: &Shared) -> Outcome {
    // the simulator runs at real time, so throughput comes from worker count
    // rather than from how fast this host steps physics
    let sim = SimConfig { realtime_factor: 1.0, ..SimConfig::features() };
    let budget = Budget { seconds: Some(180.0), ..Budget::default() };
    let runs: Vec<(u64, usize)> = SEEDS.iter().flat_map(|&s| [(s, 1), (s, 4)]).collect();
    let results: Vec<(u64, usize, u64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|&(seed, workers)| {
                let sim = sim.clone();
                scope.spawn(move || {
                    let mut spec = RunSpec::new(oval(), sim.clone(), TrainerConfig::default(), seed, budget);
                    spec.workers = workers;
                    spec.clock = Some(Clock::wall());
                    let out = run_all_in_one(&spec).expect("wall-budget run");
                    let steps = out.metrics.last().map_or(0, |m| m.steps);
                    let eval = naive_evaluate(&out.final_checkpoint, &spec.track, &sim, &EvalConfig::default())
                        .expect("naive evaluation");
                    (seed, workers, steps, eval.mean_progress)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    });
    let progress = |w: usize| median(results.iter().filter(|r| r.1 == w).map(|r| r.3).collect());
    let (one, four) = (progress(1), progress(4));
    let runs: Vec<String> = results.iter().map(|(s, w, n, p)| format!("s{s}/{w}w {n} steps {p:.3}")).collect();
    Outcome::new(four > one, format!("median naive 1w {one:.3} vs 4w {four:.3} [{}]", runs.join(", ")))
}

fn robust_gap(shared: &Shared) -> Outcome {
    let baseline = shared.baseline();
    let randomized: Vec<TrainedRun> =
        SEEDS.iter().map(|&s| TrainedRun::train(s, RandomizationConfig::noise_and_reverse())).collect();

    // five versions evenly spaced over the trained ones (v1 is untrained)
    let ordered: Vec<usize> = baseline
        .iter()
        .map(|run| {
            let versions = run.versions();
            let last = versions.len() - 1;
            (1..=5)
                .map(|k| versions[((k * last) as f64 / 5.0).round() as usize])
                .filter(|&v| run.robust[&v] <= run.naive[&v])
                .count()
        })
        .collect();
    let ordered_ok = ordered.iter().all(|&c| c >= 4);

    let mean_gap = |run: &TrainedRun| {
        let versions = run.versions();
        versions.iter().map(|&v| run.gap(v)).sum::<f64>() / versions.len() as f64
    };
    let base_gaps: Vec<f64> = baseline.iter().map(mean_gap).collect();
    let rand_gaps: Vec<f64> = randomized.iter().map(mean_gap).collect();
    let (base, rand) = (median(base_gaps.clone()), median(rand_gaps.clone()));
    let shrunk = base > 0.0 && rand <= 0.5 * base;
    Outcome::new(
        ordered_ok && shrunk,
        format!(
            "robust<=naive at {ordered:?} of 5 checkpoints; median gap {base:.4} -> {rand:.4} \
             (baseline {base_gaps:.3?}, noise+reverse {rand_gaps:.3?})"
        ),
    )
}

/// Annulus with independently jittered inner and outer rings, stitched by
/// angle into a triangle strip. Outer vertices come first.
fn ring_fixture(rng: &mut ChaCha8Rng) -> TrackMesh {
    let ring = |rng: &mut ChaCha8Rng, n: usize, radius: f64| -> Vec<(f64, Point2)> {
        let offset = rng.random_range(0.0..2.0 * PI / n as f64);
        (0..n)
            .map(|k| {
                let a = offset + 2.0 * PI * (k as f64 + rng.random_range(-0.3..0.3)) / n as f64;
                let r = radius * rng.random_range(0.85..1.15);
                (a, Point2::new(r * a.cos(), r * a.sin()))
            })
            .collect()
    };
    let (n_out, n_in) = (rng.random_range(3..=8), rng.random_range(3..=8));
    let outer = ring(rng, n_out, 2.0);
    let inner = ring(rng, n_in, 1.0);
    let unwrapped = |ring: &[(f64, Point2)], k: usize| ring[k % ring.len()].0 + 2.0 * PI * (k / ring.len()) as f64;
    let mut triangles = Vec::new();
    let (mut o, mut i) = (0, 0);
    while o < n_out || i < n_in {
        let advance_inner = o == n_out || (i < n_in && unwrapped(&inner, i + 1) < unwrapped(&outer, o + 1));
        let (oc, ic) = (o % n_out, n_out + i % n_in);
        if advance_inner {
            triangles.push([oc, ic, n_out + (i + 1) % n_in]);
            i += 1;
        } else {
            triangles.push([oc, (o + 1) % n_out, ic]);
            o += 1;
        }
    }
    let vertices = outer.iter().chain(&inner).map(|&(_, p)| p).collect();
    TrackMesh::new("ring", vertices, triangles).expect("ring fixture")
}

/// Cheapest injection of the smaller side into the larger, by enumeration.
fn brute_force_pairs(inner: &[usize], outer: &[usize], mesh: &TrackMesh) -> BTreeSet<(usize, usize)> {
    let flip = inner.len() > outer.len();
    let (small, large) = if flip { (outer, inner) } else { (inner, outer) };
    let mut best = (f64::INFINITY, Vec::new());
    let mut chosen = Vec::with_capacity(small.len());
    let mut used = vec![false; large.len()];
    fn search(
        small: &[usize],
        large: &[usize],
        mesh: &TrackMesh,
        chosen: &mut Vec<usize>,
        used: &mut [bool],
        cost: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if chosen.len() == small.len() {
            if cost < best.0 {
                *best = (cost, chosen.clone());
            }
            return;
        }
        let a = mesh.vertex(small[chosen.len()]);
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                chosen.push(j);
                search(small, large, mesh, chosen, used, cost + a.dist(mesh.vertex(large[j])), best);
                chosen.pop();
                used[j] = false;
            }
        }
    }
    search(small, large, mesh, &mut chosen, &mut used, 0.0, &mut best);
    best.1
        .iter()
        .enumerate()
        .map(|(k, &j)| if flip { (large[j], small[k]) } else { (small[k], large[j]) })
        .collect()
}

fn geometry(_: &Shared) -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut midpoint_err: f64 = 0.0;
    for _ in 0..50 {
        let mesh = ring_fixture(&mut rng);
        let edges = extract_border_edges(&mesh).expect("border edges");
        let (inner, outer) = group_boundaries(&edges, &mesh).expect("two loops");
        let pairs = match_boundaries(&inner, &outer, &mesh);
        let got: BTreeSet<_> = pairs.iter().copied().collect();
        if got != brute_force_pairs(&inner.vertex_indices, &outer.vertex_indices, &mesh) {
            mismatches += 1;
        }
        if pairs.len() < 3 {
            continue;
        }
        let cl = compute_centerline(&pairs, &inner, &outer, &mesh).expect("centerline");
        for (w, width) in cl.waypoints.iter().zip(&cl.widths) {
            let err = pairs
                .iter()
                .map(|&(i, o)| {
                    let (a, b) = (mesh.vertex(i), mesh.vertex(o));
                    let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
                    w.dist(mid).max((width - a.dist(b)).abs())
                })
                .fold(f64::INFINITY, f64::min);
            midpoint_err = midpoint_err.max(err);
        }
    }

    let mut worst_round_trip: f64 = 0.0;
    for _ in 0..10 {
        let (straight, radius, half_width) =
            (rng.random_range(2.0..10.0), rng.random_range(1.0..4.0), rng.random_range(0.2..0.5));
        let spec = TrackSpec {
            name: "generated".into(),
            centerline: oval_polyline(straight, radius, 20.0),
            half_width,
            vertices_per_side: rng.random_range(80..200),
        };
        let cl: CenterLine = centerline_from_mesh(&generate_track(&spec).expect("generated mesh")).expect("centerline");
        let lap = 2.0 * straight + 2.0 * PI * radius;
        let mean_width = cl.widths.iter().sum::<f64>() / cl.len() as f64;
        worst_round_trip = worst_round_trip
            .max((cl.lap_length - lap).abs() / lap)
            .max((mean_width - 2.0 * half_width).abs() / (2.0 * half_width));
    }
    let elapsed = started.elapsed();
    Outcome::new(
        mismatches == 0 && midpoint_err <= 1e-12 && worst_round_trip <= 0.02 && elapsed < Duration::from_secs(10),
        format!(
            "{mismatches}/50 matching mismatches, midpoint error {midpoint_err:.1e}, \
             round-trip error {:.2}%, {:.2}s",
            100.0 * worst_round_trip,
            elapsed.as_secs_f64()
        ),
    )
}

/// Advantage as the explicit discounted sum of TD errors up to the first done.
fn gae_oracle(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lam: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for l in t..rewards.len() {
                let next = if dones[l] { 0.0 } else { values[l + 1] };
                sum += weight * (rewards[l] + gamma * next - values[l]);
                if dones[l] {
                    break;
                }
                weight *= gamma * lam;
            }
            sum
        })
        .collect()
}

fn gae(_: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut closed_form_misses = 0;
    for _ in 0..1000 {
        let t = rng.random_range(1..=50);
        let dones: Vec<bool> = (0..t).map(|_| rng.random_bool(0.1)).collect();
        let rewards: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..=t).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (gamma, lam) = (rng.random_range(0.8..1.0), rng.random_range(0.0..1.0));
        let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, lam).expect("gae");
        for (k, want) in gae_oracle(&rewards, &values, &dones, gamma, lam).into_iter().enumerate() {
            worst = worst.max((adv[k] - want).abs()).max((ret[k] - (want + values[k])).abs());
        }

        // lambda 0: one-step TD error
        let (adv0, _) = compute_gae(&rewards, &values, &dones, gamma, 0.0).expect("gae");
        for k in 0..t {
            let next = if dones[k] { 0.0 } else { values[k + 1] };
            closed_form_misses += usize::from(adv0[k] != rewards[k] + gamma * next - values[k]);
        }

        // lambda 1, gamma 1, integer data: Monte Carlo return minus baseline,
        // exact in floating point
        let ri: Vec<f64> = (0..t).map(|_| rng.random_range(-8i32..=8) as f64).collect();
        let vi: Vec<f64> = (0..=t).map(|_| rng.random_range(-8i32..=8) as f64).collect();
        let (adv1, _) = compute_gae(&ri, &vi, &dones, 1.0, 1.0).expect("gae");
        for k in 0..t {
            let mut ret = 0.0;
            let mut end = t;
            for l in k..t {
                ret += ri[l];
                if dones[l] {
                    end = l;
                    break;
                }
            }
            if end == t {
                ret += vi[t];
            }
            closed_form_misses += usize::from(adv1[k] != ret - vi[k]);
        }
    }
    Outcome::new(
        worst <= 1e-9 && closed_form_misses == 0,
        format!("max error {worst:.1e} over 1000 sequences, {closed_form_misses} closed-form mismatches"),
    )
}

fn gradients(_: &Shared) -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..20u64 {
        let arch = if seed % 2 == 0 { small_feature_arch() } else { small_image_arch() };
        let r = gradient_check(100 + seed, arch, 2 + (seed as usize % 4), &full_weights());
        worst = worst.max(r.max_rel_error);
        checked += r.params_checked;
    }
    let elapsed = started.elapsed();
    Outcome::new(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("max relative error {worst:.2e} over {checked} parameters, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn store_concurrency(_: &Shared) -> Outcome {
    const WORKERS: u32 = 4;
    const EPISODES: u64 = 50;
    const BATCH: usize = 10;
    let started = Instant::now();
    let sim = SimConfig { max_steps: 60, ..SimConfig::features() };
    let track = oval();
    let fabric = LocalFabric::new(StoreConfig::default());
    let count = ActionSpace::from_config(&sim).count();
    let mut publisher = Trainer::new(
        TrainerConfig::default(),
        Architecture::features(),
        count,
        7,
        String::new(),
        Clock::Logical { dt: sim.dt },
    )
    .expect("trainer");
    publisher.publish(&fabric).expect("initial checkpoint");

    let total = (WORKERS as u64 * EPISODES) as usize;
    let drained = AtomicUsize::new(0);
    let fetches = AtomicUsize::new(0);
    let corrupt = AtomicUsize::new(0);
    let workers_done = AtomicUsize::new(0);
    let per_trainer: [Mutex<Vec<_>>; 2] = Default::default();
    let stop = StopSignal::default();
    let worker_errors = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..WORKERS)
            .map(|id| {
                let (fabric, track, sim, stop, workers_done) = (&fabric, &track, &sim, &stop, &workers_done);
                scope.spawn(move || {
                    let mut cfg =
                        WorkerConfig::new(id, sim.clone(), RandomizationConfig::noise_and_reverse(), 40 + id as u64);
                    cfg.scheduling = Scheduling::Async;
                    let limits = WorkerLimits { max_episodes: Some(EPISODES), checkpoint_timeout: Duration::from_secs(20) };
                    let r = RolloutWorker::new(cfg, track.clone()).and_then(|mut w| w.run(fabric, stop, limits));
                    workers_done.fetch_add(1, Ordering::SeqCst);
                    r
                })
            })
            .collect();
        for slot in &per_trainer {
            let (fabric, drained) = (&fabric, &drained);
            scope.spawn(move || {
                while drained.load(Ordering::SeqCst) < total {
                    if let Some(batch) = fabric.drain(BATCH, Some(Duration::from_millis(100))).expect("drain") {
                        drained.fetch_add(batch.len(), Ordering::SeqCst);
                        slot.lock().unwrap().extend(batch.iter().map(|e| e.id()));
                    }
                }
            });
        }
        // republish and fetch concurrently with the workers' own fetches
        scope.spawn(|| {
            let mut seen = 0;
            while workers_done.load(Ordering::SeqCst) < WORKERS as usize {
                if let Fetched::Checkpoint { version, bytes } = fabric.fetch(Some(seen), None).expect("fetch") {
                    fetches.fetch_add(1, Ordering::SeqCst);
                    match Checkpoint::from_bytes(&bytes) {
                        Ok(ck) if ck.meta.version == version => seen = version,
                        _ => {
                            corrupt.fetch_add(1, Ordering::SeqCst);
                        }
                    }
                }
                publisher.publish(&fabric).expect("republish");
                std::thread::sleep(Duration::from_millis(5));
            }
        });
        workers.into_iter().filter_map(|h| h.join().expect("worker thread").err()).count()
    });

    let [a, b] = per_trainer.map(|m| m.into_inner().unwrap());
    let union: HashSet<_> = a.iter().chain(&b).copied().collect();
    let overlap = a.iter().filter(|id| b.contains(id)).count();
    let duplicates = a.len() + b.len() - union.len();
    let expected: HashSet<_> =
        (0..WORKERS).flat_map(|w| (0..EPISODES).map(move |k| dracer::fabric::episode_id(w, k))).collect();
    let lost = expected.difference(&union).count();
    let counters = fabric.counters().expect("counters");
    let elapsed = started.elapsed();
    let fetched = fetches.into_inner();
    let corrupt = corrupt.into_inner();
    Outcome::new(
        worker_errors == 0
            && lost == 0
            && duplicates == 0
            && overlap == 0
            && corrupt == 0
            && fetched > 0
            && counters.pending_episodes == 0
            && elapsed < Duration::from_secs(60),
        format!(
            "{} drained ({} + {}), {lost} lost, {duplicates} duplicated, {overlap} shared, \
             {corrupt}/{fetched} corrupt fetches, {:.1}s",
            union.len(),
            a.len(),
            b.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism(_: &Shared) -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut spec = RunSpec::new(oval(), SimConfig::features(), TrainerConfig::default(), 8, Budget::updates(5));
        spec.out_dir = Some(dir.path().to_path_buf());
        let out = run_all_in_one(&spec).expect("all-in-one run");
        let version = out.final_checkpoint.meta.version;
        let metrics = std::fs::read(dir.path().join("metrics.csv")).expect("metrics");
        let ck = std::fs::read(dir.path().join("checkpoints").join(dracer::fabric::checkpoint_file_name(version)))
            .expect("final checkpoint");
        (metrics, ck)
    };
    let (m1, c1) = run();
    let (m2, c2) = run();
    Outcome::new(
        m1 == m2 && c1 == c2 && !m1.is_empty(),
        format!(
            "metrics {} bytes {}, checkpoint {} bytes {}",
            m1.len(),
            if m1 == m2 { "identical" } else { "differ" },
            c1.len(),
            if c1 == c2 { "identical" } else { "differ" }
        ),
    )
}

/// Every row's pattern equals its mirror, allowing the one-pixel offset of
/// an even-width image whose center falls between columns.
fn mirror_matches(a: &dracer::sim::GrayImage, b: &dracer::sim::GrayImage) -> bool {
    (0..a.height).all(|y| {
        let (ra, rb) = (a.row(y), b.row(y));
        let m: Vec<u8> = rb.iter().rev().copied().collect();
        let w = a.width;
        ra == m.as_slice() || ra[1..] == m[..w - 1] || ra[..w - 1] == m[1..]
    })
}

fn render_checks() -> Result<(), String> {
    let spec = TrackSpec {
        name: "long".into(),
        centerline: oval_polyline(30.0, 8.0, 10.0),
        half_width: 0.3,
        vertices_per_side: 400,
    };
    let cl = centerline_from_mesh(&generate_track(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cam = Camera::from_config(&SimConfig::small_image());
    // bottom straight of the long oval runs +x at y = -8
    let at = |lateral: f64| CarState { x: -10.0, y: -8.0 + lateral, ..CarState::default() };
    let centered = cam.render(&at(0.0), &cl);
    if (centered.width, centered.height) != (64, 48) {
        return Err(format!("image is {}x{}", centered.width, centered.height));
    }
    if !mirror_matches(&centered, &centered) {
        return Err("centered view is not mirror symmetric".into());
    }
    if !mirror_matches(&cam.render(&at(0.15), &cl), &cam.render(&at(-0.15), &cl)) {
        return Err("left and right offsets are not mirror images".into());
    }
    for y in 0..centered.height {
        let row = centered.row(y);
        if (0..centered.width).any(|x| cam.pixel_to_ground(x, y).is_none()) && row.iter().any(|&p| p != BACKGROUND) {
            return Err(format!("row {y} above the horizon is not background"));
        }
        let Some(first) = row.iter().position(|&p| p != BACKGROUND) else { continue };
        let last = row.iter().rposition(|&p| p != BACKGROUND).unwrap_or(first);
        // rows reaching past the render distance are cut off without a line
        let near = (0..centered.width)
            .all(|x| cam.pixel_to_ground(x, y).is_some_and(|(f, l)| f.hypot(l) <= cam.max_distance));
        let interior = near && first > 0 && last + 1 < centered.width;
        if interior && (row[first] != LINE || row[last] != LINE) {
            return Err(format!("row {y} track surface is not bounded by edge lines"));
        }
    }
    if !centered.data.contains(&SURFACE) || !centered.data.contains(&LINE) {
        return Err("centered view lacks surface or edge lines".into());
    }
    Ok(())
}

fn image_mode(_: &Shared) -> Outcome {
    let render = render_checks();
    let started = Instant::now();
    let sim = SimConfig { obs_mode: ObsMode::Image, ..SimConfig::small_image() };
    let spec = RunSpec::new(oval(), sim, TrainerConfig::default(), 9, Budget::updates(2));
    let trained = run_sequential(&spec);
    let elapsed = started.elapsed();
    let training = match &trained {
        Ok(out) => {
            let finite = out.metrics.iter().all(|m| {
                [m.policy_loss, m.value_loss, m.entropy].iter().all(|x| x.is_finite())
                    && !(m.policy_loss == 0.0 && m.value_loss == 0.0 && m.entropy == 0.0)
            });
            if out.metrics.len() == 2 && finite {
                Ok(format!("2 updates, {} steps", out.metrics[1].steps))
            } else {
                Err(format!("{} updates, finite losses {finite}", out.metrics.len()))
            }
        }
        Err(e) => Err(e.to_string()),
    };
    let pass = render.is_ok() && training.is_ok() && elapsed < Duration::from_secs(300);
    let show = |r: &Result<String, String>| match r {
        Ok(s) => s.clone(),
        Err(e) => format!("failed: {e}"),
    };
    Outcome::new(
        pass,
        format!(
            "render {}, training {} in {:.1}s",
            render.map_or_else(|e| format!("failed: {e}"), |()| "ok".into()),
            show(&training),
            elapsed.as_secs_f64()
        ),
    )
}
