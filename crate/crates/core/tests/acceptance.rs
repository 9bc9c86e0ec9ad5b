//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::time::{Duration, Instant};

use dynplan::baselines::{Advance, BaselineConfig, DrawStats, Drrt, MpRrt};
use dynplan::bench::{run_suite, run_suite_to_dir, summarize, Execution, SuiteConfig, SummaryRow, TrialOptions};
use dynplan::geometry::{path_feasible, path_length, seg_intersects_rect, CollisionCounter, Point2, Rect, Segment};
use dynplan::maps;
use dynplan::multistage::{arc, mutate, post_process, MultiStageConfig};
use dynplan::planner::{Planner, PlannerKind, PlannerRng, PlannerSettings};
use dynplan::rrt::{grow_bidirectional, Counters, RrtParams, Tree};
use dynplan::world::{MovingObstacle, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// 1. exact predicate vs dense sampling

fn inside(r: &Rect, q: Point2) -> bool {
    (q.x - r.center.x).abs() <= r.half_w && (q.y - r.center.y).abs() <= r.half_h
}

fn outside_distance(r: &Rect, q: Point2) -> f64 {
    let dx = ((q.x - r.center.x).abs() - r.half_w).max(0.0);
    let dy = ((q.y - r.center.y).abs() - r.half_h).max(0.0);
    dx.hypot(dy)
}

/// Samples `STEPS + 1` points of `s` between parameters `t0` and `t1`; returns
/// whether one lies in `r`, and the parameter and outside distance of the nearest.
fn sample_window(s: &Segment, r: &Rect, t0: f64, t1: f64) -> (bool, (f64, f64)) {
    const STEPS: usize = 10_000;
    let mut closest = (t0, f64::INFINITY);
    for k in 0..=STEPS {
        let t = t0 + (t1 - t0) * k as f64 / STEPS as f64;
        let q = s.a.lerp(s.b, t);
        if inside(r, q) {
            return (true, (t, 0.0));
        }
        let d = outside_distance(r, q);
        if d < closest.1 {
            closest = (t, d);
        }
    }
    (false, closest)
}

fn geometry_oracle() -> Outcome {
    const CASES: usize = 100_000;
    const STEPS: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let coord = |rng: &mut ChaCha8Rng| {
        if rng.random::<bool>() {
            rng.random_range(-10.0..10.0)
        } else {
            rng.random_range(-20i32..20) as f64 / 2.0
        }
    };
    let (mut hits, mut grazes, mut bad) = (0, 0, 0);
    for _ in 0..CASES {
        let s = Segment::new(p(coord(&mut rng), coord(&mut rng)), p(coord(&mut rng), coord(&mut rng)));
        let r = Rect::new(p(coord(&mut rng), coord(&mut rng)), rng.random_range(1..12) as f64 / 4.0, rng.random_range(1..12) as f64 / 4.0);
        let exact = seg_intersects_rect(&s, &r, &mut CollisionCounter::new());
        // every sample lies in the segment's bounding box
        let (lo, hi) = (p(s.a.x.min(s.b.x), s.a.y.min(s.b.y)), p(s.a.x.max(s.b.x), s.a.y.max(s.b.y)));
        let boxes_meet = lo.x <= r.center.x + r.half_w
            && hi.x >= r.center.x - r.half_w
            && lo.y <= r.center.y + r.half_h
            && hi.y >= r.center.y - r.half_h;
        let (mut sampled, mut closest) = if boxes_meet { sample_window(&s, &r, 0.0, 1.0) } else { (false, (0.0, f64::INFINITY)) };
        // a miss may be a contact thinner than the spacing: zoom in around the nearest sample
        // before calling it a disagreement
        let mut width = 1.0 / STEPS as f64;
        for _ in 0..6 {
            if sampled || !exact || !boxes_meet {
                break;
            }
            let (t0, t1) = ((closest.0 - width).max(0.0), (closest.0 + width).min(1.0));
            let (hit, near) = sample_window(&s, &r, t0, t1);
            sampled = hit;
            if near.1 < closest.1 {
                closest = near;
            }
            width = (t1 - t0) / STEPS as f64;
        }
        hits += exact as usize;
        match (exact, sampled) {
            (true, true) | (false, false) => {}
            (true, false) if closest.1 <= 1e-9 => grazes += 1,
            _ => bad += 1,
        }
    }
    let t = start.elapsed();
    outcome(
        bad == 0 && t < Duration::from_secs(10),
        format!("{CASES} cases, {hits} intersecting, {bad} disagreements, {grazes} touching within 1e-9 of a boundary, {:.1}s (limit 10s)", t.as_secs_f64()),
    )
}

// 2. operator fuzz

fn free(path: &[Point2], obs: &[Rect]) -> bool {
    path_feasible(path, obs, &mut CollisionCounter::new()).unwrap().is_free()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Point2>, Vec<Rect>) {
    let n = rng.random_range(2..8);
    let path: Vec<Point2> = (0..n).map(|_| p(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0))).collect();
    let m = rng.random_range(0..10);
    let obs = (0..m)
        .map(|_| Rect::new(p(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)), rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)))
        .collect();
    (path, obs)
}

fn operator_fuzz() -> Outcome {
    const RUNS: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = Vec::new();
    let (mut free_inputs, mut changed) = (0, 0);
    for op in ["arc", "mut", "post_process"] {
        for i in 0..RUNS {
            let (path, obs) = random_instance(&mut rng);
            let was_free = free(&path, &obs);
            free_inputs += was_free as usize;
            let mut out = path.clone();
            let mut cc = CollisionCounter::new();
            match op {
                "arc" => {
                    let col = rng.random_range(0..path.len() - 1);
                    arc(&mut out, col, 4.0, &obs, &mut rng, &mut cc).unwrap();
                }
                "mut" => {
                    if path.len() < 3 {
                        continue;
                    }
                    let idx = rng.random_range(1..path.len() - 1);
                    mutate(&mut out, idx, 4.0, &obs, &mut rng, &mut cc).unwrap();
                }
                _ => {
                    post_process(&mut out, &obs, &mut cc);
                    let mut again = out.clone();
                    post_process(&mut again, &obs, &mut cc);
                    if again != out {
                        violations.push(format!("{op} #{i}: not idempotent"));
                    }
                    if path_length(&out) > path_length(&path) + 1e-9 {
                        violations.push(format!("{op} #{i}: length grew"));
                    }
                }
            }
            changed += (out != path) as usize;
            if out[0] != path[0] || out.last() != path.last() {
                violations.push(format!("{op} #{i}: endpoint moved"));
            }
            if was_free && !free(&out, &obs) {
                violations.push(format!("{op} #{i}: free path became blocked"));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        violations.is_empty() && t < Duration::from_secs(30),
        format!(
            "3 x {RUNS} applications, {free_inputs} on free paths, {changed} changed a path, {} violations{}, {:.1}s (limit 30s)",
            violations.len(),
            violations.first().map_or(String::new(), |v| format!(" (first: {v})")),
            t.as_secs_f64()
        ),
    )
}

// 3. RRT sanity

fn rrt_sanity() -> Outcome {
    let params = RrtParams::for_robot(1.0);
    let bounds = Rect::from_min_max(p(0.0, 0.0), p(30.0, 30.0));
    let (mut empty_ok, mut two_points) = (0, 0);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a, mut b) = (Tree::new(p(2.0, 2.0)), Tree::new(p(28.0, 27.0)));
        let g = grow_bidirectional(&mut a, &mut b, &bounds, &params, &[], 20_000, &mut rng, &mut Counters::default());
        if let Some(mut path) = g.path {
            empty_ok += 1;
            post_process(&mut path, &[], &mut CollisionCounter::new());
            two_points += (path.len() == 2) as usize;
        }
    }
    // U opening toward the start, goal behind its base
    let u = [
        Rect::from_min_max(p(18.0, 6.0), p(19.0, 24.0)),
        Rect::from_min_max(p(8.0, 6.0), p(19.0, 7.0)),
        Rect::from_min_max(p(8.0, 23.0), p(19.0, 24.0)),
    ];
    let mut u_ok = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (mut a, mut b) = (Tree::new(p(13.0, 15.0)), Tree::new(p(26.0, 15.0)));
        let g = grow_bidirectional(&mut a, &mut b, &bounds, &params, &u, 20_000, &mut rng, &mut Counters::default());
        if g.path.is_some_and(|path| free(&path, &u)) {
            u_ok += 1;
        }
    }
    outcome(
        empty_ok == 100 && two_points == 100 && u_ok >= 99,
        format!("empty map {empty_ok}/100 (need 100), 2-point after post_process {two_points}/100, U-shaped wall {u_ok}/100 (need >= 99)"),
    )
}

// 4. parameter fidelity

fn drive<P: Planner>(planner: &mut P, world: &mut World, seed: u64, mut check: impl FnMut(&P) -> bool) -> bool {
    let mut rng = PlannerRng::seed_from_u64(seed);
    let mut counters = Counters::default();
    let mut ok = true;
    for _ in 0..20_000 {
        if world.at_goal() {
            break;
        }
        world.update(1);
        if let Some(path) = planner.step(world, 300, &mut rng, &mut counters) {
            let rest = world.advance_robot(&path, 1).unwrap();
            planner.robot_moved(world, &rest);
        }
        ok &= check(planner);
    }
    ok
}

fn parameter_fidelity() -> Outcome {
    let doc = maps::bundled("map1").unwrap().unwrap();
    let cfg = BaselineConfig::default();
    let (mut waypoint, mut reuse) = (DrawStats::default(), DrawStats::default());
    let mut forest_ok = true;
    let mut max_forest = 0;
    for seed in 0..100 {
        for advance in [Advance::Adv, Advance::NoAdv] {
            let mut w = doc.build_for_trial(seed).unwrap();
            let rrt = RrtParams::for_robot(w.robot_size);
            let mut d = Drrt::new(&w, &cfg, rrt, advance);
            drive(&mut d, &mut w, seed, |_| true);
            waypoint.merge(d.waypoint_stats);

            let mut w = doc.build_for_trial(seed).unwrap();
            let mut m = MpRrt::new(&w, &cfg, rrt, advance);
            forest_ok &= drive(&mut m, &mut w, seed, |m| {
                max_forest = max_forest.max(m.forest.len());
                m.forest.len() <= 25 && m.forest.trees().all(|t| t.len() >= 5)
            });
            reuse.merge(m.reuse_stats);
        }
    }
    let wf = waypoint.frequency().unwrap_or(f64::NAN);
    let rf = reuse.frequency().unwrap_or(f64::NAN);
    outcome(
        (wf - 0.4).abs() <= 0.01 && (rf - 0.1).abs() <= 0.01 && forest_ok,
        format!(
            "DRRT waypoint bias {wf:.4} over {} draws (0.40 +/- 0.01), MP-RRT reuse {rf:.4} over {} draws (0.10 +/- 0.01), forest bounds held every tick: {forest_ok} (largest forest {max_forest})",
            waypoint.eligible, reuse.eligible
        ),
    )
}

// 5 and 6. directional comparisons

fn suite(maps_: &[&str], trials: u64, base_seed: u64) -> Vec<SummaryRow> {
    let config = SuiteConfig {
        planners: PlannerKind::ALL.to_vec(),
        maps: maps_.iter().map(|s| s.to_string()).collect(),
        trials,
        base_seed,
        cutoff_ticks: 20_000,
        budget_per_tick: 300,
        rrt: None,
        multistage: MultiStageConfig::default(),
        baselines: BaselineConfig::default(),
    };
    let loaded = config.load_maps(std::path::Path::new(".")).unwrap();
    summarize(&run_suite(&config, &loaded, Execution::from_jobs(jobs())).unwrap())
}

fn row<'a>(rows: &'a [SummaryRow], kind: PlannerKind, map: &str) -> &'a SummaryRow {
    rows.iter().find(|r| r.planner == kind && r.map == map).unwrap()
}

fn table(rows: &[SummaryRow]) -> String {
    let f = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.0}"));
    rows.iter()
        .map(|r| format!("    {:<12} {:<13} success {:>5.1}%  C.C. {:>9}  N.N. {:>6}  ticks {:>5}", r.planner.as_str(), r.map, r.success_pct, f(r.mean_cc), f(r.mean_nn), f(r.mean_ticks)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn dynamic_directional() -> Outcome {
    let start = Instant::now();
    let rows = suite(&["map1", "map2"], 100, 10_000);
    let mut fails = Vec::new();
    for map in ["map1", "map2"] {
        let ms = row(&rows, PlannerKind::MultiStage, map);
        if ms.success_pct < 95.0 {
            fails.push(format!("{map}: multistage success {:.1}% < 95%", ms.success_pct));
        }
        for kind in PlannerKind::ALL.into_iter().filter(PlannerKind::is_baseline) {
            let b = row(&rows, kind, map);
            let (mc, bc) = (ms.mean_cc.unwrap_or(f64::INFINITY), b.mean_cc.unwrap_or(f64::INFINITY));
            let (mn, bn) = (ms.mean_nn.unwrap_or(f64::INFINITY), b.mean_nn.unwrap_or(f64::INFINITY));
            if mc >= bc {
                fails.push(format!("{map}: C.C. {mc:.0} not below {kind} {bc:.0}"));
            }
            if mn >= bn {
                fails.push(format!("{map}: N.N. {mn:.0} not below {kind} {bn:.0}"));
            }
        }
    }
    let t = start.elapsed();
    if t > Duration::from_secs(30 * 60) {
        fails.push("over the 30 minute budget".into());
    }
    outcome(
        fails.is_empty(),
        format!("100 trials per cell, {:.1}s{}\n{}", t.as_secs_f64(), fails.iter().map(|f| format!("\n    fail: {f}")).collect::<String>(), table(&rows)),
    )
}

fn partial_directional() -> Outcome {
    let start = Instant::now();
    let rows = suite(&["map1_partial", "map2_partial"], 100, 20_000);
    let mut fails = Vec::new();
    let mut notes = Vec::new();
    for map in ["map1_partial", "map2_partial"] {
        let ms = row(&rows, PlannerKind::MultiStage, map).mean_ticks.unwrap_or(f64::INFINITY);
        let best = PlannerKind::ALL
            .into_iter()
            .filter(PlannerKind::is_baseline)
            .map(|k| row(&rows, k, map).mean_ticks.unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min);
        notes.push(format!("{map}: multistage {ms:.1} ticks vs best baseline {best:.1} x 1.10 = {:.1}", best * 1.1));
        if ms > best * 1.10 {
            fails.push(map);
        }
    }
    outcome(
        fails.is_empty(),
        format!("{}; {:.1}s\n{}", notes.join("; "), start.elapsed().as_secs_f64(), table(&rows)),
    )
}

// 7. determinism

fn determinism() -> Outcome {
    let config = SuiteConfig::parse(
        r#"{"planners":["multistage","drrt-noadv","drrt-adv","mprrt-noadv","mprrt-adv"],
            "maps":["map1","map2_partial"],"trials":6,"base_seed":77,"cutoff_ticks":3000}"#,
    )
    .unwrap();
    let maps_ = config.load_maps(std::path::Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, exec| {
        let out = dir.path().join(name);
        run_suite_to_dir(&config, &maps_, exec, &out).unwrap();
        fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a", Execution::Sequential);
    let b = run("b", Execution::Sequential);
    let n = jobs().max(4);
    let c = run("c", Execution::Parallel { jobs: n });
    outcome(a == b && a == c, format!("results.csv ({} bytes) identical across two sequential runs: {}, sequential vs {n} jobs: {}", a.len(), a == b, a == c))
}

// 8. restart when the only corridor is blocked

fn corridor_world() -> World {
    // two blocks leave a corridor y in (9, 11); a vertical channel x in (14, 16)
    // crosses it. A tall mover crawling up the channel leaves a gap at first,
    // seals the crossing from tick 10 and clears it after tick 70.
    let mut w = World::new(Rect::from_min_max(p(0.0, 0.0), p(30.0, 20.0)), p(2.0, 10.0), p(28.0, 10.0), 1.0, 1.0);
    w.walls = vec![
        Rect::from_min_max(p(8.0, 0.0), p(14.0, 9.0)),
        Rect::from_min_max(p(8.0, 11.0), p(14.0, 20.0)),
        Rect::from_min_max(p(16.0, 0.0), p(22.0, 9.0)),
        Rect::from_min_max(p(16.0, 11.0), p(22.0, 20.0)),
    ];
    w.movers.push(MovingObstacle { shape: Rect::new(p(15.0, 6.0), 1.0, 4.0), velocity: p(0.0, 0.1), speed_fraction: 0.1 });
    w
}

fn restart_behaviour() -> Outcome {
    let mut results = Vec::new();
    for seed in 0..10 {
        let mut sim = dynplan::bench::Simulation::new(PlannerKind::MultiStage, corridor_world(), seed, 300, &PlannerSettings::default());
        let mut ticks = 0;
        while !sim.world.at_goal() && ticks < 2000 {
            sim.tick().unwrap();
            ticks += 1;
        }
        let blocker_gone = sim.world.movers[0].shape.min().y > 9.0;
        results.push((sim.planner.restarts(), sim.world.at_goal(), blocker_gone, ticks));
    }
    let ok = results.iter().all(|&(r, goal, gone, _)| r >= 1 && goal && gone);
    let min_restarts = results.iter().map(|r| r.0).min().unwrap();
    let max_ticks = results.iter().map(|r| r.3).max().unwrap();
    outcome(ok, format!("10 seeds: every run restarted (min {min_restarts} restarts) and reached the goal after the blocker left: {ok}, slowest {max_ticks} ticks"))
}

// informative: vicinity sensitivity

fn vicinity_sweep() -> String {
    let doc = maps::bundled("map2").unwrap().unwrap();
    let mut lines = Vec::new();
    for v in [2.0, 4.0, 8.0] {
        let mut settings = PlannerSettings::default();
        settings.multistage.vicinity = Some(v);
        let opts = TrialOptions { settings, ..TrialOptions::default() };
        let rs: Vec<_> = (0..30).map(|s| dynplan::bench::run_trial(PlannerKind::MultiStage, "map2", &doc, 500 + s, &opts).unwrap()).collect();
        let ok = rs.iter().filter(|r| r.success).count();
        let cc = rs.iter().map(|r| r.cc as f64).sum::<f64>() / rs.len() as f64;
        let restarts = rs.iter().map(|r| r.restarts as f64).sum::<f64>() / rs.len() as f64;
        lines.push(format!("    vicinity {v}: success {ok}/30, mean C.C. {cc:.0}, mean restarts {restarts:.2}"));
    }
    lines.join("\n")
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("1 geometry oracle equivalence", geometry_oracle),
        ("2 operator contracts", operator_fuzz),
        ("3 RRT sanity", rrt_sanity),
        ("4 parameter fidelity", parameter_fidelity),
        ("5 dynamic maps, directional", dynamic_directional),
        ("6 partially known maps, directional", partial_directional),
        ("7 determinism", determinism),
        ("8 restart behaviour", restart_behaviour),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        failed += !o.pass as usize;
        println!("criterion {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("info multistage vicinity sweep on map2 (30 trials each):\n{}", vicinity_sweep());
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
