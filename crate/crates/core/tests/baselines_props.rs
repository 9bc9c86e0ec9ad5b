use dynplan::baselines::{drrt_sample, Advance, BaselineConfig, Drrt, MpRrt};
use dynplan::geometry::{segment_clear, CollisionCounter, Point2, Rect, Segment};
use dynplan::planner::{Planner, PlannerRng};
use dynplan::rrt::{connect, Counters, Extension, RrtParams, Tree};
use dynplan::world::{load_map, World};
use proptest::prelude::*;
use rand::SeedableRng;

fn crowd(seed: u64) -> World {
    load_map(&format!(
        r#"{{"bounds":[25,25],"robot":{{"start":[2,2],"speed":1}},"goal":[23,23],
            "walls":[{{"center":[12,8],"half":[1,5]}}],"movers":{{"count":20}},"seed":{seed}}}"#
    ))
    .unwrap()
}

fn edges_valid(t: &Tree, known: &[Rect]) -> bool {
    let mut cc = CollisionCounter::new();
    t.edges().all(|(_, s)| segment_clear(&s, known, &mut cc))
}

fn parents_ok(t: &Tree) -> bool {
    t.nodes().iter().enumerate().all(|(i, n)| n.parent.is_none_or(|p| p < i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trees_stay_valid_while_driving(seed in 0u64..10_000, adv in any::<bool>()) {
        let advance = if adv { Advance::Adv } else { Advance::NoAdv };
        let cfg = BaselineConfig::default();
        let params = RrtParams::for_robot(1.0);
        let mut w = crowd(seed);
        let mut wm = w.clone();
        let mut d = Drrt::new(&w, &cfg, params, advance);
        let mut m = MpRrt::new(&wm, &cfg, params, advance);
        let mut rng = PlannerRng::seed_from_u64(seed);
        let mut c = Counters::default();
        for _ in 0..40 {
            w.update(1);
            wm.update(1);
            if let Some(path) = d.step(&w, 60, &mut rng, &mut c) {
                prop_assert!(edges_valid(&d.tree, &w.known_obstacles()));
                let rest = w.advance_robot(&path, 1).unwrap();
                d.robot_moved(&w, &rest);
            }
            prop_assert!(parents_ok(&d.tree));
            prop_assert!(d.cache.len() <= cfg.cache_capacity);

            let known = wm.known_obstacles();
            if let Some(path) = m.step(&wm, 60, &mut rng, &mut c) {
                prop_assert!(edges_valid(&m.tree, &known));
                prop_assert_eq!(path[0], wm.robot_pos);
                let rest = wm.advance_robot(&path, 1).unwrap();
                m.robot_moved(&wm, &rest);
                prop_assert_eq!(m.tree.root(), wm.robot_pos);
            }
            prop_assert!(parents_ok(&m.tree));
            prop_assert!(m.forest.len() <= cfg.forest_cap);
            for t in m.forest.trees() {
                prop_assert!(t.len() >= cfg.min_subtree);
                prop_assert!(parents_ok(t));
            }
            if let Some(g) = m.goal_node() {
                prop_assert_eq!(m.tree.point(g), wm.goal);
            }
        }
    }
}

/// Plain goal-rooted RRT growth with the same draws DRRT makes when nothing
/// is ever trimmed.
fn plain_growth(world: &World, params: &RrtParams, budget: usize, rng: &mut PlannerRng) -> Tree {
    let known = world.known_obstacles();
    let mut t = Tree::new(world.goal);
    let mut stats = Default::default();
    let cache = dynplan::baselines::WaypointCache::new(100);
    let mut c = Counters::default();
    for _ in 0..budget {
        let s = drrt_sample(&cache, &world.bounds, world.robot_pos, 0.4, params.goal_bias, 4.0, rng, &mut stats);
        let ext = connect(&mut t, s.point(), params, &known, &mut c);
        let node = match ext {
            Extension::Reached(n) | Extension::Added { node: n, .. } => n,
            Extension::Blocked => continue,
        };
        if matches!((s, ext), (dynplan::baselines::DrrtSample::Robot(_), Extension::Reached(_))) {
            break;
        }
        let np = t.point(node);
        if np.dist(world.robot_pos) <= params.step_size
            && segment_clear(&Segment::new(np, world.robot_pos), &known, &mut CollisionCounter::new())
        {
            t.push(world.robot_pos, node);
            break;
        }
    }
    t
}

#[test]
fn static_world_drrt_is_plain_rrt() {
    let doc = r#"{"bounds":[30,30],"robot":{"start":[2,2],"speed":1},"goal":[28,28],
        "walls":[{"center":[15,10],"half":[1,10]},{"center":[8,22],"half":[8,1]}]}"#;
    let params = RrtParams::for_robot(1.0);
    for seed in 0..20 {
        let w = load_map(doc).unwrap();
        let mut d = Drrt::new(&w, &BaselineConfig::default(), params, Advance::NoAdv);
        let mut rng = PlannerRng::seed_from_u64(seed);
        let mut c = Counters::default();
        let mut rounds = 0;
        while !d.replan(&w, 25, &mut rng, &mut c) && rounds < 40 {
            assert_eq!(d.last_trimmed, 0);
            rounds += 1;
        }
        assert!(d.cache.is_empty());
        assert_eq!(d.waypoint_stats.eligible, 0);

        let mut reference = PlannerRng::seed_from_u64(seed);
        let plain = plain_growth(&w, &params, 25 * (rounds + 1), &mut reference);
        assert_eq!(plain, d.tree, "seed {seed}");
    }
}

#[test]
fn movers_parked_off_the_tree_trim_nothing() {
    let mut w = World::new(Rect::from_min_max(Point2::new(0.0, 0.0), Point2::new(20.0, 20.0)), Point2::new(1.0, 1.0), Point2::new(19.0, 19.0), 1.0, 1.0);
    w.movers.push(dynplan::world::MovingObstacle { shape: Rect::square(Point2::new(18.0, 2.0), 1.0), velocity: Point2::new(0.0, 0.0), speed_fraction: 0.0 });
    let mut d = Drrt::new(&w, &BaselineConfig::default(), RrtParams::for_robot(1.0), Advance::NoAdv);
    let mut rng = PlannerRng::seed_from_u64(3);
    let mut c = Counters::default();
    assert!(d.replan(&w, 2000, &mut rng, &mut c));
    let tree = d.tree.clone();
    d.trim(&w, &mut rng, &mut c.cc);
    assert_eq!(d.last_trimmed, 0);
    assert_eq!(d.tree, tree);
}
