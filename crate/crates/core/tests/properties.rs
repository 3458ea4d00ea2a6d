use proptest::prelude::*;
use sdploc::channel::{Propagation, RangeMeasurements, RangeRecord};
use sdploc::metrics::{mean_position_error, position_error};
use sdploc::network::{build_edge_sets, connectivity_report, generate_network};
use sdploc::refine::{gradient, objective, refine, RefineOptions, RefineStatus};
use sdploc::{Area, Edge, Network, Point2};

fn brute_force(net: &Network, rho: f64) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut bb = Vec::new();
    let mut ba = Vec::new();
    for i in 0..net.m() {
        for j in 0..net.m() {
            let d = ((net.blind[i].x - net.blind[j].x).powi(2) + (net.blind[i].y - net.blind[j].y).powi(2)).sqrt();
            if i < j && d <= rho {
                bb.push((i, j));
            }
        }
        for r in 0..net.n_anchors() {
            let d = ((net.blind[i].x - net.anchors[r].x).powi(2) + (net.blind[i].y - net.anchors[r].y).powi(2)).sqrt();
            if d <= rho {
                ba.push((i, r));
            }
        }
    }
    (bb, ba)
}

fn noisy_measurements(net: &Network, rho: f64, seed: u64) -> RangeMeasurements {
    use rand::{Rng, SeedableRng};
    let edges = build_edge_sets(net, rho);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = RangeMeasurements::exact(net, &edges);
    for r in &mut m.records {
        r.measured = (r.measured + rng.random_range(-1.0..1.0)).max(0.0);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edges_match_exhaustive_scan(seed in any::<u64>(), m in 0usize..150, n in 0usize..50, rho in 0.1f64..45.0) {
        let net = generate_network(seed, Area::new(30.0, 30.0), m, n);
        let e = build_edge_sets(&net, rho);
        let (bb, ba) = brute_force(&net, rho);
        prop_assert_eq!(e.blind_blind, bb);
        prop_assert_eq!(e.blind_anchor, ba);
    }

    #[test]
    fn edges_grow_with_range(seed in any::<u64>(), m in 1usize..60, n in 0usize..20, r1 in 0.1f64..30.0, dr in 0.0f64..15.0) {
        let net = generate_network(seed, Area::new(30.0, 30.0), m, n);
        let small = build_edge_sets(&net, r1);
        let big = build_edge_sets(&net, r1 + dr);
        prop_assert!(small.blind_blind.iter().all(|p| big.blind_blind.contains(p)));
        prop_assert!(small.blind_anchor.iter().all(|p| big.blind_anchor.contains(p)));
    }

    #[test]
    fn degrees_match_recount(seed in any::<u64>(), m in 1usize..60, n in 0usize..20, rho in 1.0f64..30.0) {
        let net = generate_network(seed, Area::new(30.0, 30.0), m, n);
        let e = build_edge_sets(&net, rho);
        let rep = connectivity_report(&net, &e);
        for i in 0..m {
            let blind = (0..m).filter(|&j| j != i && net.blind[i].dist(&net.blind[j]) <= rho).count();
            let anchor = (0..n).filter(|&r| net.blind[i].dist(&net.anchors[r]) <= rho).count();
            prop_assert_eq!(rep.degree[i], blind + anchor);
            prop_assert_eq!(rep.anchor_degree[i], anchor);
        }
        prop_assert_eq!(rep.isolated, rep.degree.iter().filter(|&&d| d == 0).count());
    }

    #[test]
    fn generation_is_seeded_and_in_box(seed in any::<u64>(), w in 1.0f64..100.0, h in 1.0f64..100.0) {
        let area = Area::new(w, h);
        let a = generate_network(seed, area, 20, 5);
        prop_assert_eq!(&a, &generate_network(seed, area, 20, 5));
        prop_assert!(a.blind.iter().chain(&a.anchors).all(|p| area.contains(p)));
        prop_assert_eq!(Network::from_text(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn position_error_invariances(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 1..40),
        shift in (-100.0f64..100.0, -100.0f64..100.0),
    ) {
        let est: Vec<Point2> = pts.iter().map(|p| Point2::new(p.0, p.1)).collect();
        let truth: Vec<Point2> = pts.iter().map(|p| Point2::new(p.2, p.3)).collect();
        let base = position_error(&est, &truth).unwrap();
        let mut re: Vec<(Point2, Point2)> = est.iter().copied().zip(truth.iter().copied()).collect();
        re.reverse();
        let (e2, t2): (Vec<Point2>, Vec<Point2>) = re.into_iter().unzip();
        prop_assert!((position_error(&e2, &t2).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
        let s = Point2::new(shift.0, shift.1);
        let e3: Vec<Point2> = est.iter().map(|&p| p + s).collect();
        let t3: Vec<Point2> = truth.iter().map(|&p| p + s).collect();
        prop_assert!((position_error(&e3, &t3).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn mean_matches_two_pass(values in prop::collection::vec(0.0f64..20.0, 1..200)) {
        let (mu, var) = mean_position_error(&values).unwrap();
        let n = values.len() as f64;
        let mut s = 0.0;
        for v in &values { s += v; }
        let mean = s / n;
        let mut ss = 0.0;
        for v in &values { ss += (v - mean) * (v - mean); }
        prop_assert!((mu - mean).abs() <= 1e-12 * mean.abs().max(1e-300));
        prop_assert!((var - ss / n).abs() <= 1e-12 * (ss / n).max(1e-12));
    }

    #[test]
    fn identical_trials_have_zero_variance(p in 0.0f64..100.0, l in 1usize..100) {
        let (mu, var) = mean_position_error(&vec![p; l]).unwrap();
        prop_assert!((mu - p).abs() <= 1e-12 * p.max(1.0));
        prop_assert!(var <= 1e-20 * p.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), m in 1usize..12, n in 1usize..6) {
        let net = generate_network(seed, Area::new(30.0, 30.0), m, n);
        let meas = noisy_measurements(&net, 20.0, seed ^ 1);
        // Evaluate away from the truth so the residuals are not all tiny.
        let pos: Vec<Point2> = net.blind.iter().enumerate()
            .map(|(i, p)| *p + Point2::new(((i * 7 + 3) % 5) as f64 * 0.3 - 0.6, ((i * 3 + 1) % 7) as f64 * 0.2 - 0.6))
            .collect();
        let g = gradient(&pos, &meas, &net.anchors);
        let h = 1e-5;
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for k in 0..2 * m {
            let mut plus = pos.clone();
            let mut minus = pos.clone();
            if k % 2 == 0 {
                plus[k / 2].x += h;
                minus[k / 2].x -= h;
            } else {
                plus[k / 2].y += h;
                minus[k / 2].y -= h;
            }
            let fd = (objective(&plus, &meas, &net.anchors) - objective(&minus, &meas, &net.anchors)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-5 * scale, "component {}: {} vs {}", k, g[k], fd);
        }
    }

    #[test]
    fn refinement_never_ascends(seed in any::<u64>(), m in 1usize..15, n in 1usize..6, jitter in 0.0f64..5.0) {
        let net = generate_network(seed, Area::new(30.0, 30.0), m, n);
        let meas = noisy_measurements(&net, 15.0, seed ^ 2);
        let start: Vec<Point2> = net.blind.iter().enumerate()
            .map(|(i, p)| *p + Point2::new(jitter * ((i % 3) as f64 - 1.0), jitter * ((i % 2) as f64 - 0.5)))
            .collect();
        let opts = RefineOptions { record_trace: true, max_iter: 200, ..RefineOptions::default() };
        let out = refine(&start, &meas, &net.anchors, &opts);
        prop_assert!(out.objective <= out.initial_objective);
        prop_assert!(out.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        if out.status == RefineStatus::Converged {
            prop_assert!(out.grad_norm <= opts.grad_tol * out.objective.max(1.0));
        }
    }
}

#[test]
fn quadrant_shares_are_binomial() {
    let area = Area::new(30.0, 30.0);
    let mut counts = [0usize; 9];
    let mut total = 0usize;
    for seed in 0..100 {
        let net = generate_network(seed, area, 80, 20);
        for p in net.blind.iter().chain(&net.anchors) {
            let cx = ((p.x / 10.0) as usize).min(2);
            let cy = ((p.y / 10.0) as usize).min(2);
            counts[cy * 3 + cx] += 1;
            total += 1;
        }
    }
    assert_eq!(total, 10_000);
    let p = 1.0 / 9.0;
    let expected = total as f64 * p;
    let sd = (total as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() <= 4.0 * sd, "{counts:?}");
    }
}

#[test]
fn stationary_at_exact_truth() {
    let net = generate_network(11, Area::new(30.0, 30.0), 10, 4);
    let edges = build_edge_sets(&net, 15.0);
    let meas = RangeMeasurements::exact(&net, &edges);
    // d̂² = (√d²)² is exact only up to rounding.
    assert!(objective(&net.blind, &meas, &net.anchors) < 1e-20);
    assert!(gradient(&net.blind, &meas, &net.anchors).iter().all(|&g| g.abs() < 1e-10));
}

#[test]
fn hand_built_objective() {
    let anchors = [Point2::new(0.0, 0.0)];
    let rec = |edge, measured| RangeRecord { edge, true_distance: 0.0, propagation: Propagation::None, measured };
    let meas = RangeMeasurements {
        records: vec![rec(Edge::BlindAnchor(0, 0), 2.0), rec(Edge::BlindBlind(0, 1), 1.0)],
        clamped: 0,
    };
    let pos = [Point2::new(1.0, 0.0), Point2::new(1.0, 3.0)];
    // (4 − 1)² + (1 − 9)² = 9 + 64
    assert_eq!(objective(&pos, &meas, &anchors), 73.0);
}
