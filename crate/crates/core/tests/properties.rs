use std::collections::VecDeque;

use proptest::prelude::*;

use hklab::generators::{
    lattice_zd, sierpinski_gasket, stretched_vicsek, vicsek_tree, weighted_vicsek, GeneratorSpec,
    WeightRule,
};
use hklab::potential::{annulus_resistance, effective_resistance, green_operator};
use hklab::walk::{heat_profile, scale_function, ExitTimes, HeatMode};
use hklab::WeightedGraph;

fn small_graphs() -> Vec<WeightedGraph> {
    vec![
        lattice_zd(1, 30).unwrap(),
        lattice_zd(2, 6).unwrap(),
        sierpinski_gasket(3).unwrap(),
        vicsek_tree(2).unwrap(),
        stretched_vicsek(2).unwrap(),
        weighted_vicsek(2, WeightRule::Geometric { ratio: 2.0 }).unwrap(),
    ]
}

fn distance_matrix(g: &WeightedGraph) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    (0..n)
        .map(|s| {
            let mut d = vec![usize::MAX; n];
            d[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in g.neighbors(u) {
                    if d[v] == usize::MAX {
                        d[v] = d[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            d
        })
        .collect()
}

#[test]
fn degree_and_local_volume_bounds() {
    for g in small_graphs() {
        let p0 = g.p0_constant();
        let c = 1.0 / p0;
        for x in 0..g.vertex_count() {
            assert!(g.degree(x) as f64 <= c * (1.0 + 1e-12));
            for r in 1..=g.safe_radius(x).unwrap().min(4) {
                let v = g.volume(x, r).unwrap();
                assert!(v <= c.powi(r as i32) * g.measure(x) * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn measure_comparability() {
    for g in small_graphs() {
        let d = distance_matrix(&g);
        let p0 = g.p0_constant();
        for x in (0..g.vertex_count()).step_by(3) {
            for y in (0..g.vertex_count()).step_by(5) {
                let lhs = p0.powi(d[x][y] as i32) * g.measure(y);
                assert!(lhs <= g.measure(x) * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn metric_primitives_match_brute_force() {
    for g in small_graphs() {
        let d = distance_matrix(&g);
        for x in 0..g.vertex_count() {
            let ecc = *d[x].iter().max().unwrap();
            for r in 0..=ecc + 1 {
                let expected: Vec<usize> = (0..g.vertex_count()).filter(|&y| d[x][y] < r).collect();
                let ball = g.distance_field(x, None).ball_members(r);
                let mut ball = ball.clone();
                ball.sort_unstable();
                assert_eq!(ball, expected);
                let volume: f64 = expected.iter().map(|&y| g.measure(y)).sum();
                let set = hklab::VertexSet::from_members(&g, expected.iter().copied());
                assert!((set.measure() - volume).abs() < 1e-9 * volume.max(1.0));
                let boundary = g.boundary(&set);
                let outer: Vec<usize> = (0..g.vertex_count())
                    .filter(|&y| d[x][y] == r && r > 0)
                    .collect();
                assert_eq!(boundary.boundary.members(), &outer[..]);
            }
        }
    }
}

#[test]
fn kernel_inequalities_on_sampled_triples() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for g in small_graphs() {
        let n = g.vertex_count();
        let horizon = 24;
        let profiles: Vec<_> = (0..n)
            .map(|x| heat_profile(&g, x, horizon, HeatMode::Free).unwrap())
            .collect();
        for _ in 0..300 {
            let x = rng.random_range(0..n);
            let y = rng.random_range(0..n);
            let k = rng.random_range(0..horizon / 2);
            let pxy = profiles[x].kernel(2 * k, y);
            let bound = (profiles[x].kernel(2 * k, x) * profiles[y].kernel(2 * k, y)).sqrt();
            assert!(pxy <= bound * (1.0 + 1e-12) + 1e-300);
            let odd = profiles[x].kernel(2 * k + 1, y);
            let dom = g
                .neighbors(x)
                .map(|(z, _)| profiles[z].kernel(2 * k, y))
                .fold(0.0, f64::max);
            assert!(odd <= dom * (1.0 + 1e-12) + 1e-300);
        }
    }
}

#[test]
fn exit_times_grow_and_are_superadditive() {
    for g in small_graphs() {
        let times = ExitTimes::new(&g);
        for x in (0..g.vertex_count()).step_by(4) {
            let safe = g.safe_radius(x).unwrap();
            let c = 1.0 / g.p0_constant();
            for r in 1..safe {
                let e = times.get(x, r).unwrap();
                assert!(times.get(x, r + 1).unwrap() >= e + 1.0 - 1e-9);
                if r <= 3 {
                    // every z in B(x, R) is within 2R - 1 steps of the outside
                    let steps = (2 * r - 1) as i32;
                    assert!(e <= steps as f64 * c.powi(steps) * (1.0 + 1e-9));
                }
            }
            let dist = g.distance_field(x, None);
            for r in 1..safe {
                for s in 1..=safe - r {
                    let sphere = dist.sphere(r);
                    let min_e = sphere
                        .iter()
                        .map(|&y| times.get(y, s))
                        .collect::<hklab::Result<Vec<_>>>();
                    // spheres near the frontier may leave the admissible range
                    let Ok(values) = min_e else { continue };
                    let m = values.into_iter().fold(f64::INFINITY, f64::min);
                    assert!(times.get(x, r + s).unwrap() >= (times.get(x, r).unwrap() + m) * (1.0 - 1e-9));
                }
            }
        }
    }
}

#[test]
fn one_step_power_bound_fails_on_the_line_at_radius_three() {
    let g = lattice_zd(1, 10).unwrap();
    let x = g.vertex_by_label("z0").unwrap();
    let c = 1.0 / g.p0_constant();
    let e = ExitTimes::new(&g).get(x, 3).unwrap();
    assert!((e - 9.0).abs() < 1e-9);
    assert!(e > c.powi(3));
}

#[test]
fn green_function_is_symmetric_nonnegative_and_monotone() {
    let g = sierpinski_gasket(4).unwrap();
    let x = 0;
    let small = green_operator(&g, g.ball(x, 4).unwrap()).unwrap();
    let large = green_operator(&g, g.ball(x, 8).unwrap()).unwrap();
    let members = small.domain().members().to_vec();
    for &a in &members {
        for &b in &members {
            let gab = small.kernel(a, b).unwrap();
            assert!(gab >= 0.0);
            assert!((gab - small.kernel(b, a).unwrap()).abs() <= 1e-12 * gab.max(1e-300));
            assert!(gab <= large.kernel(a, b).unwrap() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn resistance_volume_lower_bound_on_every_annulus() {
    for g in small_graphs() {
        for x in 0..g.vertex_count() {
            let safe = g.safe_radius(x).unwrap();
            for r in 1..=safe.min(6) {
                for s in 0..r {
                    let rho = annulus_resistance(&g, x, s, r).unwrap();
                    let v = g.annulus_volume(x, s, r).unwrap();
                    let bound = ((r - s) * (r - s)) as f64;
                    assert!(rho * v >= bound * (1.0 - 1e-9));
                }
            }
        }
    }
}

#[test]
fn energy_resistance_duality() {
    for g in small_graphs() {
        let n = g.vertex_count();
        let a = hklab::VertexSet::singleton(&g, 0);
        let b = hklab::VertexSet::from_members(&g, (n / 2..n).filter(|&v| v != 0));
        let rho = effective_resistance(&g, &a, &b).unwrap();
        assert!((rho.energy * rho.value - 1.0).abs() < 1e-9);
        assert!(rho.potential.iter().all(|&f| (-1e-12..=1.0 + 1e-12).contains(&f)));
    }
}

#[test]
fn scaling_weights_leaves_walk_quantities_unchanged() {
    let g = sierpinski_gasket(3).unwrap();
    let h = g.scaled(7.0).unwrap();
    let x = 0;
    for y in 0..g.vertex_count() {
        assert!((g.transition(x, y) - h.transition(x, y)).abs() < 1e-15);
        assert!((h.measure(y) - 7.0 * g.measure(y)).abs() < 1e-12 * h.measure(y));
    }
    let (tg, th) = (ExitTimes::new(&g), ExitTimes::new(&h));
    for r in 1..=4 {
        let (a, b) = (tg.get(x, r).unwrap(), th.get(x, r).unwrap());
        assert!((a - b).abs() < 1e-10 * a);
        let (ra, rb) = (annulus_resistance(&g, x, 1, r + 1).unwrap(), annulus_resistance(&h, x, 1, r + 1).unwrap());
        assert!((ra - 7.0 * rb).abs() < 1e-10 * ra);
    }
}

#[test]
fn scale_function_properties() {
    for g in small_graphs() {
        let centers: Vec<usize> = (0..g.vertex_count()).collect();
        let reach = centers.iter().map(|&x| g.safe_radius(x).unwrap()).max().unwrap();
        let f = scale_function(&g, &centers, reach).unwrap();
        for r in 1..f.r_max() {
            assert!(f.value(r + 1).unwrap() >= f.value(r).unwrap() + 1.0 - 1e-9);
        }
        for n in 1..=f.value(f.r_max()).unwrap().floor() as u64 {
            let r = f.inverse(n as f64).unwrap();
            assert!(f.value(r).unwrap() >= n as f64 * (1.0 - 1e-9));
            assert!(r == 1 || f.value(r - 1).unwrap() < n as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hkgraph_round_trip_is_exact(level in 1usize..=3, ratio in 1.0f64..5.0) {
        let g = weighted_vicsek(level, WeightRule::Geometric { ratio }).unwrap();
        let text = g.to_hkgraph();
        let back = hklab::graph::parse_hkgraph(&text).unwrap();
        prop_assert_eq!(back.to_hkgraph(), text);
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn generator_specs_round_trip(level in 1usize..=3) {
        for spec in [
            GeneratorSpec::Gasket { level },
            GeneratorSpec::Vicsek { level },
            GeneratorSpec::StretchedVicsek { level },
        ] {
            let json = serde_json::to_string(&spec).unwrap();
            let back: GeneratorSpec = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, spec.clone());
            prop_assert_eq!(spec.build().unwrap().vertex_count() as u128, spec.predicted_vertices());
        }
    }

    #[test]
    fn exit_field_scales_with_weights(factor in 0.01f64..100.0, r in 1usize..=6) {
        let g = vicsek_tree(2).unwrap();
        let h = g.scaled(factor).unwrap();
        let x = g.vertex_by_label("z0").unwrap();
        let a = ExitTimes::new(&g).get(x, r).unwrap();
        let b = ExitTimes::new(&h).get(x, r).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a);
    }
}
