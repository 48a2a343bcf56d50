use crossover_core::design::{criterion_from_moments, combine_moments, DesignMoments};
use crossover_core::envelope::{envelope_value, minimize_envelope, solve_with_weights};
use crossover_core::information::phi_exchangeable;
use crossover_core::moments::{block_moments, lambda_moments_direct};
use crossover_core::optimize::optimize_over;
use crossover_core::sequence::{canonicalize, enumerate_blocks, permutations};
use crossover_core::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma};

fn space_rho(p: usize, t: usize, rho: f64) -> PreparedSpace64 {
    let cov = if rho == 0.0 {
        CovarianceSpec::Identity
    } else {
        CovarianceSpec::Tridiagonal { rho }
    };
    PreparedSpace::new(DesignSpace::new(p, t, cov).unwrap()).unwrap()
}

fn arb_sequence() -> impl Strategy<Value = (Sequence, usize)> {
    (1usize..=6, 1usize..=5).prop_flat_map(|(p, t)| {
        proptest::collection::vec(1..=t, p).prop_map(move |l| (Sequence::new(l, t).unwrap(), t))
    })
}

fn arb_quadratic() -> impl Strategy<Value = Quadratic64> {
    (0.0..10.0f64, -10.0..10.0f64, 0.0..10.0f64).prop_map(|(a, b, c)| Quadratic::new(a, b, c))
}

fn arb_convex_family() -> impl Strategy<Value = Vec<Quadratic64>> {
    proptest::collection::vec(arb_quadratic(), 1..=20).prop_filter("needs curvature", |qs| {
        qs.iter().any(|q| q.c2 > 1e-3)
    })
}

/// Grid scan followed by golden-section refinement on the convex envelope.
fn envelope_oracle(qs: &[Quadratic64]) -> f64 {
    let f = |x: f64| envelope_value(qs, x);
    let (lo, hi) = (-1e3, 1e3);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let mut best = 0;
    for k in 0..=n {
        if f(lo + k as f64 * h) < f(lo + best as f64 * h) {
            best = k;
        }
    }
    let (mut a, mut b) = (lo + (best as f64 - 1.0) * h, lo + (best as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f((a + b) / 2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonicalize_is_idempotent((s, _t) in arb_sequence()) {
        let c = canonicalize(&s);
        prop_assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn canonicalize_ignores_relabeling((s, t) in arb_sequence(), k in 0usize..120) {
        let perms = permutations(t);
        let sigma = &perms[k % perms.len()];
        prop_assert_eq!(canonicalize(&s.relabel(sigma)), canonicalize(&s));
    }

    #[test]
    fn envelope_matches_oracle(qs in arb_convex_family()) {
        let sol = minimize_envelope(&qs).unwrap();
        let oracle = envelope_oracle(&qs);
        prop_assert!((sol.y_star - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{} vs {}", sol.y_star, oracle);
    }

    #[test]
    fn envelope_weights_are_stationary(qs in arb_convex_family()) {
        let sol = solve_with_weights(&qs).unwrap();
        let w = sol.weights.unwrap();
        let total: f64 = w.iter().map(|e| e.1).sum();
        let slope: f64 = w.iter().map(|&(i, p)| p * qs[i].derivative(sol.x_star)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(slope.abs() <= 1e-10 * (1.0 + sol.y_star.abs()), "slope {slope}");
        for &(i, _) in &w {
            prop_assert!(sol.active.contains(&i));
        }
    }

    #[test]
    fn envelope_scales(qs in arb_convex_family(), k in 0.1..10.0f64) {
        let a = solve_with_weights(&qs).unwrap();
        let scaled: Vec<_> = qs.iter().map(|q| q.scale(k)).collect();
        let b = solve_with_weights(&scaled).unwrap();
        let tol = 1e-10 * (1.0 + a.y_star.abs() * k);
        prop_assert!((b.y_star - k * a.y_star).abs() <= tol);
        prop_assert!((b.x_star - a.x_star).abs() <= 1e-10 * (1.0 + a.x_star.abs()) || a.flat);
        let (wa, wb) = (a.weights.unwrap(), b.weights.unwrap());
        prop_assert_eq!(wa.len(), wb.len());
        for (x, y) in wa.iter().zip(&wb) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() <= 1e-10);
        }
    }

    #[test]
    fn lambda_identity(p in 2usize..=5, t in 2usize..=4, pick in 0usize..1000, l in -1.0..1.0f64, rho in -0.4..0.4f64) {
        let sp = space_rho(p, t, rho);
        let i = pick % sp.len();
        let shortcut = sp.moments()[i].lambda(l);
        let direct = lambda_moments_direct(sp.blocks()[i].canonical(), t, sp.btilde(), l);
        prop_assert!(shortcut.approx_eq(&direct, 1e-12), "{shortcut:?} vs {direct:?}");
    }

    #[test]
    fn moments_are_orbit_invariant(p in 2usize..=5, t in 2usize..=4, pick in 0usize..1000, rho in -0.4..0.4f64) {
        let sp = space_rho(p, t, rho);
        let i = pick % sp.len();
        for m in sp.blocks()[i].members(t) {
            prop_assert!(block_moments(&m, t, sp.btilde()).approx_eq(&sp.moments()[i], 1e-12));
        }
    }

    #[test]
    fn e_bound(p in 2usize..=4, t in 3usize..=4, raw in proptest::collection::vec(0.0..1.0f64, 15), l in -1.0..1.0f64) {
        let sp = space_rho(p, t, 0.0);
        let w: Vec<f64> = raw.iter().cycle().take(sp.len()).copied().collect();
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-6);
        let d = ApproxDesign::new(w.iter().map(|x| x / total).collect()).unwrap();
        let dm = design::design_moments(&sp, &d);
        prop_assert!(dm.qx() <= dm.ql(l) + 1e-12);
    }
}

#[test]
fn orbit_sizes_partition_sequences() {
    for p in 2..=6 {
        for t in 2..=5 {
            let total: u64 = enumerate_blocks(p, t).unwrap().iter().map(|b| b.orbit_size()).sum();
            assert_eq!(total, (t as u64).pow(p as u32), "({p},{t})");
        }
    }
}

#[test]
fn cauchy_schwarz_on_moments() {
    for p in 2..=5 {
        for t in 2..=5 {
            for rho in [-0.5, 0.0, 0.5] {
                let sp = space_rho(p, t, rho);
                for m in sp.moments() {
                    let lhs = m.c12 * m.c12;
                    let rhs = m.c11 * m.c22;
                    assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()), "({p},{t},{rho}) {m:?}");
                }
            }
        }
    }
}

#[test]
fn btilde_is_centering_under_identity() {
    for p in 2..=6 {
        let b = PreparedSpace64::new(DesignSpace::new(p, 2, CovarianceSpec::Identity).unwrap()).unwrap();
        let c = Mat::<f64>::centering(p);
        let diff = b.btilde().matrix() - &c;
        assert!(diff.max_abs() < 1e-14);
    }
}

fn dirichlet(rng: &mut StdRng, n: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).unwrap();
    let raw: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

#[test]
fn perturbed_designs_do_not_beat_the_optimum() {
    let mut rng = StdRng::seed_from_u64(3);
    for (p, t) in [(3, 3), (4, 3), (3, 4)] {
        let sp = space_rho(p, t, 0.0);
        for crit in Criterion::ALL {
            for lambda0 in [-0.5, 0.0, 0.5] {
                let best = optimize(&sp, crit, lambda0, &OptimizeOptions::default()).unwrap();
                assert!(certify(&sp, &best.design, crit, lambda0, 1e-8).pass);
                for _ in 0..100 {
                    let eps = 0.1;
                    let noise = dirichlet(&mut rng, sp.len(), 0.5);
                    let w: Vec<f64> = best
                        .design
                        .weights()
                        .iter()
                        .zip(&noise)
                        .map(|(a, b)| (1.0 - eps) * a + eps * b)
                        .collect();
                    let d = ApproxDesign::new(w).unwrap();
                    let v = criterion_value(&sp, &d, lambda0, crit);
                    assert!(v <= best.value + 1e-7, "({p},{t}) {crit} {lambda0}: {v} > {}", best.value);
                }
            }
        }
    }
}

#[test]
fn two_treatment_criteria_coincide() {
    for p in 2..=6 {
        for rho in [0.0, -0.5, 0.3] {
            let sp = space_rho(p, 2, rho);
            let designs: Vec<_> = Criterion::ALL
                .iter()
                .map(|&c| optimize(&sp, c, 0.2, &OptimizeOptions::default()).unwrap().design)
                .collect();
            for d in &designs[1..] {
                assert!(d.max_difference(&designs[0]) < 1e-8);
            }
        }
    }
}

#[test]
fn pseudo_symmetric_value_is_prior_free() {
    let sp = space_rho(3, 3, 0.0);
    let d = ApproxDesign::from_labels(&sp, [("122", 1.0 / 6.0), ("123", 5.0 / 6.0)]).unwrap();
    let exact = round_exact(&sp, &d, 36).unwrap().exact;
    let mut rng = StdRng::seed_from_u64(5);
    for crit in Criterion::ALL {
        let want = criterion_value(&sp, &d, 0.2, crit);
        for _ in 0..5 {
            let raw = dirichlet(&mut rng, 3, 1.0);
            let mean = raw.iter().sum::<f64>() / 3.0;
            let tau0: Vec<f64> = raw.iter().map(|x| x - mean).collect();
            let v = phi_exchangeable(&sp, &exact, &tau0, 0.2, crit).unwrap();
            assert!((v - want).abs() < 1e-9, "{crit}: {v} vs {want}");
        }
    }
}

#[test]
fn three_block_hierarchical_oracle_random_spaces() {
    // random 3-block sub-simplexes of a correlated space
    let sp = space_rho(4, 3, 0.3);
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..20 {
        let w = dirichlet(&mut rng, 3, 1.0);
        let mut idx: Vec<usize> = w.iter().map(|x| (x * sp.len() as f64) as usize % sp.len()).collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() < 2 {
            continue;
        }
        for crit in Criterion::ALL {
            let Ok(res) = optimize_over(&sp, &idx, crit, -0.2, &OptimizeOptions::default()) else {
                continue;
            };
            let mut best = f64::NEG_INFINITY;
            for a in 0..=200 {
                for b in 0..=(200 - a) {
                    let mut v = vec![a as f64 / 200.0, b as f64 / 200.0, (200 - a - b) as f64 / 200.0];
                    v.truncate(idx.len());
                    if idx.len() == 2 && b > 0 {
                        continue;
                    }
                    let s: f64 = v.iter().sum();
                    if s <= 0.0 {
                        continue;
                    }
                    let moments: Vec<_> = idx.iter().map(|&i| sp.moments()[i]).collect();
                    let v: Vec<f64> = v.iter().map(|x| x / s).collect();
                    let dm = DesignMoments::from_moments(combine_moments(&moments, &v));
                    best = best.max(criterion_from_moments(&dm, 3, -0.2, crit));
                }
            }
            assert!(res.value >= best - 1e-9, "{idx:?} {crit}: {} < {best}", res.value);
        }
    }
}

#[test]
fn single_precision_agrees() {
    let sp = PreparedSpace32::new(DesignSpace32::new(3, 3, CovarianceSpec::Identity).unwrap()).unwrap();
    let opts = OptimizeOptions { tolerance: 1e-4f32, ..OptimizeOptions::default() };
    let e = optimize(&sp, Criterion::E, 0.0f32, &opts).unwrap();
    assert!((e.design.weight(sp.parse_block("122").unwrap()) - 1.0 / 6.0).abs() < 1e-5);
    for crit in [Criterion::A, Criterion::D, Criterion::T] {
        let r = optimize(&sp, crit, 0.0f32, &opts).unwrap();
        assert!((r.design.weight(sp.parse_block("123").unwrap()) - 1.0).abs() < 1e-4, "{crit}");
    }
}
