//! Randomised invariants across the numerical layers.

use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

use extent_cbf::dynamics::ControlAffineSystem;
use extent_cbf::geometry::{covering_radius, sample_boundary, ExtentFunction, SafeFunction};
use extent_cbf::qp::{kkt_residual, oracle_solve, solve_active_set, solve_dykstra, HalfspaceQP, LinearConstraint, QPStatus};
use extent_cbf::sdp::{solve_sdp, symmetric_eigenvalues, PsdBlock, SdpOptions, SdpProblem, SdpStatus};
use extent_cbf::sim::{parse_trajectory_csv, run_scenario, trajectory_csv, ScenarioConfig};
use extent_cbf::sos::{gram_feasibility, MultiPoly, SosStatus};

fn fd_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        p.len(),
        (0..p.len()).map(|i| {
            let h = 1e-6 * p[i].abs().max(1.0);
            let (mut a, mut b) = (p.to_vec(), p.to_vec());
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        }),
    )
}

fn extent_strategy() -> impl Strategy<Value = ExtentFunction> {
    prop_oneof![
        (0.05f64..2.0).prop_map(|r| ExtentFunction::ball(r, 3).unwrap()),
        (0.3f64..3.0, 0.3f64..3.0, -0.2f64..0.2, 0.05f64..1.0).prop_map(|(p, q, c, s)| {
            ExtentFunction::ellipse(Matrix2::new(p, c, c, q), s, 3).unwrap().with_heading(2).unwrap()
        }),
        (0.5f64..3.0, 0.5f64..3.0, 0.05f64..1.0)
            .prop_map(|(a, b, s)| ExtentFunction::superellipse4(a, b, s, 3).unwrap().with_heading(2).unwrap()),
    ]
}

fn qp_strategy() -> impl Strategy<Value = HalfspaceQP> {
    (
        0.5f64..2.0,
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..0.5), 0..8),
        (-3.0f64..3.0, -3.0f64..3.0),
        (0.0f64..0.9, 0.0f64..std::f64::consts::TAU),
    )
        .prop_map(|(m, rows, k, (r, t))| {
            let anchor = DVector::from_column_slice(&[m * r * t.cos(), m * r * t.sin()]);
            let rows = rows
                .into_iter()
                .filter(|(a1, a2, _)| a1.hypot(*a2) > 1e-3)
                .map(|(a1, a2, s)| {
                    let a = DVector::from_column_slice(&[a1, a2]);
                    let b = a.dot(&anchor) - s;
                    LinearConstraint::new(a, b)
                })
                .collect();
            HalfspaceQP::new(DVector::from_column_slice(&[k.0, k.1]), rows, m).unwrap()
        })
}

/// Count of eigenvalues below `x` for a symmetric tridiagonal matrix.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut q = d[0] - x;
    let mut count = usize::from(q < 0.0);
    for i in 1..d.len() {
        let q_prev = if q == 0.0 { 1e-300 } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / q_prev;
        count += usize::from(q < 0.0);
    }
    count
}

fn sturm_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let bound = d.iter().map(|v| v.abs()).sum::<f64>() + 2.0 * e.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
    (0..d.len())
        .map(|k| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(d, e, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn tridiagonal(d: &[f64], e: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(d));
    for i in 0..n - 1 {
        m[(i, i + 1)] = e[i];
        m[(i + 1, i)] = e[i];
    }
    m
}

/// minimize c.v over the unit ball, written as [[1, v^T], [v, I]] PSD.
fn ball_sdp(c: &[f64]) -> SdpProblem {
    let n = c.len();
    let mut p = SdpProblem::new(n);
    p.c = DVector::from_column_slice(c);
    let mut blk = PsdBlock::new(n + 1);
    for i in 0..=n {
        blk.add_entry(None, i, i, 1.0);
    }
    for i in 0..n {
        blk.add_entry(Some(i), 0, i + 1, 1.0);
    }
    p.add_block(blk);
    p
}

fn scenario(name: &str) -> ScenarioConfig {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"));
    ScenarioConfig::load(&p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn extent_gradients_match_finite_differences(
        e in extent_strategy(),
        x in prop::array::uniform3(-2.0f64..2.0),
        d in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let y = [x[0] + d[0], x[1] + d[1]];
        let gx = e.grad_x(&x, &y).unwrap();
        let gy = e.grad_y(&x, &y).unwrap();
        let fx = fd_gradient(|xx| e.value(xx, &y).unwrap(), &x);
        let fy = fd_gradient(|yy| e.value(&x, yy).unwrap(), &y);
        prop_assert!((&fx - &gx).norm() <= 1e-6 * gx.norm().max(1.0), "{fx} vs {gx}");
        prop_assert!((&fy - &gy).norm() <= 1e-6 * gy.norm().max(1.0), "{fy} vs {gy}");
    }

    #[test]
    fn safe_gradients_match_finite_differences(
        center in prop::array::uniform2(-1.0f64..1.0),
        axes in prop::array::uniform2(0.2f64..2.0),
        y in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let hs = [
            SafeFunction::ball(center.to_vec(), axes[0]).unwrap(),
            SafeFunction::superellipse(center.to_vec(), axes.to_vec(), 4).unwrap(),
            SafeFunction::halfspace(axes.to_vec(), center[0]).unwrap(),
        ];
        for h in &hs {
            let g = h.gradient(&y).unwrap();
            let f = fd_gradient(|yy| h.value(yy).unwrap(), &y);
            prop_assert!((&f - &g).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn extent_is_rotation_equivariant(
        e in extent_strategy(),
        x in prop::array::uniform3(-2.0f64..2.0),
        d in prop::array::uniform2(-1.0f64..1.0),
        turn in -3.0f64..3.0,
    ) {
        let y = [x[0] + d[0], x[1] + d[1]];
        let (s, c) = turn.sin_cos();
        let yr = [x[0] + c * d[0] - s * d[1], x[1] + s * d[0] + c * d[1]];
        let xr = [x[0], x[1], x[2] + turn];
        let (a, b) = (e.value(&x, &y).unwrap(), e.value(&xr, &yr).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn net_covers_at_half_tau(
        p in 0.2f64..3.0, q in 0.2f64..3.0, size in 0.05f64..1.5,
        n in 2usize..64,
        x in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let e = ExtentFunction::ellipse(Matrix2::new(p, 0.0, 0.0, q), size, 2).unwrap();
        let net = sample_boundary(&e, &x, n).unwrap();
        let dense = covering_radius(&e, &x, &net.samples, 50 * n).unwrap();
        prop_assert!(dense <= net.tau / 2.0 * (1.0 + 1e-9), "{dense} vs {}", net.tau);
    }

    #[test]
    fn ball_covering_shrinks_with_samples(r in 0.05f64..3.0, n in 2usize..128) {
        let e = ExtentFunction::ball(r, 2).unwrap();
        let a = sample_boundary(&e, &[0.0, 0.0], n).unwrap().tau;
        let b = sample_boundary(&e, &[0.0, 0.0], n + 1).unwrap().tau;
        prop_assert!(b < a);
    }

    #[test]
    fn qp_solution_is_a_fixed_point(p in qp_strategy()) {
        let s = solve_active_set(&p, 1e-12).unwrap();
        prop_assume!(s.status == QPStatus::Optimal);
        let again = HalfspaceQP::new(s.u.clone(), p.rows.clone(), p.ball_radius).unwrap();
        let t = solve_active_set(&again, 1e-12).unwrap();
        prop_assert!((&t.u - &s.u).norm() <= 1e-9);
    }

    #[test]
    fn qp_scales_with_the_problem(p in qp_strategy(), scale in 0.1f64..10.0) {
        let s = solve_active_set(&p, 1e-12).unwrap();
        prop_assume!(s.status == QPStatus::Optimal);
        let rows = p.rows.iter().map(|r| LinearConstraint::new(r.a.clone(), r.b * scale)).collect();
        let q = HalfspaceQP::new(&p.target * scale, rows, p.ball_radius * scale).unwrap();
        let t = solve_active_set(&q, 1e-12).unwrap();
        prop_assert_eq!(t.status, QPStatus::Optimal);
        prop_assert!((&t.u - &s.u * scale).norm() <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn qp_solvers_agree_and_certify(p in qp_strategy()) {
        let d = solve_dykstra(&p, 1e-12, 200_000).unwrap();
        let e = solve_active_set(&p, 1e-12).unwrap();
        prop_assert_eq!(d.status, e.status);
        if e.status == QPStatus::Optimal {
            prop_assert!((&d.u - &e.u).norm() <= 1e-7);
            prop_assert!(kkt_residual(&p, &d.u, 1e-7) <= 1e-6);
            prop_assert!(kkt_residual(&p, &e.u, 1e-7) <= 1e-6);
        }
    }

    #[test]
    fn rk4_is_fourth_order(v in 0.3f64..1.0, w in 0.3f64..2.0) {
        // constant inputs trace a circle of radius v / w
        let sys = ControlAffineSystem::unicycle(3.0).unwrap();
        let exact = [v / w * (2.0 * w).sin(), v / w * (1.0 - (2.0 * w).cos())];
        let err = |dt: f64| {
            let mut x = DVector::from_column_slice(&[0.0, 0.0, 0.0]);
            for _ in 0..(2.0 / dt).round() as usize {
                x = sys.step(x.as_slice(), &[v, w], dt).unwrap();
            }
            (x[0] - exact[0]).hypot(x[1] - exact[1])
        };
        let ratio = err(0.1) / err(0.05);
        prop_assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn sums_of_squares_are_certified(
        forms in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..4),
        shift in 0.0f64..1.0,
    ) {
        let y = |i| MultiPoly::var(2, i);
        let mut p = MultiPoly::constant(2, shift);
        for [a, b, c] in &forms {
            // (a y1 + b y2 + c y1 y2)^2
            let l = &(&y(0).scale(*a) + &y(1).scale(*b)) + &(&y(0) * &y(1)).scale(*c);
            p = &p + &(&l * &l);
        }
        let cert = gram_feasibility(&p, &SdpOptions::default()).unwrap();
        prop_assert_eq!(cert.status, SosStatus::Certified);
        prop_assert!(cert.coefficient_mismatch <= 1e-6 && cert.min_eigenvalue >= -1e-7);
        let neg = gram_feasibility(&p.scale(-1.0).try_add(&MultiPoly::constant(2, -0.1)).unwrap(), &SdpOptions::default()).unwrap();
        prop_assert_eq!(neg.status, SosStatus::Infeasible);
    }

    #[test]
    fn sdp_weak_duality_and_cost_scaling(c in prop::collection::vec(-2.0f64..2.0, 1..5), s in 0.2f64..5.0) {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-2);
        let opts = SdpOptions::default();
        let a = solve_sdp(&ball_sdp(&c), &opts).unwrap();
        let scaled: Vec<f64> = c.iter().map(|v| v * s).collect();
        let b = solve_sdp(&ball_sdp(&scaled), &opts).unwrap();
        prop_assert_eq!(a.status, SdpStatus::Optimal);
        prop_assert_eq!(b.status, SdpStatus::Optimal);
        prop_assert!(a.objective >= a.dual_objective - 1e-7 * norm.max(1.0));
        prop_assert!((a.objective + norm).abs() <= 1e-6 * norm.max(1.0));
        prop_assert!((b.objective - s * a.objective).abs() <= 1e-6 * (s * norm).max(1.0));
        prop_assert!((&b.v - &a.v).norm() <= 1e-5);
    }

    #[test]
    fn eigenvalues_match_sturm_bisection(
        d in prop::collection::vec(-5.0f64..5.0, 5),
        e in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let mut got = symmetric_eigenvalues(&tridiagonal(&d, &e)).unwrap();
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(sturm_eigenvalues(&d, &e)) {
            prop_assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
        }
    }

    #[test]
    fn scenario_config_round_trips(seed in 0..=i64::MAX as u64, dt in 0.001f64..0.1, horizon in 0.1f64..50.0, x0 in prop::array::uniform2(-0.3f64..0.3)) {
        let mut cfg = scenario("cs1_sos");
        cfg.seed = seed;
        cfg.dt = dt;
        cfg.horizon = horizon;
        cfg.initial_state[0] = x0[0];
        cfg.initial_state[1] = x0[1];
        cfg.validate().unwrap();
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn oversized_seed_is_rejected() {
    let mut cfg = scenario("cs1_sos");
    cfg.seed = u64::MAX;
    assert!(cfg.validate().unwrap_err().to_string().contains("seed"));
}

#[test]
fn wilkinson_matrix_matches_sturm_bisection() {
    let d = [2.0, 1.0, 0.0, 1.0, 2.0];
    let e = [1.0; 4];
    let mut got = symmetric_eigenvalues(&tridiagonal(&d, &e)).unwrap();
    got.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(sturm_eigenvalues(&d, &e)) {
        assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
    }
}

#[test]
fn grid_oracle_agrees_on_small_instances() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..16 {
        let p = qp_strategy().new_tree(&mut runner).unwrap().current();
        let e = solve_active_set(&p, 1e-12).unwrap();
        let o = oracle_solve(&p, 201).unwrap();
        assert_eq!(e.status == QPStatus::Infeasible, o.status == QPStatus::Infeasible);
        if e.status == QPStatus::Optimal {
            assert!((&e.u - &o.u).norm() <= 2e-3, "{} vs {}", e.u, o.u);
            assert!(o.objective >= e.objective - 1e-9);
        }
    }
}

#[test]
fn csv_is_deterministic_and_round_trips() {
    let mut cfg = scenario("cs2_sampled200");
    cfg.horizon = 0.5;
    cfg.output.record_solve_time = false;
    let (a, _) = run_scenario(&mut cfg.build().unwrap()).unwrap();
    let (b, _) = run_scenario(&mut cfg.build().unwrap()).unwrap();
    let text = trajectory_csv(&a);
    assert_eq!(text, trajectory_csv(&b));
    let parsed = parse_trajectory_csv(&text).unwrap();
    assert_eq!(parsed.steps, a.steps);
}
