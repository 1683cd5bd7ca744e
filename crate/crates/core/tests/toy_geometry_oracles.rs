use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;

use semcurv::geometry_check::{random_case, run_suite, Faults};
use semcurv::toy_geometry::{
    attention_weights, discrete_velocity_identity, discrete_velocity_residual, effective_metric, forced_geodesic_step,
    geodesic_predecessor, geodesic_residual, layer_step, metric_gradient, semantic_action, softmax_rows,
    GeometricObjects, GeometryError, KineticMode, Mat, Preconditioner, ToyLayer,
};

fn gaussian(rng: &mut Pcg64Mcg, rows: usize, cols: usize) -> Mat<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

fn identity_layer(d: usize) -> ToyLayer<f64> {
    ToyLayer::new(Mat::identity(d), Mat::identity(d), Mat::identity(d), Mat::identity(d)).unwrap()
}

fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.sub(b).max_abs()
}

/// `g_ij = Σ_c (Σ_a x_ia Q_ac)(Σ_b x_jb K_bc)` by loops.
fn metric_loops(x: &Mat<f64>, l: &ToyLayer<f64>) -> Mat<f64> {
    let (n, d) = x.shape();
    Mat::from_fn(n, n, |i, j| {
        let mut g = 0.0;
        for c in 0..l.d_k() {
            let (mut q, mut k) = (0.0, 0.0);
            for a in 0..d {
                q += x[(i, a)] * l.w_q[(a, c)];
                k += x[(j, a)] * l.w_k[(a, c)];
            }
            g += q * k;
        }
        g
    })
}

fn step_loops(x: &Mat<f64>, l: &ToyLayer<f64>) -> Mat<f64> {
    let (n, d) = x.shape();
    let g = metric_loops(x, l);
    let scale = (l.d_k() as f64).sqrt();
    let mut out = x.clone();
    for i in 0..n {
        let m = (0..n).map(|j| g[(i, j)] / scale).fold(f64::MIN, f64::max);
        let w: Vec<f64> = (0..n).map(|j| (g[(i, j)] / scale - m).exp()).collect();
        let z: f64 = w.iter().sum();
        for c in 0..d {
            let mut acc = 0.0;
            for (j, wj) in w.iter().enumerate() {
                for v in 0..l.d_v() {
                    let mut xv = 0.0;
                    for a in 0..d {
                        xv += x[(j, a)] * l.w_v[(a, v)];
                    }
                    acc += wj / z * xv * l.w_o[(v, c)];
                }
            }
            out.row_mut(i)[c] += acc;
        }
    }
    out
}

#[test]
fn metric_by_hand() {
    let x = Mat::from_rows(&[[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    assert_eq!(effective_metric(&x, &identity_layer(3)).unwrap(), Mat::identity(2));
    let mut rng = Pcg64Mcg::seed_from_u64(1);
    let l = ToyLayer::new(
        gaussian(&mut rng, 3, 2),
        gaussian(&mut rng, 3, 2),
        gaussian(&mut rng, 3, 3),
        gaussian(&mut rng, 3, 3),
    )
    .unwrap();
    let one = gaussian(&mut rng, 1, 3);
    let g = effective_metric(&one, &l).unwrap();
    let q = one.matmul(&l.w_q);
    let k = one.matmul(&l.w_k);
    assert_eq!(g.shape(), (1, 1));
    assert!((g[(0, 0)] - (q[(0, 0)] * k[(0, 0)] + q[(0, 1)] * k[(0, 1)])).abs() <= 1e-15);
}

#[test]
fn metric_and_step_match_loops() {
    for seed in 0..100 {
        let c = random_case(seed);
        assert!(
            max_diff(
                &effective_metric(&c.x, &c.layer).unwrap(),
                &metric_loops(&c.x, &c.layer)
            ) <= 1e-12
        );
        assert!(max_diff(&layer_step(&c.x, &c.layer).unwrap(), &step_loops(&c.x, &c.layer)) <= 1e-12);
    }
}

#[test]
fn attention_by_hand() {
    let uniform = softmax_rows(&Mat::<f64>::from_fn(4, 4, |_, _| -2.5));
    assert!(uniform.as_slice().iter().all(|&w| (w - 0.25).abs() <= 1e-15));
    let x = Mat::from_rows(&[[1.0, -3.0]]).unwrap();
    assert_eq!(attention_weights(&x, &identity_layer(2)).unwrap()[(0, 0)], 1.0);
    let dominated = softmax_rows(&Mat::from_rows(&[[0.0, 50.0, 0.0]]).unwrap());
    assert!(dominated[(0, 1)] > 1.0 - 1e-15);
}

#[test]
fn attention_rows_sum_to_one_for_large_logits() {
    for seed in 0..100 {
        let c = random_case(seed);
        let g = effective_metric(&c.x, &c.layer).unwrap();
        let scale = 1e3 / g.max_abs().max(1e-300);
        let a = softmax_rows(&g.map(|v| v * scale));
        for i in 0..a.rows() {
            let s: f64 = a.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12 && a.row(i).iter().all(|w| w.is_finite()));
        }
    }
}

#[test]
fn layer_step_by_hand() {
    let mut rng = Pcg64Mcg::seed_from_u64(2);
    let x = gaussian(&mut rng, 3, 4);
    let silent = ToyLayer::new(
        gaussian(&mut rng, 4, 2),
        gaussian(&mut rng, 4, 2),
        Mat::zeros(4, 3),
        gaussian(&mut rng, 3, 4),
    )
    .unwrap();
    assert_eq!(layer_step(&x, &silent).unwrap(), x);
    let l = ToyLayer::new(
        gaussian(&mut rng, 4, 2),
        gaussian(&mut rng, 4, 2),
        gaussian(&mut rng, 4, 3),
        gaussian(&mut rng, 3, 4),
    )
    .unwrap();
    let one = gaussian(&mut rng, 1, 4);
    let want = one.add(&one.matmul(&l.w_v).matmul(&l.w_o));
    assert!(max_diff(&layer_step(&one, &l).unwrap(), &want) <= 1e-15);
}

#[test]
fn velocity_identity_holds() {
    for seed in 0..100 {
        let c = random_case(seed);
        assert!(
            discrete_velocity_identity(&c.x, &c.layer).unwrap() < 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn zero_output_map_gives_zero_velocity() {
    let c = random_case(3);
    let l = ToyLayer::new(
        c.layer.w_q.clone(),
        c.layer.w_k.clone(),
        c.layer.w_v.clone(),
        Mat::zeros(c.layer.d_v(), c.layer.d()),
    )
    .unwrap();
    assert_eq!(layer_step(&c.x, &l).unwrap(), c.x);
    assert_eq!(discrete_velocity_identity(&c.x, &l).unwrap(), 0.0);
}

#[test]
fn perturbed_weights_break_the_identity() {
    let c = (0..).map(random_case).find(|c| c.x.rows() >= 2).unwrap();
    let objects = GeometricObjects::at(&c.x, &c.layer).unwrap();
    let mut alpha = objects.alpha.clone();
    alpha.row_mut(0)[1] += 1e-3;
    let bent = GeometricObjects::with_alpha(alpha, &c.layer);
    assert!(discrete_velocity_residual(&c.x, &c.layer, &bent).unwrap() > 0.0);
}

#[test]
fn constructed_geodesics_have_no_defect() {
    for seed in 0..100 {
        let c = random_case(seed);
        let prev = geodesic_predecessor(&c.x, &c.layer).unwrap();
        let next = layer_step(&c.x, &c.layer).unwrap();
        let r = geodesic_residual(&prev, &c.x, &next, &c.layer).unwrap();
        assert!(r.iter().all(|&v| v < 1e-9), "seed {seed}: {r:?}");
    }
}

#[test]
fn flat_straight_lines_have_no_defect() {
    let mut rng = Pcg64Mcg::seed_from_u64(4);
    let (n, d) = (3, 5);
    let flat = ToyLayer::new(
        gaussian(&mut rng, d, 2),
        gaussian(&mut rng, d, 2),
        gaussian(&mut rng, d, 2),
        Mat::zeros(2, d),
    )
    .unwrap();
    let start = Mat::from_fn(n, d, |i, j| (i * d + j) as f64);
    let vel = Mat::from_fn(n, d, |i, j| (i as f64) - (j as f64) * 0.5);
    let prev = start.clone();
    let curr = start.add(&vel);
    let next = curr.add(&vel);
    assert!(geodesic_residual(&prev, &curr, &next, &flat)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn unrelated_triples_have_a_defect() {
    let c = random_case(5);
    let mut rng = Pcg64Mcg::seed_from_u64(5);
    let (n, d) = c.x.shape();
    let r = geodesic_residual(&gaussian(&mut rng, n, d), &c.x, &gaussian(&mut rng, n, d), &c.layer).unwrap();
    assert!(r.iter().any(|&v| v > 0.0));
}

#[test]
fn gradient_by_hand() {
    let x = Mat::from_rows(&[[1.0, -2.0, 0.5], [0.0, 3.0, 1.0], [2.0, 2.0, 2.0]]).unwrap();
    let grad = metric_gradient(&x, &identity_layer(3)).unwrap();
    for i in 0..3 {
        let twice: Vec<f64> = x.row(i).iter().map(|v| 2.0 * v).collect();
        assert_eq!(grad.get(i, i, i), twice.as_slice());
    }
    assert!(grad.get(0, 1, 2).iter().all(|&v| v == 0.0));
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..50 {
        let c = random_case(seed);
        let (n, d) = c.x.shape();
        let grad = metric_gradient(&c.x, &c.layer).unwrap();
        let scale = (0..n * n * n)
            .flat_map(|q| grad.get(q / (n * n), (q / n) % n, q % n).to_vec())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            for a in 0..d {
                let mut plus = c.x.clone();
                plus.row_mut(k)[a] += h;
                let mut minus = c.x.clone();
                minus.row_mut(k)[a] -= h;
                let gp = effective_metric(&plus, &c.layer).unwrap();
                let gm = effective_metric(&minus, &c.layer).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let fd = (gp[(i, j)] - gm[(i, j)]) / (2.0 * h);
                        let exact = grad.get(i, j, k)[a];
                        assert!((fd - exact).abs() <= 1e-6 * scale.max(1.0), "seed {seed}");
                    }
                }
            }
        }
    }
}

#[test]
fn action_reduces_to_kinetic_energy() {
    let mut rng = Pcg64Mcg::seed_from_u64(6);
    let states: Vec<Mat<f64>> = (0..5).map(|_| gaussian(&mut rng, 4, 3)).collect();
    let id = vec![Mat::identity(4); 4];
    let mut want = 0.0;
    for w in states.windows(2) {
        for i in 0..4 {
            for a in 0..3 {
                want += (w[1][(i, a)] - w[0][(i, a)]).powi(2);
            }
        }
    }
    let got = semantic_action(&states, &id, &[0.0; 4], KineticMode::Diagonal).unwrap();
    assert!((got - want).abs() <= 1e-12 * want.max(1.0));
}

#[test]
fn still_states_have_negative_loss_action() {
    let mut rng = Pcg64Mcg::seed_from_u64(7);
    let x = gaussian(&mut rng, 3, 2);
    let g: Vec<Mat<f64>> = (0..3).map(|_| gaussian(&mut rng, 3, 3)).collect();
    let losses = [0.5, 1.25, -2.0];
    for mode in [KineticMode::Diagonal, KineticMode::Full] {
        let a = semantic_action(&[x.clone(), x.clone(), x.clone(), x.clone()], &g, &losses, mode).unwrap();
        assert_eq!(a, -(0.5 + 1.25 - 2.0));
    }
}

#[test]
fn action_matches_loops() {
    let mut rng = Pcg64Mcg::seed_from_u64(8);
    let (n, d, layers) = (3, 4, 4);
    let states: Vec<Mat<f64>> = (0..=layers).map(|_| gaussian(&mut rng, n, d)).collect();
    let metrics: Vec<Mat<f64>> = (0..layers).map(|_| gaussian(&mut rng, n, n)).collect();
    let losses: Vec<f64> = (0..layers).map(|_| rng.random_range(0.0..2.0)).collect();
    let (mut diag, mut full) = (0.0, 0.0);
    for l in 0..layers {
        for i in 0..n {
            for j in 0..n {
                let mut inner = 0.0;
                for a in 0..d {
                    inner += (states[l + 1][(i, a)] - states[l][(i, a)]) * (states[l + 1][(j, a)] - states[l][(j, a)]);
                }
                full += metrics[l][(i, j)] * inner;
                if i == j {
                    diag += metrics[l][(i, j)] * inner;
                }
            }
        }
        diag -= losses[l];
        full -= losses[l];
    }
    let got_diag = semantic_action(&states, &metrics, &losses, KineticMode::Diagonal).unwrap();
    let got_full = semantic_action(&states, &metrics, &losses, KineticMode::Full).unwrap();
    assert!((got_diag - diag).abs() <= 1e-12 * diag.abs().max(1.0));
    assert!((got_full - full).abs() <= 1e-12 * full.abs().max(1.0));
    assert!(matches!(
        semantic_action(&states, &metrics[..2], &losses, KineticMode::Diagonal),
        Err(GeometryError::Shape { .. })
    ));
}

#[test]
fn flat_force_free_step_is_linear() {
    let mut rng = Pcg64Mcg::seed_from_u64(9);
    let (p, c, g) = (
        gaussian(&mut rng, 3, 4),
        gaussian(&mut rng, 3, 4),
        gaussian(&mut rng, 3, 4),
    );
    let next = forced_geodesic_step(
        &c,
        &p,
        |v| Mat::zeros(v.rows(), v.cols()),
        &g,
        &Preconditioner::Identity,
        0.0,
    )
    .unwrap();
    assert_eq!(next, Mat::from_fn(3, 4, |i, j| 2.0 * c[(i, j)] - p[(i, j)]));
    let lambda = 0.3;
    let forced = forced_geodesic_step(
        &c,
        &p,
        |v| Mat::zeros(v.rows(), v.cols()),
        &g,
        &Preconditioner::Identity,
        lambda,
    )
    .unwrap();
    assert!(
        max_diff(
            &forced,
            &Mat::from_fn(3, 4, |i, j| 2.0 * c[(i, j)] - p[(i, j)] - lambda * g[(i, j)])
        ) <= 1e-15
    );
    assert!(matches!(
        forced_geodesic_step(&c, &p, |v| v.clone(), &g, &Preconditioner::Identity, -1.0),
        Err(GeometryError::NegativeLambda(_))
    ));
}

/// For `L = ½‖x - x*‖²` from rest, the error obeys `e_{k+1} = (2 - λ) e_k - e_{k-1}`,
/// whose solution with `e_{-1} = e_0` is `e_k = e_0 cos((k + ½)ω) / cos(ω/2)`
/// with `cos ω = 1 - λ/2`.
#[test]
fn quadratic_dynamics_follow_the_closed_form() {
    let mut rng = Pcg64Mcg::seed_from_u64(10);
    let target = gaussian(&mut rng, 2, 3);
    let x0 = gaussian(&mut rng, 2, 3);
    let e0 = x0.sub(&target);
    let lambda: f64 = 0.01;
    let omega = (1.0 - lambda / 2.0).acos();
    let (mut prev, mut curr) = (x0.clone(), x0.clone());
    let mut sum = Mat::zeros(2, 3);
    let steps = 2000;
    for k in 1..=steps {
        let grad = curr.sub(&target);
        let next = forced_geodesic_step(
            &curr,
            &prev,
            |v| Mat::zeros(v.rows(), v.cols()),
            &grad,
            &Preconditioner::Identity,
            lambda,
        )
        .unwrap();
        prev = curr;
        curr = next;
        let expected = target.add(&e0.scale(((k as f64 + 0.5) * omega).cos() / (0.5 * omega).cos()));
        assert!(max_diff(&curr, &expected) <= 1e-9, "step {k}");
        if k * 4 < (std::f64::consts::PI / omega) as usize * 2 {
            assert!(curr.sub(&target).max_abs() < e0.max_abs());
        }
        sum = sum.add(&curr);
    }
    let mean = sum.scale(1.0 / steps as f64);
    assert!(max_diff(&mean, &target) < 0.05 * e0.max_abs());
}

#[test]
fn preconditioners_act_on_the_right_side() {
    let mut rng = Pcg64Mcg::seed_from_u64(11);
    let g = gaussian(&mut rng, 3, 4);
    let (pt, pf) = (gaussian(&mut rng, 3, 3), gaussian(&mut rng, 4, 4));
    assert_eq!(Preconditioner::Tokens(pt.clone()).apply(&g).unwrap(), pt.matmul(&g));
    assert_eq!(Preconditioner::Features(pf.clone()).apply(&g).unwrap(), g.matmul(&pf));
    assert!(Preconditioner::Tokens(pf).apply(&g).is_err());
}

#[test]
fn suite_is_green_and_catches_a_broken_softmax() {
    let ok = run_suite(42, 100, Faults::default()).unwrap();
    assert!(ok.passed());
    let bad = run_suite(42, 100, Faults { broken_softmax: true }).unwrap();
    let failing: Vec<&str> = bad.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    assert_eq!(failing, vec!["attention_row_sums"]);
}
