//! Independent numerical oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;

use semcurv::curvature::{AngleSeries, CurvatureSummary};
use semcurv::null_model::NullDraws;

/// Adaptive Simpson quadrature to absolute tolerance `tol`, never asking for
/// more than a few ulps relative to the first estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        floor: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, floor, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, floor, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    let floor = 64.0 * f64::EPSILON * whole.abs();
    step(f, a, b, fa, fm, fb, whole, tol, floor, 50)
}

/// Upper tail of Student's t. With `x = √ν tan φ` the density becomes
/// proportional to `cos^{ν-1} φ` on `(-π/2, π/2)`, so no gamma function is needed.
pub fn student_t_upper(t: f64, dof: f64) -> f64 {
    let f = |phi: f64| phi.cos().max(0.0).powf(dof - 1.0);
    let total = integrate(&f, -FRAC_PI_2, FRAC_PI_2, 1e-15);
    let phi_t = (t / dof.sqrt()).atan();
    integrate(&f, phi_t, FRAC_PI_2, 1e-15) / total
}

/// Standard normal upper tail by quadrature of the density.
pub fn normal_upper(z: f64) -> f64 {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    0.5 - integrate(&pdf, 0.0, z, 1e-15)
}

/// Probability that the angle between two independent uniform directions in
/// `R^d` lies below `theta`. The angle has density `∝ sin^{d-2} θ` on `[0, π]`,
/// which is the Beta(½, (d−1)/2) law of `cos² θ` folded by sign.
pub fn angle_below(theta: f64, dim: usize) -> f64 {
    let f = |x: f64| x.sin().powi(dim as i32 - 2);
    integrate(&f, 0.0, theta, 1e-17) / integrate(&f, 0.0, PI, 1e-15)
}

/// `(1 + #{Δ ≤ 0}) / (S + 1)` recounted by explicit loops, with `Δ` the
/// difference of per-sample means over trajectories.
#[allow(clippy::needless_range_loop)]
pub fn pooled_p(observed: &[f64], null: &[Vec<f64>]) -> f64 {
    let samples = null[0].len();
    let mut non_exceeding = 0;
    for s in 0..samples {
        let mut obs = 0.0;
        let mut nul = 0.0;
        for t in 0..observed.len() {
            obs += observed[t];
            nul += null[t][s];
        }
        let n = observed.len() as f64;
        if obs / n - nul / n <= 0.0 {
            non_exceeding += 1;
        }
    }
    (1 + non_exceeding) as f64 / (samples + 1) as f64
}

/// Three standard deviations of a binomial proportion plus a continuity term.
pub fn binomial_3sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1.0 / n as f64
}

/// Product of `k` Householder reflections plus a translation.
pub struct RigidMotion {
    normals: Vec<Vec<f64>>,
    shift: Vec<f64>,
}

impl RigidMotion {
    pub fn random(rng: &mut Pcg64Mcg, dim: usize, k: usize) -> Self {
        let normals = (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let shift = (0..dim).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { normals, shift }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for n in &self.normals {
            let d: f64 = y.iter().zip(n).map(|(a, b)| a * b).sum();
            y.iter_mut().zip(n).for_each(|(a, b)| *a -= 2.0 * d * b);
        }
        y.iter().zip(&self.shift).map(|(a, b)| a + b).collect()
    }
}

pub fn summary(id: &str, tail: usize, ratio: Option<f64>) -> CurvatureSummary<f64> {
    CurvatureSummary {
        trajectory_id: id.into(),
        angles: AngleSeries::from_values(vec![]),
        path_length: 0.0,
        chord: 0.0,
        ratio,
        flat_count: tail,
        sharp_count: 0,
        tail_count: tail,
    }
}

pub fn draws(id: &str, c: Vec<usize>, r: Vec<Option<f64>>) -> NullDraws {
    NullDraws {
        trajectory_id: id.into(),
        flat_tilde: c.clone(),
        sharp_tilde: vec![0; c.len()],
        c_tilde: c,
        r_tilde: r,
    }
}

pub struct PooledCase {
    pub summaries: Vec<CurvatureSummary<f64>>,
    pub nulls: Vec<NullDraws>,
}

/// Random small pooled-test input with all ratios defined.
pub fn random_pooled_case(rng: &mut Pcg64Mcg) -> PooledCase {
    let t = rng.random_range(1..12);
    let s = rng.random_range(1..60);
    let summaries = (0..t)
        .map(|i| {
            summary(
                &format!("t{i}"),
                rng.random_range(0..8),
                Some(rng.random_range(1.0..3.0)),
            )
        })
        .collect();
    let nulls = (0..t)
        .map(|i| {
            draws(
                &format!("t{i}"),
                (0..s).map(|_| rng.random_range(0..8)).collect(),
                (0..s).map(|_| Some(rng.random_range(1.0..3.0))).collect(),
            )
        })
        .collect();
    PooledCase { summaries, nulls }
}
