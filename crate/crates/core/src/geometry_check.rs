//! Seeded identity and gradient checks over random toy layers.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;

use crate::toy_geometry::{
    attention_weights, discrete_velocity_identity, effective_metric, forced_geodesic_step, geodesic_predecessor,
    geodesic_residual, layer_step, metric_gradient, semantic_action, GeometryError, KineticMode, Mat, Preconditioner,
    TokenStates, ToyLayer,
};

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const VELOCITY_TOL: f64 = 1e-9;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const KINETIC_TOL: f64 = 1e-12;
pub const GEODESIC_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-5;
pub const MAX_TOKENS: usize = 8;
pub const MAX_DIM: usize = 16;

/// Test hooks that break one ingredient on purpose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Drop the softmax normalization.
    pub broken_softmax: bool,
}

/// One seeded random case.
#[derive(Debug, Clone)]
pub struct ToyCase {
    pub seed: u64,
    pub layer: ToyLayer<f64>,
    pub x: TokenStates<f64>,
}

/// Case seed for trial `trial` of a run with base seed `seed`.
pub fn case_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64)
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut Pcg64Mcg) -> Mat<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

/// Random layer and state with `n ≤ 8`, `d, d_k, d_v ≤ 16`.
pub fn random_case(seed: u64) -> ToyCase {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let n = rng.random_range(1..=MAX_TOKENS);
    let d = rng.random_range(1..=MAX_DIM);
    let d_k = rng.random_range(1..=MAX_DIM);
    let d_v = rng.random_range(1..=MAX_DIM);
    let s = 1.0 / (d as f64).sqrt();
    let w_q = gaussian(d, d_k, s, &mut rng);
    let w_k = gaussian(d, d_k, s, &mut rng);
    let w_v = gaussian(d, d_v, s, &mut rng);
    let w_o = gaussian(d_v, d, 0.5 / (d_v as f64).sqrt(), &mut rng);
    let layer = ToyLayer::new(w_q, w_k, w_v, w_o).expect("shapes are consistent by construction");
    let x = gaussian(n, d, 1.0, &mut rng);
    ToyCase { seed, layer, x }
}

fn attention_with(x: &TokenStates<f64>, layer: &ToyLayer<f64>, faults: Faults) -> Result<Mat<f64>, GeometryError> {
    if !faults.broken_softmax {
        return attention_weights(x, layer);
    }
    let g = effective_metric(x, layer)?;
    let scale = (layer.d_k() as f64).sqrt();
    Ok(g.map(|v| (v / scale).exp()))
}

fn max_row_sum_error(a: &Mat<f64>) -> f64 {
    (0..a.rows())
        .map(|i| (a.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Row-sum error of the attention at the case state and at a rescaled state
/// whose largest logit magnitude is about 1e3.
pub fn check_row_sums(case: &ToyCase, faults: Faults) -> Result<f64, GeometryError> {
    let a = attention_with(&case.x, &case.layer, faults)?;
    let g = effective_metric(&case.x, &case.layer)?;
    let peak = g.max_abs() / (case.layer.d_k() as f64).sqrt();
    let mut err = max_row_sum_error(&a);
    if peak > 0.0 {
        let x_big = case.x.scale((1e3 / peak).sqrt());
        err = err.max(max_row_sum_error(&attention_with(&x_big, &case.layer, faults)?));
    }
    Ok(err)
}

pub fn check_velocity(case: &ToyCase) -> Result<f64, GeometryError> {
    discrete_velocity_identity(&case.x, &case.layer)
}

/// Max over all `(i, j, k, a)` of `|analytic - central FD|`, relative to the
/// largest analytic entry (floored at 1).
pub fn check_metric_gradient(case: &ToyCase) -> Result<f64, GeometryError> {
    let grad = metric_gradient(&case.x, &case.layer)?;
    let (n, d) = case.x.shape();
    let mut diff: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..n {
        for a in 0..d {
            let mut plus = case.x.clone();
            plus[(k, a)] += FD_STEP;
            let mut minus = case.x.clone();
            minus[(k, a)] -= FD_STEP;
            let gp = effective_metric(&plus, &case.layer)?;
            let gm = effective_metric(&minus, &case.layer)?;
            for i in 0..n {
                for j in 0..n {
                    let fd = (gp[(i, j)] - gm[(i, j)]) / (2.0 * FD_STEP);
                    let an = grad.get(i, j, k)[a];
                    diff = diff.max((an - fd).abs());
                    peak = peak.max(an.abs());
                }
            }
        }
    }
    Ok(diff / peak.max(1.0))
}

/// `semantic_action` with identity metrics and zero losses versus an explicit
/// sum of squared step norms, over four layers of the case.
pub fn check_kinetic_reduction(case: &ToyCase) -> Result<f64, GeometryError> {
    let mut states = vec![case.x.clone()];
    for _ in 0..3 {
        let next = layer_step(states.last().expect("non-empty"), &case.layer)?;
        states.push(next);
    }
    let n = case.x.rows();
    let metrics = vec![Mat::identity(n); states.len() - 1];
    let losses = vec![0.0; states.len() - 1];
    let action = semantic_action(&states, &metrics, &losses, KineticMode::Diagonal)?;
    let mut oracle = 0.0;
    for w in states.windows(2) {
        for i in 0..n {
            for (a, b) in w[1].row(i).iter().zip(w[0].row(i)) {
                oracle += (a - b) * (a - b);
            }
        }
    }
    Ok((action - oracle).abs() / oracle.max(1.0))
}

/// `true` when the flat, force-free step equals `2 x_curr - x_prev` exactly.
pub fn check_linear_extrapolation(case: &ToyCase) -> Result<bool, GeometryError> {
    let x_curr = layer_step(&case.x, &case.layer)?;
    let zeros = Mat::zeros(case.x.rows(), case.x.cols());
    let next = forced_geodesic_step(
        &x_curr,
        &case.x,
        |v| Mat::zeros(v.rows(), v.cols()),
        &zeros,
        &Preconditioner::Identity,
        0.0,
    )?;
    let expect = Mat::from_fn(x_curr.rows(), x_curr.cols(), |i, j| {
        2.0 * x_curr[(i, j)] - case.x[(i, j)]
    });
    Ok(next == expect)
}

/// Largest geodesic residual on a constructed triple.
pub fn check_geodesic(case: &ToyCase) -> Result<f64, GeometryError> {
    let x_prev = geodesic_predecessor(&case.x, &case.layer)?;
    let x_next = layer_step(&case.x, &case.layer)?;
    let r = geodesic_residual(&x_prev, &case.x, &x_next, &case.layer)?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub tolerance: f64,
    pub max_residual: f64,
    /// Case seed that produced `max_residual`.
    pub worst_seed: u64,
    /// First case seed that exceeded the tolerance.
    pub first_failure: Option<u64>,
    pub cases: usize,
}

impl CheckOutcome {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            max_residual: 0.0,
            worst_seed: 0,
            first_failure: None,
            cases: 0,
        }
    }

    fn record(&mut self, seed: u64, residual: f64) {
        if self.cases == 0 || residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
            self.worst_seed = seed;
        }
        self.cases += 1;
        if (residual.is_nan() || residual > self.tolerance) && self.first_failure.is_none() {
            self.first_failure = Some(seed);
        }
    }

    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckOutcome>,
}

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

/// Runs every check on `trials` random cases derived from `seed`.
pub fn run_suite(seed: u64, trials: usize, faults: Faults) -> Result<GeometryReport, GeometryError> {
    let mut rows = CheckOutcome::new("attention_row_sums", ROW_SUM_TOL);
    let mut velocity = CheckOutcome::new("discrete_velocity_identity", VELOCITY_TOL);
    let mut gradient = CheckOutcome::new("metric_gradient_vs_central_difference", GRADIENT_REL_TOL);
    let mut kinetic = CheckOutcome::new("semantic_action_kinetic_reduction", KINETIC_TOL);
    let mut linear = CheckOutcome::new("forced_step_linear_extrapolation", 0.0);
    let mut geodesic = CheckOutcome::new("constructed_geodesic_residual", GEODESIC_TOL);
    for trial in 0..trials {
        let case = random_case(case_seed(seed, trial));
        rows.record(case.seed, check_row_sums(&case, faults)?);
        velocity.record(case.seed, check_velocity(&case)?);
        gradient.record(case.seed, check_metric_gradient(&case)?);
        kinetic.record(case.seed, check_kinetic_reduction(&case)?);
        linear.record(case.seed, if check_linear_extrapolation(&case)? { 0.0 } else { 1.0 });
        geodesic.record(case.seed, check_geodesic(&case)?);
    }
    Ok(GeometryReport {
        seed,
        trials,
        checks: vec![rows, velocity, gradient, kinetic, linear, geodesic],
    })
}
