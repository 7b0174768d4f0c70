//! Derivative-free minimization and the training loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnn::{predict_all, LabeledState, QnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NelderMead,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Iteration budget shared by all restarts. Zero skips optimization.
    pub max_iterations: usize,
    /// Stop once the simplex cost spread (Nelder–Mead) or the step size
    /// (coordinate descent) falls below this.
    pub ftol: f64,
    /// Starting point; zeros when absent.
    pub initial_theta: Option<Vec<f64>>,
    /// Initial simplex edge / coordinate step, radians.
    pub initial_step: f64,
    /// Extra Nelder–Mead runs from the best point, each with the step
    /// shrunk by `RESTART_SHRINK`.
    pub restarts: usize,
    /// Half-width of the seeded uniform perturbation added to the start.
    pub perturbation: f64,
    pub rng_seed: u64,
    /// Samples per parallel batch during cost evaluation; all at once when absent.
    pub batch_size: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::NelderMead,
            max_iterations: 2000,
            ftol: 1e-9,
            initial_theta: None,
            initial_step: 0.5,
            restarts: 2,
            perturbation: 0.0,
            rng_seed: 0,
            batch_size: None,
        }
    }
}

pub const RESTART_SHRINK: f64 = 0.2;

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ftol.is_nan() || self.ftol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ftol must be positive, got {}",
                self.ftol
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(Error::InvalidParameter(
                "perturbation must be non-negative".into(),
            ));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidParameter(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Starting point of dimension `d`: `initial_theta` (or zeros) plus the
    /// seeded perturbation.
    pub fn start(&self, d: usize) -> Result<Vec<f64>> {
        let mut theta = match &self.initial_theta {
            Some(t) if t.len() != d => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: t.len(),
                })
            }
            Some(t) => t.clone(),
            None => vec![0.0; d],
        };
        if self.perturbation > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
            for t in theta.iter_mut() {
                *t += rng.gen_range(-self.perturbation..=self.perturbation);
            }
        }
        Ok(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub cost_best: f64,
    pub cost_current: f64,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Trace { rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub trace: Trace,
    pub iterations: usize,
    pub evaluations: usize,
    /// Stopped on tolerance rather than budget.
    pub converged: bool,
}

/// Wraps the objective: counts calls, rejects non-finite values, tracks the
/// best point and records the trace.
struct Objective<'a, F> {
    f: F,
    start: Instant,
    evaluations: usize,
    best: (Vec<f64>, f64),
    last: f64,
    trace: &'a mut Trace,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Objective<'_, F> {
    fn eval(&mut self, theta: &[f64]) -> Result<f64> {
        let value = (self.f)(theta)?;
        self.evaluations += 1;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective {
                value,
                theta: theta.to_vec(),
            });
        }
        if value < self.best.1 {
            self.best = (theta.to_vec(), value);
        }
        self.last = value;
        Ok(value)
    }

    fn record(&mut self, iteration: usize) {
        self.trace.rows.push(TraceRow {
            iteration,
            cost_best: self.best.1,
            cost_current: self.last,
            wall_ms: self.start.elapsed().as_millis(),
        });
    }
}

/// Minimizes `f` from `config.start(d)`.
///
/// The trace has one row per iteration; `cost_best` never increases.
pub fn minimize<F>(f: F, d: usize, config: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    let x0 = config.start(d)?;
    let mut trace = Trace::default();
    let mut obj = Objective {
        f,
        start: Instant::now(),
        evaluations: 0,
        best: (x0.clone(), f64::INFINITY),
        last: f64::NAN,
        trace: &mut trace,
    };
    obj.eval(&x0)?;
    obj.record(0);
    if config.max_iterations == 0 || d == 0 {
        let (theta, cost) = obj.best.clone();
        let evaluations = obj.evaluations;
        return Ok(MinimizeResult {
            theta,
            cost,
            trace,
            iterations: 0,
            evaluations,
            converged: d == 0,
        });
    }

    let mut iterations = 0;
    let converged = match config.method {
        Method::NelderMead => {
            let mut step = config.initial_step;
            let mut converged = false;
            for round in 0..=config.restarts {
                let before = obj.best.1;
                let from = obj.best.0.clone();
                converged = nelder_mead(&mut obj, &from, step, config, &mut iterations)?;
                if !converged || (round > 0 && before - obj.best.1 < config.ftol) {
                    break;
                }
                step *= RESTART_SHRINK;
            }
            converged
        }
        Method::CoordinateDescent => coordinate_descent(&mut obj, config, &mut iterations)?,
    };
    let (theta, cost) = obj.best.clone();
    let evaluations = obj.evaluations;
    Ok(MinimizeResult {
        theta,
        cost,
        trace,
        iterations,
        evaluations,
        converged,
    })
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½,
/// shrink ½). Returns whether the cost spread fell below `ftol`.
fn nelder_mead<F>(
    obj: &mut Objective<'_, F>,
    x0: &[f64],
    step: f64,
    config: &OptimizerConfig,
    iterations: &mut usize,
) -> Result<bool>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), obj.eval(x0)?));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = obj.eval(&x)?;
        simplex.push((x, fx));
    }

    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(c, w)| c + t * (w - c)).collect()
    };

    while *iterations < config.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[d].1 - simplex[0].1 < config.ftol {
            return Ok(true);
        }
        *iterations += 1;
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = point(&centroid, &worst.0, -1.0);
        let fr = obj.eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = point(&centroid, &worst.0, -2.0);
            let fe = obj.eval(&xe)?;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = point(&centroid, &xr, 0.5);
                let fc = obj.eval(&xc)?;
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst.0, 0.5);
                let fc = obj.eval(&xc)?;
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = point(&best, &v.0, 0.5);
                    v.1 = obj.eval(&v.0)?;
                }
            }
        }
        obj.record(*iterations);
    }
    Ok(false)
}

/// Cyclic coordinate search: try `±step` on each coordinate, halve the step
/// after a sweep without improvement. One sweep is one iteration.
fn coordinate_descent<F>(
    obj: &mut Objective<'_, F>,
    config: &OptimizerConfig,
    iterations: &mut usize,
) -> Result<bool>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut step = config.initial_step;
    let (mut x, mut fx) = obj.best.clone();
    while *iterations < config.max_iterations {
        if step < config.ftol {
            return Ok(true);
        }
        *iterations += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[i] += dir * step;
                let ft = obj.eval(&trial)?;
                if ft < fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
        obj.record(*iterations);
    }
    Ok(false)
}

/// Maps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = theta.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Training cost with samples evaluated in parallel batches; the sum runs
/// in sample order so results do not depend on scheduling.
pub fn batched_cost(
    model: &QnnModel,
    samples: &[LabeledState],
    batch_size: Option<usize>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let chunk = batch_size.unwrap_or(samples.len()).max(1);
    let mut total = 0.0;
    for batch in samples.chunks(chunk) {
        for (p, s) in predict_all(model, batch)?.iter().zip(batch) {
            total += (p.value - f64::from(s.label)).powi(2);
        }
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QnnModel,
    pub result: MinimizeResult,
}

/// Fits `template.theta` to `train_set`. The returned angles are wrapped
/// into `(−π, π]`; with `max_iterations = 0` the template comes back
/// unchanged apart from its training metadata.
pub fn train(
    template: &QnnModel,
    train_set: &[LabeledState],
    config: &OptimizerConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    template.validate()?;
    let started = Instant::now();
    let mut cfg = config.clone();
    if cfg.initial_theta.is_none() {
        cfg.initial_theta = Some(template.theta.clone());
    }
    let mut probe = template.clone();
    let result = minimize(
        |theta| {
            probe.theta.copy_from_slice(theta);
            batched_cost(&probe, train_set, cfg.batch_size)
        },
        template.theta.len(),
        &cfg,
    )?;

    let mut model = template.clone();
    if config.max_iterations > 0 {
        model.theta = result.theta.iter().map(|&t| wrap_angle(t)).collect();
    }
    model.training_meta.seed = Some(config.rng_seed);
    model.training_meta.method = Some(
        match config.method {
            Method::NelderMead => "nelder_mead",
            Method::CoordinateDescent => "coordinate_descent",
        }
        .to_string(),
    );
    model.training_meta.iterations = result.iterations;
    model.training_meta.evaluations = result.evaluations;
    model.training_meta.final_train_cost = Some(result.cost);
    model.training_meta.train_size = train_set.len();
    model.training_meta.wall_ms = started.elapsed().as_millis();
    Ok(TrainOutcome { model, result })
}
