//! Nonlinear conjugate gradient with a fixed, halving step size.
//!
//! There is no line search. The iterate moves by `step · d` along the
//! current conjugate direction; a trial that does not decrease the
//! functional is rejected and the step is halved. Iteration stops once the step falls
//! below the floor. Directions use Polak–Ribière with a restart to steepest
//! descent whenever the direction stops being a descent direction.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::parallel::{norm_sqr, real_dot};

/// A real functional of complex node values. The gradient packs
/// `∂/∂Re + i ∂/∂Im` per node and must be zero at constrained nodes.
pub trait Objective: Sync {
    fn value(&self, x: &[Complex64]) -> f64;

    fn value_and_gradient(&self, x: &[Complex64], grad: &mut [Complex64]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgParams {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_iterations: usize,
}

impl Default for CgParams {
    fn default() -> Self {
        Self {
            initial_step: 1e-4,
            min_step: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepFloor,
    ZeroGradient,
    /// The iteration cap was hit; the best (latest accepted) iterate is returned.
    IterationCap,
}

/// One record per accepted iterate (the first is the starting point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeTrace {
    pub values: Vec<f64>,
    pub steps: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    /// Trial steps, accepted or not.
    pub trials: usize,
    pub stop: StopReason,
}

impl MinimizeTrace {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace starts with the initial value")
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn hit_cap(&self) -> bool {
        self.stop == StopReason::IterationCap
    }
}

pub fn minimize<O: Objective>(objective: &O, x0: Vec<Complex64>, params: &CgParams) -> (Vec<Complex64>, MinimizeTrace) {
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![Complex64::new(0.0, 0.0); n];
    let mut value = objective.value_and_gradient(&x, &mut grad);
    let mut gnorm2 = norm_sqr(&grad);
    let mut dir: Vec<Complex64> = grad.iter().map(|g| -g).collect();

    let mut step = params.initial_step;
    let mut trace = MinimizeTrace {
        values: vec![value],
        steps: vec![step],
        gradient_norms: vec![gnorm2.sqrt()],
        trials: 0,
        stop: StopReason::StepFloor,
    };
    if gnorm2 == 0.0 {
        trace.stop = StopReason::ZeroGradient;
        return (x, trace);
    }

    let mut trial = vec![Complex64::new(0.0, 0.0); n];
    let mut trial_grad = vec![Complex64::new(0.0, 0.0); n];
    while step >= params.min_step {
        if trace.trials >= params.max_iterations {
            trace.stop = StopReason::IterationCap;
            break;
        }
        trace.trials += 1;

        trial
            .par_iter_mut()
            .zip(x.par_iter().zip(dir.par_iter()))
            .for_each(|(t, (xi, di))| *t = xi + di * step);
        let trial_value = objective.value_and_gradient(&trial, &mut trial_grad);
        if !(trial_value < value) {
            step *= 0.5;
            continue;
        }

        let new_gnorm2 = norm_sqr(&trial_grad);
        // Polak–Ribière: β = <g₊, g₊ - g> / <g, g>, clipped at zero.
        let cross = real_dot(&trial_grad, &grad);
        let beta = ((new_gnorm2 - cross) / gnorm2).max(0.0);
        dir.par_iter_mut()
            .zip(trial_grad.par_iter())
            .for_each(|(d, g)| *d = -g + *d * beta);
        if real_dot(&dir, &trial_grad) >= 0.0 {
            dir.par_iter_mut()
                .zip(trial_grad.par_iter())
                .for_each(|(d, g)| *d = -g);
        }

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        value = trial_value;
        gnorm2 = new_gnorm2;
        trace.values.push(value);
        trace.steps.push(step);
        trace.gradient_norms.push(gnorm2.sqrt());
        if gnorm2 == 0.0 {
            trace.stop = StopReason::ZeroGradient;
            break;
        }
    }
    (x, trace)
}
