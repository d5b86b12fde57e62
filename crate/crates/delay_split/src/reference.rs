//! Unsplit high-accuracy solutions: a fine explicit integrator for the full
//! coupled equation `u' = Bu + Phi u_t`, and a closed-form oracle for scalar
//! linear delay equations with constant history, used to validate the
//! integrator itself.

use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::generator::LinearGenerator;
use crate::kernel::DelayKernel;
use crate::state::{DelayState, HistorySegment, SpatialVector};

/// Reference integrator controls. `refine` multiplies the history resolution
/// to give the base substep `delta = delta_sigma / refine`; the integrator
/// sharpens it further when the explicit stability bound of `B` demands it.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceConfig {
    pub refine: usize,
    /// Reporting tolerance attached to reference-limited error rows.
    pub tol: f64,
}

impl ReferenceConfig {
    pub fn new(refine: usize, tol: f64) -> Result<Self> {
        if refine < 4 {
            return Err(Error::Parameter(format!(
                "reference refine must be >= 4, got {refine}"
            )));
        }
        Ok(Self { refine, tol })
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { refine: 16, tol: 1e-10 }
    }
}

/// Substeps per history interval actually used by `reference_solve`: the
/// requested refinement, sharpened so the explicit stage evaluations of `B`
/// stay inside the stability region (`delta * ||B|| <= 2`).
pub fn effective_refine(config: &ReferenceConfig, m: usize, gen: &LinearGenerator) -> usize {
    let ds = 1.0 / m as f64;
    let stability = (ds * gen.norm_bound() / 2.0).ceil().max(1.0) as usize;
    config.refine.max(stability)
}

/// Dense trajectory of the evolved solution with values and derivatives at
/// uniform spacing, starting at time `0`. Evaluation is cubic Hermite inside
/// known cells and linear extrapolation from the newest node for the (at most
/// one substep wide) self-referencing window of stage evaluations. Arguments
/// before time `0` are served by the initial history, never by this buffer:
/// the trajectory generally has a derivative kink at the junction, and a
/// Hermite cell straddling it would lose an order of accuracy.
struct DenseTrajectory {
    delta: f64,
    values: Vec<DVector<f64>>,
    derivs: Vec<DVector<f64>>,
}

impl DenseTrajectory {
    /// Evaluate at time `t >= 0`.
    fn eval(&self, t: f64) -> DVector<f64> {
        let pos = t / self.delta;
        let last = self.values.len() - 1;
        let i = pos.floor() as usize;
        if i >= last {
            let dt = t - last as f64 * self.delta;
            if dt <= 0.0 {
                return self.values[last].clone();
            }
            return &self.values[last] + &self.derivs[last] * dt;
        }
        let theta = pos - i as f64;
        if theta == 0.0 {
            return self.values[i].clone();
        }
        // Cubic Hermite basis on [0, 1].
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.values[i] * h00
            + &self.derivs[i] * (h10 * self.delta)
            + &self.values[i + 1] * h01
            + &self.derivs[i + 1] * (h11 * self.delta)
    }
}

/// Integrates the unsplit equation by classical RK4 with a dense rolling
/// history window, returning `(u(t), u_t)` sampled back onto the coarse grid.
/// `t` must be a multiple of the history spacing so the output lands on grid
/// nodes.
pub fn reference_solve(
    x0: &DelayState,
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    t: f64,
    config: &ReferenceConfig,
) -> Result<DelayState> {
    let m = x0.m();
    let n = x0.dim();
    let ds = 1.0 / m as f64;
    let coarse_steps_f = t / ds;
    let coarse_steps = coarse_steps_f.round() as usize;
    if (coarse_steps_f - coarse_steps as f64).abs() > 1e-9 {
        return Err(Error::GridAlignment(format!(
            "reference horizon t = {t} is not a multiple of the history spacing {ds}"
        )));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }

    let refine = effective_refine(config, m, gen);
    let delta = ds / refine as f64;

    // Quadrature resolution for the delay functional; 4x the coarse grid keeps
    // its error well below the splitting error being measured.
    let kernel_fine = kernel.resample(4 * m)?;

    let gw = x0.head.grid_weight;
    let wrap = |v: DVector<f64>| SpatialVector { values: v, grid_weight: gw };

    let total_steps = coarse_steps * refine;
    let mut traj = DenseTrajectory {
        delta,
        values: Vec::with_capacity(total_steps + 1),
        derivs: Vec::with_capacity(total_steps + 1),
    };
    // The evolution starts from the head (which may differ from f(0) for
    // head-inconsistent data); negative-time arguments read the initial
    // history directly.
    traj.values.push(x0.head.values.clone());
    traj.derivs.push(DVector::zeros(n));

    let eval_at = |arg: f64, traj: &DenseTrajectory| -> DVector<f64> {
        if arg < 0.0 {
            x0.history
                .interpolate(arg.max(-1.0))
                .expect("argument within the history window")
                .values
        } else {
            traj.eval(arg)
        }
    };
    let rhs = |time: f64, v: &DVector<f64>, traj: &DenseTrajectory| -> Result<DVector<f64>> {
        let phi = kernel_fine.evaluate_with(n, &|sigma| eval_at(time + sigma, traj))?;
        Ok(gen.apply(&wrap(v.clone()))?.values + phi)
    };

    for step in 0..total_steps {
        let t0 = step as f64 * delta;
        let i = traj.values.len() - 1;
        let u = traj.values[i].clone();
        let k1 = rhs(t0, &u, &traj)?;
        traj.derivs[i] = k1.clone();
        let k2 = rhs(t0 + 0.5 * delta, &(&u + &k1 * (0.5 * delta)), &traj)?;
        let k3 = rhs(t0 + 0.5 * delta, &(&u + &k2 * (0.5 * delta)), &traj)?;
        let k4 = rhs(t0 + delta, &(&u + &k3 * delta), &traj)?;
        let next = &u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (delta / 6.0);
        // Provisional slope at the new node; replaced by the exact rhs on the
        // next iteration.
        let slope = (&next - &u) / delta;
        traj.values.push(next);
        traj.derivs.push(slope);
    }
    // Final node derivative for interpolation consistency.
    let i = traj.values.len() - 1;
    let tf = total_steps as f64 * delta;
    let u_final = traj.values[i].clone();
    traj.derivs[i] = rhs(tf, &u_final, &traj)?;

    let samples: Vec<SpatialVector> = (0..=m)
        .map(|j| {
            // Absolute time of the output history node sigma_j = -1 + j*ds.
            let node_time = t - 1.0 + j as f64 * ds;
            wrap(eval_at(node_time, &traj))
        })
        .collect();
    DelayState::new(
        wrap(u_final),
        HistorySegment::new(samples, x0.history.p)?,
    )
}

const GAUSS_POINTS: usize = 32;

/// Gauss-Legendre nodes and weights on [-1, 1] by the Golub-Welsch
/// eigendecomposition of the Jacobi matrix.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GAUSS_POINTS;
        let mut j = DMatrix::zeros(n, n);
        for i in 1..n {
            let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
            j[(i - 1, i)] = b;
            j[(i, i - 1)] = b;
        }
        let se = j.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = se.eigenvectors[(0, k)];
                (se.eigenvalues[k], 2.0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    })
}

fn gauss_integrate(lo: f64, hi: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Closed-form (up to machine-precision quadrature) solution of the scalar
/// delay equation `u' = a u(t) + b u(t - 1)` with constant history `f = x`,
/// by the method of steps, for `0 <= t <= 3`.
pub fn exact_scalar_oracle(a: f64, b: f64, x: f64, t: f64) -> Result<f64> {
    if !(0.0..=3.0).contains(&t) {
        return Err(Error::Parameter(format!(
            "oracle supports 0 <= t <= 3, got {t}"
        )));
    }
    fn eval(a: f64, b: f64, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return x;
        }
        let seg_start = (t.ceil() - 1.0).max(0.0);
        let base = eval(a, b, x, seg_start);
        let integral = gauss_integrate(seg_start, t, &|s| {
            (a * (t - s)).exp() * eval(a, b, x, s - 1.0)
        });
        (a * (t - seg_start)).exp() * base + b * integral
    }
    Ok(eval(a, b, x, t))
}
