//! Split propagators on the product space: the delay sub-flow `T2`, the
//! undelayed sub-flow `T1`, the resolvents of the split generators and of the
//! full operator matrix, and the composite schemes built from them
//! (sequential splitting, Lie resolvent splitting, Crandall-Liggett iteration).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::LinearGenerator;
use crate::kernel::DelayKernel;
use crate::state::{shift_append, DelayState, HistorySegment, SpatialVector};

/// Composite scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Sequential,
    LieResolvent,
    CrandallLiggett,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SchemeKind::Sequential => "sequential",
            SchemeKind::LieResolvent => "lie-resolvent",
            SchemeKind::CrandallLiggett => "crandall-liggett",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(SchemeKind::Sequential),
            "lie-resolvent" => Ok(SchemeKind::LieResolvent),
            "crandall-liggett" => Ok(SchemeKind::CrandallLiggett),
            other => Err(Error::Config(format!("unknown scheme kind '{other}'"))),
        }
    }
}

/// A fully specified stepping scheme. For the sequential scheme the step `h`
/// must equal the history grid spacing (`h * m = 1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitScheme {
    pub kind: SchemeKind,
    pub h: f64,
    /// Internal substeps of the delay sub-flow integrator.
    pub substeps: usize,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
}

impl SplitScheme {
    pub fn new(kind: SchemeKind, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("scheme step must be > 0, got {h}")));
        }
        Ok(Self {
            kind,
            h,
            substeps: 4,
            fixed_point_tol: 1e-12,
            fixed_point_max_iter: 200,
        })
    }

    /// Runs the scheme from `x0` to time `t = k * h`.
    pub fn run(
        &self,
        x0: &DelayState,
        gen: &LinearGenerator,
        kernel: &DelayKernel,
        t_final: f64,
    ) -> Result<DelayState> {
        let steps_f = t_final / self.h;
        let steps = steps_f.round() as usize;
        if (steps_f - steps as f64).abs() > 1e-9 {
            return Err(Error::GridAlignment(format!(
                "t_final = {t_final} is not a multiple of h = {}",
                self.h
            )));
        }
        match self.kind {
            SchemeKind::Sequential => {
                sequential_split(x0, gen, kernel, self.h, steps, self.substeps)
            }
            SchemeKind::LieResolvent => lie_split(x0, gen, kernel, t_final, steps, self),
            SchemeKind::CrandallLiggett => {
                crandall_liggett_apply(x0, gen, kernel, t_final, steps, self)
            }
        }
    }
}

fn require_grid_step(state: &DelayState, h: f64) -> Result<()> {
    let m = state.m() as f64;
    if (h * m - 1.0).abs() > 1e-9 {
        return Err(Error::GridAlignment(format!(
            "step h = {h} must equal the history spacing 1/m = {}",
            1.0 / m
        )));
    }
    Ok(())
}

/// Piecewise-linear trajectory over `[0, h]` at substep resolution.
struct SubTrajectory<'a> {
    values: &'a [DVector<f64>],
    delta: f64,
}

impl SubTrajectory<'_> {
    /// Evaluate at `t >= 0`, clamping past the last known value.
    fn eval(&self, t: f64) -> DVector<f64> {
        let last = self.values.len() - 1;
        let pos = t / self.delta;
        let i = pos.floor() as usize;
        if i >= last {
            return self.values[last].clone();
        }
        let theta = pos - i as f64;
        &self.values[i] * (1.0 - theta) + &self.values[i + 1] * theta
    }
}

/// One step of the pure delay sub-flow `T2(h)`: integrates `v'(s) = Phi v_s`
/// on `[0, h]` and advances the history window by one grid slot.
///
/// The derivative depends only on past values, so the classical 4-stage RK
/// step degenerates to Simpson quadrature of `s -> Phi v_s` per substep. The
/// within-step self reference of distributed kernels (arguments in `(0, s]`)
/// is resolved by a predictor pass with the newest committed value frozen,
/// followed by one corrector pass reading the predictor trajectory.
pub fn step_t2(
    state: &DelayState,
    kernel: &DelayKernel,
    h: f64,
    substeps: usize,
) -> Result<DelayState> {
    require_grid_step(state, h)?;
    if substeps == 0 {
        return Err(Error::Parameter("substeps must be >= 1".into()));
    }
    if kernel.m() != state.m() {
        return Err(Error::GridAlignment(format!(
            "kernel sampled at m = {} but state has m = {}",
            kernel.m(),
            state.m()
        )));
    }
    let n = state.dim();
    let delta = h / substeps as f64;

    let integrate = |predictor: Option<&SubTrajectory>| -> Result<Vec<DVector<f64>>> {
        let mut vals = Vec::with_capacity(substeps + 1);
        vals.push(state.head.values.clone());
        for i in 0..substeps {
            let s0 = i as f64 * delta;
            let committed = s0;
            let phi_at = |s: f64, vals: &[DVector<f64>]| -> Result<DVector<f64>> {
                let hv = |t: f64| -> DVector<f64> {
                    if t <= 0.0 {
                        state
                            .history
                            .interpolate(t.max(-1.0))
                            .expect("t within window")
                            .values
                    } else if t <= committed + 1e-15 {
                        SubTrajectory { values: vals, delta }.eval(t)
                    } else {
                        match predictor {
                            Some(p) => p.eval(t),
                            None => vals[vals.len() - 1].clone(),
                        }
                    }
                };
                kernel.evaluate_with(n, &|sigma| hv(s + sigma))
            };
            let g0 = phi_at(s0, &vals)?;
            let g1 = phi_at(s0 + 0.5 * delta, &vals)?;
            let g2 = phi_at(s0 + delta, &vals)?;
            let next = &vals[i] + (g0 + g1 * 4.0 + g2) * (delta / 6.0);
            vals.push(next);
        }
        Ok(vals)
    };

    let predicted = integrate(None)?;
    let traj = SubTrajectory { values: &predicted, delta };
    let corrected = integrate(Some(&traj))?;

    let tail = SpatialVector {
        values: corrected[substeps].clone(),
        grid_weight: state.head.grid_weight,
    };
    shift_append(state, &[tail])
}

/// One step of the undelayed sub-flow `T1(h) = diag(V(h), I)`: the head
/// evolves under the semigroup of `B`, the history is untouched. The result
/// is generally not head-consistent; that is the product-space formulation.
pub fn step_t1(state: &DelayState, gen: &LinearGenerator, h: f64) -> Result<DelayState> {
    if h < 0.0 {
        return Err(Error::Parameter(format!("step must be >= 0, got {h}")));
    }
    Ok(DelayState {
        head: gen.semigroup_apply(h, &state.head)?,
        history: state.history.clone(),
    })
}

/// `(T1(h) T2(h))^k`: the sequentially split evolution. Project onto the head
/// for the split solution `u^sq(kh)`.
pub fn sequential_split(
    x0: &DelayState,
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    h: f64,
    k: usize,
    substeps: usize,
) -> Result<DelayState> {
    let mut state = x0.clone();
    for _ in 0..k {
        state = step_t2(&state, kernel, h, substeps)?;
        state = step_t1(&state, gen, h)?;
    }
    Ok(state)
}

/// Shared machinery for the resolvents of the delay part and of the full
/// operator matrix. Solves `(I - h A)(x, f) = (y, g)` where the history
/// equation `f - h f' = g`, `f(0) = x` is inverted exactly in `sigma` by the
/// exponential formula
/// `f(sigma) = e^{sigma/h} [x + (1/h) int_sigma^0 e^{-s/h} g(s) ds]`,
/// accumulated by a stable backward product-integration recursion on the grid.
pub struct Resolvent {
    h: f64,
    m: usize,
    n: usize,
    kernel: DelayKernel,
    /// `e^{sigma_j / h}` on the grid.
    profile: Vec<f64>,
    /// LU of the head system `I - hB - h k K_h` for linear nonlinearities,
    /// or of `I - hB` for the Picard iteration.
    head_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k_h: DMatrix<f64>,
    /// Scaling factor of `g` when it is linear; `None` selects Picard.
    linear_factor: Option<f64>,
    fixed_point_tol: f64,
    fixed_point_max_iter: usize,
}

impl Resolvent {
    /// `gen = None` gives the resolvent of the pure delay part (`B = 0`).
    pub fn new(
        gen: Option<&LinearGenerator>,
        kernel: &DelayKernel,
        h: f64,
        m: usize,
        n: usize,
        fixed_point_tol: f64,
        fixed_point_max_iter: usize,
    ) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("resolvent step must be > 0, got {h}")));
        }
        if let Some(g) = gen {
            if 1.0 - h * g.alpha <= 0.0 {
                return Err(Error::SingularSystem(format!(
                    "h * alpha = {} >= 1: resolvent outside the dissipative regime",
                    h * g.alpha
                )));
            }
        }
        let kernel = if kernel.m() == m { kernel.clone() } else { kernel.resample(m)? };
        let ds = 1.0 / m as f64;
        let profile: Vec<f64> = (0..=m).map(|j| ((-1.0 + j as f64 * ds) / h).exp()).collect();

        let b = match gen {
            Some(g) => g.dense_matrix(),
            None => DMatrix::zeros(n, n),
        };
        let k_h = kernel.exp_weighted_matrix(h, n)?;
        let (linear_factor, head_matrix) = if kernel.is_linear() {
            let factor = match kernel.g {
                crate::kernel::Nonlinearity::Scaled(c) => c,
                _ => 1.0,
            };
            let mat = DMatrix::identity(n, n) - &b * h - &k_h * (factor * h);
            (Some(factor), mat)
        } else {
            // Picard precondition: the delay part must be a contraction.
            let contraction = h * kernel.beta() * kernel.tau(0.0)?;
            if contraction >= 1.0 {
                return Err(Error::Parameter(format!(
                    "h * beta * tau(0) = {contraction} >= 1: fixed-point solve not contractive"
                )));
            }
            (None, DMatrix::identity(n, n) - &b * h)
        };
        let head_lu = head_matrix.lu();
        if head_lu.determinant().abs() < 1e-300 {
            return Err(Error::SingularSystem("head system I - hA is singular".into()));
        }
        Ok(Self {
            h,
            m,
            n,
            kernel,
            profile,
            head_lu,
            k_h,
            linear_factor,
            fixed_point_tol,
            fixed_point_max_iter,
        })
    }

    /// Particular part of the history reconstruction (the `x`-independent
    /// term), by a backward recursion with exponentially fitted weights:
    /// the per-cell integral is computed exactly for piecewise-linear `g`,
    /// which stays stable for every ratio `delta_sigma / h` (a plain
    /// trapezoid rule blows up when the cell is wide relative to `h`).
    fn particular_part(&self, g_hist: &HistorySegment) -> Vec<DVector<f64>> {
        let m = self.m;
        let ds = 1.0 / m as f64;
        let decay = (-ds / self.h).exp();
        // (1/h) int_0^ds e^{-s/h} (g_j (1 - s/ds) + g_{j+1} s/ds) ds
        //   = w0 g_j + w1 g_{j+1}.
        let a = (self.h / ds) * (1.0 - decay);
        let w0 = 1.0 - a;
        let w1 = a - decay;
        let mut part = vec![DVector::zeros(self.n); m + 1];
        for j in (0..m).rev() {
            let gj = &g_hist.sample(j).values;
            let gj1 = &g_hist.sample(j + 1).values;
            part[j] = &part[j + 1] * decay + gj * w0 + gj1 * w1;
        }
        part
    }

    pub fn apply(&self, rhs: &DelayState) -> Result<DelayState> {
        if rhs.m() != self.m {
            return Err(Error::GridAlignment(format!(
                "resolvent built for m = {} applied to state with m = {}",
                self.m,
                rhs.m()
            )));
        }
        if rhs.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: rhs.dim() });
        }
        let part = self.particular_part(&rhs.history);
        let gw = rhs.head.grid_weight;
        let p = rhs.history.p;

        // Kernel integral of the particular part (piecewise linear on the grid).
        let part_segment = HistorySegment::new(
            part.iter()
                .map(|v| SpatialVector { values: v.clone(), grid_weight: gw })
                .collect(),
            p,
        )?;
        let int_part = self
            .kernel
            .integral_with(self.n, &|sigma| {
                part_segment.interpolate(sigma).expect("sigma in window").values
            })?;

        let head = match self.linear_factor {
            Some(factor) => {
                let rhs_vec = &rhs.head.values + &int_part * (factor * self.h);
                self.head_lu
                    .solve(&rhs_vec)
                    .ok_or_else(|| Error::SingularSystem("head solve failed".into()))?
            }
            None => {
                // Picard iteration on the head: x = (I - hB)^{-1} (y + h g(K_h x + I_part)).
                let k_h = &self.k_h;
                let mut x: DVector<f64> = rhs.head.values.clone();
                let mut converged = false;
                let mut residual = f64::INFINITY;
                for _ in 0..self.fixed_point_max_iter {
                    let phi = self.kernel.g.apply(&(k_h * &x + &int_part));
                    let next = self
                        .head_lu
                        .solve(&(&rhs.head.values + phi * self.h))
                        .ok_or_else(|| Error::SingularSystem("head solve failed".into()))?;
                    residual = (&next - &x).norm();
                    x = next;
                    if residual <= self.fixed_point_tol * (1.0 + x.norm()) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::FixedPointDiverged {
                        max_iter: self.fixed_point_max_iter,
                        residual,
                    });
                }
                x
            }
        };

        let samples: Vec<SpatialVector> = (0..=self.m)
            .map(|j| SpatialVector {
                values: &head * self.profile[j] + &part[j],
                grid_weight: gw,
            })
            .collect();
        DelayState::new(
            SpatialVector { values: head, grid_weight: gw },
            HistorySegment::new(samples, p)?,
        )
    }
}

/// `(I - h A2)^{-1}` for the pure delay part.
pub fn resolvent_a2(state: &DelayState, kernel: &DelayKernel, h: f64) -> Result<DelayState> {
    Resolvent::new(None, kernel, h, state.m(), state.dim(), 1e-12, 200)?.apply(state)
}

/// `(I - h G)^{-1}` for the full operator matrix.
pub fn resolvent_g(
    state: &DelayState,
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    h: f64,
) -> Result<DelayState> {
    Resolvent::new(Some(gen), kernel, h, state.m(), state.dim(), 1e-12, 200)?.apply(state)
}

/// Lie (resolvent-product) splitting: `[(I - hA1)^{-1} (I - hA2)^{-1}]^n`,
/// where the first factor acts as `(I - hB)^{-1}` on the head and as the
/// identity on the history.
pub fn lie_split(
    x0: &DelayState,
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    t: f64,
    n: usize,
    scheme: &SplitScheme,
) -> Result<DelayState> {
    if n == 0 || t == 0.0 {
        return Ok(x0.clone());
    }
    let h = t / n as f64;
    let a2 = Resolvent::new(
        None,
        kernel,
        h,
        x0.m(),
        x0.dim(),
        scheme.fixed_point_tol,
        scheme.fixed_point_max_iter,
    )?;
    let mut state = x0.clone();
    for _ in 0..n {
        state = a2.apply(&state)?;
        state.head = gen.resolvent(h, &state.head)?;
    }
    Ok(state)
}

/// Crandall-Liggett iteration `(I - (t/n) G)^{-n}`: the implicit-Euler
/// evolution of the full problem, and the validation of the exponential
/// formula.
pub fn crandall_liggett_apply(
    x0: &DelayState,
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    t: f64,
    n: usize,
    scheme: &SplitScheme,
) -> Result<DelayState> {
    if n == 0 || t == 0.0 {
        return Ok(x0.clone());
    }
    let h = t / n as f64;
    let res = Resolvent::new(
        Some(gen),
        kernel,
        h,
        x0.m(),
        x0.dim(),
        scheme.fixed_point_tol,
        scheme.fixed_point_max_iter,
    )?;
    let mut state = x0.clone();
    for _ in 0..n {
        state = res.apply(&state)?;
    }
    Ok(state)
}
