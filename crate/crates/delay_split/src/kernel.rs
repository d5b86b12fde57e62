//! The delay functional `Phi f = g(int_{-1}^0 d eta(sigma) f(sigma))`:
//! point-mass atoms plus an absolutely continuous density, composed with a
//! Lipschitz nonlinearity applied after the integral.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::{HistorySegment, SpatialVector};

/// A coefficient of the kernel measure: either a scalar multiple of the
/// identity or a full matrix.
#[derive(Debug, Clone)]
pub enum KernelOp {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl KernelOp {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            KernelOp::Scalar(c) => v * *c,
            KernelOp::Matrix(m) => m * v,
        }
    }

    pub fn as_matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            KernelOp::Scalar(c) => DMatrix::identity(n, n) * *c,
            KernelOp::Matrix(m) => m.clone(),
        }
    }

    pub fn dim_ok(&self, n: usize) -> bool {
        match self {
            KernelOp::Scalar(_) => true,
            KernelOp::Matrix(m) => m.nrows() == n && m.ncols() == n,
        }
    }

    /// Spectral norm; power iteration on `M^T M` for matrix coefficients.
    pub fn op_norm(&self) -> f64 {
        match self {
            KernelOp::Scalar(c) => c.abs(),
            KernelOp::Matrix(m) => spectral_norm(m),
        }
    }
}

/// Power iteration with tolerance 1e-10, capped at 500 iterations.
fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    // Perturb to avoid starting orthogonal to the top singular vector.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for x in v.iter_mut() {
        *x += 1e-3 * rng.gen_range(-1.0..1.0);
    }
    let mut prev = 0.0;
    for _ in 0..500 {
        let w = m.transpose() * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let sigma = (m * &v).norm();
        if (sigma - prev).abs() <= 1e-10 * sigma.max(1.0) {
            return sigma;
        }
        prev = sigma;
    }
    prev
}

/// Absolutely continuous part of the kernel measure.
#[derive(Debug, Clone)]
pub enum Density {
    Zero,
    /// `density(sigma) = op` on all of `[-1, 0]`.
    Constant(KernelOp),
    /// `density(sigma) = sigma * op` on `[a, b]`, zero outside.
    LinearRamp { a: f64, b: f64, op: KernelOp },
}

impl Density {
    fn op(&self) -> Option<&KernelOp> {
        match self {
            Density::Zero => None,
            Density::Constant(op) => Some(op),
            Density::LinearRamp { op, .. } => Some(op),
        }
    }

    /// Scalar factor multiplying the coefficient operator at `sigma`.
    fn factor(&self, sigma: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Constant(_) => 1.0,
            Density::LinearRamp { a, b, .. } => {
                if sigma >= *a && sigma <= *b {
                    sigma
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Density::Zero => None,
            Density::Constant(_) => Some((-1.0, 0.0)),
            Density::LinearRamp { a, b, .. } => Some((*a, *b)),
        }
    }

    /// `int_{-1}^r |factor(sigma)| dsigma`, in closed form.
    fn abs_factor_integral(&self, r: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Constant(_) => (r + 1.0).clamp(0.0, 1.0),
            Density::LinearRamp { a, b, .. } => {
                let lo = a.max(-1.0);
                let hi = b.min(r);
                if hi <= lo {
                    0.0
                } else {
                    // sigma <= 0 on the window, so |sigma| = -sigma.
                    0.5 * (lo * lo - hi * hi)
                }
            }
        }
    }
}

/// Pointwise nonlinearity `g`, applied after the integral.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Identity,
    Sin,
    Tanh,
    Scaled(f64),
}

impl Nonlinearity {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonlinearity::Identity => v.clone(),
            Nonlinearity::Sin => v.map(f64::sin),
            Nonlinearity::Tanh => v.map(f64::tanh),
            Nonlinearity::Scaled(k) => v * *k,
        }
    }

    /// Declared Lipschitz constant.
    pub fn beta(&self) -> f64 {
        match self {
            Nonlinearity::Identity | Nonlinearity::Sin | Nonlinearity::Tanh => 1.0,
            Nonlinearity::Scaled(k) => k.abs(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Identity | Nonlinearity::Scaled(_))
    }
}

/// The delay functional, sampled on a history grid with `m` intervals. The
/// density part is cached at the grid nodes at construction; `resample` builds
/// the same kernel on a different grid.
#[derive(Debug, Clone)]
pub struct DelayKernel {
    point_terms: Vec<(f64, KernelOp)>,
    density: Density,
    pub g: Nonlinearity,
    /// Cutoff below which all atoms sit; the kernel is Lipschitz on `[sigma0, 0]`.
    pub sigma0: f64,
    m: usize,
    /// Node factors of the density, with support boundaries inside (-1, 0)
    /// weighted by 1/2 so the trapezoid rule keeps second order across the cut.
    node_factors: Vec<f64>,
}

impl DelayKernel {
    pub fn new(
        point_terms: Vec<(f64, KernelOp)>,
        density: Density,
        g: Nonlinearity,
        sigma0: f64,
        m: usize,
    ) -> Result<Self> {
        if m < 1 {
            return Err(Error::Parameter("kernel grid needs m >= 1".into()));
        }
        if !(-1.0..0.0).contains(&sigma0) {
            return Err(Error::Parameter(format!("sigma0 must lie in [-1, 0), got {sigma0}")));
        }
        if point_terms.is_empty() && matches!(density, Density::Zero) {
            return Err(Error::Parameter(
                "kernel must carry mass: point_terms or density required".into(),
            ));
        }
        for (s, _) in &point_terms {
            if !(-1.0..=0.0).contains(s) {
                return Err(Error::SigmaRange(*s));
            }
            if *s > sigma0 + 1e-12 {
                return Err(Error::Parameter(format!(
                    "atom at sigma = {s} violates the cutoff sigma0 = {sigma0}"
                )));
            }
        }
        let ds = 1.0 / m as f64;
        let mut node_factors = Vec::with_capacity(m + 1);
        let support = density.support();
        for j in 0..=m {
            let sigma = -1.0 + j as f64 * ds;
            let mut f = density.factor(sigma);
            if let Some((a, b)) = support {
                for edge in [a, b] {
                    if edge > -1.0 + 1e-12 && edge < -1e-12 && (sigma - edge).abs() < 1e-12 {
                        f *= 0.5;
                    }
                }
            }
            node_factors.push(f);
        }
        Ok(Self { point_terms, density, g, sigma0, m, node_factors })
    }

    /// A kernel whose functional is identically zero (unit atom killed by a
    /// zero-scaling nonlinearity).
    pub fn zero() -> Self {
        Self::new(
            vec![(-1.0, KernelOp::Scalar(1.0))],
            Density::Zero,
            Nonlinearity::Scaled(0.0),
            -0.5,
            1,
        )
        .unwrap()
    }

    pub fn resample(&self, m: usize) -> Result<Self> {
        Self::new(
            self.point_terms.clone(),
            self.density.clone(),
            self.g,
            self.sigma0,
            m,
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.g.beta()
    }

    pub fn is_linear(&self) -> bool {
        self.g.is_linear()
    }

    pub fn point_terms(&self) -> &[(f64, KernelOp)] {
        &self.point_terms
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        for (_, op) in &self.point_terms {
            if !op.dim_ok(n) {
                return Err(Error::DimensionMismatch { expected: n, got: 0 });
            }
        }
        if let Some(op) = self.density.op() {
            if !op.dim_ok(n) {
                return Err(Error::DimensionMismatch { expected: n, got: 0 });
            }
        }
        Ok(())
    }

    /// The Stieltjes integral applied to arbitrary history values supplied by
    /// a closure over `sigma` in `[-1, 0]`, before the nonlinearity.
    pub fn integral_with(&self, n: usize, f: &dyn Fn(f64) -> DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(n)?;
        let mut acc: DVector<f64> = DVector::zeros(n);
        for (sigma, op) in &self.point_terms {
            acc += op.apply(&f(*sigma));
        }
        if self.density.op().is_some() {
            let ds = 1.0 / self.m as f64;
            let op = self.density.op().unwrap();
            for j in 0..=self.m {
                let fac = self.node_factors[j];
                if fac == 0.0 {
                    continue;
                }
                let trap = if j == 0 || j == self.m { 0.5 } else { 1.0 };
                let sigma = -1.0 + j as f64 * ds;
                acc += op.apply(&f(sigma)) * (fac * trap * ds);
            }
        }
        Ok(acc)
    }

    /// `Phi f` for a closure-valued history.
    pub fn evaluate_with(&self, n: usize, f: &dyn Fn(f64) -> DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.g.apply(&self.integral_with(n, f)?))
    }

    /// `Phi f` for a sampled history segment (piecewise-linear between nodes;
    /// atoms at grid nodes use the node value exactly).
    pub fn evaluate_phi(&self, history: &HistorySegment) -> Result<SpatialVector> {
        if history.m() != self.m {
            return Err(Error::GridAlignment(format!(
                "kernel sampled at m = {} but history has m = {}",
                self.m,
                history.m()
            )));
        }
        let n = history.dim();
        let values = self.evaluate_with(n, &|sigma| {
            history.interpolate(sigma).expect("sigma within window").values
        })?;
        Ok(SpatialVector { values, grid_weight: history.sample(0).grid_weight })
    }

    /// Total variation `tau(r)` of the kernel measure on `[-1, r]`, with the
    /// operator-norm of each coefficient. Atoms at `sigma <= r` are included;
    /// the density contribution is integrated in closed form.
    pub fn tau(&self, r: f64) -> Result<f64> {
        if !(-1.0..=0.0).contains(&r) {
            return Err(Error::SigmaRange(r));
        }
        let atoms: f64 = self
            .point_terms
            .iter()
            .filter(|(s, _)| *s <= r + 1e-15)
            .map(|(_, op)| op.op_norm())
            .sum();
        let dens = self
            .density
            .op()
            .map_or(0.0, |op| op.op_norm() * self.density.abs_factor_integral(r));
        Ok(atoms + dens)
    }

    /// Dissipativity type `gamma = max{0, tau(0) (1/p + beta^p/q) + alpha}` for
    /// `p > 1`; for `p = 1` the bound `max{0, tau(0) + alpha}` holds only when
    /// `beta <= 1`.
    pub fn gamma_bound(&self, alpha: f64, p: f64) -> Result<f64> {
        let tau0 = self.tau(0.0)?;
        let beta = self.beta();
        if p > 1.0 {
            let q = p / (p - 1.0);
            Ok((tau0 * (1.0 / p + beta.powf(p) / q) + alpha).max(0.0))
        } else if (p - 1.0).abs() < 1e-14 {
            if beta > 1.0 {
                return Err(Error::Parameter(format!(
                    "no dissipativity bound for p = 1 with beta = {beta} > 1"
                )));
            }
            Ok((tau0 + alpha).max(0.0))
        } else {
            Err(Error::Parameter(format!("norm exponent p must be >= 1, got {p}")))
        }
    }

    /// The effective matrix `K_h` obtained by pushing the exponential profile
    /// `e^{sigma/h}` through the kernel integral on the sampled grid. Atoms off
    /// the grid interpolate the sampled profile linearly, matching the
    /// discretization used by the resolvents.
    pub fn exp_weighted_matrix(&self, h: f64, n: usize) -> Result<DMatrix<f64>> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("exponential weight needs h > 0, got {h}")));
        }
        self.check_dim(n)?;
        let ds = 1.0 / self.m as f64;
        let profile: Vec<f64> = (0..=self.m)
            .map(|j| ((-1.0 + j as f64 * ds) / h).exp())
            .collect();
        let mut k = DMatrix::zeros(n, n);
        for (sigma, op) in &self.point_terms {
            let pos = (sigma + 1.0) * self.m as f64;
            let j = (pos.floor() as usize).min(self.m - 1);
            let theta = pos - j as f64;
            let w = if theta == 0.0 {
                profile[j]
            } else {
                (1.0 - theta) * profile[j] + theta * profile[j + 1]
            };
            k += op.as_matrix(n) * w;
        }
        if let Some(op) = self.density.op() {
            let dm = op.as_matrix(n);
            for j in 0..=self.m {
                let fac = self.node_factors[j];
                if fac == 0.0 {
                    continue;
                }
                let trap = if j == 0 || j == self.m { 0.5 } else { 1.0 };
                k += &dm * (fac * trap * ds * profile[j]);
            }
        }
        Ok(k)
    }

    /// Max Lipschitz quotient of `g` over random probe pairs; should not
    /// exceed the declared `beta`.
    pub fn probe_lipschitz(&self, n: usize, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let a = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let d = (&a - &b).norm();
            if d > 1e-12 {
                let q = (self.g.apply(&a) - self.g.apply(&b)).norm() / d;
                worst = worst.max(q);
            }
        }
        worst
    }
}
