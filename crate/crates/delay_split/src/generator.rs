//! The undelayed operator `B` with its semigroup `V(t) = e^{tB}` and resolvent
//! `(I - hB)^{-1}`, in three concrete realizations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::SpatialVector;

#[derive(Debug, Clone)]
enum Realization {
    Dense {
        matrix: DMatrix<f64>,
        /// Cached spectral decomposition when the matrix is symmetric.
        sym_eigen: Option<(DMatrix<f64>, DVector<f64>)>,
    },
    /// Dirichlet finite-difference Laplacian `nu * (x_{i-1} - 2 x_i + x_{i+1}) / dx^2`
    /// on `n` interior points of an interval of length `L`, `dx = L / (n+1)`.
    Laplacian1d {
        n: usize,
        length: f64,
        nu: f64,
        /// Sine eigenbasis, orthonormal in the Euclidean inner product.
        basis: DMatrix<f64>,
        eigs: DVector<f64>,
    },
    Diagonal { eigs: DVector<f64> },
}

/// The operator `B`, together with a declared dissipativity shift `alpha`
/// such that `B - alpha I` is dissipative.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    realization: Realization,
    pub alpha: f64,
}

fn symmetric_part_eigen(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = m.nrows();
    let tol = 1e-12 * (1.0 + m.norm());
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return None;
            }
        }
    }
    let se = m.clone().symmetric_eigen();
    Some((se.eigenvectors, se.eigenvalues))
}

impl LinearGenerator {
    pub fn dense(matrix: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Parameter("dense generator needs a nonempty square matrix".into()));
        }
        let sym_eigen = symmetric_part_eigen(&matrix);
        Ok(Self {
            realization: Realization::Dense { matrix, sym_eigen },
            alpha,
        })
    }

    pub fn laplacian1d(n: usize, length: f64, nu: f64) -> Result<Self> {
        if n == 0 || !(length > 0.0) || !(nu > 0.0) {
            return Err(Error::Parameter(
                "laplacian1d needs n >= 1, length > 0, nu > 0".into(),
            ));
        }
        let dx = length / (n + 1) as f64;
        let scale = (2.0 / (n + 1) as f64).sqrt();
        let mut basis = DMatrix::zeros(n, n);
        let mut eigs = DVector::zeros(n);
        for k in 1..=n {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
            eigs[k - 1] = -4.0 * nu / (dx * dx) * s * s;
            for i in 1..=n {
                basis[(i - 1, k - 1)] =
                    scale * (i as f64 * k as f64 * std::f64::consts::PI / (n + 1) as f64).sin();
            }
        }
        Ok(Self {
            realization: Realization::Laplacian1d { n, length, nu, basis, eigs },
            // Negative semidefinite, so alpha = 0 is valid.
            alpha: 0.0,
        })
    }

    pub fn diagonal(eigs: Vec<f64>) -> Result<Self> {
        if eigs.is_empty() {
            return Err(Error::Parameter("diagonal generator needs at least one eigenvalue".into()));
        }
        // alpha must dominate max(eigs); use exactly max(eigs).
        let alpha = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            realization: Realization::Diagonal { eigs: DVector::from_vec(eigs) },
            alpha,
        })
    }

    /// A zero generator of the given dimension (`B = 0`).
    pub fn zero(dim: usize) -> Self {
        Self::dense(DMatrix::zeros(dim, dim), 0.0).unwrap()
    }

    pub fn dim(&self) -> usize {
        match &self.realization {
            Realization::Dense { matrix, .. } => matrix.nrows(),
            Realization::Laplacian1d { n, .. } => *n,
            Realization::Diagonal { eigs } => eigs.len(),
        }
    }

    /// Grid weight of the natural L^2 spatial norm for this realization
    /// (`dx` for the Laplacian, 1 otherwise).
    pub fn grid_weight(&self) -> f64 {
        match &self.realization {
            Realization::Laplacian1d { n, length, .. } => length / (*n + 1) as f64,
            _ => 1.0,
        }
    }

    fn check_dim(&self, x: &SpatialVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    /// `B x`.
    pub fn apply(&self, x: &SpatialVector) -> Result<SpatialVector> {
        self.check_dim(x)?;
        let values = match &self.realization {
            Realization::Dense { matrix, .. } => matrix * &x.values,
            Realization::Laplacian1d { n, length, nu, .. } => {
                let dx = length / (*n + 1) as f64;
                let c = nu / (dx * dx);
                let v = &x.values;
                DVector::from_fn(*n, |i, _| {
                    let left = if i > 0 { v[i - 1] } else { 0.0 };
                    let right = if i + 1 < *n { v[i + 1] } else { 0.0 };
                    c * (left - 2.0 * v[i] + right)
                })
            }
            Realization::Diagonal { eigs } => x.values.component_mul(eigs),
        };
        Ok(SpatialVector { values, grid_weight: x.grid_weight })
    }

    /// `V(t) x = e^{tB} x` for `t >= 0`.
    pub fn semigroup_apply(&self, t: f64, x: &SpatialVector) -> Result<SpatialVector> {
        if t < 0.0 {
            return Err(Error::Parameter(format!("semigroup time must be >= 0, got {t}")));
        }
        self.check_dim(x)?;
        let values = match &self.realization {
            Realization::Dense { matrix, sym_eigen } => match sym_eigen {
                Some((q, eigs)) => {
                    let coeffs = q.transpose() * &x.values;
                    let scaled = DVector::from_fn(eigs.len(), |i, _| (t * eigs[i]).exp() * coeffs[i]);
                    q * scaled
                }
                None => (matrix * t).exp() * &x.values,
            },
            Realization::Laplacian1d { basis, eigs, .. } => {
                let coeffs = basis.transpose() * &x.values;
                let scaled = DVector::from_fn(eigs.len(), |i, _| (t * eigs[i]).exp() * coeffs[i]);
                basis * scaled
            }
            Realization::Diagonal { eigs } => {
                DVector::from_fn(eigs.len(), |i, _| (t * eigs[i]).exp() * x.values[i])
            }
        };
        Ok(SpatialVector { values, grid_weight: x.grid_weight })
    }

    /// Solves `(I - hB) x = y` for `h > 0`.
    pub fn resolvent(&self, h: f64, y: &SpatialVector) -> Result<SpatialVector> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("resolvent step must be > 0, got {h}")));
        }
        if 1.0 - h * self.alpha <= 0.0 {
            return Err(Error::SingularSystem(format!(
                "resolvent outside the dissipative regime: h * alpha = {} >= 1",
                h * self.alpha
            )));
        }
        self.check_dim(y)?;
        let values = match &self.realization {
            Realization::Dense { matrix, .. } => {
                let a = DMatrix::identity(self.dim(), self.dim()) - matrix * h;
                a.lu()
                    .solve(&y.values)
                    .ok_or_else(|| Error::SingularSystem("I - hB is singular".into()))?
            }
            Realization::Laplacian1d { n, length, nu, .. } => {
                let dx = length / (*n + 1) as f64;
                let c = h * nu / (dx * dx);
                solve_tridiagonal_constant(1.0 + 2.0 * c, -c, &y.values)?
            }
            Realization::Diagonal { eigs } => DVector::from_fn(eigs.len(), |i, _| {
                y.values[i] / (1.0 - h * eigs[i])
            }),
        };
        Ok(SpatialVector { values, grid_weight: y.grid_weight })
    }

    /// Materializes `B` as a dense matrix (used by the coupled resolvent solve).
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        match &self.realization {
            Realization::Dense { matrix, .. } => matrix.clone(),
            Realization::Laplacian1d { n, length, nu, .. } => {
                let dx = length / (*n + 1) as f64;
                let c = nu / (dx * dx);
                DMatrix::from_fn(*n, *n, |i, j| {
                    if i == j {
                        -2.0 * c
                    } else if i.abs_diff(j) == 1 {
                        c
                    } else {
                        0.0
                    }
                })
            }
            Realization::Diagonal { eigs } => DMatrix::from_diagonal(eigs),
        }
    }

    /// Upper bound on the operator norm of `B`, used to pick stable explicit
    /// reference steps (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        match &self.realization {
            Realization::Laplacian1d { n, length, nu, .. } => {
                let dx = length / (*n + 1) as f64;
                4.0 * nu / (dx * dx)
            }
            Realization::Diagonal { eigs } => eigs.amax(),
            Realization::Dense { matrix, .. } => (0..matrix.nrows())
                .map(|i| matrix.row(i).iter().map(|v| v.abs()).sum())
                .fold(0.0, f64::max),
        }
    }

    /// Numerical-range probe `max <Bx, x> / ||x||^2` over random unit vectors,
    /// sharpened by the exact maximizer when the realization is spectral.
    pub fn dissipativity_estimate(&self, trials: usize, seed: u64) -> Result<f64> {
        if trials < 1 {
            return Err(Error::Parameter("dissipativity probe needs trials >= 1".into()));
        }
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::NEG_INFINITY;
        let mut probe = |v: DVector<f64>| {
            let ns = v.norm_squared();
            if ns > 0.0 {
                let x = SpatialVector { values: v, grid_weight: 1.0 };
                if let Ok(bx) = self.apply(&x) {
                    let q = x.values.dot(&bx.values) / ns;
                    if q > best {
                        best = q;
                    }
                }
            }
        };
        for _ in 0..trials {
            probe(DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)));
        }
        // Exact maximizers where the spectrum is known.
        match &self.realization {
            Realization::Diagonal { eigs } => {
                let (k, _) = eigs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| {
                        if e > acc.1 { (i, e) } else { acc }
                    });
                let mut v = DVector::zeros(n);
                v[k] = 1.0;
                probe(v);
            }
            Realization::Laplacian1d { basis, eigs, .. } => {
                let (k, _) = eigs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| {
                        if e > acc.1 { (i, e) } else { acc }
                    });
                probe(basis.column(k).into_owned());
            }
            Realization::Dense { sym_eigen: Some((q, eigs)), .. } => {
                let (k, _) = eigs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| {
                        if e > acc.1 { (i, e) } else { acc }
                    });
                probe(q.column(k).into_owned());
            }
            Realization::Dense { sym_eigen: None, .. } => {}
        }
        Ok(best)
    }

    /// Audits the declared shift: the probed numerical range must stay below
    /// `alpha` up to roundoff.
    pub fn audit_alpha(&self, trials: usize, seed: u64) -> Result<()> {
        let est = self.dissipativity_estimate(trials, seed)?;
        if est > self.alpha + 1e-8 {
            return Err(Error::Parameter(format!(
                "declared alpha = {} violated: probed numerical range {est}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Thomas algorithm for a symmetric constant-coefficient tridiagonal system.
fn solve_tridiagonal_constant(diag: f64, off: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag;
    if denom.abs() < 1e-300 {
        return Err(Error::SingularSystem("tridiagonal pivot vanished".into()));
    }
    c[0] = off / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag - off * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::SingularSystem("tridiagonal pivot vanished".into()));
        }
        c[i] = off / denom;
        d[i] = (rhs[i] - off * d[i - 1]) / denom;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}
