//! Named problem setups: a declarative description of generator, delay
//! kernel, and initial data that can be instantiated at any history
//! resolution, plus the built-in registry used by the CLI and the
//! acceptance studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::LinearGenerator;
use crate::kernel::{DelayKernel, Density, KernelOp, Nonlinearity};
use crate::state::{make_state, DelayState, SpatialVector};

/// Declarative generator description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// Dirichlet Laplacian `nu * u_xx` on `(0, length)` with `n` interior nodes.
    Laplacian1d { n: usize, length: f64, nu: f64 },
    Diagonal { eigs: Vec<f64> },
    Zero { dim: usize },
}

impl GeneratorSpec {
    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::Laplacian1d { n, .. } => *n,
            GeneratorSpec::Diagonal { eigs } => eigs.len(),
            GeneratorSpec::Zero { dim } => *dim,
        }
    }

    pub fn build(&self) -> Result<LinearGenerator> {
        match self {
            GeneratorSpec::Laplacian1d { n, length, nu } => {
                LinearGenerator::laplacian1d(*n, *length, *nu)
            }
            GeneratorSpec::Diagonal { eigs } => LinearGenerator::diagonal(eigs.clone()),
            GeneratorSpec::Zero { dim } => Ok(LinearGenerator::zero(*dim)),
        }
    }
}

/// Declarative density description with scalar coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DensitySpec {
    Zero,
    /// `weight * I` on all of `[-1, 0]`.
    Constant { weight: f64 },
    /// `sigma * weight * I` on `[a, b]`.
    LinearRamp { a: f64, b: f64, weight: f64 },
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Zero
    }
}

impl DensitySpec {
    fn build(&self) -> Density {
        match self {
            DensitySpec::Zero => Density::Zero,
            DensitySpec::Constant { weight } => Density::Constant(KernelOp::Scalar(*weight)),
            DensitySpec::LinearRamp { a, b, weight } => Density::LinearRamp {
                a: *a,
                b: *b,
                op: KernelOp::Scalar(*weight),
            },
        }
    }
}

/// A point mass `weight * I * delta_sigma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpec {
    pub sigma: f64,
    pub weight: f64,
}

fn default_sigma0() -> f64 {
    -0.5
}

fn default_g() -> Nonlinearity {
    Nonlinearity::Identity
}

/// Declarative delay-kernel description. An empty spec (no atoms, zero
/// density) builds the identically-zero functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default = "default_g")]
    pub g: Nonlinearity,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
}

impl KernelSpec {
    pub fn build(&self, m: usize) -> Result<DelayKernel> {
        if self.atoms.is_empty() && matches!(self.density, DensitySpec::Zero) {
            return DelayKernel::zero().resample(m);
        }
        DelayKernel::new(
            self.atoms
                .iter()
                .map(|a| (a.sigma, KernelOp::Scalar(a.weight)))
                .collect(),
            self.density.build(),
            self.g,
            self.sigma0,
            m,
        )
    }
}

/// Named initial head profile, evaluated on the generator's spatial grid
/// (uniform over `(0, 1)` for abstract generators).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HeadProfile {
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    SineMode { k: usize },
    Constant { value: f64 },
}

impl HeadProfile {
    pub fn build(&self, gen: &LinearGenerator) -> Result<SpatialVector> {
        let n = gen.dim();
        let dx = 1.0 / (n + 1) as f64;
        let values = nalgebra::DVector::from_fn(n, |i, _| {
            let x = (i + 1) as f64 * dx;
            match self {
                HeadProfile::GaussianBump { center, width, amplitude } => {
                    amplitude * (-((x - center) / width).powi(2)).exp()
                }
                HeadProfile::SineMode { k } => (*k as f64 * std::f64::consts::PI * x).sin(),
                HeadProfile::Constant { value } => *value,
            }
        });
        SpatialVector::new(values, gen.grid_weight())
    }
}

/// Named initial history profile over `sigma`, relative to the head.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HistoryProfile {
    /// `f(sigma) = x`.
    FrozenHead,
    /// `f(sigma) = value` in every component.
    Constant { value: f64 },
    /// `f(sigma) = (1 + slope * sigma) * x`; slope 1 is the plain linear ramp.
    Linear { slope: f64 },
}

impl HistoryProfile {
    pub fn sample(&self, head: &SpatialVector, sigma: f64) -> SpatialVector {
        match self {
            HistoryProfile::FrozenHead => head.clone(),
            HistoryProfile::Constant { value } => SpatialVector {
                values: nalgebra::DVector::from_element(head.dim(), *value),
                grid_weight: head.grid_weight,
            },
            HistoryProfile::Linear { slope } => head.scale(1.0 + slope * sigma),
        }
    }
}

/// A fully declarative problem setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub generator: GeneratorSpec,
    pub kernel: KernelSpec,
    pub head: HeadProfile,
    pub history: HistoryProfile,
    /// Base history resolution (also the reference resolution of studies).
    pub m: usize,
    pub p: f64,
    pub t_final: f64,
}

/// A scenario instantiated at a concrete history resolution.
pub struct ScenarioInstance {
    pub state: DelayState,
    pub gen: LinearGenerator,
    pub kernel: DelayKernel,
    /// Quasi-dissipativity bound of the full operator matrix.
    pub gamma: f64,
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<ScenarioInstance> {
        self.build_at(self.m)
    }

    /// Instantiate with `m` history intervals. All built-in profiles are
    /// piecewise linear in `sigma`, so resampling is exact: every resolution
    /// sees the same underlying initial data.
    pub fn build_at(&self, m: usize) -> Result<ScenarioInstance> {
        let gen = self.generator.build()?;
        gen.audit_alpha(32, 42)?;
        let kernel = self.kernel.build(m)?;
        let gamma = kernel.gamma_bound(gen.alpha, self.p)?;
        let head = self.head.build(&gen)?;
        let state = make_state(
            head.clone(),
            |sigma| self.history.sample(&head, sigma),
            m,
            self.p,
        )?;
        Ok(ScenarioInstance { state, gen, kernel, gamma })
    }
}

/// Slope `c` such that the history `f(sigma) = (1 + c sigma) x` joins the
/// trajectory with a continuous first derivative at `sigma = 0`:
/// `c x = B x + Phi f`. Solved by projection onto `x`; exact when `x` is an
/// eigenvector of `B` and the kernel has scalar coefficients with a linear
/// `g`. Such data lies in the smooth compatible class of the local-error
/// estimate, with no artificial derivative kink at the junction.
pub fn d_class_history_slope(
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    head: &SpatialVector,
) -> Result<f64> {
    let n = head.dim();
    let norm2 = head.values.norm_squared();
    let bx = gen.apply(head)?;
    let lambda = head.values.dot(&bx.values) / norm2;
    // Projection of Phi applied to f_c = (1 + c sigma) x onto x.
    let proj_phi = |c: f64| -> Result<f64> {
        let phi = kernel.evaluate_with(n, &|sigma| &head.values * (1.0 + c * sigma))?;
        Ok(head.values.dot(&phi) / norm2)
    };
    if kernel.is_linear() {
        // proj_phi is affine in c: two evaluations determine it, then
        // c = lambda + proj_phi(c) has a closed-form solution.
        let a = proj_phi(0.0)?;
        let s = proj_phi(1.0)? - a;
        let den = 1.0 - s;
        if den.abs() < 1e-12 {
            return Err(Error::Parameter(
                "compatible-slope system is singular for this kernel".into(),
            ));
        }
        Ok((lambda + a) / den)
    } else {
        // Secant iteration on r(c) = lambda + proj_phi(c) - c.
        let mut c0 = lambda;
        let mut r0 = lambda + proj_phi(c0)? - c0;
        if r0.abs() < 1e-13 {
            return Ok(c0);
        }
        let mut c1 = c0 + r0;
        for _ in 0..100 {
            let r1 = lambda + proj_phi(c1)? - c1;
            if r1.abs() < 1e-13 * (1.0 + c1.abs()) {
                return Ok(c1);
            }
            let dr = r1 - r0;
            if dr.abs() < 1e-300 {
                break;
            }
            let next = c1 - r1 * (c1 - c0) / dr;
            c0 = c1;
            r0 = r1;
            c1 = next;
        }
        Err(Error::FixedPointDiverged { max_iter: 100, residual: r0.abs() })
    }
}

/// The built-in scenario registry.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec {
            id: "heat-point-delay".into(),
            description: "1-d heat equation with a point delay: u' = nu u_xx + 0.5 u(t-1)".into(),
            generator: GeneratorSpec::Laplacian1d { n: 50, length: 1.0, nu: 1.0 },
            kernel: KernelSpec {
                atoms: vec![AtomSpec { sigma: -1.0, weight: 0.5 }],
                density: DensitySpec::Zero,
                g: Nonlinearity::Identity,
                sigma0: -0.5,
            },
            head: HeadProfile::SineMode { k: 1 },
            history: HistoryProfile::FrozenHead,
            m: 160,
            p: 2.0,
            t_final: 2.0,
        },
        ScenarioSpec {
            id: "intro-nonlinear".into(),
            description:
                "u' = u_xx + sin(u(t-1) + int_{-1/2}^0 sigma u(t+sigma) dsigma): point plus \
                 distributed delay under a bounded nonlinearity"
                    .into(),
            generator: GeneratorSpec::Laplacian1d { n: 50, length: 1.0, nu: 1.0 },
            kernel: KernelSpec {
                atoms: vec![AtomSpec { sigma: -1.0, weight: 1.0 }],
                density: DensitySpec::LinearRamp { a: -0.5, b: 0.0, weight: 1.0 },
                g: Nonlinearity::Sin,
                sigma0: -0.5,
            },
            head: HeadProfile::GaussianBump { center: 0.5, width: 0.15, amplitude: 1.0 },
            history: HistoryProfile::FrozenHead,
            m: 160,
            p: 2.0,
            t_final: 1.0,
        },
        ScenarioSpec {
            id: "scalar-dde".into(),
            description: "scalar u' = -0.5 u(t) + 0.5 u(t-1), cross-checked by a closed-form \
                          method-of-steps solution"
                .into(),
            generator: GeneratorSpec::Diagonal { eigs: vec![-0.5] },
            kernel: KernelSpec {
                atoms: vec![AtomSpec { sigma: -1.0, weight: 0.5 }],
                density: DensitySpec::Zero,
                g: Nonlinearity::Identity,
                sigma0: -0.5,
            },
            head: HeadProfile::Constant { value: 1.0 },
            history: HistoryProfile::FrozenHead,
            m: 160,
            p: 2.0,
            t_final: 2.0,
        },
        ScenarioSpec {
            id: "no-delay".into(),
            description: "heat equation with a vanishing delay functional: splitting is exact"
                .into(),
            generator: GeneratorSpec::Laplacian1d { n: 50, length: 1.0, nu: 1.0 },
            kernel: KernelSpec {
                atoms: vec![],
                density: DensitySpec::Zero,
                g: Nonlinearity::Identity,
                sigma0: -0.5,
            },
            head: HeadProfile::SineMode { k: 1 },
            history: HistoryProfile::FrozenHead,
            m: 160,
            p: 2.0,
            t_final: 1.0,
        },
        ScenarioSpec {
            id: "pure-delay".into(),
            description: "transport-only dynamics u' = 0.5 u(t-1): the delay sub-flow is the \
                          whole solution"
                .into(),
            generator: GeneratorSpec::Zero { dim: 1 },
            kernel: KernelSpec {
                atoms: vec![AtomSpec { sigma: -1.0, weight: 0.5 }],
                density: DensitySpec::Zero,
                g: Nonlinearity::Identity,
                sigma0: -0.5,
            },
            head: HeadProfile::Constant { value: 1.0 },
            history: HistoryProfile::FrozenHead,
            m: 160,
            p: 2.0,
            t_final: 1.0,
        },
    ]
}

pub fn find_scenario(id: &str) -> Result<ScenarioSpec> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Config(format!("unknown scenario '{id}'")))
}
