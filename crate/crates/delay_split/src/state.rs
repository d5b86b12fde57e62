//! Elements of the product space `E = H x L^p([-1,0]; H)`: a head vector in
//! the spatial space `H` together with a sampled history segment on a uniform
//! grid over `[-1, 0]`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::generator::LinearGenerator;

/// A vector in the spatial space `H`, with a quadrature weight so that
/// `||x||^2 = grid_weight * sum x_i^2` approximates an L^2 spatial norm.
/// Use `grid_weight = 1` for abstract/scalar `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialVector {
    pub values: DVector<f64>,
    pub grid_weight: f64,
}

impl SpatialVector {
    pub fn new(values: DVector<f64>, grid_weight: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("spatial vector must be nonempty".into()));
        }
        if !(grid_weight > 0.0) || !grid_weight.is_finite() {
            return Err(Error::Parameter(format!(
                "grid_weight must be positive and finite, got {grid_weight}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("spatial vector entries must be finite".into()));
        }
        Ok(Self { values, grid_weight })
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self {
            values: DVector::from_column_slice(values),
            grid_weight: 1.0,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_slice(&[v])
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: DVector::zeros(self.values.len()),
            grid_weight: self.grid_weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Weighted Euclidean norm approximating the spatial `||.||_H`.
    pub fn norm(&self) -> f64 {
        (self.grid_weight * self.values.norm_squared()).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            grid_weight: self.grid_weight,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            values: &self.values + &other.values,
            grid_weight: self.grid_weight,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            values: &self.values - &other.values,
            grid_weight: self.grid_weight,
        }
    }
}

/// The history coordinate `f` sampled at `sigma_j = -1 + j/m`, `j = 0..=m`.
#[derive(Debug, Clone)]
pub struct HistorySegment {
    samples: Vec<SpatialVector>,
    /// Norm exponent of the underlying `L^p` space, `1 <= p < infinity`.
    pub p: f64,
}

impl HistorySegment {
    pub fn new(samples: Vec<SpatialVector>, p: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Parameter("history needs m >= 1, i.e. at least 2 samples".into()));
        }
        if p < 1.0 {
            return Err(Error::Parameter(format!("norm exponent p must be >= 1, got {p}")));
        }
        let dim = samples[0].dim();
        for s in &samples {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
            }
        }
        Ok(Self { samples, p })
    }

    /// Number of grid intervals; the grid has `m + 1` nodes.
    pub fn m(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn delta_sigma(&self) -> f64 {
        1.0 / self.m() as f64
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[SpatialVector] {
        &self.samples
    }

    pub fn sample(&self, j: usize) -> &SpatialVector {
        &self.samples[j]
    }

    pub fn sigma(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.delta_sigma()
    }

    /// Piecewise-linear evaluation of the history at `sigma` in `[-1, 0]`;
    /// exact at grid nodes.
    pub fn interpolate(&self, sigma: f64) -> Result<SpatialVector> {
        if !(-1.0..=0.0).contains(&sigma) {
            return Err(Error::SigmaRange(sigma));
        }
        let m = self.m() as f64;
        let pos = (sigma + 1.0) * m;
        let j = (pos.floor() as usize).min(self.m() - 1);
        let theta = pos - j as f64;
        // Snap to nodes so grid values are reproduced despite sigma roundoff.
        if theta < 1e-9 {
            return Ok(self.samples[j].clone());
        }
        if theta > 1.0 - 1e-9 {
            return Ok(self.samples[j + 1].clone());
        }
        Ok(self.samples[j]
            .scale(1.0 - theta)
            .add(&self.samples[j + 1].scale(theta)))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s.scale(c)).collect(),
            p: self.p,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.m() != self.m() {
            return Err(Error::GridAlignment(format!(
                "history grids differ: m = {} vs {}",
                self.m(),
                other.m()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.sub(b))
            .collect();
        Self::new(samples, self.p)
    }

    /// `L^p` norm with an optional nonnegative weight `w(sigma)`, by trapezoid
    /// quadrature on the grid.
    pub fn lp_norm(&self, weight: Option<&dyn Fn(f64) -> f64>, p: f64) -> f64 {
        let ds = self.delta_sigma();
        let mut acc = 0.0;
        for (j, s) in self.samples.iter().enumerate() {
            let w_trap = if j == 0 || j == self.m() { 0.5 } else { 1.0 };
            let w_sigma = weight.map_or(1.0, |w| w(self.sigma(j)));
            acc += w_trap * w_sigma * s.norm().powf(p);
        }
        (acc * ds).powf(1.0 / p)
    }
}

/// The product-space element `(x, f)`.
#[derive(Debug, Clone)]
pub struct DelayState {
    pub head: SpatialVector,
    pub history: HistorySegment,
}

impl DelayState {
    pub fn new(head: SpatialVector, history: HistorySegment) -> Result<Self> {
        if head.dim() != history.dim() {
            return Err(Error::DimensionMismatch {
                expected: head.dim(),
                got: history.dim(),
            });
        }
        Ok(Self { head, history })
    }

    pub fn dim(&self) -> usize {
        self.head.dim()
    }

    pub fn m(&self) -> usize {
        self.history.m()
    }

    /// Whether the boundary condition `f(0) = x` of the generator domain holds.
    /// States produced by the delay sub-flow and by resolvents satisfy this;
    /// raw user-constructed states need not.
    pub fn is_head_consistent(&self, tol: f64) -> bool {
        self.history
            .sample(self.m())
            .sub(&self.head)
            .norm()
            <= tol
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            head: self.head.scale(c),
            history: self.history.scale(c),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            head: self.head.sub(&other.head),
            history: self.history.sub(&other.history)?,
        })
    }
}

/// Samples an initial condition `(x, f)` onto a uniform grid with `m` intervals.
pub fn make_state(
    head: SpatialVector,
    history_fn: impl Fn(f64) -> SpatialVector,
    m: usize,
    p: f64,
) -> Result<DelayState> {
    if m < 1 {
        return Err(Error::Parameter("m must be >= 1".into()));
    }
    let ds = 1.0 / m as f64;
    let mut samples = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let sigma = if j == m { 0.0 } else { -1.0 + j as f64 * ds };
        let s = history_fn(sigma);
        if s.dim() != head.dim() {
            return Err(Error::DimensionMismatch {
                expected: head.dim(),
                got: s.dim(),
            });
        }
        samples.push(s);
    }
    DelayState::new(head, HistorySegment::new(samples, p)?)
}

/// Advances the history window by overwriting the oldest samples: the `k`
/// values of `new_tail` become the most recent grid values and the head.
/// `new_tail` empty leaves the state unchanged.
pub fn shift_append(state: &DelayState, new_tail: &[SpatialVector]) -> Result<DelayState> {
    let m = state.m();
    let k = new_tail.len();
    if k == 0 {
        return Ok(state.clone());
    }
    if k > m {
        return Err(Error::ShiftTooLong { requested: k, window: m });
    }
    let mut samples = Vec::with_capacity(m + 1);
    samples.extend_from_slice(&state.history.samples()[k..]);
    samples.extend_from_slice(new_tail);
    let head = new_tail[k - 1].clone();
    DelayState::new(head, HistorySegment::new(samples, state.history.p)?)
}

/// Continuous evaluation of the history between grid nodes.
pub fn interpolate_history(history: &HistorySegment, sigma: f64) -> Result<SpatialVector> {
    history.interpolate(sigma)
}

/// Product-space norm `(||x||^p + int ||f(sigma)||^p w(sigma) dsigma)^(1/p)`.
/// With `weight` present this is the equivalent weighted norm used for the
/// dissipativity probes; with `weight` absent it is the plain product norm.
pub fn e_norm(state: &DelayState, weight: Option<&dyn Fn(f64) -> f64>, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Parameter(format!("norm exponent p must be >= 1, got {p}")));
    }
    let head_p = state.head.norm().powf(p);
    let hist = state.history.lp_norm(weight, p);
    Ok((head_p + hist.powf(p)).powf(1.0 / p))
}

/// Graph-norm based smoothness diagnostic
/// `||x||_B + ||Bx||_B + ||f||_{W^{1,p}(D(B))} + ||f||_{Lip(H)}`,
/// with `||y||_B = ||y|| + ||By||`, `f'` by centered finite differences
/// (one-sided at the endpoints), and the Lipschitz seminorm as the maximum
/// difference quotient over adjacent nodes.
pub fn d_norm(state: &DelayState, gen: &LinearGenerator) -> Result<f64> {
    let graph = |y: &SpatialVector| -> Result<f64> {
        Ok(y.norm() + gen.apply(y)?.norm())
    };
    let p = state.history.p;
    let m = state.m();
    let ds = state.history.delta_sigma();

    let head_part = graph(&state.head)? + graph(&gen.apply(&state.head)?)?;

    // f' on the grid.
    let samples = state.history.samples();
    let mut deriv = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let d = if j == 0 {
            samples[1].sub(&samples[0]).scale(1.0 / ds)
        } else if j == m {
            samples[m].sub(&samples[m - 1]).scale(1.0 / ds)
        } else {
            samples[j + 1].sub(&samples[j - 1]).scale(0.5 / ds)
        };
        deriv.push(d);
    }

    let mut f_acc = 0.0;
    let mut df_acc = 0.0;
    for j in 0..=m {
        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
        f_acc += w * graph(&samples[j])?.powf(p);
        df_acc += w * graph(&deriv[j])?.powf(p);
    }
    let w1p = (f_acc * ds).powf(1.0 / p) + (df_acc * ds).powf(1.0 / p);

    let lip = (0..m)
        .map(|j| samples[j + 1].sub(&samples[j]).norm() / ds)
        .fold(0.0, f64::max);

    Ok(head_part + w1p + lip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::LinearGenerator;
    use approx::assert_relative_eq;

    fn scalar_state(head: f64, f: impl Fn(f64) -> f64, m: usize) -> DelayState {
        make_state(
            SpatialVector::scalar(head),
            |s| SpatialVector::scalar(f(s)),
            m,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn make_state_constant_history() {
        let st = scalar_state(1.0, |_| 1.0, 4);
        assert_eq!(st.m(), 4);
        for s in st.history.samples() {
            assert_eq!(s.values[0], 1.0);
        }
        assert!(st.is_head_consistent(0.0));
    }

    #[test]
    fn make_state_linear_sampling() {
        let st = scalar_state(0.0, |s| s, 2);
        let vals: Vec<f64> = st.history.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![-1.0, -0.5, 0.0]);
    }

    #[test]
    fn head_inconsistent_state_is_allowed() {
        let st = scalar_state(2.0, |_| 1.0, 4);
        assert!(!st.is_head_consistent(1e-12));
    }

    #[test]
    fn make_state_dimension_mismatch() {
        let r = make_state(
            SpatialVector::scalar(1.0),
            |_| SpatialVector::from_slice(&[1.0, 2.0]),
            4,
            2.0,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn shift_append_single() {
        let st = DelayState::new(
            SpatialVector::scalar(3.0),
            HistorySegment::new(
                vec![
                    SpatialVector::scalar(1.0),
                    SpatialVector::scalar(2.0),
                    SpatialVector::scalar(3.0),
                ],
                2.0,
            )
            .unwrap(),
        )
        .unwrap();
        let out = shift_append(&st, &[SpatialVector::scalar(4.0)]).unwrap();
        let vals: Vec<f64> = out.history.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![2.0, 3.0, 4.0]);
        assert_eq!(out.head.values[0], 4.0);
        assert!(out.is_head_consistent(0.0));
    }

    #[test]
    fn shift_append_empty_is_identity() {
        let st = scalar_state(1.0, |s| s, 4);
        let out = shift_append(&st, &[]).unwrap();
        assert_eq!(out.head.values[0], st.head.values[0]);
    }

    #[test]
    fn shift_append_double() {
        let st = DelayState::new(
            SpatialVector::scalar(3.0),
            HistorySegment::new(
                vec![
                    SpatialVector::scalar(1.0),
                    SpatialVector::scalar(2.0),
                    SpatialVector::scalar(3.0),
                ],
                2.0,
            )
            .unwrap(),
        )
        .unwrap();
        let out = shift_append(
            &st,
            &[SpatialVector::scalar(4.0), SpatialVector::scalar(5.0)],
        )
        .unwrap();
        let vals: Vec<f64> = out.history.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![3.0, 4.0, 5.0]);
        assert_eq!(out.head.values[0], 5.0);
    }

    #[test]
    fn shift_past_window_errors() {
        let st = scalar_state(0.0, |_| 0.0, 2);
        let tail: Vec<_> = (0..3).map(|i| SpatialVector::scalar(i as f64)).collect();
        assert!(matches!(
            shift_append(&st, &tail),
            Err(Error::ShiftTooLong { .. })
        ));
    }

    #[test]
    fn shift_composition_matches_concatenated_tail() {
        let st = scalar_state(0.0, |s| s, 8);
        let a: Vec<_> = (0..3).map(|i| SpatialVector::scalar(i as f64)).collect();
        let b: Vec<_> = (3..5).map(|i| SpatialVector::scalar(i as f64)).collect();
        let two = shift_append(&shift_append(&st, &a).unwrap(), &b).unwrap();
        let cat: Vec<_> = a.iter().chain(b.iter()).cloned().collect();
        let one = shift_append(&st, &cat).unwrap();
        for (x, y) in two.history.samples().iter().zip(one.history.samples()) {
            assert_eq!(x.values[0], y.values[0]);
        }
    }

    #[test]
    fn interpolate_midpoint() {
        let h = HistorySegment::new(
            vec![SpatialVector::scalar(0.0), SpatialVector::scalar(1.0)],
            2.0,
        )
        .unwrap();
        assert_relative_eq!(h.interpolate(-0.5).unwrap().values[0], 0.5);
    }

    #[test]
    fn interpolate_exact_at_nodes() {
        let st = scalar_state(0.0, |s| s * s, 7);
        for j in 0..=7 {
            let sigma = st.history.sigma(j);
            let v = st.history.interpolate(sigma).unwrap();
            assert_eq!(v.values[0], st.history.sample(j).values[0]);
        }
    }

    #[test]
    fn interpolate_quadratic_within_bound() {
        // Interpolation error bound (delta_sigma)^2 * max|f''| / 8 = 1e-4 / 8 * 2.
        let st = scalar_state(0.0, |s| s * s, 100);
        let v = st.history.interpolate(-0.345).unwrap();
        assert!((v.values[0] - 0.119025).abs() < 1e-4);
    }

    #[test]
    fn interpolate_out_of_range() {
        let st = scalar_state(0.0, |s| s, 4);
        assert!(st.history.interpolate(0.1).is_err());
        assert!(st.history.interpolate(-1.1).is_err());
    }

    #[test]
    fn e_norm_history_vanishes() {
        let st = scalar_state(1.0, |_| 0.0, 16);
        assert_relative_eq!(e_norm(&st, None, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn e_norm_unit_constant_history() {
        let st = scalar_state(0.0, |_| 1.0, 16);
        assert_relative_eq!(e_norm(&st, None, 2.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn e_norm_weighted_closed_form() {
        // int_{-1}^0 (sigma + 1) dsigma = 1/2, so the norm is sqrt(1.5).
        let st = scalar_state(1.0, |_| 1.0, 400);
        let w = |s: f64| s + 1.0;
        let v = e_norm(&st, Some(&w), 2.0).unwrap();
        assert_relative_eq!(v, 1.5f64.sqrt(), epsilon = 1e-5);
    }

    #[test]
    fn e_norm_rejects_p_below_one() {
        let st = scalar_state(1.0, |_| 1.0, 4);
        assert!(e_norm(&st, None, 0.5).is_err());
    }

    #[test]
    fn e_norm_absolutely_homogeneous() {
        let st = scalar_state(0.7, |s| s.cos(), 13);
        let a = e_norm(&st.scale(-3.5), None, 2.0).unwrap();
        let b = 3.5 * e_norm(&st, None, 2.0).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-13);
    }

    #[test]
    fn d_norm_zero_element() {
        let gen = LinearGenerator::diagonal(vec![-1.0]).unwrap();
        let st = scalar_state(0.0, |_| 0.0, 8);
        assert_eq!(d_norm(&st, &gen).unwrap(), 0.0);
    }

    #[test]
    fn d_norm_constant_data_with_zero_generator() {
        let gen = LinearGenerator::dense(nalgebra::DMatrix::zeros(1, 1), 0.0).unwrap();
        let st = scalar_state(1.0, |_| 1.0, 8);
        assert_relative_eq!(d_norm(&st, &gen).unwrap(), 2.0, epsilon = 1e-12);
    }
}
