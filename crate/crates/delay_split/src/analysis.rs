//! Error measurement, empirical convergence-order estimation, and the local
//! error / contraction probes that turn the splitting theory into testable
//! numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::LinearGenerator;
use crate::kernel::DelayKernel;
use crate::reference::{effective_refine, reference_solve, ReferenceConfig};
use crate::scenario::{d_class_history_slope, ScenarioSpec};
use crate::splitting::{step_t1, step_t2, Resolvent, SchemeKind, SplitScheme};
use crate::state::{d_norm, e_norm, make_state, DelayState, HistorySegment, SpatialVector};

/// Head / history / combined error of an approximation against a reference
/// state on the same grid, in the unweighted product norm.
pub fn global_error(approx: &DelayState, exact: &DelayState, p: f64) -> Result<(f64, f64, f64)> {
    let diff = approx.sub(exact)?;
    let err_head = diff.head.norm();
    let err_history = diff.history.lp_norm(None, p);
    let err_e = e_norm(&diff, None, p)?;
    Ok((err_head, err_history, err_e))
}

/// Result of a log-log least-squares fit `err = constant * h^order`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    pub constant: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log err` against `log h` over at least 4 rows with
/// strictly positive errors.
pub fn order_fit(rows: &[(f64, f64)]) -> Result<OrderFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Parameter(format!(
            "order fit needs >= 4 positive-error rows, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::Parameter("order fit abscissae are degenerate".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(OrderFit { order: slope, constant: intercept.exp(), r_squared })
}

/// One `h` entry of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub h: f64,
    pub n_steps: usize,
    pub err_head: f64,
    pub err_history: f64,
    pub err_e: f64,
    /// The error is within 10x of the reference self-error estimate, so the
    /// row says more about the reference than about the scheme; excluded from
    /// the order fit.
    pub reference_limited: bool,
}

/// Fitted constants of the exponential stability bound
/// `||state_k|| <= M_hat * exp(omega_hat * k h) * ||state_0||`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stability {
    pub m_hat: f64,
    pub omega_hat: f64,
}

/// Full record of one scheme's convergence behavior on one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario_id: String,
    pub scheme: SchemeKind,
    pub t_final: f64,
    pub rows: Vec<ReportRow>,
    /// Absent when the study is exact (all errors at rounding level) or has
    /// too few usable rows; `notes` says which.
    pub fit: Option<OrderFit>,
    pub stability: Stability,
    pub d_norm_initial: f64,
    pub reference_self_error: f64,
    pub notes: String,
    pub seed: u64,
}

/// Reference solution subsampled onto a coarser grid whose node set is a
/// subset of the fine one.
pub fn subsample_state(state: &DelayState, m_target: usize) -> Result<DelayState> {
    let m = state.m();
    if m_target == 0 || m % m_target != 0 {
        return Err(Error::GridAlignment(format!(
            "cannot subsample m = {m} onto m = {m_target}"
        )));
    }
    let stride = m / m_target;
    let samples: Vec<SpatialVector> = (0..=m_target)
        .map(|j| state.history.sample(j * stride).clone())
        .collect();
    DelayState::new(
        state.head.clone(),
        HistorySegment::new(samples, state.history.p)?,
    )
}

fn grid_resolution(h: f64) -> Result<usize> {
    let m = (1.0 / h).round() as usize;
    if m == 0 || (h * m as f64 - 1.0).abs() > 1e-9 {
        return Err(Error::GridAlignment(format!(
            "step h = {h} does not divide the delay interval: 1/h must be an integer"
        )));
    }
    Ok(m)
}

/// Runs each scheme over `h_list`, measures against a shared high-accuracy
/// reference computed at the scenario's base resolution, and fits the
/// empirical convergence order and stability constants.
pub fn convergence_study(
    spec: &ScenarioSpec,
    scheme_kinds: &[SchemeKind],
    h_list: &[f64],
    t_final: f64,
    ref_config: &ReferenceConfig,
    seed: u64,
) -> Result<Vec<ConvergenceReport>> {
    if h_list.is_empty() {
        return Err(Error::Parameter("empty h list".into()));
    }
    let mut h_sorted: Vec<f64> = h_list.to_vec();
    h_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let base = spec.build_at(spec.m)?;
    for &h in &h_sorted {
        let m_h = grid_resolution(h)?;
        if spec.m % m_h != 0 {
            return Err(Error::GridAlignment(format!(
                "scenario resolution m = {} is not a multiple of 1/h = {m_h}",
                spec.m
            )));
        }
    }

    // Shared reference at the base resolution, plus a self-error estimate
    // from a genuine substep doubling.
    let eff = effective_refine(ref_config, spec.m, &base.gen);
    let cfg_used = ReferenceConfig { refine: eff, tol: ref_config.tol };
    let cfg_fine = ReferenceConfig { refine: 2 * eff, tol: ref_config.tol };
    let reference = reference_solve(&base.state, &base.gen, &base.kernel, t_final, &cfg_used)?;
    let reference_fine = reference_solve(&base.state, &base.gen, &base.kernel, t_final, &cfg_fine)?;
    let self_error = e_norm(&reference.sub(&reference_fine)?, None, spec.p)?;
    let d_norm_initial = d_norm(&base.state, &base.gen)?;

    let mut reports = Vec::with_capacity(scheme_kinds.len());
    for &kind in scheme_kinds {
        let mut rows = Vec::with_capacity(h_sorted.len());
        for &h in &h_sorted {
            let m_h = grid_resolution(h)?;
            let inst = spec.build_at(m_h)?;
            let scheme = SplitScheme::new(kind, h)?;
            let approx = scheme.run(&inst.state, &inst.gen, &inst.kernel, t_final)?;
            let exact = subsample_state(&reference, m_h)?;
            let (err_head, err_history, err_e) = global_error(&approx, &exact, spec.p)?;
            rows.push(ReportRow {
                h,
                n_steps: (t_final / h).round() as usize,
                err_head,
                err_history,
                err_e,
                reference_limited: err_e < 10.0 * self_error,
            });
        }

        let fit_rows: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| !r.reference_limited && r.err_e > 0.0)
            .map(|r| (r.h, r.err_e))
            .collect();
        // The split solution is the head projection; when it is exact (e.g.
        // a vanishing delay functional under the sequential scheme) the order
        // fit is meaningless. The history coordinate still carries the O(h)
        // window fill-in inherent to the product-space formulation.
        let exact_case = rows.iter().all(|r| r.err_head <= 1e-10);
        let (fit, notes) = if exact_case {
            (
                None,
                "exact: head errors at rounding level, order fit skipped".to_string(),
            )
        } else {
            match order_fit(&fit_rows) {
                Ok(f) => {
                    let dropped = rows.len() - fit_rows.len();
                    let notes = if dropped > 0 {
                        format!("{dropped} reference-limited row(s) excluded from the fit")
                    } else {
                        String::new()
                    };
                    (Some(f), notes)
                }
                Err(e) => (None, format!("order fit skipped: {e}")),
            }
        };

        let stability = fit_stability(spec, kind, h_sorted[0], t_final)?;
        reports.push(ConvergenceReport {
            scenario_id: spec.id.clone(),
            scheme: kind,
            t_final,
            rows,
            fit,
            stability,
            d_norm_initial,
            reference_self_error: self_error,
            notes,
            seed,
        });
    }
    Ok(reports)
}

/// Fits `log ||state_k||` against `k h` over one run at the given step to
/// report the empirical exponential-growth envelope.
fn fit_stability(
    spec: &ScenarioSpec,
    kind: SchemeKind,
    h: f64,
    t_final: f64,
) -> Result<Stability> {
    let m_h = grid_resolution(h)?;
    let inst = spec.build_at(m_h)?;
    let scheme = SplitScheme::new(kind, h)?;
    let steps = (t_final / h).round() as usize;
    let norm0 = e_norm(&inst.state, None, spec.p)?;
    if norm0 == 0.0 {
        return Ok(Stability { m_hat: 1.0, omega_hat: 0.0 });
    }
    let mut pts = Vec::with_capacity(steps);
    for k in 1..=steps {
        let state = scheme.run(&inst.state, &inst.gen, &inst.kernel, k as f64 * h)?;
        let norm = e_norm(&state, None, spec.p)?;
        if norm > 0.0 {
            pts.push((k as f64 * h, (norm / norm0).ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(Stability { m_hat: 1.0, omega_hat: 0.0 });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let omega_hat = (n * sxy - sx * sy) / denom;
    let m_hat = ((sy - omega_hat * sx) / n).exp().max(1.0);
    Ok(Stability { m_hat, omega_hat })
}

/// One-step splitting defect at step `h`, on the head coordinate (the split
/// solution). The full product-space defect is reported alongside; its
/// history part behaves like h^(1+1/p) because the one-step window fill of
/// the delay sub-flow misses the `B`-evolution at first order in the
/// substep, so only the head defect follows the clean h^2 law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalErrorRow {
    pub h: f64,
    /// `||P1(T1 T2 x0) - u(h)||_H`.
    pub defect: f64,
    /// `defect / h^2`; bounded ratios across an `h` range exhibit the
    /// second-order local error.
    pub ratio: f64,
    /// Product-space defect, for information.
    pub defect_e: f64,
}

/// Measures the one-step splitting defect against `reference_solve` on
/// smooth compatible data: the head of the scenario with the history slope
/// chosen so the trajectory has a continuous derivative at the junction.
pub fn local_error_probe(
    spec: &ScenarioSpec,
    h_list: &[f64],
    ref_config: &ReferenceConfig,
) -> Result<Vec<LocalErrorRow>> {
    let mut out = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let m_h = grid_resolution(h)?;
        let inst = spec.build_at(m_h)?;
        let c = d_class_history_slope(&inst.gen, &inst.kernel, &inst.state.head)?;
        let head = inst.state.head.clone();
        let x0 = make_state(head.clone(), |s| head.scale(1.0 + c * s), m_h, spec.p)?;
        let split = step_t1(&step_t2(&x0, &inst.kernel, h, 4)?, &inst.gen, h)?;
        let exact = reference_solve(&x0, &inst.gen, &inst.kernel, h, ref_config)?;
        let diff = split.sub(&exact)?;
        let defect = diff.head.norm();
        let defect_e = e_norm(&diff, None, spec.p)?;
        out.push(LocalErrorRow { h, defect, ratio: defect / (h * h), defect_e });
    }
    Ok(out)
}

/// Outcome of the resolvent contraction probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub gamma: f64,
    /// `(h, max Lipschitz ratio of the gamma-shifted resolvent)` per step.
    pub per_h: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub pairs_tested: usize,
    pub skipped_h: Vec<f64>,
    pub seed: u64,
}

fn random_state(
    n: usize,
    m: usize,
    p: f64,
    grid_weight: f64,
    rng: &mut ChaCha8Rng,
) -> DelayState {
    let mut vec = || SpatialVector {
        values: nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        grid_weight,
    };
    let samples: Vec<SpatialVector> = (0..=m).map(|_| vec()).collect();
    DelayState {
        head: vec(),
        history: HistorySegment::new(samples, p).expect("m >= 1"),
    }
}

/// Verifies the quasi-contractivity of the resolvent in the weighted
/// (total-variation) norm: for `gamma` from the dissipativity bound, the
/// resolvent of the shifted operator at step `h` equals
/// `1/(1 + h gamma)` times the plain resolvent at step `h / (1 + h gamma)`,
/// and its Lipschitz ratio over random state pairs must not exceed 1.
pub fn contraction_probe(
    gen: &LinearGenerator,
    kernel: &DelayKernel,
    p: f64,
    alpha: f64,
    h_list: &[f64],
    trials: usize,
    m: usize,
    seed: u64,
) -> Result<ContractionReport> {
    if trials < 10 {
        return Err(Error::Parameter(format!("need >= 10 trials, got {trials}")));
    }
    let gamma = kernel.gamma_bound(alpha, p)?;
    let n = gen.dim();
    let weight = |sigma: f64| kernel.tau(sigma).expect("tau is total on [-1, 0]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_h = Vec::new();
    let mut skipped_h = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0usize;
    for &h in h_list {
        if h * gamma >= 1.0 {
            skipped_h.push(h);
            continue;
        }
        let h_shift = h / (1.0 + h * gamma);
        let scale = 1.0 / (1.0 + h * gamma);
        let res = Resolvent::new(Some(gen), kernel, h_shift, m, n, 1e-12, 200)?;
        let mut h_max: f64 = 0.0;
        for _ in 0..trials {
            let s1 = random_state(n, m, p, gen.grid_weight(), &mut rng);
            let s2 = random_state(n, m, p, gen.grid_weight(), &mut rng);
            let input_dist = e_norm(&s1.sub(&s2)?, Some(&weight), p)?;
            if input_dist < 1e-12 {
                continue;
            }
            let r1 = res.apply(&s1)?.scale(scale);
            let r2 = res.apply(&s2)?.scale(scale);
            let output_dist = e_norm(&r1.sub(&r2)?, Some(&weight), p)?;
            let ratio = output_dist / input_dist;
            h_max = h_max.max(ratio);
            pairs += 1;
        }
        max_ratio = max_ratio.max(h_max);
        per_h.push((h, h_max));
    }
    Ok(ContractionReport { gamma, per_h, max_ratio, pairs_tested: pairs, skipped_h, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::find_scenario;
    use approx::assert_relative_eq;

    #[test]
    fn order_fit_exact_power_laws() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let rows: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 * h)).collect();
        let fit = order_fit(&rows).unwrap();
        assert_relative_eq!(fit.order, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.constant, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);

        let rows: Vec<(f64, f64)> = hs.iter().map(|&h| (h, h * h)).collect();
        let fit = order_fit(&rows).unwrap();
        assert_relative_eq!(fit.order, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn order_fit_requires_four_rows() {
        assert!(order_fit(&[(0.1, 0.1), (0.05, 0.05), (0.025, 0.025)]).is_err());
        // Zero-error rows do not count.
        assert!(order_fit(&[(0.1, 0.1), (0.05, 0.0), (0.025, 0.0), (0.0125, 0.0)]).is_err());
    }

    #[test]
    fn global_error_norm_identity() {
        let spec = find_scenario("scalar-dde").unwrap();
        let inst = spec.build_at(16).unwrap();
        let zero = global_error(&inst.state, &inst.state, 2.0).unwrap();
        assert_eq!(zero, (0.0, 0.0, 0.0));

        let shifted = DelayState {
            head: inst.state.head.add(&SpatialVector::scalar(0.5)),
            history: inst.state.history.clone(),
        };
        let (eh, ef, ee) = global_error(&shifted, &inst.state, 2.0).unwrap();
        assert_relative_eq!(eh, 0.5, epsilon = 1e-14);
        assert_eq!(ef, 0.0);
        assert_relative_eq!(ee, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn global_error_pythagoras_at_p2() {
        let spec = find_scenario("scalar-dde").unwrap();
        let a = spec.build_at(12).unwrap().state;
        let mut b = a.clone();
        b.head = b.head.add(&SpatialVector::scalar(0.3));
        b.history = b.history.scale(1.7);
        let (eh, ef, ee) = global_error(&b, &a, 2.0).unwrap();
        assert_relative_eq!(ee * ee, eh * eh + ef * ef, epsilon = 1e-13);
    }

    #[test]
    fn subsample_picks_shared_nodes() {
        let spec = find_scenario("scalar-dde").unwrap();
        let inst = spec.build_at(8).unwrap();
        let sub = subsample_state(&inst.state, 4).unwrap();
        for j in 0..=4 {
            assert_eq!(
                sub.history.sample(j).values[0],
                inst.state.history.sample(2 * j).values[0]
            );
        }
        assert!(subsample_state(&inst.state, 3).is_err());
    }

    #[test]
    fn local_error_probe_zero_kernel_is_exact() {
        let spec = find_scenario("no-delay").unwrap();
        let rows =
            local_error_probe(&spec, &[1.0 / 20.0, 1.0 / 40.0], &ReferenceConfig::default())
                .unwrap();
        for r in rows {
            assert!(r.defect < 1e-10, "defect {} at h {}", r.defect, r.h);
        }
    }

    #[test]
    fn contraction_probe_zero_kernel_contraction_generator() {
        // Pure contraction semigroup: gamma = 0, ratios stay below 1.
        let gen = LinearGenerator::diagonal(vec![-1.0, -2.0]).unwrap();
        let kernel = DelayKernel::zero().resample(16).unwrap();
        let report =
            contraction_probe(&gen, &kernel, 2.0, -1.0, &[0.05, 0.1], 20, 16, 7).unwrap();
        assert_eq!(report.gamma, 0.0);
        assert!(report.max_ratio <= 1.0 + 1e-8, "max ratio {}", report.max_ratio);
        assert!(report.pairs_tested >= 20);
    }

    #[test]
    fn convergence_study_exact_case_skips_fit() {
        let spec = find_scenario("no-delay").unwrap();
        let reports = convergence_study(
            &spec,
            &[SchemeKind::Sequential],
            &[1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0],
            1.0,
            &ReferenceConfig::default(),
            1,
        )
        .unwrap();
        let r = &reports[0];
        assert!(r.fit.is_none());
        assert!(r.notes.contains("exact"));
        for row in &r.rows {
            // The split solution (head) is exact; the history coordinate
            // keeps the O(h) window fill-in of the product-space splitting.
            assert!(row.err_head <= 1e-10);
        }
    }

    #[test]
    fn convergence_study_rows_sorted_by_decreasing_h() {
        let spec = find_scenario("pure-delay").unwrap();
        let reports = convergence_study(
            &spec,
            &[SchemeKind::Sequential],
            &[1.0 / 40.0, 1.0 / 10.0, 1.0 / 20.0, 1.0 / 80.0],
            1.0,
            &ReferenceConfig::default(),
            1,
        )
        .unwrap();
        let hs: Vec<f64> = reports[0].rows.iter().map(|r| r.h).collect();
        assert_eq!(hs, vec![0.1, 0.05, 0.025, 0.0125]);
    }

    #[test]
    fn study_errors_scale_linearly_for_linear_scenarios() {
        // Doubling the head amplitude doubles every error row.
        let mut spec = find_scenario("scalar-dde").unwrap();
        spec.m = 40;
        let h_list = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0];
        let base = convergence_study(
            &spec,
            &[SchemeKind::Sequential],
            &h_list,
            1.0,
            &ReferenceConfig::default(),
            1,
        )
        .unwrap();
        spec.head = crate::scenario::HeadProfile::Constant { value: 2.0 };
        let doubled = convergence_study(
            &spec,
            &[SchemeKind::Sequential],
            &h_list,
            1.0,
            &ReferenceConfig::default(),
            1,
        )
        .unwrap();
        for (a, b) in base[0].rows.iter().zip(&doubled[0].rows) {
            assert_relative_eq!(2.0 * a.err_e, b.err_e, epsilon = 1e-10);
        }
    }
}
