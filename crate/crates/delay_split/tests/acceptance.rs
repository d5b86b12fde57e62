//! End-to-end acceptance criteria for the splitting library, one test per
//! criterion. Each test prints a single `[PASS]`/`[FAIL]` line; the asserts
//! behind it carry the quantitative gates.

use std::process::Command;

use delay_split::analysis::{
    contraction_probe, convergence_study, global_error, local_error_probe,
};
use delay_split::reference::{exact_scalar_oracle, reference_solve, ReferenceConfig};
use delay_split::scenario::find_scenario;
use delay_split::splitting::crandall_liggett_apply;
use delay_split::{DelayKernel, LinearGenerator, SchemeKind, SplitScheme};

const H_FULL: [f64; 5] = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];
const H_SHORT: [f64; 4] = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0];

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn verdict(ok: bool, line: &str) {
    println!("[{}] {line}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{line}");
}

#[test]
fn criterion_01_sequential_splitting_is_first_order() {
    let spec = find_scenario("heat-point-delay").unwrap();
    let reports = convergence_study(
        &spec,
        &[SchemeKind::Sequential],
        &H_FULL,
        spec.t_final,
        &ReferenceConfig::default(),
        42,
    )
    .unwrap();
    let fit = reports[0].fit.as_ref().expect("order fit available");
    verdict(
        (0.8..=1.2).contains(&fit.order) && fit.r_squared >= 0.98,
        &format!(
            "criterion 1: sequential splitting on heat-point-delay converges with order {:.3} (r^2 = {:.4}) in [0.8, 1.2]",
            fit.order, fit.r_squared
        ),
    );
}

#[test]
fn criterion_02_lie_resolvent_splitting_is_first_order() {
    let spec = find_scenario("heat-point-delay").unwrap();
    let reports = convergence_study(
        &spec,
        &[SchemeKind::LieResolvent],
        &H_FULL,
        spec.t_final,
        &ReferenceConfig::default(),
        42,
    )
    .unwrap();
    let fit = reports[0].fit.as_ref().expect("order fit available");
    verdict(
        (0.8..=1.2).contains(&fit.order),
        &format!(
            "criterion 2: Lie resolvent splitting on heat-point-delay converges with order {:.3} in [0.8, 1.2]",
            fit.order
        ),
    );
}

#[test]
fn criterion_03_one_step_defect_is_second_order() {
    let spec = find_scenario("heat-point-delay").unwrap();
    let rows = local_error_probe(
        &spec,
        &[1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0],
        &ReferenceConfig::default(),
    )
    .unwrap();
    let max = rows.iter().map(|r| r.ratio).fold(0.0_f64, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    verdict(
        min > 0.0 && max / min <= 2.0,
        &format!(
            "criterion 3: one-step head defect scales like h^2 (defect/h^2 in [{min:.2}, {max:.2}], spread {:.2} <= 2)",
            max / min
        ),
    );
}

#[test]
fn criterion_04_nonlinear_delay_converges() {
    let spec = find_scenario("intro-nonlinear").unwrap();
    let reports = convergence_study(
        &spec,
        &[SchemeKind::Sequential],
        &H_SHORT,
        spec.t_final,
        &ReferenceConfig::default(),
        42,
    )
    .unwrap();
    let errs: Vec<f64> = reports[0].rows.iter().map(|r| r.err_e).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing,
        &format!(
            "criterion 4: sequential splitting of the nonlinear distributed-delay problem has strictly decreasing errors [{}]",
            fmt_list(&errs)
        ),
    );
}

#[test]
fn criterion_05_degenerate_scenarios_are_solved_exactly() {
    // With a vanishing delay functional the splitting head is the diffusion
    // semigroup itself: head errors at rounding level for every h.
    let no_delay = find_scenario("no-delay").unwrap();
    let reports = convergence_study(
        &no_delay,
        &[SchemeKind::Sequential],
        &[1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0],
        no_delay.t_final,
        &ReferenceConfig::default(),
        42,
    )
    .unwrap();
    let worst_head = reports[0]
        .rows
        .iter()
        .map(|r| r.err_head)
        .fold(0.0_f64, f64::max);

    // With B = 0 the delay sub-flow is the entire dynamics and the splitting
    // is exact up to the sub-flow quadrature.
    let pure = find_scenario("pure-delay").unwrap();
    let h = 1.0 / 40.0;
    let inst = pure.build_at(40).unwrap();
    let scheme = SplitScheme::new(SchemeKind::Sequential, h).unwrap();
    let approx = scheme
        .run(&inst.state, &inst.gen, &inst.kernel, pure.t_final)
        .unwrap();
    let exact = reference_solve(
        &inst.state,
        &inst.gen,
        &inst.kernel,
        pure.t_final,
        &ReferenceConfig::default(),
    )
    .unwrap();
    let (_, _, err_e) = global_error(&approx, &exact, pure.p).unwrap();

    verdict(
        worst_head <= 1e-10 && err_e <= 1e-6,
        &format!(
            "criterion 5: exact sub-flow cases (no delay: max head error {worst_head:.2e} <= 1e-10; no diffusion: product error {err_e:.2e} <= 1e-6)"
        ),
    );
}

#[test]
fn criterion_06_reference_matches_closed_form_scalar_solution() {
    use delay_split::kernel::Nonlinearity;
    use delay_split::scenario::{
        AtomSpec, DensitySpec, GeneratorSpec, HeadProfile, HistoryProfile, KernelSpec,
        ScenarioSpec,
    };
    let mut worst: f64 = 0.0;
    for (a, b) in [(-0.5, 0.5), (-1.0, 0.25), (0.1, -0.3)] {
        let spec = ScenarioSpec {
            id: "oracle-check".into(),
            description: String::new(),
            generator: GeneratorSpec::Diagonal { eigs: vec![a] },
            kernel: KernelSpec {
                atoms: vec![AtomSpec { sigma: -1.0, weight: b }],
                density: DensitySpec::Zero,
                g: Nonlinearity::Identity,
                sigma0: -0.5,
            },
            head: HeadProfile::Constant { value: 1.0 },
            history: HistoryProfile::FrozenHead,
            m: 64,
            p: 2.0,
            t_final: 3.0,
        };
        let inst = spec.build().unwrap();
        for t in [1.0, 2.0, 3.0] {
            let oracle = exact_scalar_oracle(a, b, 1.0, t).unwrap();
            let state = reference_solve(
                &inst.state,
                &inst.gen,
                &inst.kernel,
                t,
                &ReferenceConfig::default(),
            )
            .unwrap();
            worst = worst.max((state.head.values[0] - oracle).abs());
        }
    }
    verdict(
        worst <= 1e-8,
        &format!(
            "criterion 6: reference integrator matches the closed-form scalar solution over 9 cases (max |diff| = {worst:.2e} <= 1e-8)"
        ),
    );
}

#[test]
fn criterion_07_shifted_resolvent_is_contractive() {
    let mut lines = Vec::new();
    let mut ok = true;
    for id in ["heat-point-delay", "scalar-dde", "intro-nonlinear"] {
        let spec = find_scenario(id).unwrap();
        let inst = spec.build().unwrap();
        let report = contraction_probe(
            &inst.gen,
            &inst.kernel,
            spec.p,
            inst.gen.alpha,
            &[0.05, 0.1],
            50,
            spec.m,
            42,
        )
        .unwrap();
        ok &= report.pairs_tested >= 50 && report.max_ratio <= 1.0 + 1e-8;
        lines.push(format!(
            "{id}: max ratio {:.6} over {} pairs",
            report.max_ratio, report.pairs_tested
        ));
    }
    verdict(
        ok,
        &format!(
            "criterion 7: gamma-shifted resolvent is contractive in the weighted norm ({})",
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_08_crandall_liggett_product_formula_converges() {
    // Full problem: errors shrink as the number of resolvent factors grows.
    let spec = find_scenario("heat-point-delay").unwrap();
    let t = 1.0;
    let mut errs = Vec::new();
    for n in [10usize, 20, 40, 80] {
        let inst = spec.build_at(n).unwrap();
        let scheme = SplitScheme::new(SchemeKind::CrandallLiggett, t / n as f64).unwrap();
        let approx =
            crandall_liggett_apply(&inst.state, &inst.gen, &inst.kernel, t, n, &scheme).unwrap();
        let exact = reference_solve(
            &inst.state,
            &inst.gen,
            &inst.kernel,
            t,
            &ReferenceConfig::default(),
        )
        .unwrap();
        let (_, _, err_e) = global_error(&approx, &exact, spec.p).unwrap();
        errs.push(err_e);
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);

    // Kernel-free diagonal case: the iteration is exactly the scalar
    // implicit-Euler power (1 - t lambda / n)^{-n}.
    let lambda = -0.8;
    let n_iter = 16usize;
    let gen = LinearGenerator::diagonal(vec![lambda]).unwrap();
    let kernel = DelayKernel::zero().resample(n_iter).unwrap();
    let x0 = delay_split::state::make_state(
        delay_split::state::SpatialVector::new(nalgebra::dvector![1.0], gen.grid_weight())
            .unwrap(),
        |_| delay_split::state::SpatialVector::new(nalgebra::dvector![1.0], gen.grid_weight())
            .unwrap(),
        n_iter,
        2.0,
    )
    .unwrap();
    let scheme = SplitScheme::new(SchemeKind::CrandallLiggett, t / n_iter as f64).unwrap();
    let approx = crandall_liggett_apply(&x0, &gen, &kernel, t, n_iter, &scheme).unwrap();
    let closed_form = (1.0 - t * lambda / n_iter as f64).powi(-(n_iter as i32));
    let diag_diff = (approx.head.values[0] - closed_form).abs();

    verdict(
        decreasing && diag_diff <= 1e-12,
        &format!(
            "criterion 8: Crandall-Liggett product formula converges (errors [{}] decreasing; kernel-free diagonal matches (1 - t lambda/n)^-n to {diag_diff:.1e})",
            fmt_list(&errs)
        ),
    );
}

#[test]
fn criterion_09_lie_and_sequential_schemes_agree_in_the_limit() {
    let spec = find_scenario("heat-point-delay").unwrap();
    let t = 1.0;
    let mut dists = Vec::new();
    for m in [10usize, 20, 40, 80] {
        let h = 1.0 / m as f64;
        let inst = spec.build_at(m).unwrap();
        let seq = SplitScheme::new(SchemeKind::Sequential, h)
            .unwrap()
            .run(&inst.state, &inst.gen, &inst.kernel, t)
            .unwrap();
        let lie = SplitScheme::new(SchemeKind::LieResolvent, h)
            .unwrap()
            .run(&inst.state, &inst.gen, &inst.kernel, t)
            .unwrap();
        let (_, _, dist) = global_error(&seq, &lie, spec.p).unwrap();
        dists.push(dist);
    }
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing,
        &format!(
            "criterion 9: semigroup-based and resolvent-based splittings approach each other as h -> 0 (distances [{}])",
            fmt_list(&dists)
        ),
    );
}

#[test]
fn criterion_10_same_seed_runs_are_byte_identical() {
    let bin = env!("CARGO_BIN_EXE_delay-split");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(
        &config,
        "[scenario]\nname = \"scalar-dde\"\n\n[study]\nh = [0.1, 0.05, 0.025, 0.0125]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}"));
        let status = Command::new(bin)
            .args(["run"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .args(["--seed", "7", "--quiet"])
            .status()
            .unwrap();
        assert!(status.success(), "CLI run failed");
        outputs.push((
            std::fs::read(out.join("study.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    verdict(
        outputs[0] == outputs[1],
        "criterion 10: two CLI runs with identical config and seed produce byte-identical CSV and JSON outputs",
    );
}
