//! Cross-check the refined reference integrator against a closed-form
//! method-of-steps solution of the scalar delay equation
//! `u'(t) = a u(t) + b u(t - 1)` with constant initial history `u = x` on
//! `[-1, 0]`. The oracle integrates the variation-of-constants recursion with
//! Gauss-Legendre quadrature and is accurate to near machine precision.

use delay_split::reference::{exact_scalar_oracle, reference_solve, ReferenceConfig};
use delay_split::scenario::{ScenarioSpec, GeneratorSpec, HeadProfile, HistoryProfile, KernelSpec, AtomSpec, DensitySpec};
use delay_split::kernel::Nonlinearity;

fn main() -> delay_split::Result<()> {
    // u' = u(t-1), u = 1 on [-1, 0]: piecewise polynomial with u(1) = 2,
    // u(2) = 3.5.
    for (t, expect) in [(1.0, 2.0), (2.0, 3.5)] {
        let u = exact_scalar_oracle(0.0, 1.0, 1.0, t)?;
        println!("u'(t) = u(t-1): u({t}) = {u:.15} (closed form {expect})");
    }

    println!();
    println!("{:>6} {:>6} {:>4} {:>20} {:>20} {:>10}", "a", "b", "t", "oracle", "reference", "diff");
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
        let inst = spec.build()?;
        for t in [1.0, 2.0, 3.0] {
            let exact = exact_scalar_oracle(a, b, 1.0, t)?;
            let state = reference_solve(
                &inst.state,
                &inst.gen,
                &inst.kernel,
                t,
                &ReferenceConfig::default(),
            )?;
            let numeric = state.head.values[0];
            println!(
                "{a:>6.2} {b:>6.2} {t:>4.1} {exact:>20.15} {numeric:>20.15} {:>10.2e}",
                (exact - numeric).abs()
            );
        }
    }
    Ok(())
}
