//! Approximate the delay semigroup with the Crandall-Liggett product formula
//! `(I - (t/n) G)^{-n}` applied to the full operator matrix, and watch the
//! error decay as the number of resolvent factors grows.

use delay_split::analysis::global_error;
use delay_split::reference::{reference_solve, ReferenceConfig};
use delay_split::scenario::find_scenario;
use delay_split::splitting::crandall_liggett_apply;
use delay_split::{SchemeKind, SplitScheme};

fn main() -> delay_split::Result<()> {
    let spec = find_scenario("heat-point-delay")?;
    let t = 1.0;
    println!("scenario: {}", spec.description);
    println!("{:>6} {:>14}", "n", "err_E");
    for n in [10usize, 20, 40, 80] {
        // Resolvent grids must align with the step: m = n for t = 1.
        let inst = spec.build_at(n)?;
        let scheme = SplitScheme::new(SchemeKind::CrandallLiggett, t / n as f64)?;
        let approx = crandall_liggett_apply(&inst.state, &inst.gen, &inst.kernel, t, n, &scheme)?;
        let exact = reference_solve(
            &inst.state,
            &inst.gen,
            &inst.kernel,
            t,
            &ReferenceConfig::default(),
        )?;
        let (_, _, err_e) = global_error(&approx, &exact, spec.p)?;
        println!("{n:>6} {err_e:>14.6e}");
    }
    Ok(())
}
