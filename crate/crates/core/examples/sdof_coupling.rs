//! Split single-degree-of-freedom system under both coupling methods.
//!
//! Two scalar equations `m_i c_i' + k_i c_i = (+/-) lambda` joined by
//! `c_1 = c_2` reduce to `c' = -c`. Every parameter set of both methods is run
//! to `t = 1` and compared with `c = exp(-t)` and the exact multiplier.

use mts::coupling::{run, CouplingError, CouplingMethod};
use mts::problems::{sdof_exact, sdof_problem, CaseParams, SDOF_BAUMGARTE_CASES, SDOF_DCONTINUITY_CASES};

fn solve(case: &CaseParams) -> Result<(), CouplingError> {
    let ig = case.integrators();
    let p = sdof_problem([ig[0], ig[1]]);
    let cfg = case.coupling(1.0);
    let out = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut [])?;
    let last = out.trajectory.last().expect("initial state is kept");
    let exact = sdof_exact(last.time);
    println!(
        "  dt {:<4} dt_i {:?} theta {:?}: c = [{:.6}, {:.6}] (exact {:.6}), lambda = {:.4} (exact {:.4})",
        case.dt,
        case.dt_sub,
        case.theta,
        last.d[0][0],
        last.d[1][0],
        exact.c,
        last.lambda[0],
        exact.lambda
    );
    Ok(())
}

fn main() -> Result<(), CouplingError> {
    for (method, cases) in [("d-continuity", &SDOF_DCONTINUITY_CASES[..]), ("baumgarte", &SDOF_BAUMGARTE_CASES[..])] {
        println!("{method}");
        for case in cases {
            if let CouplingMethod::Baumgarte { alpha } = case.method() {
                print!("  alpha {alpha}");
            }
            solve(case)?;
        }
    }
    Ok(())
}
