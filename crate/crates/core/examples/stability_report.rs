//! Spectral step limits and the Baumgarte parameter bound.
//!
//! For the split single-dof system the explicit subdomain has `omega = 100`,
//! so its critical step is 0.02. The bound on alpha follows from the
//! subcycling ratios of the explicit subdomains.

use mts::analysis::stability_report;
use mts::assembly::Integrator;
use mts::coupling::{CouplingConfig, CouplingMethod};
use mts::driver::format_report;
use mts::problems::{hemker_2d_problem, sdof_problem, HemkerPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = sdof_problem([Integrator { theta: 0.5, dt_sub: 0.1 }, Integrator { theta: 0.0, dt_sub: 0.02 }]);
    for alpha in [1.0, 50.0, 60.0] {
        let cfg = CouplingConfig::new(0.1, 10, CouplingMethod::Baumgarte { alpha });
        print!("{}", format_report(&format!("sdof, alpha {alpha}"), &stability_report(&p.subs, &cfg)?));
    }
    let p = sdof_problem([Integrator { theta: 0.0, dt_sub: 0.025 }, Integrator { theta: 0.0, dt_sub: 0.025 }]);
    let cfg = CouplingConfig::new(0.1, 10, CouplingMethod::Baumgarte { alpha: 1.0 });
    print!("{}", format_report("sdof, step above the limit", &stability_report(&p.subs, &cfg)?));

    let def = hemker_2d_problem(HemkerPlan::GALERKIN, false, None)?;
    let p = def.build()?;
    print!("{}", format_report("hemker", &stability_report(&p.subs, &def.coupling)?));
    Ok(())
}
