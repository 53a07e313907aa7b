//! Observed order of the coupled scheme under system-step refinement.
//!
//! Midpoint in both subdomains with fixed subdomain steps gives second order;
//! implicit Euler on a single domain gives first order (estimated from
//! successive levels since no reference is supplied).

use mts::config::RunConfig;
use mts::driver::{convergence, format_convergence};
use std::path::Path;

const MIDPOINT: &str = "
[problem]
kind = sdof
[coupling]
method = baumgarte
alpha = 1
dt = 0.4
t_end = 1.2
[subdomain.1]
theta = 0.5
dt = 0.01
[subdomain.2]
theta = 0.5
dt = 0.01
";

const BACKWARD_EULER: &str = "
[problem]
kind = custom
interval = 1
cells = 16
[coupling]
method = d-continuity
dt = 0.1
t_end = 0.8
[coefficients]
diffusivity = 0.01
[boundary]
dirichlet.left = 0
dirichlet.right = 0
[initial]
value = sin(pi*x)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, text) in [("midpoint", MIDPOINT), ("backward_euler", BACKWARD_EULER)] {
        let cfg = RunConfig::parse(text, Path::new("."), name)?;
        for table in convergence(&cfg, 4, false, None)? {
            print!("{}", format_convergence(&table));
        }
    }
    Ok(())
}
