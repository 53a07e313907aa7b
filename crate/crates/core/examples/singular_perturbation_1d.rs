//! Singularly perturbed reaction-diffusion on three intervals.
//!
//! `c_t + c - eps^2 c_xx = 1` with homogeneous Dirichlet ends develops thin
//! boundary layers. The outer subdomains hold the layers and take small
//! midpoint steps; the interior takes implicit Euler steps. The final profile
//! is compared with the eigenfunction series and the steady limit.

use mts::coupling::run;
use mts::problems::{node_weights, relative_l2, singular_1d_problem, singular_steady, singular_transient, SINGULAR_EPS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let def = singular_1d_problem([20, 40, 20]);
    let p = def.build()?;
    let out = run(&p.subs, &p.constraints, p.d0.clone(), &def.coupling, &mut [])?;
    let mesh = p.mesh.as_ref().expect("mesh problem");
    let w = node_weights(mesh);
    for s in &out.trajectory {
        let c = p.nodal_field(s).expect("mesh problem");
        let series: Vec<f64> = mesh.nodes().iter().map(|x| singular_transient(SINGULAR_EPS, x[0], s.time)).collect();
        let steady: Vec<f64> = mesh.nodes().iter().map(|x| singular_steady(SINGULAR_EPS, x[0])).collect();
        let all = 0..mesh.node_count();
        println!(
            "t = {:.2}: error vs series {:.3e}, distance to steady state {:.3e}",
            s.time,
            relative_l2(&w, &c, &series, all.clone()),
            relative_l2(&w, &c, &steady, all)
        );
    }
    let maps = p.maps.as_ref().expect("mesh problem");
    let last = out.trajectory.last().expect("initial state is kept");
    let c = p.nodal_field(last).expect("mesh problem");
    let series: Vec<f64> = mesh.nodes().iter().map(|x| singular_transient(SINGULAR_EPS, x[0], last.time)).collect();
    for (i, sd) in maps.subdomains.iter().enumerate() {
        println!("subdomain {}: error {:.3e}", i + 1, relative_l2(&w, &c, &series, sd.dof_to_node.iter().copied()));
    }
    Ok(())
}
