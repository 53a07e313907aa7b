//! Properties of the coupled solver on randomly drawn decompositions and
//! integrator choices.

use mts::assembly::{FormulationTag, Integrator};
use mts::coupling::{run, CouplingConfig, CouplingMethod, DirectSolver};
use mts::decomposition::{build_constraints, build_dof_maps};
use mts::mesh::{interval_mesh, read_native, read_partition, rectangle_mesh, write_native, write_partition, PartitionMap};
use mts::problems::{diffusion_1d_problem, ProblemDefinition};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn random_partition(cells: [usize; 2], seeds: &[usize]) -> PartitionMap {
    // element ids from a few stripes, relabelled so every id in 1..=k occurs
    let n = cells[0] * cells[1];
    let raw: Vec<usize> = (0..n).map(|e| seeds[(e % cells[0]) * seeds.len() / cells[0]]).collect();
    let used: BTreeSet<usize> = raw.iter().copied().collect();
    let relabel: Vec<usize> = raw.iter().map(|r| used.iter().position(|u| u == r).unwrap() + 1).collect();
    PartitionMap::new(relabel, n).unwrap()
}

fn diffusion_with(thetas: [f64; 3], etas: [usize; 3], dt: f64) -> ProblemDefinition {
    let mut def = diffusion_1d_problem([6, 8, 6]);
    for ((s, &th), &eta) in def.subdomains.iter_mut().zip(&thetas).zip(&etas) {
        s.integrator = Integrator { theta: th, dt_sub: dt / eta as f64 };
    }
    def
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn partition_covers_every_node_and_constraints_tie_shared_ones(
        nx in 2usize..7, ny in 1usize..5, seeds in proptest::collection::vec(1usize..5, 1..4),
    ) {
        let mesh = rectangle_mesh([0.0, 0.0], [1.0, 1.0], [nx, ny], false).unwrap();
        let part = random_partition([nx, ny], &seeds);
        let maps = build_dof_maps(&mesh, &part, &BTreeSet::new()).unwrap();
        let mut owners = vec![0usize; mesh.node_count()];
        for s in &maps.subdomains {
            for &n in &s.dof_to_node {
                owners[n] += 1;
            }
        }
        prop_assert!(owners.iter().all(|&k| k >= 1));
        let c = build_constraints(&maps);
        let expected: usize = owners.iter().map(|&k| k - 1).sum();
        prop_assert_eq!(c.row_count(), expected);
        prop_assert_eq!(c.rank(), expected);
        let dense = c.to_dense();
        for r in 0..dense.nrows() {
            prop_assert_eq!(dense.row(r).sum(), 0.0);
            prop_assert_eq!(dense.row(r).norm_squared(), 2.0);
        }
    }

    #[test]
    fn native_format_round_trips(nx in 1usize..6, ny in 1usize..6, tri in any::<bool>(), w in 0.1f64..10.0) {
        let mesh = rectangle_mesh([-w, 0.3], [w / 3.0, 1.7], [nx, ny], tri).unwrap();
        prop_assert_eq!(read_native(&write_native(&mesh)).unwrap(), mesh.clone());
        let part = random_partition([nx, ny], &[1, 2]);
        let ids: Vec<usize> = if tri { part.ids().iter().flat_map(|&i| [i, i]).collect() } else { part.ids().to_vec() };
        let part = PartitionMap::new(ids, mesh.element_count()).unwrap();
        prop_assert_eq!(read_partition(&write_partition(&part), mesh.element_count()).unwrap(), part);
    }

    #[test]
    fn d_continuity_has_no_drift(
        thetas in proptest::array::uniform3(prop_oneof![Just(0.5), Just(0.75), Just(1.0)]),
        etas in proptest::array::uniform3(1usize..5),
        assembled in any::<bool>(),
    ) {
        let def = diffusion_with(thetas, etas, 0.05);
        let p = def.build().unwrap();
        let mut cfg = CouplingConfig::new(0.05, 10, CouplingMethod::DContinuity);
        if assembled {
            cfg.solver = DirectSolver::Assembled;
        }
        let out = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        for s in &out.trajectory {
            let r = p.constraints.apply(&s.d);
            prop_assert!(r.iter().all(|x| x.abs() <= 1e-10), "{:?}", r);
        }
    }

    #[test]
    fn baumgarte_constraint_holds_at_every_system_level(
        thetas in proptest::array::uniform3(prop_oneof![Just(0.5), Just(1.0)]),
        etas in proptest::array::uniform3(1usize..4),
        alpha in 0.1f64..20.0,
    ) {
        let dt = 0.05;
        let def = diffusion_with(thetas, etas, dt);
        let p = def.build().unwrap();
        let cfg = CouplingConfig::new(dt, 8, CouplingMethod::Baumgarte { alpha });
        let out = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        for s in &out.trajectory[1..] {
            let cv = p.constraints.apply(&s.v);
            let cd = p.constraints.apply(&s.d);
            let worst = cv.iter().zip(&cd).map(|(v, d)| (v + alpha / dt * d).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 1e-10, "{}", worst);
        }
    }

    #[test]
    fn structured_and_assembled_solvers_agree(
        thetas in proptest::array::uniform3(prop_oneof![Just(0.0), Just(0.5), Just(1.0)]),
        etas in proptest::array::uniform3(1usize..4),
        baumgarte in any::<bool>(),
    ) {
        // a small step keeps the explicit subdomains bounded
        let dt = 1e-3;
        let def = diffusion_with(thetas, etas, dt);
        let p = def.build().unwrap();
        let method = if baumgarte { CouplingMethod::Baumgarte { alpha: 1.0 } } else { CouplingMethod::DContinuity };
        let mut cfg = CouplingConfig::new(dt, 5, method);
        let a = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        cfg.solver = DirectSolver::Assembled;
        let b = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
            for (dx, dy) in x.d.iter().flatten().zip(y.d.iter().flatten()) {
                prop_assert!((dx - dy).abs() <= 1e-10);
            }
            for (lx, ly) in x.lambda.iter().zip(&y.lambda) {
                prop_assert!((lx - ly).abs() <= 1e-8 * ly.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_subdomain_runs_without_multipliers(theta in 0.5f64..=1.0, supg in any::<bool>()) {
        let (mesh, part) = interval_mesh(&[1.0], &[10]).unwrap();
        let mut def = diffusion_1d_problem([4, 4, 4]);
        def.mesh = std::sync::Arc::new(mesh);
        def.partition = part;
        let mut s = def.subdomains[0].clone();
        s.integrator = Integrator { theta, dt_sub: 0.02 };
        if supg {
            s.formulation = FormulationTag::Supg;
        }
        def.subdomains = vec![s];
        def.bc.neumann.clear();
        def.bc.dirichlet.retain(|(n, _)| def.mesh.boundary_set(n).is_some());
        let p = def.build().unwrap();
        prop_assert_eq!(p.constraints.row_count(), 0);
        let cfg = CouplingConfig::new(0.02, 5, CouplingMethod::DContinuity);
        let out = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        prop_assert!(out.trajectory.iter().all(|s| s.lambda.is_empty() && s.d[0].iter().all(|x| x.is_finite())));
    }

    #[test]
    fn runs_are_deterministic(thetas in proptest::array::uniform3(prop_oneof![Just(0.5), Just(1.0)]), etas in proptest::array::uniform3(1usize..4)) {
        let def = diffusion_with(thetas, etas, 0.05);
        let p = def.build().unwrap();
        let cfg = CouplingConfig::new(0.05, 6, CouplingMethod::DContinuity);
        let a = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        let b = run(&p.subs, &p.constraints, p.d0.clone(), &cfg, &mut []).unwrap();
        prop_assert_eq!(a.trajectory, b.trajectory);
    }
}
