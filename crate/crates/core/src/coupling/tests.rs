use super::*;
use crate::assembly::{assemble_subdomain, BoundaryConditions, FormulationTag, Integrator, TransportCoefficients};
use crate::decomposition::{build_constraints, build_dof_maps, collect_set_nodes, ConstraintEntry, ConstraintRow};
use crate::fields::ScalarField;
use crate::mesh::interval_mesh;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

fn sdof(thetas: [f64; 2], dts: [f64; 2]) -> (Vec<SubdomainSystem>, ConstraintMap) {
    let mk = |id, m: f64, k: f64, i: usize| {
        SubdomainSystem::from_matrices(
            id,
            CsrMatrix::diagonal(&[m]),
            CsrMatrix::diagonal(&[k]),
            vec![0.0],
            Integrator { theta: thetas[i], dt_sub: dts[i] },
        )
    };
    let subs = vec![mk(1, 100.0, 1.0, 0), mk(2, 1.0, 100.0, 1)];
    let rows = vec![ConstraintRow {
        node: None,
        entries: vec![
            ConstraintEntry { subdomain: 0, dof: 0, sign: 1.0 },
            ConstraintEntry { subdomain: 1, dof: 0, sign: -1.0 },
        ],
    }];
    (subs, ConstraintMap::from_rows(rows, vec![1, 1]))
}

fn fe_problem(formulations: [FormulationTag; 3], thetas: [f64; 3], dts: [f64; 3]) -> (Vec<SubdomainSystem>, ConstraintMap, Vec<Vec<f64>>) {
    let (m, p) = interval_mesh(&[0.3, 0.4, 0.3], &[3, 4, 3]).unwrap();
    let mesh = Arc::new(m);
    let dir = collect_set_nodes(&mesh, &["left", "right"]).unwrap();
    let maps = build_dof_maps(&mesh, &p, &dir).unwrap();
    let c = build_constraints(&maps);
    let bc = BoundaryConditions {
        dirichlet: vec![("left".into(), ScalarField::constant(0.0)), ("right".into(), ScalarField::constant(0.5))],
        neumann: vec![],
    };
    let coeff = TransportCoefficients::constant([1.0, 0.0], 0.05, 0.5, 1.0);
    let subs: Vec<_> = (0..3)
        .map(|i| {
            assemble_subdomain(
                mesh.clone(),
                &maps.subdomains[i],
                coeff.clone(),
                formulations[i],
                Integrator { theta: thetas[i], dt_sub: dts[i] },
                bc.clone(),
            )
            .unwrap()
        })
        .collect();
    let d0 = subs
        .iter()
        .map(|s| s.dof_to_node.iter().map(|&n| (std::f64::consts::PI * mesh.node(n)[0]).sin()).collect())
        .collect();
    (subs, c, d0)
}

/// Dense block system built straight from the block definitions.
fn brute_force_step(
    subs: &[SubdomainSystem],
    c: &ConstraintMap,
    method: CouplingMethod,
    dt: f64,
    state: &SystemState,
) -> SystemState {
    let etas: Vec<usize> = subs.iter().map(|s| (dt / s.integrator.dt_sub).round() as usize).collect();
    let ns: Vec<usize> = subs.iter().map(|s| s.dof_count()).collect();
    let nl = c.row_count();
    let total: usize = ns.iter().zip(&etas).map(|(n, e)| 2 * n * e).sum::<usize>() + nl;
    let mut a = DMatrix::<f64>::zeros(total, total);
    let mut f = DVector::<f64>::zeros(total);
    let cd = c.to_dense();
    let mut off = 0;
    let mut col_off = 0;
    let lam0 = total - nl;
    for (i, s) in subs.iter().enumerate() {
        let n = ns[i];
        let eta = etas[i];
        let th = s.integrator.theta;
        let h = s.integrator.dt_sub;
        let m = s.mass.to_dense();
        let ms = s.mass_stab.as_ref().map(|x| x.to_dense()).unwrap_or_else(|| DMatrix::zeros(n, n));
        let k = s.stiffness.to_dense();
        let ci = cd.columns(col_off, n).into_owned();
        let id = DMatrix::<f64>::identity(n, n);
        // L = [[M + th Ms, K], [-th h I, I]], R = [[-(1-th) Ms, 0], [(1-th) h I, I]]
        let mut l = DMatrix::zeros(2 * n, 2 * n);
        l.view_mut((0, 0), (n, n)).copy_from(&(&m + &ms * th));
        l.view_mut((0, n), (n, n)).copy_from(&k);
        l.view_mut((n, 0), (n, n)).copy_from(&(&id * (-th * h)));
        l.view_mut((n, n), (n, n)).copy_from(&id);
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        r.view_mut((0, 0), (n, n)).copy_from(&(&ms * (-(1.0 - th))));
        r.view_mut((n, 0), (n, n)).copy_from(&(&id * ((1.0 - th) * h)));
        r.view_mut((n, n), (n, n)).copy_from(&id);
        let xn = DVector::from_iterator(2 * n, state.v[i].iter().chain(&state.d[i]).copied());
        let ctl = ci.transpose() * DVector::from_column_slice(&state.lambda);
        for j in 1..=eta {
            let o = off + 2 * n * (j - 1);
            a.view_mut((o, o), (2 * n, 2 * n)).copy_from(&l);
            if j > 1 {
                a.view_mut((o, o - 2 * n), (2 * n, 2 * n)).copy_from(&(-&r));
            }
            let fj = DVector::from_column_slice(&s.forcing_at(state.time + j as f64 * h).unwrap());
            let mut top = fj + &ctl;
            if j == 1 {
                let rx = &r * &xn;
                top += rx.rows(0, n);
                f.rows_mut(o + n, n).copy_from(&rx.rows(n, n));
            }
            f.rows_mut(o, n).copy_from(&top);
            let w = -(j as f64) / eta as f64;
            a.view_mut((o, lam0), (n, nl)).copy_from(&(ci.transpose() * w));
        }
        let last = off + 2 * n * (eta - 1);
        match method {
            CouplingMethod::DContinuity => a.view_mut((lam0, last + n), (nl, n)).copy_from(&ci),
            CouplingMethod::Baumgarte { alpha } => {
                a.view_mut((lam0, last), (nl, n)).copy_from(&ci);
                a.view_mut((lam0, last + n), (nl, n)).copy_from(&(&ci * (alpha / dt)));
            }
        }
        off += 2 * n * eta;
        col_off += n;
    }
    let x = a.lu().solve(&f).unwrap();
    let mut off = 0;
    let mut d = Vec::new();
    let mut v = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let last = off + 2 * n * (etas[i] - 1);
        v.push(x.rows(last, n).iter().copied().collect());
        d.push(x.rows(last + n, n).iter().copied().collect());
        off += 2 * n * etas[i];
    }
    let lambda = state.lambda.iter().enumerate().map(|(r, l)| l + x[lam0 + r]).collect();
    SystemState { step: state.step + 1, time: state.time + dt, d, v, lambda }
}

fn max_diff(a: &SystemState, b: &SystemState) -> f64 {
    let mut m: f64 = 0.0;
    for (x, y) in a.d.iter().flatten().zip(b.d.iter().flatten()) {
        m = m.max((x - y).abs());
    }
    for (x, y) in a.v.iter().flatten().zip(b.v.iter().flatten()) {
        m = m.max((x - y).abs());
    }
    for (x, y) in a.lambda.iter().zip(&b.lambda) {
        m = m.max((x - y).abs());
    }
    m
}

#[test]
fn sdof_initial_state() {
    let (subs, c) = sdof([1.0, 0.5], [0.25, 0.5]);
    let cfg = CouplingConfig::new(0.5, 1, CouplingMethod::DContinuity);
    let st = Stepper::new(&subs, &c, cfg).unwrap();
    let s0 = st.initial_state(vec![vec![1.0], vec![1.0]], 0.0).unwrap();
    assert!((s0.lambda[0] + 99.0).abs() < 1e-12);
    assert!((s0.v[0][0] + 1.0).abs() < 1e-14);
    assert!((s0.v[1][0] + 1.0).abs() < 1e-12);
}

#[test]
fn sdof_monolithic_matches_hand_built() {
    // eta_1 = 2, eta_2 = 1, theta_1 = 1, theta_2 = 1/2
    let (subs, c) = sdof([1.0, 0.5], [0.25, 0.5]);
    let cfg = CouplingConfig::new(0.5, 1, CouplingMethod::DContinuity);
    let st = Stepper::new(&subs, &c, cfg.clone()).unwrap();
    let s0 = st.initial_state(vec![vec![1.0], vec![1.0]], 0.0).unwrap();
    let (a, f) = monolithic_system(&subs, &c, &cfg, &s0).unwrap();
    let (h1, h2) = (0.25, 0.5);
    #[rustfmt::skip]
    let expect = DMatrix::from_row_slice(7, 7, &[
        // v11   d11   v12   d12   v21  d21   dlam
        100.0, 1.0, 0.0, 0.0, 0.0, 0.0, -0.5,
        -h1, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 100.0, 1.0, 0.0, 0.0, -1.0,
        0.0, -1.0, -h1, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 100.0, 1.0,
        0.0, 0.0, 0.0, 0.0, -0.5 * h2, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0,
    ]);
    let lam = -99.0;
    let expect_f = [lam, 1.0, lam, 0.0, -lam, 1.0 + 0.5 * h2 * -1.0, 0.0];
    let ad = a.to_dense();
    for r in 0..7 {
        for col in 0..7 {
            assert!((ad[(r, col)] - expect[(r, col)]).abs() < 1e-12, "A[{r},{col}] = {} vs {}", ad[(r, col)], expect[(r, col)]);
        }
        assert!((f[r] - expect_f[r]).abs() < 1e-12, "F[{r}] = {} vs {}", f[r], expect_f[r]);
    }
}

#[test]
fn solvers_agree_with_brute_force() {
    let forms = [FormulationTag::Galerkin, FormulationTag::Supg, FormulationTag::Gls];
    for method in [CouplingMethod::DContinuity, CouplingMethod::Baumgarte { alpha: 2.0 }] {
        let (subs, c, d0) = fe_problem(forms, [0.5, 1.0, 0.25], [0.05, 0.1, 0.025]);
        let mut cfg = CouplingConfig::new(0.1, 3, method);
        let mut structured = Stepper::new(&subs, &c, cfg.clone()).unwrap();
        assert!(structured.is_structured());
        cfg.solver = DirectSolver::Assembled;
        let mut assembled = Stepper::new(&subs, &c, cfg.clone()).unwrap();
        assert!(!assembled.is_structured());
        let mut s = structured.initial_state(d0, 0.0).unwrap();
        for _ in 0..3 {
            let oracle = brute_force_step(&subs, &c, method, 0.1, &s);
            let (a, da) = structured.step(&s, None).unwrap();
            let (b, _) = assembled.step(&s, None).unwrap();
            assert!(max_diff(&a, &oracle) < 1e-12, "structured vs oracle {}", max_diff(&a, &oracle));
            assert!(max_diff(&b, &oracle) < 1e-12, "assembled vs oracle {}", max_diff(&b, &oracle));
            assert!(da.constraint_residual < 1e-12);
            s = a;
        }
    }
}

#[test]
fn perturbed_steps_agree() {
    let forms = [FormulationTag::Galerkin, FormulationTag::Supg, FormulationTag::Galerkin];
    for method in [CouplingMethod::DContinuity, CouplingMethod::Baumgarte { alpha: 3.0 }] {
        let (subs, c, d0) = fe_problem(forms, [1.0, 0.5, 0.0], [0.05, 0.1, 0.01]);
        let mut cfg = CouplingConfig::new(0.1, 1, method);
        let mut st = Stepper::new(&subs, &c, cfg.clone()).unwrap();
        cfg.solver = DirectSolver::Assembled;
        let mut asm = Stepper::new(&subs, &c, cfg).unwrap();
        let s0 = st.initial_state(d0, 0.0).unwrap();
        let pert = StepPerturbation {
            eps_d: subs.iter().map(|s| (0..s.dof_count()).map(|k| 1e-3 * (k as f64 + 1.0)).collect()).collect(),
            delta_lambda: vec![0.2, -0.1],
            eps_lambda: vec![1e-4, 2e-4],
        };
        let (a, _) = st.step(&s0, Some(&pert)).unwrap();
        let (b, db) = asm.step(&s0, Some(&pert)).unwrap();
        assert!(max_diff(&a, &b) < 1e-11, "{}", max_diff(&a, &b));
        assert!(db.constraint_residual < 1e-12);
        let g = constraint_value(&c, method, 0.1, &a);
        let scale = if matches!(method, CouplingMethod::Baumgarte { .. }) { 10.0 } else { 1.0 };
        assert!((g[0] - scale * 1e-4).abs() < 1e-12 && (g[1] - scale * 2e-4).abs() < 1e-12);
    }
}

#[test]
fn non_integer_subcycling_is_rejected() {
    let (subs, c) = sdof([1.0, 0.5], [0.3, 0.5]);
    let cfg = CouplingConfig::new(0.5, 1, CouplingMethod::DContinuity);
    match Stepper::new(&subs, &c, cfg) {
        Err(CouplingError::NonIntegerSubcycling { subdomain, .. }) => assert_eq!(subdomain, 1),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("accepted dt/dt_1 = 5/3"),
    }
    assert_eq!(subcycling_ratio(0.1, 0.05), Some(2));
    assert_eq!(subcycling_ratio(0.4, 0.01), Some(40));
    assert_eq!(subcycling_ratio(0.25, 0.00125), Some(200));
    assert_eq!(subcycling_ratio(0.1, 0.03), None);
}

/// Linear system reported as nonlinear, so Newton must iterate.
struct Opaque(SubdomainSystem);

impl SubdomainModel for Opaque {
    fn dof_count(&self) -> usize {
        self.0.dof_count()
    }
    fn integrator(&self) -> Integrator {
        self.0.integrator
    }
    fn mass(&self) -> &CsrMatrix {
        &self.0.mass
    }
    fn mass_stab(&self) -> Option<&CsrMatrix> {
        self.0.mass_stab.as_ref()
    }
    fn rate(&self, d: &[f64], t: f64) -> Result<Vec<f64>, CouplingError> {
        self.0.rate(d, t)
    }
    fn jacobian(&self, d: &[f64], t: f64) -> Result<Cow<'_, CsrMatrix>, CouplingError> {
        self.0.jacobian(d, t)
    }
    fn is_linear(&self) -> bool {
        false
    }
    fn constant_jacobian(&self) -> bool {
        false
    }
}

#[test]
fn newton_on_linear_model_converges_in_two() {
    let forms = [FormulationTag::Galerkin; 3];
    let (subs, c, d0) = fe_problem(forms, [0.5, 1.0, 0.5], [0.05, 0.1, 0.05]);
    let opaque: Vec<_> = subs.iter().cloned().map(Opaque).collect();
    let cfg = CouplingConfig::new(0.1, 1, CouplingMethod::DContinuity);
    let mut a = Stepper::new(&opaque, &c, cfg.clone()).unwrap();
    let mut b = Stepper::new(&subs, &c, cfg).unwrap();
    let s0 = b.initial_state(d0, 0.0).unwrap();
    let (x, diag) = a.step(&s0, None).unwrap();
    let (y, _) = b.step(&s0, None).unwrap();
    assert_eq!(diag.newton_iterations, 2);
    assert!(diag.last_correction <= 1e-12, "{}", diag.last_correction);
    assert!(max_diff(&x, &y) < 1e-12);
}

/// h(d) = -k d^3 with a cubic reaction; exercised through Newton.
struct Cubic {
    mass: CsrMatrix,
    k: f64,
    integrator: Integrator,
}

impl SubdomainModel for Cubic {
    fn dof_count(&self) -> usize {
        1
    }
    fn integrator(&self) -> Integrator {
        self.integrator
    }
    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    fn mass_stab(&self) -> Option<&CsrMatrix> {
        None
    }
    fn rate(&self, d: &[f64], _t: f64) -> Result<Vec<f64>, CouplingError> {
        Ok(vec![-self.k * d[0].powi(3)])
    }
    fn jacobian(&self, d: &[f64], _t: f64) -> Result<Cow<'_, CsrMatrix>, CouplingError> {
        Ok(Cow::Owned(CsrMatrix::diagonal(&[3.0 * self.k * d[0] * d[0]])))
    }
    fn is_linear(&self) -> bool {
        false
    }
    fn constant_jacobian(&self) -> bool {
        false
    }
}

#[test]
fn nonlinear_backward_euler_matches_scalar_newton() {
    // two halves of m d' = -k d^3 tied together behave as (m1+m2) d' = -(k1+k2) d^3
    let mk = |m: f64, k: f64| Cubic { mass: CsrMatrix::diagonal(&[m]), k, integrator: Integrator { theta: 1.0, dt_sub: 0.1 } };
    let subs = vec![mk(1.0, 2.0), mk(3.0, 1.0)];
    let rows = vec![ConstraintRow {
        node: None,
        entries: vec![ConstraintEntry { subdomain: 0, dof: 0, sign: 1.0 }, ConstraintEntry { subdomain: 1, dof: 0, sign: -1.0 }],
    }];
    let c = ConstraintMap::from_rows(rows, vec![1, 1]);
    let cfg = CouplingConfig::new(0.1, 5, CouplingMethod::DContinuity);
    let out = run(&subs, &c, vec![vec![1.0], vec![1.0]], &cfg, &mut []).unwrap();
    let mut y: f64 = 1.0;
    for _ in 0..5 {
        // 4 (y' - y)/h = -3 y'^3
        let mut z = y;
        for _ in 0..50 {
            let g = 4.0 * (z - y) / 0.1 + 3.0 * z.powi(3);
            let dg = 40.0 + 9.0 * z * z;
            z -= g / dg;
        }
        y = z;
    }
    let last = out.trajectory.last().unwrap();
    assert!((last.d[0][0] - y).abs() < 1e-10, "{} vs {}", last.d[0][0], y);
    assert!((last.d[1][0] - y).abs() < 1e-10);
    assert!(out.diagnostics.iter().all(|d| d.newton_iterations > 1));
}

#[test]
fn clipping_removes_negative_values() {
    let (subs, c, _) = fe_problem([FormulationTag::Galerkin; 3], [1.0; 3], [0.1; 3]);
    let d0: Vec<Vec<f64>> = subs.iter().map(|s| vec![-1.0; s.dof_count()]).collect();
    let mut cfg = CouplingConfig::new(0.1, 1, CouplingMethod::DContinuity);
    cfg.clip_negative = true;
    cfg.initial_lambda = InitialLambda::Zero;
    let out = run(&subs, &c, d0, &cfg, &mut []).unwrap();
    assert!(out.trajectory[1].d.iter().flatten().all(|&x| x >= 0.0));
    assert!(out.diagnostics[0].clipped > 0);
}
