//! The fully assembled monolithic block system and its Newton solve.
//!
//! Unknown ordering: for each subdomain `i` and sublevel `j = 1..eta_i` the
//! pair `[v_{i,j}; d_{i,j}]`, then the multiplier increment
//! `lambda^{n+1} - lambda^n`. Row `(i, j)` holds the momentum-like balance and
//! the trapezoidal relation; the final rows hold the constraint.

use super::{next_time, 
    constraint_value, CouplingConfig, CouplingError, CouplingMethod, StepDiagnostics, StepPerturbation,
    SubdomainModel, SystemState,
};
use crate::decomposition::ConstraintMap;
use crate::linalg::{norm_inf, CsrMatrix, SparseLu};

struct Layout {
    offsets: Vec<usize>,
    lambda: usize,
    total: usize,
}

impl Layout {
    fn new(ns: &[usize], etas: &[usize], nl: usize) -> Self {
        let mut offsets = Vec::with_capacity(ns.len());
        let mut o = 0;
        for (n, e) in ns.iter().zip(etas) {
            offsets.push(o);
            o += 2 * n * e;
        }
        Self { offsets, lambda: o, total: o + nl }
    }

    /// Offset of `v_{i,j}` (j is 1-based); `d_{i,j}` follows after `n` entries.
    fn v(&self, i: usize, j: usize, n: usize) -> usize {
        self.offsets[i] + 2 * (j - 1) * n
    }
}

/// Block matrix for the given per-level Jacobians `jacs[i][j-1]`.
fn build_matrix<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    config: &CouplingConfig,
    etas: &[usize],
    jacs: &[Vec<CsrMatrix>],
    lay: &Layout,
) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    for (i, s) in subs.iter().enumerate() {
        let n = s.dof_count();
        let g = s.integrator();
        let (th, h, eta) = (g.theta, g.dt_sub, etas[i]);
        for j in 1..=eta {
            let vj = lay.v(i, j, n);
            let dj = vj + n;
            // balance rows: (M + theta M_s) v_j + J d_j + (1-theta) M_s v_{j-1} - (j/eta) C^T dlambda
            t.extend(s.mass().triplets().map(|(r, c, x)| (vj + r, vj + c, x)));
            if let Some(ms) = s.mass_stab() {
                t.extend(ms.triplets().map(|(r, c, x)| (vj + r, vj + c, th * x)));
                if j > 1 {
                    let vp = lay.v(i, j - 1, n);
                    t.extend(ms.triplets().map(|(r, c, x)| (vj + r, vp + c, (1.0 - th) * x)));
                }
            }
            t.extend(jacs[i][j - 1].triplets().map(|(r, c, x)| (vj + r, dj + c, x)));
            let w = j as f64 / eta as f64;
            for &(row, dof, sign) in constraints.entries_of(i) {
                t.push((vj + dof, lay.lambda + row, -w * sign));
            }
            // trapezoidal rows: d_j - d_{j-1} - h((1-theta) v_{j-1} + theta v_j)
            for k in 0..n {
                t.push((dj + k, vj + k, -th * h));
                t.push((dj + k, dj + k, 1.0));
                if j > 1 {
                    let vp = lay.v(i, j - 1, n);
                    t.push((dj + k, vp + k, -(1.0 - th) * h));
                    t.push((dj + k, vp + n + k, -1.0));
                }
            }
        }
        let vf = lay.v(i, eta, n);
        let df = vf + n;
        for &(row, dof, sign) in constraints.entries_of(i) {
            match config.method {
                CouplingMethod::DContinuity => t.push((lay.lambda + row, df + dof, sign)),
                CouplingMethod::Baumgarte { alpha } => {
                    t.push((lay.lambda + row, vf + dof, sign));
                    t.push((lay.lambda + row, df + dof, alpha / config.dt * sign));
                }
            }
        }
    }
    CsrMatrix::from_triplets(lay.total, lay.total, &t)
}

/// The linear block system `A X = F` of one step, linearized at `d = d^n`,
/// with `F` built from `h(d^n) + J d^n` at each sublevel time.
pub fn monolithic_system<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    config: &CouplingConfig,
    state: &SystemState,
) -> Result<(CsrMatrix, Vec<f64>), CouplingError> {
    let integrators: Vec<_> = subs.iter().map(|s| s.integrator()).collect();
    let etas = config.validate(&integrators)?;
    let ns: Vec<usize> = subs.iter().map(|s| s.dof_count()).collect();
    let lay = Layout::new(&ns, &etas, constraints.row_count());
    let mut jacs = Vec::new();
    let mut rhs = vec![0.0; lay.total];
    for (i, s) in subs.iter().enumerate() {
        let n = ns[i];
        let g = s.integrator();
        let mut per = Vec::new();
        for j in 1..=etas[i] {
            let tj = state.time + j as f64 * g.dt_sub;
            let jac = s.jacobian(&state.d[i], tj)?.into_owned();
            let mut f = s.rate(&state.d[i], tj)?;
            jac.mul_vec_add(1.0, &state.d[i], &mut f);
            constraints.transpose_sub_add(i, &state.lambda, 1.0, &mut f);
            let vj = lay.v(i, j, n);
            if j == 1 {
                if let Some(ms) = s.mass_stab() {
                    ms.mul_vec_add(-(1.0 - g.theta), &state.v[i], &mut f);
                }
                for k in 0..n {
                    rhs[vj + n + k] = state.d[i][k] + (1.0 - g.theta) * g.dt_sub * state.v[i][k];
                }
            }
            rhs[vj..vj + n].copy_from_slice(&f);
            per.push(jac);
        }
        jacs.push(per);
    }
    Ok((build_matrix(subs, constraints, config, &etas, &jacs, &lay), rhs))
}

/// Newton iteration on the assembled system, starting from constant values.
pub(super) fn newton_step<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    config: &CouplingConfig,
    etas: &[usize],
    state: &SystemState,
    pert: Option<&StepPerturbation>,
) -> Result<(SystemState, StepDiagnostics), CouplingError> {
    let dt = config.dt;
    let ns: Vec<usize> = subs.iter().map(|s| s.dof_count()).collect();
    let nl = constraints.row_count();
    let lay = Layout::new(&ns, etas, nl);
    let mut x = vec![0.0; lay.total];
    for (i, &n) in ns.iter().enumerate() {
        for j in 1..=etas[i] {
            let vj = lay.v(i, j, n);
            x[vj..vj + n].copy_from_slice(&state.v[i]);
            x[vj + n..vj + 2 * n].copy_from_slice(&state.d[i]);
        }
    }
    let mut lam = state.lambda.clone();
    let mut target = vec![0.0; nl];
    if let Some(p) = pert {
        for (l, dl) in lam.iter_mut().zip(&p.delta_lambda) {
            *l += dt * dl;
        }
        let scale = match config.method {
            CouplingMethod::DContinuity => 1.0,
            CouplingMethod::Baumgarte { .. } => 1.0 / dt,
        };
        for (t, e) in target.iter_mut().zip(&p.eps_lambda) {
            *t = scale * e;
        }
    }
    let linear = subs.iter().all(|s| s.is_linear());
    let mut iterations = 0;
    let mut correction;
    loop {
        iterations += 1;
        let dlam = &x[lay.lambda..];
        let mut res = vec![0.0; lay.total];
        let mut jacs = Vec::with_capacity(subs.len());
        for (i, s) in subs.iter().enumerate() {
            let n = ns[i];
            let g = s.integrator();
            let (th, h, eta) = (g.theta, g.dt_sub, etas[i]);
            let mut per = Vec::with_capacity(eta);
            for j in 1..=eta {
                let vj = lay.v(i, j, n);
                let (v, d) = (&x[vj..vj + n], &x[vj + n..vj + 2 * n]);
                let (vp, dp) = if j == 1 {
                    (state.v[i].as_slice(), state.d[i].as_slice())
                } else {
                    let o = lay.v(i, j - 1, n);
                    (&x[o..o + n], &x[o + n..o + 2 * n])
                };
                let tj = state.time + j as f64 * h;
                let r1 = &mut res[vj..vj + n];
                s.mass().mul_vec_add(1.0, v, r1);
                if let Some(ms) = s.mass_stab() {
                    ms.mul_vec_add(th, v, r1);
                    ms.mul_vec_add(1.0 - th, vp, r1);
                }
                let hval = s.rate(d, tj)?;
                for k in 0..n {
                    r1[k] -= hval[k];
                }
                constraints.transpose_sub_add(i, &lam, -1.0, r1);
                constraints.transpose_sub_add(i, dlam, -(j as f64) / eta as f64, r1);
                let eps = pert.map(|p| p.eps_d[i].as_slice());
                for k in 0..n {
                    res[vj + n + k] =
                        d[k] - dp[k] - h * ((1.0 - th) * vp[k] + th * v[k]) - eps.map_or(0.0, |e| h * e[k]);
                }
                per.push(s.jacobian(d, tj)?.into_owned());
            }
            let vf = lay.v(i, eta, n);
            let (v, d) = (&x[vf..vf + n], &x[vf + n..vf + 2 * n]);
            let r = &mut res[lay.lambda..];
            match config.method {
                CouplingMethod::DContinuity => constraints.apply_sub_add(i, d, 1.0, r),
                CouplingMethod::Baumgarte { alpha } => {
                    constraints.apply_sub_add(i, v, 1.0, r);
                    constraints.apply_sub_add(i, d, alpha / dt, r);
                }
            }
            jacs.push(per);
        }
        for (r, t) in res[lay.lambda..].iter_mut().zip(&target) {
            *r -= t;
        }
        let a = build_matrix(subs, constraints, config, etas, &jacs, &lay);
        let lu = SparseLu::new(&a).map_err(|e| CouplingError::Linear { subdomain: None, source: e })?;
        res.iter_mut().for_each(|r| *r = -*r);
        lu.solve_in_place(&mut res);
        correction = norm_inf(&res);
        for (xi, dx) in x.iter_mut().zip(&res) {
            *xi += dx;
        }
        if linear || correction <= config.newton.abs_tol + config.newton.rel_tol * norm_inf(&x) {
            break;
        }
        if iterations >= config.newton.max_iterations || !correction.is_finite() {
            return Err(CouplingError::NewtonDiverged { iterations, correction });
        }
    }
    let mut d = Vec::with_capacity(subs.len());
    let mut v = Vec::with_capacity(subs.len());
    for (i, &n) in ns.iter().enumerate() {
        let vf = lay.v(i, etas[i], n);
        v.push(x[vf..vf + n].to_vec());
        d.push(x[vf + n..vf + 2 * n].to_vec());
    }
    let lambda: Vec<f64> = state.lambda.iter().zip(&x[lay.lambda..]).map(|(a, b)| a + b).collect();
    let next = SystemState { step: state.step + 1, time: next_time(state, dt), d, v, lambda };
    let g = constraint_value(constraints, config.method, dt, &next);
    let residual = norm_inf(&g.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
    let last_correction = if linear { 0.0 } else { correction };
    Ok((next, StepDiagnostics { newton_iterations: iterations, last_correction, constraint_residual: residual, clipped: 0 }))
}
