use super::{CouplingError, InitialLambda, SubdomainModel, SystemState};
use crate::decomposition::ConstraintMap;
use crate::linalg::{CsrMatrix, DenseLu, SparseLu};
use nalgebra::DMatrix;

fn capacity<S: SubdomainModel>(s: &S) -> CsrMatrix {
    match s.mass_stab() {
        Some(ms) => s.mass().add_scaled(1.0, ms),
        None => s.mass().clone(),
    }
}

/// Rates and multipliers at `t0`: with `Consistent`, lambda solves
/// `(sum C M^-1 C^T) lambda = -sum C M^-1 h(d0)` and `v = M^-1 (h + C^T lambda)`.
pub(super) fn initial_state<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    d0: Vec<Vec<f64>>,
    t0: f64,
    mode: InitialLambda,
) -> Result<SystemState, CouplingError> {
    if d0.len() != subs.len() || d0.iter().zip(subs).any(|(d, s)| d.len() != s.dof_count()) {
        return Err(CouplingError::Config("initial values do not match the subdomain systems".into()));
    }
    let nl = constraints.row_count();
    let mut lus = Vec::with_capacity(subs.len());
    let mut hs = Vec::with_capacity(subs.len());
    for (i, s) in subs.iter().enumerate() {
        let lu = SparseLu::new(&capacity(s)).map_err(|e| CouplingError::Linear { subdomain: Some(i + 1), source: e })?;
        lus.push(lu);
        hs.push(s.rate(&d0[i], t0)?);
    }
    let lambda = match mode {
        InitialLambda::Zero => vec![0.0; nl],
        InitialLambda::Consistent if nl == 0 => Vec::new(),
        InitialLambda::Consistent => {
            let mut schur = DMatrix::zeros(nl, nl);
            let mut rhs = vec![0.0; nl];
            for (i, lu) in lus.iter().enumerate() {
                let mh = lu.solve(&hs[i]);
                constraints.apply_sub_add(i, &mh, -1.0, &mut rhs);
                // columns M^-1 C_i^T e_r for the rows touching subdomain i
                let rows: std::collections::BTreeSet<usize> = constraints.entries_of(i).iter().map(|e| e.0).collect();
                let rows: Vec<usize> = rows.into_iter().collect();
                let n = subs[i].dof_count();
                let mut data = vec![0.0; n * rows.len()];
                for (c, &r) in rows.iter().enumerate() {
                    let mut e = vec![0.0; nl];
                    e[r] = 1.0;
                    constraints.transpose_sub_add(i, &e, 1.0, &mut data[c * n..(c + 1) * n]);
                }
                lu.solve_columns(&mut data, rows.len());
                for (c, &r) in rows.iter().enumerate() {
                    let mut col = vec![0.0; nl];
                    constraints.apply_sub_add(i, &data[c * n..(c + 1) * n], 1.0, &mut col);
                    for (k, v) in col.iter().enumerate() {
                        schur[(k, r)] += v;
                    }
                }
            }
            DenseLu::new(schur).map_err(|e| CouplingError::Linear { subdomain: None, source: e })?.solve(&rhs)
        }
    };
    let v = lus
        .iter()
        .enumerate()
        .map(|(i, lu)| {
            let mut b = hs[i].clone();
            constraints.transpose_sub_add(i, &lambda, 1.0, &mut b);
            lu.solve(&b)
        })
        .collect();
    Ok(SystemState { step: 0, time: t0, d: d0, v, lambda })
}
