use super::{BuiltProblem, CaseParams};
use crate::assembly::{BoundaryConditions, Integrator, SubdomainSystem};
use crate::decomposition::{ConstraintEntry, ConstraintMap, ConstraintRow};
use crate::fields::ScalarField;
use crate::linalg::CsrMatrix;

/// d-continuity cases: implicit Euler in subdomain 1, midpoint in subdomain 2.
pub const SDOF_DCONTINUITY_CASES: [CaseParams; 3] = [
    CaseParams { dt: 0.5, alpha: None, dt_sub: &[0.25, 0.5], theta: &[1.0, 0.5] },
    CaseParams { dt: 0.5, alpha: None, dt_sub: &[0.05, 0.1], theta: &[1.0, 0.5] },
    CaseParams { dt: 0.1, alpha: None, dt_sub: &[0.05, 0.1], theta: &[1.0, 0.5] },
];

/// Baumgarte cases: midpoint in subdomain 1, explicit Euler in subdomain 2.
pub const SDOF_BAUMGARTE_CASES: [CaseParams; 3] = [
    CaseParams { dt: 0.5, alpha: Some(1.0), dt_sub: &[0.1, 0.02], theta: &[0.5, 0.0] },
    CaseParams { dt: 0.1, alpha: Some(1.0), dt_sub: &[0.1, 0.02], theta: &[0.5, 0.0] },
    CaseParams { dt: 0.5, alpha: Some(25.0), dt_sub: &[0.1, 0.02], theta: &[0.5, 0.0] },
];

const M: [f64; 2] = [100.0, 1.0];
const K: [f64; 2] = [1.0, 100.0];

/// `m_i c_i' + k_i c_i = (+/-) lambda` with `c_1 = c_2`, both starting at 1.
pub fn sdof_problem(integrators: [Integrator; 2]) -> BuiltProblem {
    let subs = (0..2)
        .map(|i| {
            SubdomainSystem::from_matrices(
                i + 1,
                CsrMatrix::diagonal(&[M[i]]),
                CsrMatrix::diagonal(&[K[i]]),
                vec![0.0],
                integrators[i],
            )
        })
        .collect();
    let rows = vec![ConstraintRow {
        node: None,
        entries: vec![
            ConstraintEntry { subdomain: 0, dof: 0, sign: 1.0 },
            ConstraintEntry { subdomain: 1, dof: 0, sign: -1.0 },
        ],
    }];
    BuiltProblem {
        name: "sdof".into(),
        mesh: None,
        maps: None,
        bc: BoundaryConditions::default(),
        subs,
        constraints: ConstraintMap::from_rows(rows, vec![1, 1]),
        d0: vec![vec![1.0], vec![1.0]],
        reference: Some(ScalarField::space_time(|_, t| (-t).exp())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdofExact {
    pub c: f64,
    pub v: f64,
    pub lambda: f64,
}

/// The reduced system `(m1 + m2) c' + (k1 + k2) c = 0` gives `c = exp(-t)`.
pub fn sdof_exact(t: f64) -> SdofExact {
    let rate = (K[0] + K[1]) / (M[0] + M[1]);
    let c = (-rate * t).exp();
    let v = -rate * c;
    SdofExact { c, v, lambda: M[0] * v + K[0] * c }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let e = sdof_exact(1.0);
        assert!((e.c - 0.36787944117144233).abs() < 1e-15);
        assert!((sdof_exact(0.0).lambda + 99.0).abs() < 1e-12);
        assert!((e.lambda + 99.0 * (-1.0f64).exp()).abs() < 1e-12);
        // subdomain 2 balance: m2 c' + k2 c = -lambda
        assert!((M[1] * e.v + K[1] * e.c + e.lambda).abs() < 1e-12);
    }

    #[test]
    fn constraint_row_pattern() {
        let p = sdof_problem([Integrator { theta: 1.0, dt_sub: 0.1 }; 2]);
        assert_eq!(p.constraints.row_count(), 1);
        assert_eq!(p.constraints.entries_of(0), &[(0, 0, 1.0)]);
        assert_eq!(p.constraints.entries_of(1), &[(0, 0, -1.0)]);
    }
}
