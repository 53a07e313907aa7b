use super::{CaseParams, FixtureKind, ProblemDefinition, ProblemError, SubdomainSetup};
use crate::assembly::{BoundaryConditions, FormulationTag, TransportCoefficients};
use crate::fields::{ScalarField, TensorField, VectorField};
use crate::mesh::{Mesh, PartitionMap};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

/// Baumgarte, implicit Euler in subdomains 1 and 3, midpoint in 2 and 4.
pub const DIFFUSION_CASE: CaseParams =
    CaseParams { dt: 1e-3, alpha: Some(100.0), dt_sub: &[5e-4, 1e-3, 5e-4, 1e-3], theta: &[1.0, 0.5, 1.0, 0.5] };

/// d-continuity, implicit Euler in subdomains 1 and 3, midpoint in 2 and 4.
pub const ADVECTIVE_CASE: CaseParams =
    CaseParams { dt: 0.1, alpha: None, dt_sub: &[0.01, 0.05, 0.01, 0.05], theta: &[1.0, 0.5, 1.0, 0.5] };

/// Coefficients of `n_A A + n_B B -> n_C C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stoichiometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Stoichiometry {
    pub const UNIT: Stoichiometry = Stoichiometry { a: 1.0, b: 1.0, c: 1.0 };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, ProblemError> {
        if a > 0.0 && b > 0.0 && c > 0.0 {
            Ok(Self { a, b, c })
        } else {
            Err(ProblemError::Invalid("stoichiometric coefficients must be positive".into()))
        }
    }
}

/// `(c_F, c_G) = (c_A + n_A/n_C c_C, c_B + n_B/n_C c_C)`.
pub fn invariants_transform(s: &Stoichiometry, ca: f64, cb: f64, cc: f64) -> [f64; 2] {
    [ca + s.a / s.c * cc, cb + s.b / s.c * cc]
}

/// Species from invariants under the fast-reaction assumption (A and B never coexist).
pub fn recover_species(s: &Stoichiometry, cf: f64, cg: f64) -> [f64; 3] {
    let r = s.a / s.b;
    let ca = (cf - r * cg).max(0.0);
    let cb = s.b / s.a * (-cf + r * cg).max(0.0);
    let cc = s.c / s.a * (cf - ca);
    [ca, cb, cc]
}

/// Two uncoupled invariant problems on a shared mesh and partition.
#[derive(Debug, Clone)]
pub struct BimolecularScenario {
    pub stoichiometry: Stoichiometry,
    pub f: ProblemDefinition,
    pub g: ProblemDefinition,
}

impl BimolecularScenario {
    /// Apply one case to both invariant problems.
    pub fn with_case(self, case: &CaseParams, t_end: f64) -> Self {
        Self { stoichiometry: self.stoichiometry, f: self.f.with_case(case, t_end), g: self.g.with_case(case, t_end) }
    }

    /// Species fields from nodal invariant fields.
    pub fn species(&self, cf: &[f64], cg: &[f64]) -> [Vec<f64>; 3] {
        let mut out = [Vec::with_capacity(cf.len()), Vec::with_capacity(cf.len()), Vec::with_capacity(cf.len())];
        for (&f, &g) in cf.iter().zip(cg) {
            let s = recover_species(&self.stoichiometry, f, g);
            for k in 0..3 {
                out[k].push(s[k]);
            }
        }
        out
    }
}

/// `D = [[g x^2 + y^2, -(1-g) x y], [-(1-g) x y, x^2 + g y^2]]`.
pub fn diffusion_tensor(gamma: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
    let [x, y] = x;
    let off = -(1.0 - gamma) * x * y;
    [[gamma * x * x + y * y, off], [off, x * x + gamma * y * y]]
}

pub const DIFFUSION_GAMMA: f64 = 0.001;

#[allow(clippy::too_many_arguments)]
fn invariant_problem(
    name: &str,
    mesh: Arc<Mesh>,
    partition: PartitionMap,
    coefficients: &TransportCoefficients,
    case: &CaseParams,
    t_end: f64,
    dirichlet: Vec<(String, ScalarField)>,
) -> ProblemDefinition {
    let subdomains = case
        .integrators()
        .into_iter()
        .map(|integrator| SubdomainSetup { formulation: FormulationTag::Galerkin, integrator, coefficients: coefficients.clone() })
        .collect();
    let mut coupling = case.coupling(t_end);
    coupling.clip_negative = true;
    ProblemDefinition {
        name: name.into(),
        mesh,
        partition,
        subdomains,
        bc: BoundaryConditions { dirichlet, neumann: vec![] },
        initial: ScalarField::constant(0.0),
        coupling,
        reference: None,
    }
}

fn check_four(p: &PartitionMap) -> Result<(), ProblemError> {
    if p.subdomain_count() != 4 {
        return Err(ProblemError::Invalid("bimolecular partitions must have four subdomains".into()));
    }
    Ok(())
}

/// Unit square with `c_A = 1` on the left edge, `c_B = 1` on the right edge,
/// zero flux on the top and bottom, all species initially zero; runs to `t = 0.1`.
pub fn diffusion_bimolecular_problem(full: bool, fixture_dir: Option<&Path>) -> Result<BimolecularScenario, ProblemError> {
    let (mesh, partition) = FixtureKind::BimolecularDiffusion.load(full, fixture_dir)?;
    check_four(&partition)?;
    let mesh = Arc::new(mesh);
    let coefficients = TransportCoefficients {
        velocity: VectorField::constant([0.0, 0.0]),
        velocity_divergence: Some(ScalarField::constant(0.0)),
        diffusivity: TensorField::space(|x| diffusion_tensor(DIFFUSION_GAMMA, x)),
        decay: 0.0,
        source: ScalarField::constant(0.0),
        gls_time_step: None,
    };
    let s = Stoichiometry::UNIT;
    let [fa, ga] = invariants_transform(&s, 1.0, 0.0, 0.0);
    let [fb, gb] = invariants_transform(&s, 0.0, 1.0, 0.0);
    let bc = |l: f64, r: f64| vec![("left".to_string(), ScalarField::constant(l)), ("right".to_string(), ScalarField::constant(r))];
    let case = &DIFFUSION_CASE;
    Ok(BimolecularScenario {
        stoichiometry: s,
        f: invariant_problem("bimolecular_diffusion_f", mesh.clone(), partition.clone(), &coefficients, case, 0.1, bc(fa, fb)),
        g: invariant_problem("bimolecular_diffusion_g", mesh, partition, &coefficients, case, 0.1, bc(ga, gb)),
    })
}

const LX: f64 = 4.0;
const LY: f64 = 1.0;
const MODES: [(f64, f64, f64); 3] = [(4.0, 1.0, 0.08), (5.0, 5.0, 0.02), (10.0, 10.0, 0.01)];

/// Velocity from the stream function
/// `psi = -y - sum A_k cos(p_k pi x / L_x - pi/2) sin(q_k pi y / L_y)`,
/// `v = (-psi_y, psi_x)`, differentiated in closed form.
pub fn stream_velocity(amplitudes: [f64; 3], x: [f64; 2]) -> [f64; 2] {
    let mut v = [1.0, 0.0];
    for ((p, q, _), a) in MODES.iter().zip(amplitudes) {
        let (kp, kq) = (p * PI / LX, q * PI / LY);
        let phase = kp * x[0] - PI / 2.0;
        let (sx, cx) = phase.sin_cos();
        let (sy, cy) = (kq * x[1]).sin_cos();
        v[0] += a * cx * kq * cy;
        v[1] += a * kp * sx * sy;
    }
    v
}

/// Closed-form velocity gradient, `[i][j] = d v_i / d x_j`.
pub fn stream_velocity_gradient(amplitudes: [f64; 3], x: [f64; 2]) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for ((p, q, _), a) in MODES.iter().zip(amplitudes) {
        let (kp, kq) = (p * PI / LX, q * PI / LY);
        let (sx, cx) = (kp * x[0] - PI / 2.0).sin_cos();
        let (sy, cy) = (kq * x[1]).sin_cos();
        g[0][0] -= a * kq * kp * sx * cy;
        g[0][1] -= a * kq * kq * cx * sy;
        g[1][0] += a * kp * kp * cx * sy;
        g[1][1] += a * kp * kq * sx * cy;
    }
    g
}

pub const ALPHA_L: f64 = 1.0;
pub const ALPHA_T: f64 = 1e-4;

/// `D = a_T |v| I + (a_L - a_T) / |v| v v^T`; `|v|` is floored at 1e-12.
pub fn advective_diffusivity(v: [f64; 2]) -> [[f64; 2]; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt().max(1e-12);
    let c = (ALPHA_L - ALPHA_T) / n;
    [[ALPHA_T * n + c * v[0] * v[0], c * v[0] * v[1]], [c * v[1] * v[0], ALPHA_T * n + c * v[1] * v[1]]]
}

/// Channel `[0, 4] x [0, 1]`: A (`c_A = 1`) enters through the lower half of
/// the left edge and B (`c_B = 1.5`) through the upper half; zero flux on the
/// other edges, all species initially zero; runs to `t = 4`.
pub fn advective_bimolecular_problem(full: bool, fixture_dir: Option<&Path>) -> Result<BimolecularScenario, ProblemError> {
    let (mesh, partition) = FixtureKind::BimolecularAdvection.load(full, fixture_dir)?;
    check_four(&partition)?;
    let mesh = Arc::new(mesh);
    let amps = [MODES[0].2, MODES[1].2, MODES[2].2];
    let coefficients = TransportCoefficients {
        velocity: VectorField::space(move |x| stream_velocity(amps, x)),
        velocity_divergence: Some(ScalarField::constant(0.0)),
        diffusivity: TensorField::space(move |x| advective_diffusivity(stream_velocity(amps, x))),
        decay: 0.0,
        source: ScalarField::constant(0.0),
        gls_time_step: None,
    };
    let s = Stoichiometry::UNIT;
    let inflow = move |x: [f64; 2]| if x[1] < 0.5 * LY { [1.0, 0.0] } else { [0.0, 1.5] };
    let f_in = move |x: [f64; 2]| {
        let [a, b] = inflow(x);
        invariants_transform(&s, a, b, 0.0)[0]
    };
    let g_in = move |x: [f64; 2]| {
        let [a, b] = inflow(x);
        invariants_transform(&s, a, b, 0.0)[1]
    };
    let case = &ADVECTIVE_CASE;
    Ok(BimolecularScenario {
        stoichiometry: s,
        f: invariant_problem(
            "bimolecular_advection_f",
            mesh.clone(),
            partition.clone(),
            &coefficients,
            case,
            4.0,
            vec![("left".into(), ScalarField::space(f_in))],
        ),
        g: invariant_problem(
            "bimolecular_advection_g",
            mesh,
            partition,
            &coefficients,
            case,
            4.0,
            vec![("left".into(), ScalarField::space(g_in))],
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transform_examples() {
        let s = Stoichiometry::UNIT;
        assert_eq!(invariants_transform(&s, 1.0, 0.0, 0.0), [1.0, 0.0]);
        assert_eq!(invariants_transform(&s, 0.0, 0.0, 1.0), [1.0, 1.0]);
        assert_eq!(recover_species(&s, 2.0, 0.5), [1.5, 0.0, 0.5]);
        let s = Stoichiometry::new(2.0, 3.0, 1.5).unwrap();
        // reaction front: c_F = (n_A / n_B) c_G
        let [a, b, c] = recover_species(&s, 2.0, 3.0);
        assert_eq!((a, b), (0.0, 0.0));
        assert!((c - 1.5 / 2.0 * 2.0).abs() < 1e-15);
        assert!(Stoichiometry::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn diffusion_tensor_values() {
        assert_eq!(diffusion_tensor(0.001, [1.0, 0.0]), [[0.001, 0.0], [0.0, 1.0]]);
        // det D = gamma (x^2 + y^2)^2
        let d = diffusion_tensor(0.001, [0.3, 0.7]);
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        assert!((det - 0.001 * (0.09f64 + 0.49).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn stream_velocity_properties() {
        assert_eq!(stream_velocity([0.0; 3], [1.3, 0.4]), [1.0, 0.0]);
        let a = [0.08, 0.02, 0.01];
        // against central differences of psi
        let psi = |x: f64, y: f64| {
            -y - MODES
                .iter()
                .zip(a)
                .map(|((p, q, _), a)| a * (p * PI * x / LX - PI / 2.0).cos() * (q * PI * y / LY).sin())
                .sum::<f64>()
        };
        let h = 1e-6;
        for &(x, y) in &[(0.3, 0.2), (2.1, 0.77), (3.9, 0.5)] {
            let v = stream_velocity(a, [x, y]);
            let vx = -(psi(x, y + h) - psi(x, y - h)) / (2.0 * h);
            let vy = (psi(x + h, y) - psi(x - h, y)) / (2.0 * h);
            assert!((v[0] - vx).abs() < 1e-8 && (v[1] - vy).abs() < 1e-8);
        }
        // no normal flow through the channel walls
        assert!(stream_velocity(a, [1.7, 0.0])[1].abs() < 1e-15);
        assert!(stream_velocity(a, [1.7, 1.0])[1].abs() < 1e-14);
    }

    #[test]
    fn longitudinal_eigenvector() {
        let v = stream_velocity([0.08, 0.02, 0.01], [0.9, 0.35]);
        let d = advective_diffusivity(v);
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let dv = [d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1]];
        assert!((dv[0] - ALPHA_L * n * v[0]).abs() < 1e-14);
        assert!((dv[1] - ALPHA_L * n * v[1]).abs() < 1e-14);
        let d0 = advective_diffusivity([0.0, 0.0]);
        assert!(d0[0][0] > 0.0 && d0[0][1] == 0.0 && d0[0][0] == d0[1][1]);
    }

    #[test]
    fn divergence_vanishes_at_centroids() {
        let sc = advective_bimolecular_problem(false, None).unwrap();
        let m = &sc.f.mesh;
        let amps = [0.08, 0.02, 0.01];
        for e in 0..m.element_count() {
            let g = stream_velocity_gradient(amps, m.centroid(e));
            assert!((g[0][0] + g[1][1]).abs() <= 1e-10);
        }
        // the gradient itself against central differences
        let h = 1e-6;
        for &x in &[[0.3, 0.2], [2.1, 0.77], [3.9, 0.5]] {
            let g = stream_velocity_gradient(amps, x);
            for j in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                let (vp, vm) = (stream_velocity(amps, xp), stream_velocity(amps, xm));
                for i in 0..2 {
                    assert!((g[i][j] - (vp[i] - vm[i]) / (2.0 * h)).abs() < 1e-6);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn recovery_properties(cf in 0.0f64..3.0, cg in 0.0f64..3.0, a in 0.2f64..3.0, b in 0.2f64..3.0, c in 0.2f64..3.0) {
            let s = Stoichiometry::new(a, b, c).unwrap();
            let [ca, cb, cc] = recover_species(&s, cf, cg);
            prop_assert!(ca >= 0.0 && cb >= 0.0 && cc >= 0.0);
            prop_assert_eq!(ca * cb, 0.0);
            let [f2, g2] = invariants_transform(&s, ca, cb, cc);
            prop_assert!((f2 - cf).abs() <= 1e-12 * (1.0 + cf));
            prop_assert!((g2 - cg).abs() <= 1e-12 * (1.0 + cg));
        }

        #[test]
        fn diffusion_tensor_symmetric_psd(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let d = diffusion_tensor(DIFFUSION_GAMMA, [x, y]);
            prop_assert_eq!(d[0][1], d[1][0]);
            prop_assert!(d[0][0] >= 0.0 && d[0][0] * d[1][1] - d[0][1] * d[1][0] >= -1e-15);
        }
    }
}
