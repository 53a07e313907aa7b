//! Finite element assembly of the semi-discrete subdomain systems
//! `M v + M_s v_s + K d = f` for the Galerkin, SUPG and GLS formulations.

use crate::decomposition::SubdomainDofs;
use crate::fields::{ScalarField, TensorField, VectorField};
use crate::linalg::CsrMatrix;
use crate::mesh::{ElementKind, Mesh};
use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("diffusivity is not symmetric at ({x}, {y}): off-diagonal {xy} vs {yx}")]
    AsymmetricDiffusivity { x: f64, y: f64, xy: f64, yx: f64 },
    #[error("characteristic diffusivity must be positive for the element Peclet number, got {0}")]
    DegenerateDiffusivity(f64),
    #[error("decay coefficient must be non-negative, got {0}")]
    NegativeDecay(f64),
    #[error("symmetric part of the transport matrix is indefinite: minimum eigenvalue {min_eig:e} (tolerance {tol:e})")]
    Indefinite { min_eig: f64, tol: f64 },
    #[error("unknown boundary set '{0}'")]
    UnknownSet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationTag {
    Galerkin,
    Supg,
    Gls,
}

impl FormulationTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Some(Self::Galerkin),
            "supg" => Some(Self::Supg),
            "gls" => Some(Self::Gls),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Galerkin => "galerkin",
            Self::Supg => "supg",
            Self::Gls => "gls",
        }
    }
}

/// Generalized trapezoidal parameters of one subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub theta: f64,
    pub dt_sub: f64,
}

/// Coefficients of `dc/dt + div(v c) - div(D grad c) + beta c = f`.
#[derive(Debug, Clone)]
pub struct TransportCoefficients {
    pub velocity: VectorField,
    /// Divergence of the velocity; computed by finite differences when absent.
    pub velocity_divergence: Option<ScalarField>,
    pub diffusivity: TensorField,
    pub decay: f64,
    pub source: ScalarField,
    /// Step used by the `w/dt` term of the GLS test operator; the subdomain
    /// step when absent.
    pub gls_time_step: Option<f64>,
}

impl TransportCoefficients {
    pub fn constant(velocity: [f64; 2], diffusivity: f64, decay: f64, source: f64) -> Self {
        Self {
            velocity: VectorField::constant(velocity),
            velocity_divergence: Some(ScalarField::constant(0.0)),
            diffusivity: TensorField::isotropic(diffusivity),
            decay,
            source: ScalarField::constant(source),
            gls_time_step: None,
        }
    }

    fn divergence(&self, x: [f64; 2], t: f64) -> f64 {
        match &self.velocity_divergence {
            Some(f) => f.eval(x, t),
            None => self.velocity.numerical_divergence(x, t),
        }
    }

    /// True when the transport operator (not only the load) changes in time.
    pub fn operator_time_dependent(&self) -> bool {
        self.velocity.is_time_dependent()
            || self.diffusivity.is_time_dependent()
            || self.velocity_divergence.as_ref().is_some_and(|d| d.is_time_dependent())
    }
}

/// Prescribed values and inward fluxes on named node sets.
#[derive(Debug, Clone, Default)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<(String, ScalarField)>,
    /// Prescribed `-n . D grad c` on the named sets.
    pub neumann: Vec<(String, ScalarField)>,
}

impl BoundaryConditions {
    pub fn dirichlet_set_names(&self) -> Vec<&str> {
        self.dirichlet.iter().map(|(s, _)| s.as_str()).collect()
    }

    /// Prescribed value at each Dirichlet node; later sets override earlier ones.
    pub fn dirichlet_values(&self, mesh: &Mesh, t: f64) -> Result<BTreeMap<usize, f64>, AssemblyError> {
        let mut out = BTreeMap::new();
        for (name, f) in &self.dirichlet {
            let set = mesh.boundary_set(name).ok_or_else(|| AssemblyError::UnknownSet(name.clone()))?;
            for &n in set {
                out.insert(n, f.eval(mesh.node(n), t));
            }
        }
        Ok(out)
    }

    fn dirichlet_rates(&self, mesh: &Mesh, t: f64) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (name, f) in &self.dirichlet {
            for &n in mesh.boundary_set(name).unwrap_or(&[]) {
                out.insert(n, f.time_derivative(mesh.node(n), t));
            }
        }
        out
    }

    fn time_dependent(&self) -> bool {
        self.dirichlet.iter().chain(&self.neumann).any(|(_, f)| f.is_time_dependent())
    }
}

/// Upwind function `coth(Pe) - 1/Pe`, with a series for small arguments.
pub fn upwind_function(pe: f64) -> f64 {
    if pe.is_infinite() {
        1.0
    } else if pe < 1e-3 {
        pe / 3.0 - pe.powi(3) / 45.0
    } else {
        1.0 / pe.tanh() - 1.0 / pe
    }
}

pub fn element_peclet(v_norm: f64, h_e: f64, d_char: f64) -> Result<f64, AssemblyError> {
    if !(d_char > 0.0) {
        return Err(AssemblyError::DegenerateDiffusivity(d_char));
    }
    Ok(h_e * v_norm / (2.0 * d_char))
}

/// Stabilization parameter `h/(2|v|) (coth Pe - 1/Pe)`; zero for zero velocity.
pub fn supg_tau(v_norm: f64, h_e: f64, peclet: f64) -> f64 {
    if v_norm == 0.0 {
        return 0.0;
    }
    h_e / (2.0 * v_norm) * upwind_function(peclet)
}

/// Stabilization parameter for GLS; the same expression as SUPG.
pub fn gls_tau(v_norm: f64, h_e: f64, peclet: f64) -> f64 {
    supg_tau(v_norm, h_e, peclet)
}

fn check_tensor(d: [[f64; 2]; 2], x: [f64; 2], dim: usize) -> Result<(), AssemblyError> {
    if dim == 2 {
        let scale = d[0][0].abs().max(d[1][1].abs()).max(d[0][1].abs()).max(1.0);
        if (d[0][1] - d[1][0]).abs() > 1e-12 * scale {
            return Err(AssemblyError::AsymmetricDiffusivity { x: x[0], y: x[1], xy: d[0][1], yx: d[1][0] });
        }
    }
    Ok(())
}

fn min_eigenvalue(d: [[f64; 2]; 2], dim: usize) -> f64 {
    if dim == 1 {
        return d[0][0];
    }
    let m = 0.5 * (d[0][0] + d[1][1]);
    let r = (0.25 * (d[0][0] - d[1][1]).powi(2) + d[0][1] * d[1][0]).max(0.0).sqrt();
    m - r
}

#[derive(Debug, Clone)]
pub(crate) struct QPoint {
    pub n: [f64; 4],
    pub grad: [[f64; 2]; 4],
    pub w: f64,
    pub x: [f64; 2],
}

/// Quadrature points with shape values and physical gradients.
pub(crate) fn quadrature(kind: ElementKind, c: &[[f64; 2]]) -> Vec<QPoint> {
    let g = 1.0 / 3f64.sqrt();
    match kind {
        ElementKind::Line2 => {
            let h = c[1][0] - c[0][0];
            [-g, g]
                .iter()
                .map(|&xi| {
                    let n = [(1.0 - xi) / 2.0, (1.0 + xi) / 2.0, 0.0, 0.0];
                    QPoint {
                        n,
                        grad: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2], [0.0; 2]],
                        w: h / 2.0,
                        x: [n[0] * c[0][0] + n[1] * c[1][0], 0.0],
                    }
                })
                .collect()
        }
        ElementKind::Tri3 => {
            let a2 = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
            let grad = [
                [(c[1][1] - c[2][1]) / a2, (c[2][0] - c[1][0]) / a2],
                [(c[2][1] - c[0][1]) / a2, (c[0][0] - c[2][0]) / a2],
                [(c[0][1] - c[1][1]) / a2, (c[1][0] - c[0][0]) / a2],
                [0.0; 2],
            ];
            let pts = [[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]];
            pts.iter()
                .map(|b| QPoint {
                    n: [b[0], b[1], b[2], 0.0],
                    grad,
                    w: a2 / 6.0,
                    x: [
                        b[0] * c[0][0] + b[1] * c[1][0] + b[2] * c[2][0],
                        b[0] * c[0][1] + b[1] * c[1][1] + b[2] * c[2][1],
                    ],
                })
                .collect()
        }
        ElementKind::Quad4 => {
            let sgn = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
            let mut out = Vec::with_capacity(4);
            for &eta in &[-g, g] {
                for &xi in &[-g, g] {
                    let mut n = [0.0; 4];
                    let mut dref = [[0.0; 2]; 4];
                    for a in 0..4 {
                        n[a] = 0.25 * (1.0 + xi * sgn[a][0]) * (1.0 + eta * sgn[a][1]);
                        dref[a] = [0.25 * sgn[a][0] * (1.0 + eta * sgn[a][1]), 0.25 * sgn[a][1] * (1.0 + xi * sgn[a][0])];
                    }
                    let mut j = [[0.0; 2]; 2];
                    let mut x = [0.0; 2];
                    for a in 0..4 {
                        for r in 0..2 {
                            x[r] += n[a] * c[a][r];
                            for s in 0..2 {
                                j[r][s] += c[a][r] * dref[a][s];
                            }
                        }
                    }
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
                    let mut grad = [[0.0; 2]; 4];
                    for a in 0..4 {
                        // grad = J^{-T} dref
                        grad[a] = [
                            inv[0][0] * dref[a][0] + inv[1][0] * dref[a][1],
                            inv[0][1] * dref[a][0] + inv[1][1] * dref[a][1],
                        ];
                    }
                    out.push(QPoint { n, grad, w: det, x });
                }
            }
            out
        }
    }
}

/// Element-level matrices; all sized `k x k` / `k`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ElementMatrices {
    pub mass: Vec<f64>,
    pub mass_stab: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub load: Vec<f64>,
}

pub(crate) struct ElementContext<'a> {
    pub mesh: &'a Mesh,
    pub coefficients: &'a TransportCoefficients,
    pub formulation: FormulationTag,
    pub integrator: Integrator,
}

impl ElementContext<'_> {
    pub fn tau(&self, e: usize, t: f64) -> Result<f64, AssemblyError> {
        if self.formulation == FormulationTag::Galerkin {
            return Ok(0.0);
        }
        let dim = self.mesh.dimension();
        let xc = self.mesh.centroid(e);
        let mut v = self.coefficients.velocity.eval(xc, t);
        if dim == 1 {
            v[1] = 0.0;
        }
        let d = self.coefficients.diffusivity.eval(xc, t);
        check_tensor(d, xc, dim)?;
        let vn = v[0].hypot(v[1]);
        let h = self.mesh.element_size(e);
        let pe = element_peclet(vn, h, min_eigenvalue(d, dim))?;
        Ok(match self.formulation {
            FormulationTag::Gls => gls_tau(vn, h, pe),
            _ => supg_tau(vn, h, pe),
        })
    }

    pub fn element(&self, e: usize, t: f64) -> Result<ElementMatrices, AssemblyError> {
        self.element_with_tau(e, t, self.tau(e, t)?)
    }

    pub fn element_with_tau(&self, e: usize, t: f64, tau: f64) -> Result<ElementMatrices, AssemblyError> {
        let el = &self.mesh.elements()[e];
        let k = el.nodes.len();
        let dim = self.mesh.dimension();
        let coords = self.mesh.element_coords(e);
        let beta = self.coefficients.decay;
        let gls_dt = self.coefficients.gls_time_step.unwrap_or(self.integrator.dt_sub);
        let mut out = ElementMatrices {
            mass: vec![0.0; k * k],
            mass_stab: vec![0.0; k * k],
            stiffness: vec![0.0; k * k],
            load: vec![0.0; k],
        };
        for q in quadrature(el.kind, &coords) {
            let mut v = self.coefficients.velocity.eval(q.x, t);
            if dim == 1 {
                v[1] = 0.0;
            }
            let d = self.coefficients.diffusivity.eval(q.x, t);
            check_tensor(d, q.x, dim)?;
            let react = self.coefficients.divergence(q.x, t) + beta;
            let f = self.coefficients.source.eval(q.x, t);
            let adv: Vec<f64> = (0..k).map(|b| v[0] * q.grad[b][0] + v[1] * q.grad[b][1]).collect();
            let test: Vec<f64> = (0..k)
                .map(|a| match self.formulation {
                    FormulationTag::Galerkin => 0.0,
                    FormulationTag::Supg => tau * adv[a],
                    FormulationTag::Gls => tau * (q.n[a] / gls_dt + adv[a] + react * q.n[a]),
                })
                .collect();
            for a in 0..k {
                out.load[a] += q.w * (q.n[a] + test[a]) * f;
                for b in 0..k {
                    let ga = q.grad[a];
                    let gb = q.grad[b];
                    let diff = ga[0] * (d[0][0] * gb[0] + d[0][1] * gb[1]) + ga[1] * (d[1][0] * gb[0] + d[1][1] * gb[1]);
                    let op_b = adv[b] + react * q.n[b];
                    out.mass[a * k + b] += q.w * q.n[a] * q.n[b];
                    out.mass_stab[a * k + b] += q.w * test[a] * q.n[b];
                    out.stiffness[a * k + b] += q.w * (diff + q.n[a] * op_b + test[a] * op_b);
                }
            }
        }
        Ok(out)
    }
}

/// Galerkin, stabilized and lifted operators of one subdomain at one time.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub mass: CsrMatrix,
    pub mass_stab: Option<CsrMatrix>,
    pub stiffness: CsrMatrix,
    /// Load including Dirichlet lifting and Neumann terms.
    pub forcing: Vec<f64>,
}

/// Everything needed to (re)assemble one subdomain.
#[derive(Debug, Clone)]
pub struct SubdomainAssembler {
    mesh: Arc<Mesh>,
    dofs: SubdomainDofs,
    coefficients: TransportCoefficients,
    formulation: FormulationTag,
    integrator: Integrator,
    bc: BoundaryConditions,
    // (facet nodes, flux index); facets on this subdomain's part of the boundary
    neumann_facets: Vec<([usize; 2], usize)>,
}

impl SubdomainAssembler {
    pub fn new(
        mesh: Arc<Mesh>,
        dofs: SubdomainDofs,
        coefficients: TransportCoefficients,
        formulation: FormulationTag,
        integrator: Integrator,
        bc: BoundaryConditions,
    ) -> Result<Self, AssemblyError> {
        if coefficients.decay < 0.0 {
            return Err(AssemblyError::NegativeDecay(coefficients.decay));
        }
        let mut owned = std::collections::BTreeSet::new();
        for &e in &dofs.elements {
            for f in element_facets(&mesh, e) {
                owned.insert(f);
            }
        }
        let mut neumann_facets = Vec::new();
        let boundary = mesh.boundary_facets();
        for (idx, (name, _)) in bc.neumann.iter().enumerate() {
            let set = mesh.boundary_set(name).ok_or_else(|| AssemblyError::UnknownSet(name.clone()))?;
            for f in &boundary {
                if owned.contains(f) && set.binary_search(&f[0]).is_ok() && set.binary_search(&f[1]).is_ok() {
                    neumann_facets.push((*f, idx));
                }
            }
        }
        for (name, _) in &bc.dirichlet {
            mesh.boundary_set(name).ok_or_else(|| AssemblyError::UnknownSet(name.clone()))?;
        }
        Ok(Self { mesh, dofs, coefficients, formulation, integrator, bc, neumann_facets })
    }

    pub fn dofs(&self) -> &SubdomainDofs {
        &self.dofs
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn operator_time_dependent(&self) -> bool {
        self.coefficients.operator_time_dependent()
    }

    pub fn load_time_dependent(&self) -> bool {
        self.coefficients.source.is_time_dependent() || self.bc.time_dependent()
    }

    fn context(&self) -> ElementContext<'_> {
        ElementContext {
            mesh: &self.mesh,
            coefficients: &self.coefficients,
            formulation: self.formulation,
            integrator: self.integrator,
        }
    }

    /// Element stabilization parameters, in subdomain element order.
    pub fn element_taus(&self, t: f64) -> Result<Vec<f64>, AssemblyError> {
        let ctx = self.context();
        self.dofs.elements.iter().map(|&e| ctx.tau(e, t)).collect()
    }

    pub fn assemble(&self, t: f64) -> Result<AssembledOperators, AssemblyError> {
        let n = self.dofs.dof_count();
        let ctx = self.context();
        let cp = self.bc.dirichlet_values(&self.mesh, t)?;
        let cp_rate = self.bc.dirichlet_rates(&self.mesh, t);
        let (mut tm, mut ts, mut tk) = (Vec::new(), Vec::new(), Vec::new());
        let mut f = vec![0.0; n];
        for &e in &self.dofs.elements {
            let em = ctx.element(e, t)?;
            let nodes = &self.mesh.elements()[e].nodes;
            let k = nodes.len();
            for a in 0..k {
                let Some(ra) = self.dofs.dof_of(nodes[a]) else { continue };
                f[ra] += em.load[a];
                for b in 0..k {
                    let (m, ms, kk) = (em.mass[a * k + b], em.mass_stab[a * k + b], em.stiffness[a * k + b]);
                    match self.dofs.dof_of(nodes[b]) {
                        Some(cb) => {
                            tm.push((ra, cb, m));
                            ts.push((ra, cb, ms));
                            tk.push((ra, cb, kk));
                        }
                        None => {
                            let c = cp[&nodes[b]];
                            let cdot = cp_rate[&nodes[b]];
                            f[ra] -= kk * c + (m + ms) * cdot;
                        }
                    }
                }
            }
        }
        self.add_neumann(t, &mut f);
        let mass_stab = match self.formulation {
            FormulationTag::Galerkin => None,
            _ => Some(CsrMatrix::from_triplets(n, n, &ts)),
        };
        Ok(AssembledOperators {
            mass: CsrMatrix::from_triplets(n, n, &tm),
            mass_stab,
            stiffness: CsrMatrix::from_triplets(n, n, &tk),
            forcing: f,
        })
    }

    /// Neumann contribution `-(w; q)` with `q = -n . D grad c`.
    fn add_neumann(&self, t: f64, f: &mut [f64]) {
        let g = 1.0 / 3f64.sqrt();
        for &(facet, idx) in &self.neumann_facets {
            let q = &self.bc.neumann[idx].1;
            if self.mesh.dimension() == 1 {
                if let Some(r) = self.dofs.dof_of(facet[0]) {
                    f[r] -= q.eval(self.mesh.node(facet[0]), t);
                }
                continue;
            }
            let (pa, pb) = (self.mesh.node(facet[0]), self.mesh.node(facet[1]));
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            for xi in [-g, g] {
                let (na, nb) = ((1.0 - xi) / 2.0, (1.0 + xi) / 2.0);
                let x = [na * pa[0] + nb * pb[0], na * pa[1] + nb * pb[1]];
                let qv = q.eval(x, t) * len / 2.0;
                if let Some(r) = self.dofs.dof_of(facet[0]) {
                    f[r] -= na * qv;
                }
                if let Some(r) = self.dofs.dof_of(facet[1]) {
                    f[r] -= nb * qv;
                }
            }
        }
    }
}

fn element_facets(mesh: &Mesh, e: usize) -> Vec<[usize; 2]> {
    let nodes = &mesh.elements()[e].nodes;
    if mesh.dimension() == 1 {
        return nodes.iter().map(|&v| [v, v]).collect();
    }
    let k = nodes.len();
    (0..k).map(|i| {
        let (a, b) = (nodes[i], nodes[(i + 1) % k]);
        [a.min(b), a.max(b)]
    }).collect()
}

/// Semi-discrete system of one subdomain: `M v + M_s v_s + K d = f(t)`,
/// where `v_s` is the trapezoidal rate `(d^{new} - d^{old}) / dt_sub`.
#[derive(Debug, Clone)]
pub struct SubdomainSystem {
    /// 1-based subdomain id.
    pub id: usize,
    pub formulation: FormulationTag,
    pub integrator: Integrator,
    pub mass: CsrMatrix,
    pub mass_stab: Option<CsrMatrix>,
    pub stiffness: CsrMatrix,
    /// Load at t = 0.
    pub forcing: Vec<f64>,
    /// Global node of each local dof (empty for purely algebraic systems).
    pub dof_to_node: Vec<usize>,
    assembler: Option<Arc<SubdomainAssembler>>,
}

impl SubdomainSystem {
    /// Algebraic system with constant matrices and load.
    pub fn from_matrices(id: usize, mass: CsrMatrix, stiffness: CsrMatrix, forcing: Vec<f64>, integrator: Integrator) -> Self {
        Self {
            id,
            formulation: FormulationTag::Galerkin,
            integrator,
            mass,
            mass_stab: None,
            stiffness,
            forcing,
            dof_to_node: Vec::new(),
            assembler: None,
        }
    }

    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }

    pub fn assembler(&self) -> Option<&Arc<SubdomainAssembler>> {
        self.assembler.as_ref()
    }

    /// `M + M_s`, the capacity seen by a rate that is constant over a step.
    pub fn total_mass(&self) -> CsrMatrix {
        match &self.mass_stab {
            Some(ms) => self.mass.add_scaled(1.0, ms),
            None => self.mass.clone(),
        }
    }

    pub fn operator_time_dependent(&self) -> bool {
        self.assembler.as_ref().is_some_and(|a| a.operator_time_dependent())
    }

    pub fn forcing_at(&self, t: f64) -> Result<Vec<f64>, AssemblyError> {
        match &self.assembler {
            Some(a) if a.load_time_dependent() || a.operator_time_dependent() => Ok(a.assemble(t)?.forcing),
            _ => Ok(self.forcing.clone()),
        }
    }

    pub fn stiffness_at(&self, t: f64) -> Result<std::borrow::Cow<'_, CsrMatrix>, AssemblyError> {
        match &self.assembler {
            Some(a) if a.operator_time_dependent() => Ok(std::borrow::Cow::Owned(a.assemble(t)?.stiffness)),
            _ => Ok(std::borrow::Cow::Borrowed(&self.stiffness)),
        }
    }
}

/// Assemble one subdomain at t = 0. Capacity matrices are kept from t = 0
/// even when the transport operator varies in time.
pub fn assemble_subdomain(
    mesh: Arc<Mesh>,
    dofs: &SubdomainDofs,
    coefficients: TransportCoefficients,
    formulation: FormulationTag,
    integrator: Integrator,
    bc: BoundaryConditions,
) -> Result<SubdomainSystem, AssemblyError> {
    let a = SubdomainAssembler::new(mesh, dofs.clone(), coefficients, formulation, integrator, bc)?;
    let ops = a.assemble(0.0)?;
    Ok(SubdomainSystem {
        id: dofs.id,
        formulation,
        integrator,
        mass: ops.mass,
        mass_stab: ops.mass_stab,
        stiffness: ops.stiffness,
        forcing: ops.forcing,
        dof_to_node: dofs.dof_to_node.clone(),
        assembler: Some(Arc::new(a)),
    })
}

/// Minimum eigenvalue of `(K + K^T)/2`; errors when it is below `-1e-10 |K|_inf`.
pub fn check_symmetric_part(k: &CsrMatrix) -> Result<f64, AssemblyError> {
    let tol = 1e-10 * k.norm_inf().max(f64::MIN_POSITIVE);
    let lmin = symmetric_part_min_eigenvalue(k);
    if lmin < -tol {
        return Err(AssemblyError::Indefinite { min_eig: lmin, tol });
    }
    Ok(lmin)
}

/// Dense symmetric eigensolve for moderate sizes, shifted power iteration above that.
pub fn symmetric_part_min_eigenvalue(k: &CsrMatrix) -> f64 {
    let n = k.nrows();
    if n == 0 {
        return 0.0;
    }
    let sym = k.add_scaled(1.0, &k.transpose()).scaled(0.5);
    if n <= 2500 {
        let d: DMatrix<f64> = sym.to_dense();
        return SymmetricEigen::new(d).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    }
    // power iteration on (sigma I - S), sigma >= lambda_max(S)
    let sigma = sym.norm_inf();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut mu = 0.0;
    for _ in 0..5000 {
        let sx = sym.mul_vec(&x);
        let y: Vec<f64> = x.iter().zip(&sx).map(|(a, b)| sigma * a - b).collect();
        let norm = crate::linalg::norm2(&y);
        if norm == 0.0 {
            return sigma;
        }
        let new_mu = crate::linalg::dot(&x, &y) / crate::linalg::dot(&x, &x);
        x = y.iter().map(|v| v / norm).collect();
        if (new_mu - mu).abs() <= 1e-12 * new_mu.abs().max(1.0) {
            mu = new_mu;
            break;
        }
        mu = new_mu;
    }
    sigma - mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::build_dof_maps;
    use crate::mesh::{interval_mesh, rectangle_mesh, Element, PartitionMap};
    use std::collections::BTreeSet;

    #[test]
    fn tau_limits() {
        // Pe -> infinity recovers h/(2|v|)
        assert!((supg_tau(1.0, 1.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        assert!((supg_tau(1.0, 1.0, 1e12) - 0.5).abs() < 1e-11);
        assert_eq!(supg_tau(0.0, 1.0, 0.0), 0.0);
        assert_eq!(upwind_function(0.0), 0.0);
        // coth(5) - 1/5, from the exponential definition of coth
        let coth5 = (1.0 + (-10f64).exp()) / (1.0 - (-10f64).exp());
        assert!((supg_tau(1.0, 0.1, 5.0) - 0.05 * (coth5 - 0.2)).abs() < 1e-15);
        assert!((supg_tau(1.0, 0.1, 5.0) - 0.0400045).abs() < 1e-7);
    }

    #[test]
    fn series_branch_is_continuous() {
        let a = upwind_function(1e-3 * (1.0 - 1e-12));
        let b = upwind_function(1e-3 * (1.0 + 1e-12));
        assert!((a - b).abs() < 1e-12);
        // small-argument expansion against the direct formula at a safe point
        let x: f64 = 0.01;
        assert!((x / 3.0 - x.powi(3) / 45.0 - (1.0 / x.tanh() - 1.0 / x)).abs() < 1e-10);
    }

    #[test]
    fn peclet_examples() {
        assert!((element_peclet(1.0, 0.1, 0.01).unwrap() - 5.0).abs() < 1e-14);
        assert!(element_peclet(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn line_element_matrices() {
        // h = 0.5: consistent mass h/6 [2 1; 1 2], stiffness D/h [1 -1; -1 1]
        let m = Mesh::new(1, vec![[0.0, 0.0], [0.5, 0.0]], vec![Element::new(ElementKind::Line2, vec![0, 1])], Default::default()).unwrap();
        let c = TransportCoefficients::constant([0.0, 0.0], 2.0, 0.0, 3.0);
        let ctx = ElementContext { mesh: &m, coefficients: &c, formulation: FormulationTag::Galerkin, integrator: Integrator { theta: 0.5, dt_sub: 0.1 } };
        let em = ctx.element(0, 0.0).unwrap();
        let h = 0.5;
        let mass = [h / 3.0, h / 6.0, h / 6.0, h / 3.0];
        let stiff = [4.0, -4.0, -4.0, 4.0];
        for i in 0..4 {
            assert!((em.mass[i] - mass[i]).abs() < 1e-15);
            assert!((em.stiffness[i] - stiff[i]).abs() < 1e-14);
        }
        assert!((em.load[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quad_and_tri_reproduce_linear_gradients() {
        let m = rectangle_mesh([0.0, 0.0], [2.0, 1.0], [1, 1], false).unwrap();
        let mt = rectangle_mesh([0.0, 0.0], [2.0, 1.0], [1, 1], true).unwrap();
        for (mesh, e) in [(&m, 0), (&mt, 0), (&mt, 1)] {
            let el = &mesh.elements()[e];
            let c = mesh.element_coords(e);
            let f = |p: [f64; 2]| 3.0 * p[0] - 2.0 * p[1] + 1.0;
            let mut w = 0.0;
            for q in quadrature(el.kind, &c) {
                let (mut gx, mut gy, mut val) = (0.0, 0.0, 0.0);
                for a in 0..el.nodes.len() {
                    gx += q.grad[a][0] * f(c[a]);
                    gy += q.grad[a][1] * f(c[a]);
                    val += q.n[a] * f(c[a]);
                }
                assert!((gx - 3.0).abs() < 1e-13 && (gy + 2.0).abs() < 1e-13);
                assert!((val - f(q.x)).abs() < 1e-13);
                w += q.w;
            }
            assert!((w - mesh.element_measure(e)).abs() < 1e-14);
        }
    }

    #[test]
    fn stabilized_mass_vanishes_without_velocity() {
        let (m, p) = interval_mesh(&[1.0], &[4]).unwrap();
        let maps = build_dof_maps(&m, &p, &BTreeSet::new()).unwrap();
        let c = TransportCoefficients::constant([0.0, 0.0], 0.1, 0.0, 0.0);
        let a = SubdomainAssembler::new(Arc::new(m), maps.subdomains[0].clone(), c, FormulationTag::Supg, Integrator { theta: 0.5, dt_sub: 0.1 }, Default::default()).unwrap();
        let ops = a.assemble(0.0).unwrap();
        assert_eq!(ops.mass_stab.unwrap().norm_inf(), 0.0);
    }

    #[test]
    fn gls_adds_time_scaled_mass() {
        // one element, v = 1, D = 1, beta = 0: check M_s against a direct quadrature
        let m = Mesh::new(1, vec![[0.0, 0.0], [1.0, 0.0]], vec![Element::new(ElementKind::Line2, vec![0, 1])], Default::default()).unwrap();
        let c = TransportCoefficients::constant([1.0, 0.0], 1.0, 0.0, 0.0);
        let dt = 0.25;
        let ctx = ElementContext { mesh: &m, coefficients: &c, formulation: FormulationTag::Gls, integrator: Integrator { theta: 1.0, dt_sub: dt } };
        let em = ctx.element(0, 0.0).unwrap();
        let tau = 0.5 * upwind_function(0.5);
        // int (N_a/dt + N_a') N_b: N_a' = -1, 1; int N_a N_b = [1/3 1/6; 1/6 1/3]; int N_b = 1/2
        let mass = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        let dn = [-1.0, 1.0];
        for a in 0..2 {
            for b in 0..2 {
                let expect = tau * (mass[a][b] / dt + dn[a] * 0.5);
                assert!((em.mass_stab[a * 2 + b] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dirichlet_lifting_matches_full_system() {
        // steady diffusion with c(0)=1, c(1)=0: f_free = -K_fd c_p
        let (m, p) = interval_mesh(&[1.0], &[4]).unwrap();
        let mesh = Arc::new(m);
        let dir: BTreeSet<usize> = [0, 4].into_iter().collect();
        let maps = build_dof_maps(&mesh, &p, &dir).unwrap();
        let bc = BoundaryConditions {
            dirichlet: vec![("left".into(), ScalarField::constant(1.0)), ("right".into(), ScalarField::constant(0.0))],
            neumann: vec![],
        };
        let c = TransportCoefficients::constant([0.0, 0.0], 1.0, 0.0, 0.0);
        let a = SubdomainAssembler::new(mesh, maps.subdomains[0].clone(), c, FormulationTag::Galerkin, Integrator { theta: 1.0, dt_sub: 1.0 }, bc).unwrap();
        let ops = a.assemble(0.0).unwrap();
        let u = crate::linalg::SparseLu::new(&ops.stiffness).unwrap().solve(&ops.forcing);
        for (i, ui) in u.iter().enumerate() {
            let x = (i + 1) as f64 * 0.25;
            assert!((ui - (1.0 - x)).abs() < 1e-13);
        }
    }

    #[test]
    fn neumann_flux_sign() {
        // -D c'' = 0, c(1) = 0, -n.D grad c = q on the left (n = -1): D c'(0) = q
        let (m, p) = interval_mesh(&[1.0], &[5]).unwrap();
        let mesh = Arc::new(m);
        let dir: BTreeSet<usize> = [5].into_iter().collect();
        let maps = build_dof_maps(&mesh, &p, &dir).unwrap();
        let bc = BoundaryConditions {
            dirichlet: vec![("right".into(), ScalarField::constant(0.0))],
            neumann: vec![("left".into(), ScalarField::constant(2.0))],
        };
        let c = TransportCoefficients::constant([0.0, 0.0], 1.0, 0.0, 0.0);
        let a = SubdomainAssembler::new(mesh, maps.subdomains[0].clone(), c, FormulationTag::Galerkin, Integrator { theta: 1.0, dt_sub: 1.0 }, bc).unwrap();
        let ops = a.assemble(0.0).unwrap();
        let u = crate::linalg::SparseLu::new(&ops.stiffness).unwrap().solve(&ops.forcing);
        // exact: c = 2 (x - 1)
        assert!((u[0] + 2.0).abs() < 1e-12, "{}", u[0]);
    }

    #[test]
    fn asymmetric_diffusivity_rejected() {
        let m = rectangle_mesh([0.0, 0.0], [1.0, 1.0], [1, 1], true).unwrap();
        let mut c = TransportCoefficients::constant([0.0, 0.0], 1.0, 0.0, 0.0);
        c.diffusivity = TensorField::constant([[1.0, 0.1], [0.0, 1.0]]);
        let ctx = ElementContext { mesh: &m, coefficients: &c, formulation: FormulationTag::Galerkin, integrator: Integrator { theta: 1.0, dt_sub: 1.0 } };
        assert!(matches!(ctx.element(0, 0.0), Err(AssemblyError::AsymmetricDiffusivity { .. })));
        let _ = PartitionMap::uniform(1);
    }

    #[test]
    fn galerkin_transport_is_positive_semidefinite() {
        // incompressible advection with homogeneous Dirichlet on all sides
        let m = rectangle_mesh([0.0, 0.0], [1.0, 1.0], [6, 6], true).unwrap();
        let p = PartitionMap::uniform(m.element_count());
        let dir = crate::decomposition::collect_set_nodes(&m, &["left", "right", "top", "bottom"]).unwrap();
        let maps = build_dof_maps(&m, &p, &dir).unwrap();
        let c = TransportCoefficients::constant([1.0, 0.5], 0.01, 0.0, 0.0);
        let bc = BoundaryConditions {
            dirichlet: ["left", "right", "top", "bottom"].iter().map(|s| (s.to_string(), ScalarField::constant(0.0))).collect(),
            neumann: vec![],
        };
        let a = SubdomainAssembler::new(Arc::new(m), maps.subdomains[0].clone(), c, FormulationTag::Galerkin, Integrator { theta: 1.0, dt_sub: 1.0 }, bc).unwrap();
        let ops = a.assemble(0.0).unwrap();
        assert!(check_symmetric_part(&ops.stiffness).unwrap() > 0.0);
        assert!(!ops.stiffness.is_symmetric(1e-12));
    }

    #[test]
    fn gls_on_uniform_rectangle_is_positive_semidefinite() {
        // Dirichlet inflow, free outflow; uniform elements give a uniform GLS weight
        let m = rectangle_mesh([0.0, 0.0], [2.0, 1.0], [12, 6], true).unwrap();
        let p = PartitionMap::uniform(m.element_count());
        let dir = crate::decomposition::collect_set_nodes(&m, &["left"]).unwrap();
        let maps = build_dof_maps(&m, &p, &dir).unwrap();
        let c = TransportCoefficients::constant([1.0, 0.0], 1e-3, 0.0, 0.0);
        let bc = BoundaryConditions { dirichlet: vec![("left".into(), ScalarField::constant(1.0))], neumann: vec![] };
        for dt_sub in [1e-3, 0.1, 1.0] {
            let g = Integrator { theta: 0.5, dt_sub };
            let a = SubdomainAssembler::new(Arc::new(m.clone()), maps.subdomains[0].clone(), c.clone(), FormulationTag::Gls, g, bc.clone()).unwrap();
            let ops = a.assemble(0.0).unwrap();
            assert!(check_symmetric_part(&ops.stiffness).is_ok(), "dt_sub {dt_sub}");
        }
    }

    fn element_case(tri: bool, stretch: f64, skew: f64) -> Mesh {
        let mut nodes = vec![[0.0, 0.0], [stretch, 0.0], [stretch + skew, 1.0], [skew, 1.0]];
        let elements = if tri {
            nodes.pop();
            vec![Element::new(ElementKind::Tri3, vec![0, 1, 2])]
        } else {
            vec![Element::new(ElementKind::Quad4, vec![0, 1, 2, 3])]
        };
        Mesh::new(2, nodes, elements, Default::default()).unwrap()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn zero_tau_reduces_to_galerkin(
            tri in proptest::bool::ANY, stretch in 0.2f64..3.0, skew in -0.5f64..0.5,
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, d in 1e-4f64..1.0, beta in 0.0f64..2.0, dt_sub in 1e-3f64..1.0,
        ) {
            let mesh = element_case(tri, stretch, skew);
            let c = TransportCoefficients::constant([vx, vy], d, beta, 1.0);
            let g = Integrator { theta: 0.5, dt_sub };
            let ctx = |f| ElementContext { mesh: &mesh, coefficients: &c, formulation: f, integrator: g };
            let gal = ctx(FormulationTag::Galerkin).element(0, 0.0).unwrap();
            for f in [FormulationTag::Supg, FormulationTag::Gls] {
                let e = ctx(f).element_with_tau(0, 0.0, 0.0).unwrap();
                let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14);
                proptest::prop_assert!(close(&e.mass, &gal.mass));
                proptest::prop_assert!(e.mass_stab.iter().all(|x| *x == 0.0));
                proptest::prop_assert!(close(&e.stiffness, &gal.stiffness));
                proptest::prop_assert!(close(&e.load, &gal.load));
            }
        }

        #[test]
        fn galerkin_mass_sums_to_subdomain_measure(
            nx in 1usize..7, ny in 1usize..7, tri in proptest::bool::ANY, w in 0.3f64..4.0, h in 0.3f64..4.0,
            split in 0.0f64..1.0,
        ) {
            let m = rectangle_mesh([0.0, 0.0], [w, h], [nx, ny], tri).unwrap();
            let ne = m.element_count();
            let cut = ((split * ne as f64) as usize).clamp(1, ne);
            let ids: Vec<usize> = (0..ne).map(|e| if e < cut { 1 } else { 2 }).collect();
            let p = PartitionMap::new(ids, ne).unwrap_or_else(|_| PartitionMap::uniform(ne));
            let maps = build_dof_maps(&m, &p, &BTreeSet::new()).unwrap();
            let mesh = Arc::new(m);
            for sd in &maps.subdomains {
                let c = TransportCoefficients::constant([0.3, -0.2], 0.1, 0.0, 0.0);
                let g = Integrator { theta: 1.0, dt_sub: 0.1 };
                let a = SubdomainAssembler::new(mesh.clone(), sd.clone(), c, FormulationTag::Galerkin, g, BoundaryConditions::default()).unwrap();
                let ops = a.assemble(0.0).unwrap();
                let total: f64 = ops.mass.to_dense().iter().sum();
                let measure: f64 = sd.elements.iter().map(|&e| mesh.element_measure(e)).sum();
                proptest::prop_assert!((total - measure).abs() <= 1e-10 * measure);
            }
        }
    }
}
