//! Benchmark problems: the split single-dof system, 1D diffusion, the
//! singularly perturbed 1D problem, the transient Hemker problem and the two bimolecular scenarios.

mod bimolecular;
mod diffusion;
mod hemker;
mod sdof;
mod singular;

pub use bimolecular::{
    advective_bimolecular_problem, advective_diffusivity, diffusion_bimolecular_problem, diffusion_tensor,
    invariants_transform, recover_species, stream_velocity, stream_velocity_gradient, BimolecularScenario, Stoichiometry, ADVECTIVE_CASE,
    DIFFUSION_CASE,
};
pub use diffusion::{diffusion_1d_problem, DIFFUSION_1D_CASE, DIFFUSION_1D_D};
pub use hemker::{hemker_2d_problem, HemkerPlan, HEMKER_EPS, HEMKER_GALERKIN_CASES, HEMKER_SPLIT_CASES};
pub use sdof::{sdof_exact, sdof_problem, SdofExact, SDOF_BAUMGARTE_CASES, SDOF_DCONTINUITY_CASES};
pub use singular::{singular_1d_problem, singular_steady, singular_transient, SINGULAR_BAUMGARTE_CASES, SINGULAR_DCONTINUITY_CASES, SINGULAR_EPS};

use crate::assembly::{
    assemble_subdomain, AssemblyError, BoundaryConditions, FormulationTag, Integrator, SubdomainSystem,
    TransportCoefficients,
};
use crate::coupling::{CouplingConfig, CouplingMethod, SystemState};
use crate::decomposition::{build_constraints, build_dof_maps, collect_set_nodes, ConstraintMap, DecompositionError, DofMaps};
use crate::fields::ScalarField;
use crate::mesh::{
    hemker_mesh, read_mesh_file, read_partition_file, rectangle_mesh, HemkerMeshParams, Mesh, MeshError, PartitionMap,
};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("missing fixture {0}")]
    MissingFixture(String),
    #[error("{0}")]
    Invalid(String),
}

/// Time-integration parameters of one benchmark case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseParams {
    pub dt: f64,
    /// Baumgarte parameter; `None` selects d-continuity.
    pub alpha: Option<f64>,
    pub dt_sub: &'static [f64],
    pub theta: &'static [f64],
}

impl CaseParams {
    pub fn method(&self) -> CouplingMethod {
        match self.alpha {
            Some(alpha) => CouplingMethod::Baumgarte { alpha },
            None => CouplingMethod::DContinuity,
        }
    }

    /// Coupling settings advancing to `t_end` (rounded to whole system steps).
    pub fn coupling(&self, t_end: f64) -> CouplingConfig {
        CouplingConfig::new(self.dt, (t_end / self.dt).round() as usize, self.method())
    }

    pub fn integrators(&self) -> Vec<Integrator> {
        self.dt_sub.iter().zip(self.theta).map(|(&dt_sub, &theta)| Integrator { theta, dt_sub }).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SubdomainSetup {
    pub formulation: FormulationTag,
    pub integrator: Integrator,
    pub coefficients: TransportCoefficients,
}

/// A decomposed transport problem ready to be assembled.
#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub mesh: Arc<Mesh>,
    pub partition: PartitionMap,
    pub subdomains: Vec<SubdomainSetup>,
    pub bc: BoundaryConditions,
    pub initial: ScalarField,
    pub coupling: CouplingConfig,
    /// Exact solution `c(x, t)` when one is known.
    pub reference: Option<ScalarField>,
}

impl ProblemDefinition {
    /// Override the time integration of every subdomain.
    pub fn with_case(mut self, case: &CaseParams, t_end: f64) -> Self {
        for (s, g) in self.subdomains.iter_mut().zip(case.integrators()) {
            s.integrator = g;
        }
        let clip = self.coupling.clip_negative;
        self.coupling = case.coupling(t_end);
        self.coupling.clip_negative = clip;
        self
    }

    /// Use the system step instead of the subdomain step in the GLS test operator.
    pub fn with_system_step_gls(mut self) -> Self {
        let dt = self.coupling.dt;
        for s in &mut self.subdomains {
            s.coefficients.gls_time_step = Some(dt);
        }
        self
    }

    pub fn build(&self) -> Result<BuiltProblem, ProblemError> {
        if self.subdomains.len() != self.partition.subdomain_count() {
            return Err(ProblemError::Invalid(format!(
                "{} subdomain setups for {} partitions",
                self.subdomains.len(),
                self.partition.subdomain_count()
            )));
        }
        let names = self.bc.dirichlet_set_names();
        let dir = collect_set_nodes(&self.mesh, &names)?;
        for (n, _) in &self.bc.neumann {
            if self.mesh.boundary_set(n).is_none() {
                return Err(DecompositionError::UnknownSet(n.clone()).into());
            }
        }
        let maps = build_dof_maps(&self.mesh, &self.partition, &dir)?;
        let constraints = build_constraints(&maps);
        let mut subs = Vec::with_capacity(maps.subdomains.len());
        let mut d0 = Vec::with_capacity(maps.subdomains.len());
        for (dofs, setup) in maps.subdomains.iter().zip(&self.subdomains) {
            subs.push(assemble_subdomain(
                self.mesh.clone(),
                dofs,
                setup.coefficients.clone(),
                setup.formulation,
                setup.integrator,
                self.bc.clone(),
            )?);
            d0.push(dofs.dof_to_node.iter().map(|&n| self.initial.eval(self.mesh.node(n), 0.0)).collect());
        }
        Ok(BuiltProblem {
            name: self.name.clone(),
            mesh: Some(self.mesh.clone()),
            maps: Some(maps),
            bc: self.bc.clone(),
            subs,
            constraints,
            d0,
            reference: self.reference.clone(),
        })
    }
}

/// Assembled subdomain systems, constraints and initial values.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub name: String,
    pub mesh: Option<Arc<Mesh>>,
    pub maps: Option<DofMaps>,
    pub bc: BoundaryConditions,
    pub subs: Vec<SubdomainSystem>,
    pub constraints: ConstraintMap,
    pub d0: Vec<Vec<f64>>,
    pub reference: Option<ScalarField>,
}

impl BuiltProblem {
    /// Global nodal field: interface copies are averaged and Dirichlet nodes
    /// take their prescribed value at `state.time`. `None` for algebraic problems.
    pub fn nodal_field(&self, state: &SystemState) -> Option<Vec<f64>> {
        self.nodal_values(&state.d, state.time)
    }

    pub fn nodal_values(&self, d: &[Vec<f64>], time: f64) -> Option<Vec<f64>> {
        let mesh = self.mesh.as_ref()?;
        let n = mesh.node_count();
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for (s, di) in self.subs.iter().zip(d) {
            for (&node, &x) in s.dof_to_node.iter().zip(di) {
                sum[node] += x;
                count[node] += 1;
            }
        }
        if let Ok(vals) = self.bc.dirichlet_values(mesh, time) {
            for (node, v) in vals {
                sum[node] = v;
                count[node] = 1;
            }
        }
        Some(sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect())
    }

    pub fn dof_count(&self) -> usize {
        self.subs.iter().map(|s| s.dof_count()).sum()
    }
}

/// Lumped nodal weights: each element shares its measure equally among its nodes.
pub fn node_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.node_count()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let share = mesh.element_measure(e) / el.nodes.len() as f64;
        for &n in &el.nodes {
            w[n] += share;
        }
    }
    w
}

/// Weighted relative L2 difference `|a - b| / |b|` over the selected nodes.
pub fn relative_l2(weights: &[f64], a: &[f64], b: &[f64], nodes: impl IntoIterator<Item = usize>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for n in nodes {
        num += weights[n] * (a[n] - b[n]).powi(2);
        den += weights[n] * b[n].powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Shipped mesh fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Hemker,
    BimolecularDiffusion,
    BimolecularAdvection,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 3] = [Self::Hemker, Self::BimolecularDiffusion, Self::BimolecularAdvection];

    pub fn stem(self) -> &'static str {
        match self {
            Self::Hemker => "hemker",
            Self::BimolecularDiffusion => "bimolecular_diffusion",
            Self::BimolecularAdvection => "bimolecular_advection",
        }
    }

    /// File names `(mesh, partition)` of the reduced or full fixture.
    pub fn file_names(self, full: bool) -> (String, String) {
        let size = if full { "full" } else { "reduced" };
        (format!("{}_{size}.mesh", self.stem()), format!("{}_{size}.part", self.stem()))
    }

    /// Build the fixture mesh and partition from its generator.
    pub fn generate(self, full: bool) -> Result<(Mesh, PartitionMap), ProblemError> {
        match self {
            Self::Hemker => {
                let p = HemkerMeshParams { refine: if full { 2 } else { 1 }, ..Default::default() };
                Ok(hemker_mesh(&p)?)
            }
            Self::BimolecularDiffusion => {
                let n = if full { 74 } else { 40 };
                let mesh = rectangle_mesh([0.0, 0.0], [1.0, 1.0], [n, n], false)?;
                let part = block_partition([n, n], if full { 8 } else { 5 });
                Ok((mesh, part))
            }
            Self::BimolecularAdvection => {
                let (nx, ny) = if full { (92, 23) } else { (60, 15) };
                let mesh = rectangle_mesh([0.0, 0.0], [4.0, 1.0], [nx, ny], true)?;
                // two triangles per cell share the cell's block
                let cells = block_partition([nx, ny], if full { 6 } else { 5 });
                let ids = cells.ids().iter().flat_map(|&i| [i, i]).collect();
                Ok((mesh, PartitionMap::new(ids, 2 * nx * ny)?))
            }
        }
    }

    /// Load from `dir` when given, otherwise generate in memory.
    pub fn load(self, full: bool, dir: Option<&Path>) -> Result<(Mesh, PartitionMap), ProblemError> {
        match dir {
            None => self.generate(full),
            Some(dir) => {
                let (m, p) = self.file_names(full);
                let (mp, pp) = (dir.join(&m), dir.join(&p));
                if !mp.is_file() {
                    return Err(ProblemError::MissingFixture(mp.display().to_string()));
                }
                if !pp.is_file() {
                    return Err(ProblemError::MissingFixture(pp.display().to_string()));
                }
                let mesh = read_mesh_file(&mp)?;
                let part = read_partition_file(&pp, mesh.element_count())?;
                Ok((mesh, part))
            }
        }
    }
}

/// Four-way non-contiguous partition of a structured grid of cells: blocks of
/// `block x block` cells take id `((bx + 2 by) mod 4) + 1`.
pub fn block_partition(cells: [usize; 2], block: usize) -> PartitionMap {
    let mut ids = Vec::with_capacity(cells[0] * cells[1]);
    for j in 0..cells[1] {
        for i in 0..cells[0] {
            ids.push(((i / block + 2 * (j / block)) % 4) + 1);
        }
    }
    PartitionMap::new(ids, cells[0] * cells[1]).expect("block partition covers all four ids")
}
