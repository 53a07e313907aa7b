//! Per-subdomain degree-of-freedom numbering and the signed Boolean
//! interface constraint matrices.

use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, PartitionMap};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("subdomain {0} has no free degrees of freedom")]
    EmptySubdomain(usize),
    #[error("unknown boundary set '{0}'")]
    UnknownSet(String),
    #[error("constraint rows are rank deficient ({rank} of {rows})")]
    RankDeficient { rank: usize, rows: usize },
}

/// Local numbering of one subdomain: free nodes touched by the subdomain's
/// elements, in ascending global node order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainDofs {
    /// 1-based subdomain id.
    pub id: usize,
    pub elements: Vec<usize>,
    pub dof_to_node: Vec<usize>,
    node_to_dof: BTreeMap<usize, usize>,
    /// Prescribed nodes touched by this subdomain.
    pub dirichlet_nodes: Vec<usize>,
}

impl SubdomainDofs {
    pub fn dof_count(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.node_to_dof.get(&node).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMaps {
    pub subdomains: Vec<SubdomainDofs>,
    pub dirichlet: BTreeSet<usize>,
}

/// Nodes in the named boundary sets.
pub fn collect_set_nodes(mesh: &Mesh, names: &[&str]) -> Result<BTreeSet<usize>, DecompositionError> {
    let mut out = BTreeSet::new();
    for name in names {
        let set = mesh.boundary_set(name).ok_or_else(|| DecompositionError::UnknownSet(name.to_string()))?;
        out.extend(set.iter().copied());
    }
    Ok(out)
}

/// Number free nodes per subdomain. Dirichlet nodes are eliminated from every
/// subdomain that touches them, including interface nodes.
pub fn build_dof_maps(
    mesh: &Mesh,
    partition: &PartitionMap,
    dirichlet: &BTreeSet<usize>,
) -> Result<DofMaps, DecompositionError> {
    let mut subdomains = Vec::with_capacity(partition.subdomain_count());
    for id in 1..=partition.subdomain_count() {
        let elements = partition.elements_of(id);
        let touched: BTreeSet<usize> =
            elements.iter().flat_map(|&e| mesh.elements()[e].nodes.iter().copied()).collect();
        let dof_to_node: Vec<usize> = touched.iter().copied().filter(|n| !dirichlet.contains(n)).collect();
        if dof_to_node.is_empty() {
            return Err(DecompositionError::EmptySubdomain(id));
        }
        let node_to_dof = dof_to_node.iter().enumerate().map(|(d, &n)| (n, d)).collect();
        let dirichlet_nodes = touched.iter().copied().filter(|n| dirichlet.contains(n)).collect();
        subdomains.push(SubdomainDofs { id, elements, dof_to_node, node_to_dof, dirichlet_nodes });
    }
    Ok(DofMaps { subdomains, dirichlet: dirichlet.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintEntry {
    /// 0-based subdomain index.
    pub subdomain: usize,
    pub dof: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    /// Global node the row ties together, when there is one.
    pub node: Option<usize>,
    pub entries: Vec<ConstraintEntry>,
}

/// The stacked constraint operator `[C_1 ... C_S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMap {
    rows: Vec<ConstraintRow>,
    dof_counts: Vec<usize>,
    // per subdomain: (row, dof, sign)
    by_subdomain: Vec<Vec<(usize, usize, f64)>>,
}

impl ConstraintMap {
    pub fn from_rows(rows: Vec<ConstraintRow>, dof_counts: Vec<usize>) -> Self {
        let mut by_subdomain = vec![Vec::new(); dof_counts.len()];
        for (r, row) in rows.iter().enumerate() {
            for e in &row.entries {
                assert!(e.dof < dof_counts[e.subdomain], "constraint entry out of range");
                by_subdomain[e.subdomain].push((r, e.dof, e.sign));
            }
        }
        Self { rows, dof_counts, by_subdomain }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn subdomain_count(&self) -> usize {
        self.dof_counts.len()
    }

    pub fn dof_counts(&self) -> &[usize] {
        &self.dof_counts
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// (row, dof, sign) triples of `C_i`.
    pub fn entries_of(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.by_subdomain[i]
    }

    /// Local dofs of subdomain `i` that appear in some constraint row.
    pub fn interface_dofs(&self, i: usize) -> Vec<usize> {
        let s: BTreeSet<usize> = self.by_subdomain[i].iter().map(|e| e.1).collect();
        s.into_iter().collect()
    }

    /// out += scale * C_i x_i
    pub fn apply_sub_add(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(r, d, s) in &self.by_subdomain[i] {
            out[r] += scale * s * x[d];
        }
    }

    /// out += scale * C_i^T lambda
    pub fn transpose_sub_add(&self, i: usize, lambda: &[f64], scale: f64, out: &mut [f64]) {
        for &(r, d, s) in &self.by_subdomain[i] {
            out[d] += scale * s * lambda[r];
        }
    }

    /// Sum_i C_i x_i
    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (i, xi) in x.iter().enumerate() {
            self.apply_sub_add(i, xi, 1.0, &mut out);
        }
        out
    }

    pub fn transpose_sub(&self, i: usize, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_counts[i]];
        self.transpose_sub_add(i, lambda, 1.0, &mut out);
        out
    }

    pub fn block_csr(&self, i: usize) -> CsrMatrix {
        let t: Vec<_> = self.by_subdomain[i].iter().map(|&(r, d, s)| (r, d, s)).collect();
        CsrMatrix::from_triplets(self.rows.len(), self.dof_counts[i], &t)
    }

    /// Dense `[C_1 ... C_S]`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let total: usize = self.dof_counts.iter().sum();
        let mut a = DMatrix::zeros(self.rows.len(), total);
        let mut off = 0;
        for (i, n) in self.dof_counts.iter().enumerate() {
            for &(r, d, s) in &self.by_subdomain[i] {
                a[(r, off + d)] += s;
            }
            off += n;
        }
        a
    }

    pub fn rank(&self) -> usize {
        if self.rows.is_empty() {
            return 0;
        }
        self.to_dense().rank(1e-10)
    }
}

/// Chain constraints for every free node shared by two or more subdomains.
/// A node shared by `k` subdomains `s_1 < ... < s_k` yields `k - 1` rows
/// `d_{s_j} - d_{s_{j+1}} = 0`; rows are ordered by node id, then chain position.
pub fn build_constraints(maps: &DofMaps) -> ConstraintMap {
    let mut sharing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in maps.subdomains.iter().enumerate() {
        for &n in &s.dof_to_node {
            sharing.entry(n).or_default().push(i);
        }
    }
    let mut rows = Vec::new();
    for (node, subs) in sharing {
        for w in subs.windows(2) {
            let (a, b) = (w[0], w[1]);
            rows.push(ConstraintRow {
                node: Some(node),
                entries: vec![
                    ConstraintEntry { subdomain: a, dof: maps.subdomains[a].dof_of(node).unwrap(), sign: 1.0 },
                    ConstraintEntry { subdomain: b, dof: maps.subdomains[b].dof_of(node).unwrap(), sign: -1.0 },
                ],
            });
        }
    }
    ConstraintMap::from_rows(rows, maps.subdomains.iter().map(|s| s.dof_count()).collect())
}
