//! Unstructured meshes, element partitions, file formats and generators.

mod generate;
mod io;

pub use generate::{hemker_mesh, interval_mesh, rectangle_mesh, HemkerMeshParams};
pub use io::{
    read_mesh_file, read_msh2, read_native, read_partition, read_partition_file, write_native,
    write_partition, MshData,
};

use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Line2,
    Tri3,
    Quad4,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Line2 => 2,
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 => 4,
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            ElementKind::Line2 => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Line2 => "line2",
            ElementKind::Tri3 => "tri3",
            ElementKind::Quad4 => "quad4",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "line2" => Some(ElementKind::Line2),
            "tri3" => Some(ElementKind::Tri3),
            "quad4" => Some(ElementKind::Quad4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
}

impl Element {
    pub fn new(kind: ElementKind, nodes: Vec<usize>) -> Self {
        Self { kind, nodes }
    }
}

/// Conforming mesh of line2, tri3 or quad4 elements. One-dimensional meshes
/// store the y coordinate as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dimension: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<Element>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    pub fn new(
        dimension: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<Element>,
        boundary_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let mut sets = boundary_sets;
        for v in sets.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let mesh = Self { dimension, nodes, elements, boundary_sets: sets };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.boundary_sets
    }

    pub fn boundary_set(&self, name: &str) -> Option<&[usize]> {
        self.boundary_sets.get(name).map(|v| v.as_slice())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 2]> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.element_coords(e);
        let k = c.len() as f64;
        let (sx, sy) = c.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / k, sy / k]
    }

    /// Characteristic element size: length for line2, longest edge for tri3,
    /// longest diagonal for quad4.
    pub fn element_size(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        match self.elements[e].kind {
            ElementKind::Line2 => dist(c[0], c[1]),
            ElementKind::Tri3 => dist(c[1], c[2]).max(dist(c[0], c[2])).max(dist(c[0], c[1])),
            ElementKind::Quad4 => dist(c[0], c[2]).max(dist(c[1], c[3])),
        }
    }

    /// Signed measure: length in 1D, signed area in 2D.
    pub fn element_measure(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        match self.elements[e].kind {
            ElementKind::Line2 => c[1][0] - c[0][0],
            _ => signed_area(&c),
        }
    }

    /// Facets that belong to exactly one element, as sorted node pairs (2D)
    /// or single nodes repeated (1D).
    pub fn boundary_facets(&self) -> Vec<[usize; 2]> {
        let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for el in &self.elements {
            for f in facets(el) {
                *count.entry(f).or_default() += 1;
            }
        }
        count.into_iter().filter(|(_, c)| *c == 1).map(|(f, _)| f).collect()
    }

    fn validate(&self) -> Result<(), MeshError> {
        if self.dimension != 1 && self.dimension != 2 {
            return Err(MeshError::Invalid(format!("unsupported dimension {}", self.dimension)));
        }
        if self.elements.is_empty() {
            return Err(MeshError::Invalid("mesh has no elements".into()));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(MeshError::Invalid(format!("node {i} has a non-finite coordinate")));
            }
        }
        let n = self.nodes.len();
        for (e, el) in self.elements.iter().enumerate() {
            if el.kind.dimension() != self.dimension {
                return Err(MeshError::Invalid(format!(
                    "element {e} ({}) does not match mesh dimension {}",
                    el.kind.name(),
                    self.dimension
                )));
            }
            if el.nodes.len() != el.kind.node_count() {
                return Err(MeshError::Invalid(format!("element {e} has {} nodes", el.nodes.len())));
            }
            if let Some(&bad) = el.nodes.iter().find(|&&v| v >= n) {
                return Err(MeshError::Invalid(format!("element {e} references missing node {bad}")));
            }
            let mut s = el.nodes.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != el.nodes.len() {
                return Err(MeshError::Invalid(format!("element {e} repeats a node")));
            }
            let m = self.element_measure(e);
            if !(m > 0.0) {
                return Err(MeshError::Invalid(format!(
                    "negative element area in element {e} (measure {m:e}); nodes must be counterclockwise"
                )));
            }
        }
        for (name, set) in &self.boundary_sets {
            if let Some(&bad) = set.iter().find(|&&v| v >= n) {
                return Err(MeshError::Invalid(format!("boundary set '{name}' references missing node {bad}")));
            }
        }
        // coincident but distinct nodes indicate a non-conforming interface
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        let mut used = vec![false; n];
        for el in &self.elements {
            for &v in &el.nodes {
                used[v] = true;
            }
        }
        for (i, p) in self.nodes.iter().enumerate().filter(|(i, _)| used[*i]) {
            let key = ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits());
            if let Some(j) = seen.insert(key, i) {
                return Err(MeshError::Invalid(format!(
                    "non-conforming mesh: nodes {j} and {i} coincide but are distinct"
                )));
            }
        }
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for el in &self.elements {
            for f in facets(el) {
                *count.entry(f).or_default() += 1;
            }
        }
        if let Some((f, c)) = count.iter().find(|(_, c)| **c > 2) {
            return Err(MeshError::Invalid(format!("non-conforming mesh: facet {f:?} shared by {c} elements")));
        }
        Ok(())
    }
}

fn facets(el: &Element) -> Vec<[usize; 2]> {
    match el.kind {
        ElementKind::Line2 => el.nodes.iter().map(|&v| [v, v]).collect(),
        _ => {
            let k = el.nodes.len();
            (0..k)
                .map(|i| {
                    let (a, b) = (el.nodes[i], el.nodes[(i + 1) % k]);
                    [a.min(b), a.max(b)]
                })
                .collect()
        }
    }
}

/// Shoelace formula; positive for counterclockwise ordering.
pub fn signed_area(c: &[[f64; 2]]) -> f64 {
    let k = c.len();
    0.5 * (0..k)
        .map(|i| {
            let (p, q) = (c[i], c[(i + 1) % k]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// Element to subdomain assignment with 1-based, contiguous subdomain ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    ids: Vec<usize>,
    count: usize,
}

impl PartitionMap {
    pub fn new(ids: Vec<usize>, element_count: usize) -> Result<Self, MeshError> {
        if ids.len() != element_count {
            return Err(MeshError::Partition(format!(
                "partition lists {} elements but mesh has {element_count}",
                ids.len()
            )));
        }
        let count = ids.iter().copied().max().unwrap_or(0);
        if ids.iter().any(|&i| i == 0) {
            return Err(MeshError::Partition("subdomain ids start at 1".into()));
        }
        let mut present = vec![false; count + 1];
        for &i in &ids {
            present[i] = true;
        }
        if let Some(missing) = (1..=count).find(|&i| !present[i]) {
            return Err(MeshError::Partition(format!("subdomain {missing} has no elements")));
        }
        Ok(Self { ids, count })
    }

    pub fn uniform(element_count: usize) -> Self {
        Self { ids: vec![1; element_count], count: usize::from(element_count > 0) }
    }

    pub fn subdomain_count(&self) -> usize {
        self.count
    }

    pub fn subdomain_of(&self, element: usize) -> usize {
        self.ids[element]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn elements_of(&self, subdomain: usize) -> Vec<usize> {
        (0..self.ids.len()).filter(|&e| self.ids[e] == subdomain).collect()
    }
}
