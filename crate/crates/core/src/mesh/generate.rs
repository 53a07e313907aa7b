use super::{signed_area, Element, ElementKind, Mesh, MeshError, PartitionMap};
use std::collections::BTreeMap;

/// Concatenated uniform intervals starting at x = 0; region k becomes subdomain k + 1.
/// Boundary sets: `left`, `right`.
pub fn interval_mesh(lengths: &[f64], counts: &[usize]) -> Result<(Mesh, PartitionMap), MeshError> {
    if lengths.len() != counts.len() || lengths.is_empty() {
        return Err(MeshError::Invalid("interval lengths and counts must be non-empty and match".into()));
    }
    let mut nodes = vec![[0.0, 0.0]];
    let mut elements = Vec::new();
    let mut ids = Vec::new();
    let mut x0 = 0.0;
    for (k, (&len, &n)) in lengths.iter().zip(counts).enumerate() {
        if n == 0 || !(len > 0.0) {
            return Err(MeshError::Invalid(format!("region {k} needs a positive length and element count")));
        }
        for j in 1..=n {
            let x = if j == n { x0 + len } else { x0 + len * j as f64 / n as f64 };
            nodes.push([x, 0.0]);
            let a = nodes.len() - 2;
            elements.push(Element::new(ElementKind::Line2, vec![a, a + 1]));
            ids.push(k + 1);
        }
        x0 += len;
    }
    let mut sets = BTreeMap::new();
    sets.insert("left".to_string(), vec![0]);
    sets.insert("right".to_string(), vec![nodes.len() - 1]);
    let ne = elements.len();
    Ok((Mesh::new(1, nodes, elements, sets)?, PartitionMap::new(ids, ne)?))
}

/// Structured rectangle of quads (or each quad split into two triangles).
/// Nodes are numbered row by row from the lower-left corner.
/// Boundary sets: `left`, `right`, `bottom`, `top`.
pub fn rectangle_mesh(
    origin: [f64; 2],
    size: [f64; 2],
    cells: [usize; 2],
    triangles: bool,
) -> Result<Mesh, MeshError> {
    let [nx, ny] = cells;
    if nx == 0 || ny == 0 {
        return Err(MeshError::Invalid("rectangle needs at least one cell per direction".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                origin[0] + size[0] * i as f64 / nx as f64,
                origin[1] + size[1] * j as f64 / ny as f64,
            ]);
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if triangles {
                elements.push(Element::new(ElementKind::Tri3, vec![a, b, c]));
                elements.push(Element::new(ElementKind::Tri3, vec![a, c, d]));
            } else {
                elements.push(Element::new(ElementKind::Quad4, vec![a, b, c, d]));
            }
        }
    }
    let mut sets = BTreeMap::new();
    sets.insert("left".into(), (0..=ny).map(|j| id(0, j)).collect());
    sets.insert("right".into(), (0..=ny).map(|j| id(nx, j)).collect());
    sets.insert("bottom".into(), (0..=nx).map(|i| id(i, 0)).collect());
    sets.insert("top".into(), (0..=nx).map(|i| id(i, ny)).collect());
    Mesh::new(2, nodes, elements, sets)
}

/// Geometry of the flow-past-a-hot-cylinder mesh: a unit circle at the origin
/// inside the rectangle `[x_min, x_max] x [-half_height, half_height]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HemkerMeshParams {
    pub x_min: f64,
    pub x_max: f64,
    pub half_height: f64,
    pub radius: f64,
    /// Half-width of the square around the circle meshed with an O-grid.
    pub core_half_width: f64,
    /// Refinement factor; 1 gives about two thousand triangles.
    pub refine: usize,
}

impl Default for HemkerMeshParams {
    fn default() -> Self {
        Self { x_min: -4.0, x_max: 10.0, half_height: 4.0, radius: 1.0, core_half_width: 2.0, refine: 1 }
    }
}

/// Triangulated O-grid around the circle plus a graded tensor grid elsewhere.
///
/// Subdomains: 1 is the O-grid ring, 2 the wake strip behind the core square,
/// 3 the remaining far field. Boundary sets: `circle`, `left`, `right`,
/// `bottom`, `top`.
pub fn hemker_mesh(p: &HemkerMeshParams) -> Result<(Mesh, PartitionMap), MeshError> {
    let r = p.refine.max(1);
    let c = p.core_half_width;
    if !(p.radius > 0.0 && c > p.radius && p.x_min < -c && p.x_max > c && p.half_height > c) {
        return Err(MeshError::Invalid("inconsistent cylinder mesh geometry".into()));
    }
    let fine = 16 * r;
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let mut v = Vec::new();
        let n_lo = (((-c - lo) / (0.5 / r as f64)).round() as usize).max(1);
        let n_hi = (((hi - c) / (0.5 / r as f64)).round() as usize).max(1);
        for k in 0..n_lo {
            v.push(lo + (-c - lo) * k as f64 / n_lo as f64);
        }
        for k in 0..fine {
            v.push(-c + 2.0 * c * k as f64 / fine as f64);
        }
        for k in 0..=n_hi {
            v.push(if k == n_hi { hi } else { c + (hi - c) * k as f64 / n_hi as f64 });
        }
        v
    };
    let xs = axis(p.x_min, p.x_max);
    let ys = axis(-p.half_height, p.half_height);
    let ix0 = xs.iter().position(|&x| x == -c).expect("core edge on grid");
    let iy0 = ys.iter().position(|&y| y == -c).expect("core edge on grid");
    let (ix1, iy1) = (ix0 + fine, iy0 + fine);

    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut grid = vec![vec![usize::MAX; ys.len()]; xs.len()];
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let inside = i > ix0 && i < ix1 && j > iy0 && j < iy1;
            if !inside {
                grid[i][j] = nodes.len();
                nodes.push([x, y]);
            }
        }
    }

    // perimeter of the core square, counterclockwise from the lower-left corner
    let mut perimeter = Vec::with_capacity(4 * fine);
    for k in 0..fine {
        perimeter.push((ix0 + k, iy0));
    }
    for k in 0..fine {
        perimeter.push((ix1, iy0 + k));
    }
    for k in 0..fine {
        perimeter.push((ix1 - k, iy1));
    }
    for k in 0..fine {
        perimeter.push((ix0, iy1 - k));
    }
    let nang = perimeter.len();
    // near-uniform annulus of circular layers (subdomain 1), then a blend to the square
    let inner_layers = 5 * r;
    let blend_layers = 3 * r;
    let layers = inner_layers + blend_layers;
    let annulus = p.radius + 0.5 * (c - p.radius);
    let mut ring = vec![vec![0usize; layers + 1]; nang];
    for (k, &(i, j)) in perimeter.iter().enumerate() {
        let outer = [xs[i], ys[j]];
        let phi = outer[1].atan2(outer[0]);
        let (cs, sn) = (phi.cos(), phi.sin());
        let mid = [annulus * cs, annulus * sn];
        for l in 0..layers {
            let x = if l <= inner_layers {
                let rad = p.radius + (annulus - p.radius) * l as f64 / inner_layers as f64;
                [rad * cs, rad * sn]
            } else {
                let s = (l - inner_layers) as f64 / blend_layers as f64;
                [mid[0] + s * (outer[0] - mid[0]), mid[1] + s * (outer[1] - mid[1])]
            };
            ring[k][l] = nodes.len();
            nodes.push(x);
        }
        ring[k][layers] = grid[i][j];
    }

    let mut elements = Vec::new();
    let mut ids = Vec::new();
    let mut push_tri = |mut t: [usize; 3], id: usize, nodes: &[[f64; 2]]| {
        if signed_area(&[nodes[t[0]], nodes[t[1]], nodes[t[2]]]) < 0.0 {
            t.swap(1, 2);
        }
        elements.push(Element::new(ElementKind::Tri3, t.to_vec()));
        ids.push(id);
    };
    for k in 0..nang {
        let k1 = (k + 1) % nang;
        for l in 0..layers {
            let (a, b, cc, d) = (ring[k][l], ring[k1][l], ring[k1][l + 1], ring[k][l + 1]);
            let id = if l < inner_layers { 1 } else { 3 };
            push_tri([a, b, cc], id, &nodes);
            push_tri([a, cc, d], id, &nodes);
        }
    }
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            if i >= ix0 && i < ix1 && j >= iy0 && j < iy1 {
                continue;
            }
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            let id = if cx > c && cy.abs() < c { 2 } else { 3 };
            let (a, b, cc, d) = (grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]);
            push_tri([a, b, cc], id, &nodes);
            push_tri([a, cc, d], id, &nodes);
        }
    }

    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut sets = BTreeMap::new();
    sets.insert("circle".into(), (0..nang).map(|k| ring[k][0]).collect());
    sets.insert("left".into(), (0..=ny).map(|j| grid[0][j]).collect());
    sets.insert("right".into(), (0..=ny).map(|j| grid[nx][j]).collect());
    sets.insert("bottom".into(), (0..=nx).map(|i| grid[i][0]).collect());
    sets.insert("top".into(), (0..=nx).map(|i| grid[i][ny]).collect());
    let ne = elements.len();
    Ok((Mesh::new(2, nodes, elements, sets)?, PartitionMap::new(ids, ne)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_regions() {
        let (m, p) = interval_mesh(&[0.1, 0.8, 0.1], &[100, 100, 100]).unwrap();
        assert_eq!(m.element_count(), 300);
        assert_eq!(m.node_count(), 301);
        assert_eq!(p.subdomain_count(), 3);
        assert_eq!(m.node(100)[0], 0.1);
        assert_eq!(m.node(200)[0], 0.9);
        assert_eq!(m.node(300)[0], 1.0);
        let total: f64 = (0..m.element_count()).map(|e| m.element_measure(e)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rectangle_area() {
        for tri in [false, true] {
            let m = rectangle_mesh([0.0, 0.0], [4.0, 1.0], [8, 3], tri).unwrap();
            let area: f64 = (0..m.element_count()).map(|e| m.element_measure(e)).sum();
            assert!((area - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hemker_area_and_partition() {
        let p = HemkerMeshParams::default();
        let (m, part) = hemker_mesh(&p).unwrap();
        let area: f64 = (0..m.element_count()).map(|e| m.element_measure(e)).sum();
        // hole is the polygon through the circle nodes, taken in angular order
        let mut ring: Vec<[f64; 2]> = m.boundary_set("circle").unwrap().iter().map(|&v| m.node(v)).collect();
        ring.sort_by(|a, b| a[1].atan2(a[0]).partial_cmp(&b[1].atan2(b[0])).unwrap());
        let poly = signed_area(&ring);
        assert!((area - (14.0 * 8.0 - poly)).abs() < 1e-9, "{area}");
        assert_eq!(part.subdomain_count(), 3);
        assert_eq!(m.boundary_set("circle").unwrap().len(), 64);
        for &v in m.boundary_set("circle").unwrap() {
            let q = m.node(v);
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - 1.0).abs() < 1e-14);
        }
        // every boundary facet lies on the outer rectangle or the circle
        for f in m.boundary_facets() {
            let on = |v: usize| {
                let q = m.node(v);
                q[0] == -4.0 || q[0] == 10.0 || q[1].abs() == 4.0 || ((q[0].hypot(q[1])) - 1.0).abs() < 1e-12
            };
            assert!(on(f[0]) && on(f[1]));
        }
    }
}
