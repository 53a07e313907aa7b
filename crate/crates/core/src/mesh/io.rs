use super::{Element, ElementKind, Mesh, MeshError, PartitionMap};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn perr(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

struct Cursor<'a, I: Iterator<Item = (usize, &'a str)>> {
    it: I,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Cursor<'a, I> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        match self.it.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(perr(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn keyword(&mut self, key: &str) -> Result<usize, MeshError> {
        let (n, l) = self.next(key)?;
        let mut t = l.split_whitespace();
        if t.next() != Some(key) {
            return Err(perr(n, format!("expected '{key} <count>', found '{l}'")));
        }
        let v = t.next().ok_or_else(|| perr(n, format!("missing value after '{key}'")))?;
        v.parse().map_err(|_| perr(n, format!("invalid integer '{v}'")))
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, MeshError> {
    tok.parse().map_err(|_| perr(line, format!("invalid number '{tok}'")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, MeshError> {
    tok.parse().map_err(|_| perr(line, format!("invalid integer '{tok}'")))
}

/// Parse the native text format.
///
/// ```text
/// mts-mesh 1
/// dimension 2
/// nodes 3
/// 0 0
/// 1 0
/// 0 1
/// elements 1
/// tri3 0 1 2
/// sets 1
/// left 0 2
/// ```
pub fn read_native(text: &str) -> Result<Mesh, MeshError> {
    let mut c = Cursor { it: content_lines(text), last: 0 };
    let version = c.keyword("mts-mesh")?;
    if version != 1 {
        return Err(perr(c.last, format!("unsupported format version {version}")));
    }
    let dim = c.keyword("dimension")?;
    if dim != 1 && dim != 2 {
        return Err(perr(c.last, format!("unsupported dimension {dim}")));
    }
    let nn = c.keyword("nodes")?;
    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let (n, l) = c.next("node coordinates")?;
        let toks: Vec<_> = l.split_whitespace().collect();
        if toks.len() != dim {
            return Err(perr(n, format!("expected {dim} coordinates, found {}", toks.len())));
        }
        let x = parse_f64(toks[0], n)?;
        let y = if dim == 2 { parse_f64(toks[1], n)? } else { 0.0 };
        nodes.push([x, y]);
    }
    let ne = c.keyword("elements")?;
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (n, l) = c.next("element")?;
        let mut t = l.split_whitespace();
        let kname = t.next().unwrap_or("");
        let kind = ElementKind::from_name(kname).ok_or_else(|| perr(n, format!("unknown element kind '{kname}'")))?;
        let conn = t.map(|s| parse_usize(s, n)).collect::<Result<Vec<_>, _>>()?;
        if conn.len() != kind.node_count() {
            return Err(perr(n, format!("{kname} needs {} nodes, found {}", kind.node_count(), conn.len())));
        }
        if let Some(&bad) = conn.iter().find(|&&v| v >= nn) {
            return Err(perr(n, format!("node index {bad} out of range")));
        }
        elements.push(Element::new(kind, conn));
    }
    let mut sets = BTreeMap::new();
    if let Some((n, l)) = c.it.next() {
        c.last = n;
        let mut t = l.split_whitespace();
        if t.next() != Some("sets") {
            return Err(perr(n, format!("expected 'sets <count>', found '{l}'")));
        }
        let ns = parse_usize(t.next().unwrap_or(""), n)?;
        for _ in 0..ns {
            let (n, l) = c.next("boundary set")?;
            let mut t = l.split_whitespace();
            let name = t.next().unwrap_or("").to_string();
            let ids = t.map(|s| parse_usize(s, n)).collect::<Result<Vec<_>, _>>()?;
            if let Some(&bad) = ids.iter().find(|&&v| v >= nn) {
                return Err(perr(n, format!("node index {bad} out of range")));
            }
            if sets.insert(name.clone(), ids).is_some() {
                return Err(perr(n, format!("duplicate boundary set '{name}'")));
            }
        }
    }
    if let Some((n, l)) = c.it.next() {
        return Err(perr(n, format!("trailing content '{l}'")));
    }
    Mesh::new(dim, nodes, elements, sets)
}

/// Write the native format. Coordinates use the shortest round-trip
/// representation, so reading the output reproduces the mesh bit for bit.
pub fn write_native(mesh: &Mesh) -> String {
    let mut s = String::new();
    let dim = mesh.dimension();
    writeln!(s, "mts-mesh 1\ndimension {dim}\nnodes {}", mesh.node_count()).unwrap();
    for p in mesh.nodes() {
        if dim == 1 {
            writeln!(s, "{:?}", p[0]).unwrap();
        } else {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
    }
    writeln!(s, "elements {}", mesh.element_count()).unwrap();
    for el in mesh.elements() {
        s.push_str(el.kind.name());
        for v in &el.nodes {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "sets {}", mesh.boundary_sets().len()).unwrap();
    for (name, ids) in mesh.boundary_sets() {
        s.push_str(name);
        for v in ids {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Partition file: a header, the element count, then one subdomain id per element.
pub fn read_partition(text: &str, element_count: usize) -> Result<PartitionMap, MeshError> {
    let mut c = Cursor { it: content_lines(text), last: 0 };
    let version = c.keyword("mts-partition")?;
    if version != 1 {
        return Err(perr(c.last, format!("unsupported partition version {version}")));
    }
    let n = c.keyword("elements")?;
    let mut ids = Vec::with_capacity(n);
    for (ln, l) in c.it {
        for tok in l.split_whitespace() {
            ids.push(parse_usize(tok, ln)?);
        }
    }
    if ids.len() != n {
        return Err(MeshError::Partition(format!("header announces {n} elements, found {}", ids.len())));
    }
    PartitionMap::new(ids, element_count)
}

pub fn write_partition(p: &PartitionMap) -> String {
    let mut s = format!("mts-partition 1\nelements {}\n", p.ids().len());
    for id in p.ids() {
        writeln!(s, "{id}").unwrap();
    }
    s
}

/// Contents of a Gmsh 2.2 ASCII file.
#[derive(Debug, Clone)]
pub struct MshData {
    pub mesh: Mesh,
    /// Physical tag of each domain element (0 when absent).
    pub physical_tags: Vec<usize>,
}

impl MshData {
    /// Use the physical tags of domain elements as subdomain ids.
    pub fn partition_from_tags(&self) -> Result<PartitionMap, MeshError> {
        PartitionMap::new(self.physical_tags.clone(), self.mesh.element_count())
    }
}

/// Read a Gmsh 2.2 ASCII mesh. Only element types 1 (line), 2 (triangle) and
/// 3 (quadrangle) are accepted. Elements of the highest dimension are domain
/// elements; lower-dimensional elements contribute their nodes to a boundary
/// set named after their physical group.
pub fn read_msh2(text: &str) -> Result<MshData, MeshError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    let mut i = 0;
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut node_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    // (line, type, physical tag, node tags)
    let mut raw: Vec<(usize, usize, usize, Vec<u64>)> = Vec::new();
    let mut saw_format = false;
    let next = |i: &mut usize, what: &str| -> Result<(usize, &str), MeshError> {
        let r = lines.get(*i).copied().ok_or_else(|| perr(lines.len() + 1, format!("unexpected end of file, expected {what}")));
        *i += 1;
        r
    };
    while i < lines.len() {
        let (ln, l) = lines[i];
        i += 1;
        match l {
            "" => {}
            "$MeshFormat" => {
                let (n, f) = next(&mut i, "format line")?;
                let t: Vec<_> = f.split_whitespace().collect();
                if t.len() < 3 || !t[0].starts_with("2.") {
                    return Err(perr(n, format!("unsupported MSH version '{f}', need 2.x")));
                }
                if t[1] != "0" {
                    return Err(perr(n, "binary MSH files are not supported"));
                }
                saw_format = true;
                expect_end(&mut i, &lines, "$EndMeshFormat")?;
            }
            "$PhysicalNames" => {
                let (n, c) = next(&mut i, "count")?;
                let count = parse_usize(c, n)?;
                for _ in 0..count {
                    let (n, row) = next(&mut i, "physical name")?;
                    let t: Vec<_> = row.splitn(3, char::is_whitespace).collect();
                    if t.len() != 3 {
                        return Err(perr(n, "malformed physical name"));
                    }
                    let tag = parse_usize(t[1], n)?;
                    names.insert(tag, t[2].trim().trim_matches('"').to_string());
                }
                expect_end(&mut i, &lines, "$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let (n, c) = next(&mut i, "count")?;
                let count = parse_usize(c, n)?;
                for _ in 0..count {
                    let (n, row) = next(&mut i, "node")?;
                    let t: Vec<_> = row.split_whitespace().collect();
                    if t.len() != 4 {
                        return Err(perr(n, "node line needs 'id x y z'"));
                    }
                    let id: u64 = t[0].parse().map_err(|_| perr(n, format!("invalid node id '{}'", t[0])))?;
                    if node_index.insert(id, nodes.len()).is_some() {
                        return Err(perr(n, format!("duplicate node id {id}")));
                    }
                    nodes.push([parse_f64(t[1], n)?, parse_f64(t[2], n)?]);
                }
                expect_end(&mut i, &lines, "$EndNodes")?;
            }
            "$Elements" => {
                let (n, c) = next(&mut i, "count")?;
                let count = parse_usize(c, n)?;
                for _ in 0..count {
                    let (n, row) = next(&mut i, "element")?;
                    let t: Vec<_> = row.split_whitespace().collect();
                    if t.len() < 3 {
                        return Err(perr(n, "malformed element line"));
                    }
                    let ty = parse_usize(t[1], n)?;
                    let ntags = parse_usize(t[2], n)?;
                    let want = match ty {
                        1 => 2,
                        2 => 3,
                        3 => 4,
                        other => return Err(perr(n, format!("unsupported element type {other}"))),
                    };
                    if t.len() != 3 + ntags + want {
                        return Err(perr(n, "element line has the wrong number of fields"));
                    }
                    let phys = if ntags > 0 { parse_usize(t[3], n)? } else { 0 };
                    let conn = t[3 + ntags..]
                        .iter()
                        .map(|s| s.parse::<u64>().map_err(|_| perr(n, format!("invalid node id '{s}'"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    raw.push((n, ty, phys, conn));
                }
                expect_end(&mut i, &lines, "$EndElements")?;
            }
            s if s.starts_with('$') => {
                // skip unknown sections
                let end = format!("$End{}", &s[1..]);
                while i < lines.len() && lines[i].1 != end {
                    i += 1;
                }
                i += 1;
            }
            other => return Err(perr(ln, format!("unexpected content '{other}'"))),
        }
    }
    if !saw_format {
        return Err(perr(1, "missing $MeshFormat section"));
    }
    let dim = raw.iter().map(|r| if r.1 == 1 { 1 } else { 2 }).max().ok_or_else(|| perr(lines.len(), "no elements"))?;
    let mut elements = Vec::new();
    let mut tags = Vec::new();
    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (ln, ty, phys, conn) in raw {
        let idx = conn
            .iter()
            .map(|id| node_index.get(id).copied().ok_or_else(|| perr(ln, format!("unknown node id {id}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let edim = if ty == 1 { 1 } else { 2 };
        if edim == dim {
            let kind = match ty {
                1 => ElementKind::Line2,
                2 => ElementKind::Tri3,
                _ => ElementKind::Quad4,
            };
            elements.push(Element::new(kind, idx));
            tags.push(phys);
        } else if phys > 0 {
            let name = names.get(&phys).cloned().unwrap_or_else(|| format!("physical_{phys}"));
            sets.entry(name).or_default().extend(idx);
        }
    }
    let mesh = Mesh::new(dim, nodes, elements, sets)?;
    Ok(MshData { mesh, physical_tags: tags })
}

fn expect_end(i: &mut usize, lines: &[(usize, &str)], end: &str) -> Result<(), MeshError> {
    match lines.get(*i) {
        Some((_, l)) if *l == end => {
            *i += 1;
            Ok(())
        }
        Some((n, l)) => Err(perr(*n, format!("expected {end}, found '{l}'"))),
        None => Err(perr(lines.len() + 1, format!("missing {end}"))),
    }
}

fn read_text(path: &Path) -> Result<String, MeshError> {
    std::fs::read_to_string(path).map_err(|source| MeshError::Io { path: path.display().to_string(), source })
}

/// Read a mesh, choosing the parser by extension (`.msh` is Gmsh 2.2).
pub fn read_mesh_file(path: &Path) -> Result<Mesh, MeshError> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "msh") {
        Ok(read_msh2(&text)?.mesh)
    } else {
        read_native(&text)
    }
}

pub fn read_partition_file(path: &Path, element_count: usize) -> Result<PartitionMap, MeshError> {
    read_partition(&read_text(path)?, element_count)
}
