//! Mesh formats: read a Gmsh 2.2 file, use its physical tags as a partition,
//! and round-trip through the native text format.

use mts::decomposition::{build_constraints, build_dof_maps, collect_set_nodes};
use mts::mesh::{read_msh2, read_native, write_native, write_partition};

const MSH: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
3
1 10 \"inflow\"
2 1 \"left\"
2 2 \"right\"
$EndPhysicalNames
$Nodes
6
1 0 0 0
2 1 0 0
3 2 0 0
4 0 1 0
5 1 1 0
6 2 1 0
$EndNodes
$Elements
3
1 1 2 10 1 1 4
2 3 2 1 1 1 2 5 4
3 3 2 2 2 2 3 6 5
$EndElements
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = read_msh2(MSH)?;
    let part = data.partition_from_tags()?;
    let mesh = data.mesh;
    println!("{} nodes, {} elements, {} subdomains", mesh.node_count(), mesh.element_count(), part.subdomain_count());
    for (name, nodes) in mesh.boundary_sets() {
        println!("boundary set {name}: nodes {nodes:?}");
    }
    let text = write_native(&mesh);
    assert_eq!(read_native(&text)?, mesh);
    println!("native format:\n{text}");
    println!("partition:\n{}", write_partition(&part));
    let dirichlet = collect_set_nodes(&mesh, &["inflow"])?;
    let maps = build_dof_maps(&mesh, &part, &dirichlet)?;
    let constraints = build_constraints(&maps);
    for sd in &maps.subdomains {
        println!("subdomain {}: free nodes {:?}", sd.id, sd.dof_to_node);
    }
    println!("{} interface constraint rows", constraints.row_count());
    Ok(())
}
