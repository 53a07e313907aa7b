use mts::mesh::{read_native, read_partition, write_native, write_partition};
use mts::problems::FixtureKind;
use std::path::Path;

#[test]
fn shipped_fixtures_match_their_generators() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for kind in FixtureKind::ALL {
        for full in [false, true] {
            let (mesh, part) = kind.generate(full).unwrap();
            let (m, p) = kind.file_names(full);
            let mesh_text = std::fs::read_to_string(dir.join(&m)).unwrap();
            let part_text = std::fs::read_to_string(dir.join(&p)).unwrap();
            assert!(mesh_text == write_native(&mesh), "{m} is stale; rerun the generate_fixtures example");
            assert!(part_text == write_partition(&part), "{p} is stale; rerun the generate_fixtures example");
            assert_eq!(read_native(&mesh_text).unwrap(), mesh);
            assert_eq!(read_partition(&part_text, mesh.element_count()).unwrap(), part);
        }
    }
}

#[test]
fn fixtures_load_from_directory_or_memory_identically() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for kind in FixtureKind::ALL {
        let (a, pa) = kind.load(false, Some(&dir)).unwrap();
        let (b, pb) = kind.load(false, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }
}

#[test]
fn fixtures_have_at_least_three_subdomains() {
    for kind in FixtureKind::ALL {
        let (mesh, part) = kind.generate(false).unwrap();
        assert_eq!(part.ids().len(), mesh.element_count());
        assert!(part.subdomain_count() >= 3, "{}", kind.stem());
    }
}
