use corrkit::error::Error;
use corrkit::fock::truncated_fock;
use corrkit::graphalg::{graph_correspondence, kappa_check, parse_graph, GraphSpec, Subgraph};

fn data(name: &str) -> String {
    std::fs::read_to_string(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Number of paths of length `n`, counted edge by edge.
fn paths_by_extension(g: &GraphSpec, n: usize) -> usize {
    let mut ending_at = vec![1usize; g.vertices.len()];
    for _ in 0..n {
        let mut next = vec![0; g.vertices.len()];
        for e in &g.edges {
            next[e.range] += ending_at[e.source];
        }
        ending_at = next;
    }
    ending_at.iter().sum()
}

#[test]
fn data_files_parse() {
    let e = parse_graph(&data("o2.graph")).unwrap();
    assert_eq!(e, GraphSpec::bouquet(2));
    let f = Subgraph::parse(&e, &data("o1.graph")).unwrap();
    assert!(f.contains_edge(0) && !f.contains_edge(1));
    assert!(f.check_regular_complement().is_ok());
}

#[test]
fn fock_levels_count_paths() {
    let g = parse_graph("vertex a\nvertex b\nvertex c\nedge p a b\nedge q b c\nedge r c a\nedge s b b\n").unwrap();
    let f = truncated_fock(&graph_correspondence(&g), 3, 1e-10).unwrap();
    let expected: Vec<usize> = (0..=3).map(|n| paths_by_extension(&g, n)).collect();
    assert_eq!(f.level_dims(), expected);
}

#[test]
fn full_subgraph_violates_the_regular_complement() {
    let e = GraphSpec::bouquet(2);
    let f = Subgraph::from_edges(&e, &["e1", "e2"]).unwrap();
    assert!(matches!(kappa_check(&f, 2), Err(Error::PreconditionViolated(_))));
}

#[test]
fn subgraph_edges_must_belong_to_the_graph() {
    let e = GraphSpec::bouquet(2);
    assert!(Subgraph::parse(&e, "vertex v\nedge e3 v v\n").is_err());
    assert!(Subgraph::parse(&e, "vertex w\n").is_err());
}

#[test]
fn malformed_lines_report_their_number() {
    let err = parse_graph("vertex a\nedge e a\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }));
}
