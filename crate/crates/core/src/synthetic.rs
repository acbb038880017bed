//! Synthetic community graphs: the bundled 60-node test fixture and
//! parameterized instances for tests and benchmarks.

use crate::error::Result;
use crate::graph::Graph;
use crate::rng::Rng;
use crate::tensor::Matrix;
use std::io::Write;
use std::path::Path;

/// Random graph with one community per entry of `sizes`. Node labels equal
/// the community id. Each community gets a block of `d / sizes.len()`
/// indicator features; every bit is flipped with probability `flip`.
/// Edges are drawn pairwise: `p_in` inside a community, `p_out` across.
pub fn community_graph(
    sizes: &[usize],
    d: usize,
    p_in: f64,
    p_out: f64,
    flip: f64,
    rng: &mut Rng,
) -> Graph {
    let c = sizes.len();
    let n: usize = sizes.iter().sum();
    let mut comm = Vec::with_capacity(n);
    for (k, &sz) in sizes.iter().enumerate() {
        comm.extend(std::iter::repeat_n(k, sz));
    }

    let block = d / c.max(1);
    let mut feat_rng = rng.fork("features");
    let features = Matrix::from_fn(n, d, |u, j| {
        let proto = block > 0 && j / block == comm[u].min(c - 1);
        let bit = proto != (feat_rng.next_f64() < flip);
        if bit {
            1.0
        } else {
            0.0
        }
    });

    let mut edge_rng = rng.fork("edges");
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            let p = if comm[u as usize] == comm[v as usize] {
                p_in
            } else {
                p_out
            };
            if edge_rng.next_f64() < p {
                edges.push((u, v));
            }
        }
    }

    Graph::new(n, &edges, features, comm, c).expect("synthetic graph is valid by construction")
}

/// The bundled fixture: 60 nodes, three 20-node communities, 16 binary
/// features. Committed under `data/synthetic60` in TSV form.
pub fn fixture60() -> Graph {
    community_graph(&[20, 20, 20], 16, 0.25, 0.02, 0.1, &mut Rng::new(60))
}

/// Writes a graph in the dataset TSV format (`nodes.tsv` + `edges.tsv`).
pub fn write_tsv(g: &Graph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut nodes = std::io::BufWriter::new(std::fs::File::create(dir.join("nodes.tsv"))?);
    for u in 0..g.node_count() {
        let feats: Vec<String> = g.features().row(u).iter().map(|v| format!("{v}")).collect();
        writeln!(nodes, "{u}\t{}\t{}", g.labels()[u], feats.join(" "))?;
    }
    nodes.flush()?;
    let mut edges = std::io::BufWriter::new(std::fs::File::create(dir.join("edges.tsv"))?);
    for &(u, v) in g.edges() {
        writeln!(edges, "{u}\t{v}")?;
    }
    edges.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_stable() {
        let a = fixture60();
        let b = fixture60();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.features().data(), b.features().data());
        assert_eq!(a.node_count(), 60);
        assert_eq!(a.num_classes(), 3);
        assert!(a.edge_count() > 40, "fixture too sparse: {}", a.edge_count());
    }

    #[test]
    fn tsv_roundtrip_preserves_graph() {
        let g = fixture60();
        let dir = tempfile::tempdir().unwrap();
        write_tsv(&g, dir.path()).unwrap();
        let back = crate::graph::load_dataset(dir.path()).unwrap();
        assert_eq!(back.node_count(), g.node_count());
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.labels(), g.labels());
        assert_eq!(back.features().data(), g.features().data());
    }

    // Regenerates the committed fixture; run manually after changing the generator:
    //   cargo test -p spreadfgl-core regenerate_bundled_fixture -- --ignored
    #[test]
    #[ignore]
    fn regenerate_bundled_fixture() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic60");
        write_tsv(&fixture60(), &root).unwrap();
    }

    #[test]
    fn bundled_fixture_matches_generator() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic60");
        let on_disk = crate::graph::load_dataset(&root).unwrap();
        let generated = fixture60();
        assert_eq!(on_disk.edges(), generated.edges());
        assert_eq!(on_disk.features().data(), generated.features().data());
        assert_eq!(on_disk.labels(), generated.labels());
    }
}
