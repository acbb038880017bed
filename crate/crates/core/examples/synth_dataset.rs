// Writes a synthetic community-structured dataset in the TSV format.
//
//   cargo run --release --example synth_dataset -- <out-dir> [communities] [size] [d] [seed]
use spreadfgl_core::rng::Rng;
use spreadfgl_core::synthetic;
use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "data/synthetic".into()).into();
    let communities: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let d: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(16);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);

    let sizes = vec![size; communities];
    let g = synthetic::community_graph(&sizes, d, 0.25, 0.02, 0.1, &mut Rng::new(seed));
    synthetic::write_tsv(&g, &out).expect("write dataset");
    println!(
        "wrote {} nodes, {} edges, d={}, c={} to {}",
        g.node_count(),
        g.edge_count(),
        g.feature_dim(),
        g.num_classes(),
        out.display()
    );
}
