//! Louvain community detection and the packing of communities into M
//! disjoint client subgraphs across N edge servers, with accounting of the
//! cross-subgraph links severed by the partition.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::tensor::Matrix;
use std::collections::HashMap;

const RESOLUTION: f64 = 1.0;
const MAX_LEVELS: usize = 10;
const GAIN_TOL: f64 = 1e-12;

/// One client's induced subgraph plus the local -> global id map
/// (ascending global order).
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: Graph,
    pub global_ids: Vec<u32>,
}

/// Assignment of every node to a (server, client) pair.
#[derive(Debug, Clone)]
pub struct Partition {
    pub n_servers: usize,
    /// Per global node: (server id, client id).
    pub client_of: Vec<(u32, u32)>,
    /// Per global node: its row inside the owning client's subgraph.
    pub local_index: Vec<u32>,
    pub subgraphs: Vec<Subgraph>,
    /// Server id of each client (client k serves on k mod N).
    pub server_of_client: Vec<usize>,
    /// Global edges whose endpoints landed in different clients.
    pub severed_edges: Vec<(u32, u32)>,
}

impl Partition {
    pub fn client_count(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn clients_of_server(&self, server: usize) -> Vec<usize> {
        (0..self.client_count())
            .filter(|&c| self.server_of_client[c] == server)
            .collect()
    }
}

/// Weighted multigraph state for one Louvain level.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Level {
    fn node_count(&self) -> usize {
        self.adj.len()
    }
}

fn level_from_graph(g: &Graph) -> Level {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        adj[u as usize].push((v as usize, 1.0));
        adj[v as usize].push((u as usize, 1.0));
    }
    let degree: Vec<f64> = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
    let two_m = degree.iter().sum();
    Level {
        adj,
        self_loop: vec![0.0; n],
        degree,
        two_m,
    }
}

/// One local-move phase: greedy modularity sweeps in ascending node order,
/// seeded tie-breaking among equal-gain targets. Returns the assignment and
/// whether any node moved.
fn local_phase(level: &Level, rng: &mut Rng) -> (Vec<usize>, bool) {
    let n = level.node_count();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut sigma_tot: Vec<f64> = level
        .degree
        .iter()
        .zip(&level.self_loop)
        .map(|(d, s)| d + 2.0 * s)
        .collect();
    let mut any_move = false;

    for _sweep in 0..64 {
        let mut moved = false;
        for u in 0..n {
            let k_u = level.degree[u] + 2.0 * level.self_loop[u];
            let old = comm[u];
            sigma_tot[old] -= k_u;

            let mut weight_to: HashMap<usize, f64> = HashMap::new();
            weight_to.insert(old, 0.0);
            for &(v, w) in &level.adj[u] {
                *weight_to.entry(comm[v]).or_insert(0.0) += w;
            }
            let mut cands: Vec<(usize, f64)> = weight_to.into_iter().collect();
            cands.sort_unstable_by_key(|&(c, _)| c);

            let gain = |k_uc: f64, tot: f64| k_uc - RESOLUTION * tot * k_u / level.two_m;
            let mut best_gain = f64::NEG_INFINITY;
            for &(c, w) in &cands {
                best_gain = best_gain.max(gain(w, sigma_tot[c]));
            }
            let ties: Vec<usize> = cands
                .iter()
                .filter(|&&(c, w)| gain(w, sigma_tot[c]) >= best_gain - GAIN_TOL)
                .map(|&(c, _)| c)
                .collect();
            let target = if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.below(ties.len())]
            };

            sigma_tot[target] += k_u;
            if target != old {
                comm[u] = target;
                moved = true;
                any_move = true;
            }
        }
        if !moved {
            break;
        }
    }
    (comm, any_move)
}

fn aggregate(level: &Level, comm: &[usize]) -> (Level, Vec<usize>) {
    let mut ids: Vec<usize> = comm.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let rename: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let nc = ids.len();

    let mut self_loop = vec![0.0; nc];
    let mut edge_weight: HashMap<(usize, usize), f64> = HashMap::new();
    for u in 0..level.node_count() {
        let cu = rename[&comm[u]];
        self_loop[cu] += level.self_loop[u];
        for &(v, w) in &level.adj[u] {
            if v < u {
                continue; // each undirected edge once
            }
            let cv = rename[&comm[v]];
            if cu == cv {
                self_loop[cu] += w;
            } else {
                let key = (cu.min(cv), cu.max(cv));
                *edge_weight.entry(key).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); nc];
    let mut pairs: Vec<((usize, usize), f64)> = edge_weight.into_iter().collect();
    pairs.sort_unstable_by_key(|&(k, _)| k);
    for ((a, b), w) in pairs {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    for l in &mut adj {
        l.sort_unstable_by_key(|&(v, _)| v);
    }
    let degree: Vec<f64> = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
    let two_m = level.two_m;
    let mapping = comm.iter().map(|c| rename[c]).collect();
    (
        Level {
            adj,
            self_loop,
            degree,
            two_m,
        },
        mapping,
    )
}

/// Louvain communities of `g` (resolution 1.0, at most 10 levels,
/// deterministic given the rng stream). Community ids are compacted in
/// order of first appearance by node id.
pub fn louvain_communities(g: &Graph, rng: &mut Rng) -> Vec<usize> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return (0..n).collect();
    }
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level = level_from_graph(g);
    for _ in 0..MAX_LEVELS {
        let (comm, moved) = local_phase(&level, rng);
        let (next, mapping) = aggregate(&level, &comm);
        if !moved || next.node_count() == level.node_count() {
            break;
        }
        for a in &mut assignment {
            *a = mapping[comm[*a]];
        }
        level = next;
    }
    // Compact by first appearance.
    let mut rename: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for &a in &assignment {
        let next_id = rename.len();
        out.push(*rename.entry(a).or_insert(next_id));
    }
    out
}

/// Modularity of an assignment on the original unweighted graph
/// (test oracle and stats helper).
pub fn modularity(g: &Graph, comm: &[usize]) -> f64 {
    let two_m = 2.0 * g.edge_count() as f64;
    if two_m == 0.0 {
        return 0.0;
    }
    let mut intra = 0.0;
    for &(u, v) in g.edges() {
        if comm[u as usize] == comm[v as usize] {
            intra += 1.0;
        }
    }
    let n_comm = comm.iter().copied().max().unwrap_or(0) + 1;
    let mut tot = vec![0.0; n_comm];
    for u in 0..g.node_count() {
        tot[comm[u]] += g.degree(u) as f64;
    }
    2.0 * intra / two_m - tot.iter().map(|t| (t / two_m) * (t / two_m)).sum::<f64>()
}

/// Packs communities into exactly `m` clients (largest community to the
/// currently smallest client), deals clients round-robin onto `n_servers`,
/// and computes the severed cross-client edges. Communities are split in
/// half (by sorted node id) while there are fewer than `m` of them.
pub fn pack_to_clients(
    g: &Graph,
    communities: &[usize],
    m: usize,
    n_servers: usize,
) -> Result<Partition> {
    let n = g.node_count();
    if m == 0 || n_servers == 0 {
        return Err(Error::InvalidArg("need at least one client and one server".into()));
    }
    if m > n {
        return Err(Error::InvalidArg(format!("{m} clients exceed {n} nodes")));
    }

    let n_comm = communities.iter().copied().max().unwrap_or(0) + 1;
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); n_comm];
    for (u, &c) in communities.iter().enumerate() {
        groups[c].push(u as u32);
    }
    groups.retain(|g| !g.is_empty());
    while groups.len() < m {
        let (idx, _) = groups
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .expect("nonempty");
        let big = groups.swap_remove(idx);
        let mid = big.len() / 2;
        groups.push(big[..mid].to_vec());
        groups.push(big[mid..].to_vec());
    }
    // Largest first; ties by smallest leading node id.
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let mut clients: Vec<Vec<u32>> = vec![Vec::new(); m];
    for group in groups {
        let (target, _) = clients
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ia.cmp(ib)))
            .expect("nonempty");
        clients[target].extend_from_slice(&group);
    }
    for c in &mut clients {
        c.sort_unstable();
    }

    let mut client_of = vec![(0u32, 0u32); n];
    let mut local_index = vec![0u32; n];
    for (cid, members) in clients.iter().enumerate() {
        let sid = (cid % n_servers) as u32;
        for (li, &u) in members.iter().enumerate() {
            client_of[u as usize] = (sid, cid as u32);
            local_index[u as usize] = li as u32;
        }
    }

    let mut per_client_edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m];
    let mut severed = Vec::new();
    for &(u, v) in g.edges() {
        let cu = client_of[u as usize].1;
        let cv = client_of[v as usize].1;
        if cu == cv {
            per_client_edges[cu as usize]
                .push((local_index[u as usize], local_index[v as usize]));
        } else {
            severed.push((u, v));
        }
    }

    let mut subgraphs = Vec::with_capacity(m);
    for (cid, members) in clients.iter().enumerate() {
        let d = g.feature_dim();
        let mut data = Vec::with_capacity(members.len() * d);
        let mut labels = Vec::with_capacity(members.len());
        for &u in members {
            data.extend_from_slice(g.features().row(u as usize));
            labels.push(g.labels()[u as usize]);
        }
        let features = Matrix::from_vec(members.len(), d, data);
        let graph = Graph::new(
            members.len(),
            &per_client_edges[cid],
            features,
            labels,
            g.num_classes(),
        )?;
        subgraphs.push(Subgraph {
            graph,
            global_ids: members.clone(),
        });
    }

    Ok(Partition {
        n_servers,
        client_of,
        local_index,
        subgraphs,
        server_of_client: (0..m).map(|c| c % n_servers).collect(),
        severed_edges: severed,
    })
}

/// Louvain + packing in one step.
pub fn louvain_partition(g: &Graph, m: usize, n_servers: usize, rng: &mut Rng) -> Result<Partition> {
    let comms = louvain_communities(g, rng);
    pack_to_clients(g, &comms, m, n_servers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::fixture60;

    fn two_triangles() -> Graph {
        let features = Matrix::zeros(6, 2);
        Graph::new(
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            features,
            vec![0, 0, 0, 1, 1, 1],
            2,
        )
        .unwrap()
    }

    /// Brute-force best assignment into at most two communities.
    fn best_two_partition(g: &Graph) -> (Vec<usize>, f64) {
        let n = g.node_count();
        let mut best = (vec![0; n], f64::NEG_INFINITY);
        for mask in 0..(1u32 << n) {
            let comm: Vec<usize> = (0..n).map(|u| ((mask >> u) & 1) as usize).collect();
            let q = modularity(g, &comm);
            if q > best.1 {
                best = (comm, q);
            }
        }
        best
    }

    #[test]
    fn louvain_splits_two_triangles() {
        let g = two_triangles();
        let (oracle, best_q) = best_two_partition(&g);
        // The optimum separates the triangles.
        assert_eq!(oracle[0], oracle[1]);
        assert_eq!(oracle[0], oracle[2]);
        assert_eq!(oracle[3], oracle[4]);
        assert_ne!(oracle[0], oracle[3]);

        let comms = louvain_communities(&g, &mut Rng::new(1));
        assert!((modularity(&g, &comms) - best_q).abs() < 1e-12);

        let p = pack_to_clients(&g, &comms, 2, 1).unwrap();
        assert!(p.severed_edges.is_empty());
        assert_eq!(p.subgraphs[0].graph.node_count(), 3);
        assert_eq!(p.subgraphs[1].graph.node_count(), 3);
    }

    #[test]
    fn single_client_severs_nothing() {
        let g = fixture60();
        let p = louvain_partition(&g, 1, 1, &mut Rng::new(2)).unwrap();
        assert!(p.severed_edges.is_empty());
        assert_eq!(p.subgraphs[0].graph.node_count(), g.node_count());
        assert_eq!(p.subgraphs[0].graph.edge_count(), g.edge_count());
    }

    #[test]
    fn conservation_holds_for_every_m() {
        let g = fixture60();
        for m in [1usize, 2, 3, 5, 6, 10] {
            let p = louvain_partition(&g, m, 3.min(m), &mut Rng::new(7)).unwrap();
            let nodes: usize = p.subgraphs.iter().map(|s| s.graph.node_count()).sum();
            let edges: usize = p.subgraphs.iter().map(|s| s.graph.edge_count()).sum();
            assert_eq!(nodes, g.node_count(), "m={m}");
            assert_eq!(edges + p.severed_edges.len(), g.edge_count(), "m={m}");
        }
    }

    #[test]
    fn partition_ignores_edge_input_order() {
        let g = fixture60();
        let mut reversed: Vec<(u32, u32)> = g.edges().iter().rev().map(|&(u, v)| (v, u)).collect();
        reversed.rotate_left(13);
        let g2 = Graph::new(
            g.node_count(),
            &reversed,
            g.features().clone(),
            g.labels().to_vec(),
            g.num_classes(),
        )
        .unwrap();

        let p1 = louvain_partition(&g, 4, 2, &mut Rng::new(11)).unwrap();
        let p2 = louvain_partition(&g2, 4, 2, &mut Rng::new(11)).unwrap();
        assert_eq!(p1.client_of, p2.client_of);
        assert_eq!(p1.severed_edges, p2.severed_edges);
    }

    #[test]
    fn packing_balances_sizes() {
        let g = fixture60();
        let p = louvain_partition(&g, 6, 3, &mut Rng::new(3)).unwrap();
        let sizes: Vec<usize> = p.subgraphs.iter().map(|s| s.graph.node_count()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 60);
        assert!(*sizes.iter().min().unwrap() > 0, "empty client: {sizes:?}");
        // Round-robin server deal.
        assert_eq!(p.server_of_client, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn rejects_more_clients_than_nodes() {
        let g = two_triangles();
        assert!(pack_to_clients(&g, &[0; 6], 7, 1).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let g = fixture60();
        let a = louvain_partition(&g, 5, 2, &mut Rng::new(42)).unwrap();
        let b = louvain_partition(&g, 5, 2, &mut Rng::new(42)).unwrap();
        assert_eq!(a.client_of, b.client_of);
        assert_eq!(a.severed_edges, b.severed_edges);
    }
}
