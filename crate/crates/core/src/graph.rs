//! Global graph data model, TSV dataset ingestion, and train/test splits.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Undirected node-classification graph. Edges are stored once with
/// `u < v`, sorted and deduplicated; adjacency lists are sorted.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    adj: Vec<Vec<u32>>,
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph, normalizing the edge list (undirected, u < v,
    /// deduplicated). Self-loops, dangling endpoints, or out-of-range
    /// labels are rejected.
    pub fn new(
        n: usize,
        raw_edges: &[(u32, u32)],
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::InvalidArg(format!(
                "feature rows {} != node count {n}",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidArg(format!(
                "label count {} != node count {n}",
                labels.len()
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(Error::InvalidArg(format!(
                    "node {i}: label {l} outside [0, {num_classes})"
                )));
            }
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(a, b) in raw_edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidArg(format!(
                    "edge ({a}, {b}) has endpoint outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::InvalidArg(format!("self-loop on node {a}")));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges,
            adj,
            features,
            labels,
            num_classes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Disjoint train/test masks over the global node set.
#[derive(Debug, Clone)]
pub struct Split {
    pub train_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub labeled_ratio: f64,
}

impl Split {
    pub fn train_ids(&self) -> Vec<usize> {
        mask_ids(&self.train_mask)
    }

    pub fn test_ids(&self) -> Vec<usize> {
        mask_ids(&self.test_mask)
    }
}

fn mask_ids(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Loads a dataset directory containing `nodes.tsv` and `edges.tsv`.
///
/// nodes.tsv: `node_id<TAB>label_id<TAB>f1 f2 ... fd` (features space-separated)
/// edges.tsv: `u<TAB>v`, undirected, one per line.
pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let nodes_path = dir.join("nodes.tsv");
    let edges_path = dir.join("edges.tsv");

    let parse_err = |path: &Path, line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    let file = std::fs::File::open(&nodes_path).map_err(|e| {
        Error::InvalidArg(format!("cannot open {}: {e}", nodes_path.display()))
    })?;
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let id: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(&nodes_path, lineno, "bad node id".into()))?;
        let label: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(&nodes_path, lineno, "bad label id".into()))?;
        let feats_str = parts
            .next()
            .ok_or_else(|| parse_err(&nodes_path, lineno, "missing feature column".into()))?;
        let mut feats = Vec::new();
        for tok in feats_str.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(&nodes_path, lineno, format!("bad feature value {tok:?}"))
            })?;
            feats.push(v);
        }
        match dim {
            None => dim = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(parse_err(
                    &nodes_path,
                    lineno,
                    format!("feature dim {} != expected {d}", feats.len()),
                ))
            }
            _ => {}
        }
        rows.push((id, label, feats));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArg(format!("{}: no nodes", nodes_path.display())));
    }
    let n = rows.len();
    rows.sort_unstable_by_key(|r| r.0);
    for (expect, row) in rows.iter().enumerate() {
        if row.0 != expect {
            return Err(Error::InvalidArg(format!(
                "{}: node ids must be 0-based contiguous; expected {expect}, found {}",
                nodes_path.display(),
                row.0
            )));
        }
    }
    let d = dim.unwrap_or(0);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (_, label, feats) in rows {
        labels.push(label);
        data.extend_from_slice(&feats);
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let features = Matrix::from_vec(n, d, data);

    let file = std::fs::File::open(&edges_path).map_err(|e| {
        Error::InvalidArg(format!("cannot open {}: {e}", edges_path.display()))
    })?;
    let mut edges = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let u: u32 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(&edges_path, lineno, "bad endpoint".into()))?;
        let v: u32 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(&edges_path, lineno, "bad endpoint".into()))?;
        if u as usize >= n || v as usize >= n {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("edge ({u}, {v}) references a node outside [0, {n})"),
            ));
        }
        if u == v {
            return Err(parse_err(&edges_path, lineno, format!("self-loop on node {u}")));
        }
        edges.push((u, v));
    }
    Graph::new(n, &edges, features, labels, num_classes)
}

/// Stratified random train/test masks. Train takes `round(ratio * n)` nodes,
/// test takes `round(0.2 * n)` from the remainder, both allocated per class
/// by largest remainder so every class with at least `ceil(1/ratio)` members
/// is represented in train.
pub fn make_split(g: &Graph, labeled_ratio: f64, rng: &mut Rng) -> Result<Split> {
    if !(labeled_ratio > 0.0 && labeled_ratio <= 0.8) {
        return Err(Error::InvalidArg(format!(
            "labeled_ratio must be in (0, 0.8], got {labeled_ratio}"
        )));
    }
    let n = g.node_count();
    let c = g.num_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in g.labels().iter().enumerate() {
        per_class[l].push(i);
    }
    for members in &mut per_class {
        rng.shuffle(members);
    }

    let train_total = (labeled_ratio * n as f64).round() as usize;
    let train_take = allocate(&per_class.iter().map(Vec::len).collect::<Vec<_>>(), labeled_ratio, train_total);

    let remaining: Vec<usize> = per_class
        .iter()
        .zip(&train_take)
        .map(|(m, &t)| m.len() - t)
        .collect();
    let test_total = (0.2 * n as f64).round() as usize;
    let test_take = allocate(&remaining, 0.2, test_total);

    let mut train_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    for (cls, members) in per_class.iter().enumerate() {
        for &u in &members[..train_take[cls]] {
            train_mask[u] = true;
        }
        for &u in &members[train_take[cls]..train_take[cls] + test_take[cls]] {
            test_mask[u] = true;
        }
    }
    Ok(Split {
        train_mask,
        test_mask,
        labeled_ratio,
    })
}

/// Largest-remainder allocation of `total` picks across classes of the given
/// sizes, proportional to `ratio * size`, with a floor of one pick for any
/// class of size >= ceil(1/ratio).
fn allocate(sizes: &[usize], ratio: f64, total: usize) -> Vec<usize> {
    let c = sizes.len();
    let mut take: Vec<usize> = Vec::with_capacity(c);
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(c);
    let min_represented = (1.0 / ratio).ceil() as usize;
    for (cls, &sz) in sizes.iter().enumerate() {
        let quota = ratio * sz as f64;
        let mut base = quota.floor() as usize;
        if base == 0 && sz >= min_represented {
            base = 1;
        }
        base = base.min(sz);
        take.push(base);
        rema.push((quota - base as f64, cls));
    }
    let mut assigned: usize = take.iter().sum();
    // Hand out the leftover picks by largest remainder, ties to smaller class id.
    rema.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut i = 0;
    while assigned < total && i < 10 * c.max(1) {
        let (_, cls) = rema[i % c];
        if take[cls] < sizes[cls] {
            take[cls] += 1;
            assigned += 1;
        }
        i += 1;
    }
    // Over-allocation can only come from the representation floor; trim from
    // the largest takes, ties to larger class id.
    while assigned > total {
        let (cls, _) = take
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0)
            .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
            .expect("nothing to trim");
        take[cls] -= 1;
        assigned -= 1;
    }
    take
}
