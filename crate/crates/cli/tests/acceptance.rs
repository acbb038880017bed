//! Acceptance suite: one test per criterion, each printing a
//! `criterion N: PASS/FAIL/SKIP` line (run with `--nocapture` to see them).
//!
//! The Cora/Citeseer criteria need those datasets under `$SPREADFGL_DATA`
//! or `./data` (see the README for fetching/conversion); when a dataset is
//! absent the criterion prints SKIP instead of fabricating a result.
//! Everything else always runs.

use spreadfgl_core::config;
use spreadfgl_core::federation::{fedavg, neighbor_aggregate, ExperimentOutput, Topology};
use spreadfgl_core::graph::{load_dataset, Graph};
use spreadfgl_core::imputation::{candidate_lists, candidate_links, GlobalEmbedding};
use spreadfgl_core::partition::louvain_partition;
use spreadfgl_core::rng::Rng;
use spreadfgl_core::tensor::Matrix;
use spreadfgl_core::{presets, run_experiment};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn dataset_dir(name: &str) -> Option<PathBuf> {
    if let Ok(root) = std::env::var("SPREADFGL_DATA") {
        let p = Path::new(&root).join(name);
        if p.join("nodes.tsv").is_file() {
            return Some(p);
        }
    }
    let p = workspace_root().join("data").join(name);
    if p.join("nodes.tsv").is_file() {
        return Some(p);
    }
    None
}

fn skip(criterion: &str, dataset: &str) {
    println!(
        "criterion {criterion}: SKIP — dataset {dataset:?} not found under $SPREADFGL_DATA or ./data \
         (fetch + convert per README, then rerun)"
    );
}

fn graph_cached(name: &str) -> Arc<Graph> {
    static GRAPHS: OnceLock<Mutex<HashMap<String, Arc<Graph>>>> = OnceLock::new();
    let cache = GRAPHS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry(name.to_string())
        .or_insert_with(|| {
            let dir = dataset_dir(name).expect("caller checks presence");
            Arc::new(load_dataset(&dir).expect("dataset loads"))
        })
        .clone()
}

type ResultCache = Mutex<HashMap<(String, u64), Arc<ExperimentOutput>>>;

/// Preset runs shared across criteria 3-5, memoized by (preset, seed).
fn run_cached(preset: &str, seed: u64) -> Arc<ExperimentOutput> {
    static RESULTS: OnceLock<ResultCache> = OnceLock::new();
    let cache = RESULTS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry((preset.to_string(), seed))
        .or_insert_with(|| {
            let p = presets::find(preset).expect("preset exists");
            let mut map = p.to_map();
            map.insert("seed".into(), seed.to_string());
            let spec = config::build_run_spec(&map).expect("preset config valid");
            let g = graph_cached(&spec.dataset);
            let started = Instant::now();
            let out = run_experiment(&spec.cfg, &g).expect("experiment runs");
            eprintln!(
                "[acceptance] {preset} seed {seed}: acc {:.4} in {:.0}s",
                out.final_metrics.acc,
                started.elapsed().as_secs_f64()
            );
            Arc::new(out)
        })
        .clone()
}

fn mean_acc(preset: &str, seeds: &[u64]) -> f64 {
    let sum: f64 = seeds
        .iter()
        .map(|&s| run_cached(preset, s).final_metrics.acc)
        .sum();
    sum / seeds.len() as f64
}

#[test]
fn acceptance_1_dataset_fidelity() {
    let cases = [
        ("cora", 2708usize, 5429usize, 1433usize, 7usize),
        ("citeseer", 3327, 4715, 3703, 6),
    ];
    for (name, n, e, d, c) in cases {
        let Some(dir) = dataset_dir(name) else {
            skip("1 (dataset fidelity)", name);
            continue;
        };
        let started = Instant::now();
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_spreadfgl"))
            .args(["stats", dir.to_str().unwrap(), "--clients", "6"])
            .output()
            .expect("spawn stats");
        let elapsed = started.elapsed().as_secs_f64();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8_lossy(&out.stdout);
        let field = |key: &str| -> usize {
            text.lines()
                .find_map(|l| l.strip_prefix(&format!("{key}: ")))
                .unwrap_or_else(|| panic!("stats output missing {key}: {text}"))
                .trim()
                .parse()
                .unwrap()
        };
        let (gn, ge, gd, gc) = (field("nodes"), field("edges"), field("features"), field("classes"));
        let pass = gn == n && ge == e && gd == d && gc == c && elapsed < 5.0;
        println!(
            "criterion 1 (dataset fidelity): {} — {name}: n={gn}/{n}, |E|={ge}/{e}, d={gd}/{d}, c={gc}/{c}, {elapsed:.2}s",
            if pass { "PASS" } else { "FAIL" }
        );
        assert!(pass, "{name} fidelity mismatch (got n={gn} |E|={ge} d={gd} c={gc}, want n={n} |E|={e} d={d} c={c})");
    }
}

#[test]
fn acceptance_2_partition_statistics() {
    let Some(_) = dataset_dir("cora") else {
        skip("2 (partition statistics)", "cora");
        return;
    };
    let g = graph_cached("cora");
    let mut sizes_all = Vec::new();
    let mut severed_all = Vec::new();
    for seed in 1..=5u64 {
        let p = louvain_partition(&g, 6, 1, &mut Rng::new(seed).fork("partition")).unwrap();
        let nodes: usize = p.subgraphs.iter().map(|s| s.graph.node_count()).sum();
        let intra: usize = p.subgraphs.iter().map(|s| s.graph.edge_count()).sum();
        assert_eq!(nodes, g.node_count(), "node conservation, seed {seed}");
        assert_eq!(
            intra + p.severed_edges.len(),
            g.edge_count(),
            "edge conservation, seed {seed}"
        );
        sizes_all.push(nodes as f64 / 6.0);
        severed_all.push(p.severed_edges.len() as f64);
    }
    let mean_size = sizes_all.iter().sum::<f64>() / 5.0;
    let mean_severed = severed_all.iter().sum::<f64>() / 5.0;
    let size_ok = (mean_size - 451.0).abs() <= 0.15 * 451.0;
    let severed_ok = (mean_severed - 935.0).abs() <= 0.25 * 935.0;
    println!(
        "criterion 2 (partition statistics): {} — mean client size {mean_size:.1} (451 ±15%), \
         mean severed {mean_severed:.1} (935 ±25%), conservation exact on 5 seeds",
        if size_ok && severed_ok { "PASS" } else { "FAIL" }
    );
    assert!(size_ok, "mean client size {mean_size} outside 451 +-15%");
    assert!(severed_ok, "mean severed {mean_severed} outside 935 +-25%");
}

#[test]
fn acceptance_3_headline_accuracy() {
    let seeds = [1u64, 2, 3];
    let started = Instant::now();
    let cases = [("cora", 0.78f64), ("citeseer", 0.65f64)];
    for (ds, floor) in cases {
        let Some(_) = dataset_dir(ds) else {
            skip("3 (headline accuracy)", ds);
            continue;
        };
        for method in ["spreadfgl", "fedgl"] {
            let acc = mean_acc(&format!("{ds}-{method}-m6"), &seeds);
            let pass = acc >= floor;
            println!(
                "criterion 3 (headline accuracy): {} — {ds} {method} mean ACC {acc:.4} (floor {floor})",
                if pass { "PASS" } else { "FAIL" }
            );
            assert!(pass, "{ds} {method} mean ACC {acc:.4} below {floor}");
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 1800.0,
        "headline accuracy block took {elapsed:.0}s (budget 1800s)"
    );
}

#[test]
fn acceptance_4_method_ordering() {
    let Some(_) = dataset_dir("cora") else {
        skip("4 (method ordering)", "cora");
        return;
    };
    let seeds = [1u64, 2, 3];
    let spread = mean_acc("cora-spreadfgl-m6", &seeds);
    let fusion = mean_acc("cora-fedavg-m6", &seeds);
    let local = mean_acc("cora-local-m6", &seeds);
    let first = spread >= fusion + 0.01;
    let second = fusion >= local + 0.05;
    println!(
        "criterion 4 (method ordering): {} — spreadfgl {spread:.4} >= fedavg {fusion:.4} + 0.01: {first}; \
         fedavg >= local {local:.4} + 0.05: {second}",
        if first && second { "PASS" } else { "FAIL" }
    );
    assert!(first, "spreadfgl {spread:.4} < fedavg {fusion:.4} + 0.01");
    assert!(second, "fedavg {fusion:.4} < local {local:.4} + 0.05");
}

#[test]
fn acceptance_5_convergence() {
    let Some(_) = dataset_dir("cora") else {
        skip("5 (convergence)", "cora");
        return;
    };
    let ma = |log: &[spreadfgl_core::RoundLog], end: usize| -> f64 {
        log[end - 5..end].iter().map(|e| e.global_loss).sum::<f64>() / 5.0
    };
    for method in ["fedgl", "spreadfgl"] {
        for seed in [1u64, 2, 3] {
            let out = run_cached(&format!("cora-{method}-m6"), seed);
            let early = ma(&out.log, 5);
            let late = ma(&out.log, 50);
            let pass = late < early;
            println!(
                "criterion 5 (convergence): {} — cora {method} seed {seed}: MA5 loss {late:.4} @50 vs {early:.4} @5",
                if pass { "PASS" } else { "FAIL" }
            );
            assert!(pass, "{method} seed {seed}: MA5(50)={late} !< MA5(5)={early}");
        }
    }
}

#[test]
fn acceptance_6_gradient_suite() {
    let started = Instant::now();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_spreadfgl"))
        .args(["gradcheck", "--instances", "100"])
        .output()
        .expect("spawn gradcheck");
    let elapsed = started.elapsed().as_secs_f64();
    let text = String::from_utf8_lossy(&out.stdout);
    let pass = out.status.success() && elapsed < 60.0;
    println!(
        "criterion 6 (gradient suite): {} — {:.1}s\n{text}",
        if pass { "PASS" } else { "FAIL" },
        elapsed
    );
    assert!(out.status.success(), "gradcheck failed:\n{text}");
    assert!(elapsed < 60.0, "gradcheck took {elapsed:.1}s (budget 60s)");
}

#[test]
fn acceptance_7_aggregation_identities() {
    // Idempotence is exact.
    let v = vec![0.125, -3.5, 7.0, 1e-300];
    assert_eq!(fedavg(&[v.clone(), v.clone(), v.clone()]).unwrap(), v);

    // Complete topology equals global fedavg within 1e-12.
    let mut rng = Rng::new(70);
    let per_server: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|_| (0..2).map(|_| (0..64).map(|_| rng.normal()).collect()).collect())
        .collect();
    let all: Vec<Vec<f64>> = per_server.iter().flatten().cloned().collect();
    let global = fedavg(&all).unwrap();
    let topo = Topology::complete(3, true);
    let mut worst = 0.0f64;
    for j in 0..3 {
        let w = neighbor_aggregate(j, &per_server, &topo).unwrap();
        for (a, b) in w.iter().zip(&global) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-12, "complete-topology deviation {worst}");

    // Ring consensus fixed point is exact.
    let v = vec![42.0, -0.5];
    let consensus: Vec<Vec<Vec<f64>>> = (0..3).map(|_| vec![v.clone()]).collect();
    let ring = Topology::ring(3, true);
    for j in 0..3 {
        assert_eq!(neighbor_aggregate(j, &consensus, &ring).unwrap(), v);
    }
    println!(
        "criterion 7 (aggregation identities): PASS — idempotence exact, complete==fedavg within {worst:.1e}, ring consensus exact"
    );
}

#[test]
fn acceptance_8_candidate_links_oracle() {
    // Exhaustive O(|V|^2) top-k selection, written independently of the
    // implementation path it checks.
    fn oracle(h: &Matrix, k: usize) -> Vec<Vec<usize>> {
        (0..h.rows())
            .map(|u| {
                let score = |v: usize| -> f64 {
                    (0..h.cols()).map(|j| h.at(u, j) * h.at(v, j)).sum()
                };
                let mut others: Vec<usize> = (0..h.rows()).filter(|&v| v != u).collect();
                others.sort_by(|&a, &b| {
                    score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b))
                });
                others.truncate(k);
                others
            })
            .collect()
    }

    let mut rng = Rng::new(88);
    for trial in 0..50 {
        let n = 2 + rng.below(199); // up to 200 nodes
        let c = 2 + rng.below(6);
        // Half the trials use quantized rows to force exact score ties.
        let h = if trial % 2 == 0 {
            Matrix::from_fn(n, c, |_, _| (rng.below(3) as f64) * 0.5)
        } else {
            spreadfgl_core::tensor::row_softmax(&Matrix::from_fn(n, c, |_, _| rng.normal()))
        };
        let k = 1 + rng.below(n - 1);
        let ge = GlobalEmbedding {
            h,
            owner_of: (0..n).map(|i| (0, i)).collect(),
        };
        let got = candidate_lists(&ge, k).unwrap();
        let want = oracle(&ge.h, k);
        assert_eq!(got, want, "trial {trial} (n={n}, k={k}) diverged from oracle");

        // The deduplicated pair set must match too.
        let links = candidate_links(&ge, k).unwrap();
        let mut expect: Vec<(usize, usize)> = want
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u.min(v), u.max(v))))
            .collect();
        expect.sort_unstable();
        expect.dedup();
        assert_eq!(links, expect, "trial {trial} pair set diverged");
    }
    println!("criterion 8 (candidate-links oracle): PASS — 50 graphs up to |V|=200, ties included");
}

#[test]
fn acceptance_9_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let st = std::process::Command::new(env!("CARGO_BIN_EXE_spreadfgl"))
            .current_dir(workspace_root())
            .env("RAYON_NUM_THREADS", threads)
            .args([
                "preset",
                "synthetic60-spreadfgl-m6",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .expect("spawn preset run");
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        outputs.push(std::fs::read(dir.join("rounds.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "1-thread vs 4-thread rounds.csv differ");
    assert_eq!(outputs[0], outputs[2], "repeat run rounds.csv differ");
    println!(
        "criterion 9 (determinism): PASS — synthetic60-spreadfgl-m6 rounds.csv bit-identical across reruns and thread counts"
    );
}
