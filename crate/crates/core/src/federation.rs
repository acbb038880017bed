//! Orchestration of clients and edge servers: edge-client rounds, FedAvg
//! aggregation, the K-interval imputation schedule, and neighbor-server
//! parameter averaging over the edge topology.

use crate::error::{Error, Result};
use crate::gnn::{self, ClassifierParams, LocalTask};
use crate::graph::{self, Graph};
use crate::imputation::{self, ImputationCfg, ImputationModels};
use crate::metrics::{compute_metrics, MetricReport};
use crate::optim::{OptimKind, Optimizer};
use crate::partition::{self, Partition};
use crate::rng::Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Independent local training, no aggregation at all.
    Local,
    /// FedAvg every round, imputation never.
    FedAvgFusion,
    /// Per-server FedAvg every round, imputation every K rounds.
    FedGl,
    /// Neighbor-topology aggregation + imputation every K rounds,
    /// per-server FedAvg otherwise, trace regularizer on.
    SpreadFgl,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "local" => Ok(Mode::Local),
            "fedavg" => Ok(Mode::FedAvgFusion),
            "fedgl" => Ok(Mode::FedGl),
            "spreadfgl" => Ok(Mode::SpreadFgl),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected local|fedavg|fedgl|spreadfgl)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::FedAvgFusion => "fedavg",
            Mode::FedGl => "fedgl",
            Mode::SpreadFgl => "spreadfgl",
        }
    }

    fn uses_imputation(&self) -> bool {
        matches!(self, Mode::FedGl | Mode::SpreadFgl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Ring,
    Complete,
    Isolated,
}

impl TopologyKind {
    pub fn parse(s: &str) -> Result<TopologyKind> {
        match s {
            "ring" => Ok(TopologyKind::Ring),
            "complete" => Ok(TopologyKind::Complete),
            "none" | "isolated" => Ok(TopologyKind::Isolated),
            other => Err(Error::Config(format!(
                "unknown topology {other:?} (expected ring|complete|none)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Complete => "complete",
            TopologyKind::Isolated => "none",
        }
    }
}

/// Symmetric zero-diagonal neighbor matrix over the edge servers; the
/// effective neighborhood adds self when `self_inclusive`.
#[derive(Debug, Clone)]
pub struct Topology {
    a: Vec<Vec<u8>>,
    pub self_inclusive: bool,
}

impl Topology {
    #[allow(clippy::needless_range_loop)]
    pub fn new(a: Vec<Vec<u8>>, self_inclusive: bool) -> Result<Self> {
        let n = a.len();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArg("topology matrix must be square".into()));
            }
            if row[i] != 0 {
                return Err(Error::InvalidArg(format!("topology diagonal must be zero (server {i})")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != a[j][i] {
                    return Err(Error::InvalidArg(format!(
                        "topology must be symmetric (entries ({i},{j}) and ({j},{i}) differ)"
                    )));
                }
            }
        }
        Ok(Self { a, self_inclusive })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn ring(n: usize, self_inclusive: bool) -> Self {
        let mut a = vec![vec![0u8; n]; n];
        if n > 1 {
            for i in 0..n {
                let j = (i + 1) % n;
                a[i][j] = 1;
                a[j][i] = 1;
            }
        }
        Self { a, self_inclusive }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn complete(n: usize, self_inclusive: bool) -> Self {
        let mut a = vec![vec![0u8; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    a[i][j] = 1;
                }
            }
        }
        Self { a, self_inclusive }
    }

    pub fn isolated(n: usize, self_inclusive: bool) -> Self {
        Self {
            a: vec![vec![0u8; n]; n],
            self_inclusive,
        }
    }

    pub fn of_kind(kind: TopologyKind, n: usize, self_inclusive: bool) -> Self {
        match kind {
            TopologyKind::Ring => Self::ring(n, self_inclusive),
            TopologyKind::Complete => Self::complete(n, self_inclusive),
            TopologyKind::Isolated => Self::isolated(n, self_inclusive),
        }
    }

    pub fn server_count(&self) -> usize {
        self.a.len()
    }

    /// Sorted effective neighborhood of server j (self first when included).
    pub fn effective_neighbors(&self, j: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.a.len())
            .filter(|&r| self.a[r][j] != 0 || (self.self_inclusive && r == j))
            .collect();
        out.sort_unstable();
        out
    }

    /// Whether information can flow between every pair of servers.
    #[allow(clippy::needless_range_loop)]
    pub fn is_connected(&self) -> bool {
        let n = self.a.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if self.a[u][v] != 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Every schedule and hyperparameter knob of one experiment.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    pub mode: Mode,
    pub servers: usize,
    pub clients: usize,
    /// Edge-client communication rounds T_g.
    pub rounds: usize,
    /// Local training rounds T_l.
    pub local_steps: usize,
    pub ae_iters: usize,
    pub as_iters: usize,
    /// Imputation interval K.
    pub kappa: usize,
    /// Classifier learning rate.
    pub alpha: f64,
    /// Autoencoder/assessor learning rate.
    pub beta: f64,
    /// Candidate links kept per node.
    pub top_k: usize,
    /// Negative-sampling threshold; defaults to 1/c at runtime.
    pub theta: Option<f64>,
    pub labeled_ratio: f64,
    pub hidden: usize,
    /// Trace-regularizer coefficient (SpreadFGL local loss).
    pub trace_lambda: f64,
    pub optimizer: OptimKind,
    pub topology: TopologyKind,
    pub self_inclusive: bool,
    /// Evaluate on the ghost-patched subgraphs instead of the real ones.
    pub eval_on_patched: bool,
    pub seed: u64,
    pub ae_tol: f64,
    pub ae_window: usize,
    pub ae_max_outer: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SpreadFgl,
            servers: 3,
            clients: 6,
            rounds: 60,
            local_steps: 10,
            ae_iters: 5,
            as_iters: 3,
            kappa: 5,
            alpha: 0.01,
            beta: 0.001,
            top_k: 5,
            theta: None,
            labeled_ratio: 0.3,
            hidden: 16,
            trace_lambda: 1.0,
            optimizer: OptimKind::Adam,
            topology: TopologyKind::Ring,
            self_inclusive: true,
            eval_on_patched: false,
            seed: 1,
            ae_tol: 1e-3,
            ae_window: 3,
            ae_max_outer: 50,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::Config("kappa (K) must be >= 1".into()));
        }
        if self.clients == 0 || self.servers == 0 {
            return Err(Error::Config("need at least one client and one server".into()));
        }
        if self.clients < self.servers {
            return Err(Error::Config(format!(
                "{} servers cannot all cover {} clients",
                self.servers, self.clients
            )));
        }
        if self.local_steps == 0 {
            return Err(Error::Config("local_steps (T_l) must be >= 1".into()));
        }
        if self.mode.uses_imputation() {
            if self.ae_iters == 0 {
                return Err(Error::Config("ae_iters (T_ae) must be >= 1".into()));
            }
            if self.as_iters == 0 {
                return Err(Error::Config("as_iters (T_as) must be >= 1".into()));
            }
            if self.top_k == 0 {
                return Err(Error::Config("k must be >= 1".into()));
            }
        }
        if !(self.labeled_ratio > 0.0 && self.labeled_ratio <= 0.8) {
            return Err(Error::Config(format!(
                "labeled_ratio must lie in (0, 0.8], got {}",
                self.labeled_ratio
            )));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::Config(format!("theta must lie in (0,1), got {theta}")));
            }
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Unweighted mean of flat parameter vectors, summed in the order given
/// (callers pass ascending client id).
pub fn fedavg(params: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = params
        .first()
        .ok_or_else(|| Error::InvalidArg("fedavg over zero clients".into()))?;
    let len = first.len();
    let mut sum = vec![0.0; len];
    for p in params {
        if p.len() != len {
            return Err(Error::InvalidArg(format!(
                "fedavg length mismatch: {} vs {len}",
                p.len()
            )));
        }
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
    }
    let inv = 1.0 / params.len() as f64;
    for s in &mut sum {
        *s *= inv;
    }
    Ok(sum)
}

/// W_j <- (sum_r sum_i a_rj W_(r,i)) / (sum_r a_rj M_r) over the effective
/// neighborhood of server j (self included when the topology says so).
pub fn neighbor_aggregate(
    j: usize,
    per_server_client_params: &[Vec<Vec<f64>>],
    topo: &Topology,
) -> Result<Vec<f64>> {
    let neighbors = topo.effective_neighbors(j);
    if neighbors.is_empty() {
        return Err(Error::InvalidArg(format!(
            "server {j} has no effective neighbors to aggregate from"
        )));
    }
    let mut count = 0usize;
    let mut sum: Option<Vec<f64>> = None;
    for &r in &neighbors {
        for p in &per_server_client_params[r] {
            match &mut sum {
                None => sum = Some(p.clone()),
                Some(s) => {
                    if p.len() != s.len() {
                        return Err(Error::InvalidArg(format!(
                            "neighbor_aggregate length mismatch: {} vs {}",
                            p.len(),
                            s.len()
                        )));
                    }
                    for (a, b) in s.iter_mut().zip(p) {
                        *a += b;
                    }
                }
            }
            count += 1;
        }
    }
    let mut sum = sum.ok_or_else(|| {
        Error::InvalidArg(format!("server {j}: effective neighborhood holds no clients"))
    })?;
    let inv = 1.0 / count as f64;
    for s in &mut sum {
        *s *= inv;
    }
    Ok(sum)
}

/// One completed edge-client round.
#[derive(Debug, Clone)]
pub struct RoundLog {
    pub round: usize,
    pub imputation: bool,
    pub global_loss: f64,
    pub server_acc: Vec<f64>,
    pub server_f1: Vec<f64>,
    /// Wall-clock only; never serialized into rounds.csv (bit-identity).
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub log: Vec<RoundLog>,
    pub server_params: Vec<ClassifierParams>,
    pub client_params: Vec<ClassifierParams>,
    pub final_metrics: MetricReport,
    /// (global node id, predicted class, true class) per test node.
    pub predictions: Vec<(usize, usize, usize)>,
    pub partition: Partition,
    pub warnings: Vec<String>,
    pub resolved_theta: f64,
}

struct ClientState {
    base: LocalTask,
    task: LocalTask,
    params: ClassifierParams,
    opt: Optimizer,
    server: usize,
}

struct Orchestrator<'a> {
    cfg: &'a FederationConfig,
    topo: Topology,
    clients: Vec<ClientState>,
    server_params: Vec<ClassifierParams>,
    imputation: Vec<ImputationModels>,
    root: Rng,
    theta: f64,
    classes: usize,
    split: &'a graph::Split,
    partition: &'a Partition,
}

impl<'a> Orchestrator<'a> {
    fn clients_of(&self, server: usize) -> Vec<usize> {
        (0..self.clients.len())
            .filter(|&i| self.clients[i].server == server)
            .collect()
    }

    fn trace_lambda(&self) -> f64 {
        if self.cfg.mode == Mode::SpreadFgl {
            self.cfg.trace_lambda
        } else {
            0.0
        }
    }

    /// Local training of every client (deterministically parallel), then
    /// aggregation, imputation, broadcast, and evaluation per the schedule.
    fn run_round(&mut self, t_g: usize) -> Result<RoundLog> {
        let started = Instant::now();
        let alpha = self.cfg.alpha;
        let t_l = self.cfg.local_steps;
        let lambda = self.trace_lambda();

        let results: Vec<Result<Option<f64>>> = self
            .clients
            .par_iter_mut()
            .map(|client| {
                if client.task.train_ids.is_empty() {
                    return Ok(None); // nothing to fit; params pass through
                }
                let (params, losses) =
                    gnn::local_sgd_round(&client.params, &client.task, alpha, t_l, &mut client.opt, lambda)?;
                client.params = params;
                Ok(losses.last().copied())
            })
            .collect();
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        for r in results {
            let loss = r?;
            if let Some(l) = loss {
                loss_sum += l;
                loss_n += 1;
            }
        }
        let global_loss = if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN };

        let imputation_round = self.cfg.mode.uses_imputation() && t_g.is_multiple_of(self.cfg.kappa);

        // Aggregation.
        match self.cfg.mode {
            Mode::Local => {}
            Mode::FedAvgFusion | Mode::FedGl => {
                for j in 0..self.cfg.servers {
                    let flats: Vec<Vec<f64>> = self
                        .clients_of(j)
                        .iter()
                        .map(|&i| self.clients[i].params.to_flat())
                        .collect();
                    let avg = fedavg(&flats)?;
                    self.server_params[j] = self.params_from_flat(&avg)?;
                }
            }
            Mode::SpreadFgl => {
                let per_server: Vec<Vec<Vec<f64>>> = (0..self.cfg.servers)
                    .map(|j| {
                        self.clients_of(j)
                            .iter()
                            .map(|&i| self.clients[i].params.to_flat())
                            .collect()
                    })
                    .collect();
                for j in 0..self.cfg.servers {
                    let flat = if imputation_round {
                        neighbor_aggregate(j, &per_server, &self.topo)?
                    } else {
                        fedavg(&per_server[j])?
                    };
                    self.server_params[j] = self.params_from_flat(&flat)?;
                }
            }
        }

        // Imputation + graph fixing.
        if imputation_round {
            for j in 0..self.cfg.servers {
                let members = self.clients_of(j);
                let embeddings: Vec<(usize, crate::tensor::Matrix)> = members
                    .par_iter()
                    .map(|&i| {
                        let client = &self.clients[i];
                        let out = gnn::forward(&client.params, &client.task);
                        let real = crate::tensor::Matrix::from_fn(
                            client.base.n_real,
                            self.classes,
                            |r, c| out.at(r, c),
                        );
                        (i, real)
                    })
                    .collect();
                let ge = imputation::fuse(&embeddings)?;
                let imp_cfg = ImputationCfg {
                    k: self.cfg.top_k,
                    theta: self.theta,
                    beta: self.cfg.beta,
                    t_ae: self.cfg.ae_iters,
                    t_as: self.cfg.as_iters,
                    tol: self.cfg.ae_tol,
                    window: self.cfg.ae_window,
                    max_outer: self.cfg.ae_max_outer,
                };
                let mut noise = self.root.fork(&format!("noise/s{j}/r{t_g}"));
                let pg =
                    imputation::train_imputation(&mut self.imputation[j], &ge, &imp_cfg, &mut noise)?;
                for &i in &members {
                    self.clients[i].task =
                        imputation::graph_fix(&self.clients[i].base, &pg, &ge.owner_of, i);
                }
            }
        }

        // Broadcast.
        if self.cfg.mode != Mode::Local {
            for client in &mut self.clients {
                client.params = self.server_params[client.server].clone();
                client.opt.reset();
            }
        }

        let (server_acc, server_f1) = self.evaluate_servers()?;
        Ok(RoundLog {
            round: t_g,
            imputation: imputation_round,
            global_loss,
            server_acc,
            server_f1,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn params_from_flat(&self, flat: &[f64]) -> Result<ClassifierParams> {
        let template = &self.clients[0].params;
        ClassifierParams::from_flat(template.input_dim(), template.hidden(), template.classes(), flat)
    }

    fn model_for(&self, client: usize) -> &ClassifierParams {
        if self.cfg.mode == Mode::Local {
            &self.clients[client].params
        } else {
            &self.server_params[self.clients[client].server]
        }
    }

    /// Predictions for every test node (routed to its owning client's
    /// server model), sorted by global id.
    fn test_predictions(&self, split: &graph::Split) -> Vec<(usize, usize, usize)> {
        let outputs: Vec<Vec<(usize, usize, usize)>> = (0..self.clients.len())
            .into_par_iter()
            .map(|i| {
                let client = &self.clients[i];
                let task = if self.cfg.eval_on_patched { &client.task } else { &client.base };
                let model = self.model_for(i);
                let out = gnn::forward(model, task);
                let mut preds = Vec::new();
                for (local, &global) in task.global_ids.iter().enumerate() {
                    if split.test_mask[global as usize] {
                        let row = out.row(local);
                        let pred = argmax(row);
                        preds.push((global as usize, pred, task.graph.labels()[local]));
                    }
                }
                preds
            })
            .collect();
        let mut all: Vec<(usize, usize, usize)> = outputs.into_iter().flatten().collect();
        all.sort_unstable();
        all
    }

    fn evaluate_servers(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let preds = self.test_predictions(self.split);
        let mut acc = Vec::with_capacity(self.cfg.servers);
        let mut f1 = Vec::with_capacity(self.cfg.servers);
        for j in 0..self.cfg.servers {
            let mut p = Vec::new();
            let mut t = Vec::new();
            for &(global, pred, truth) in &preds {
                if self.owner_server(global) == j {
                    p.push(pred);
                    t.push(truth);
                }
            }
            if p.is_empty() {
                acc.push(f64::NAN);
                f1.push(f64::NAN);
            } else {
                let m = compute_metrics(&p, &t, self.classes)?;
                acc.push(m.acc);
                f1.push(m.macro_f1);
            }
        }
        Ok((acc, f1))
    }

    fn owner_server(&self, global: usize) -> usize {
        self.partition.client_of[global].0 as usize
    }
}

/// Runs the full protocol: partition, split, init, T_g rounds, final
/// evaluation of the global classifiers on the test mask.
pub fn run_experiment(cfg: &FederationConfig, g: &Graph) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let mut warnings = Vec::new();

    let partition =
        partition::louvain_partition(g, cfg.clients, cfg.servers, &mut root.fork("partition"))?;
    let split = graph::make_split(g, cfg.labeled_ratio, &mut root.fork("split"))?;

    let d = g.feature_dim();
    let c = g.num_classes();
    let theta = cfg.theta.unwrap_or(1.0 / c as f64);

    let topo = Topology::of_kind(cfg.topology, cfg.servers, cfg.self_inclusive);
    if cfg.mode == Mode::SpreadFgl && !topo.is_connected() {
        warnings.push("edge-server topology is not connected; information cannot flow between all servers".into());
    }

    let w0 = ClassifierParams::init(d, cfg.hidden, c, &mut root.fork("init"));
    let flat_len = w0.to_flat().len();
    let clients: Vec<ClientState> = partition
        .subgraphs
        .iter()
        .enumerate()
        .map(|(i, sub)| {
            let base = LocalTask::from_subgraph(sub, &split);
            ClientState {
                task: base.clone(),
                base,
                params: w0.clone(),
                opt: Optimizer::new(cfg.optimizer, flat_len),
                server: partition.server_of_client[i],
            }
        })
        .collect();
    for (i, client) in clients.iter().enumerate() {
        if client.base.train_ids.is_empty() {
            warnings.push(format!("client {i} has no training nodes; it only relays parameters"));
        }
    }

    let imputation_models: Vec<ImputationModels> = (0..cfg.servers)
        .map(|j| ImputationModels::init(c, d, &mut root.fork(&format!("imputation-init/s{j}"))))
        .collect();

    let mut orch = Orchestrator {
        cfg,
        topo,
        clients,
        server_params: vec![w0.clone(); cfg.servers],
        imputation: imputation_models,
        root,
        theta,
        classes: c,
        split: &split,
        partition: &partition,
    };

    let mut log = Vec::with_capacity(cfg.rounds);
    for t_g in 0..cfg.rounds {
        log.push(orch.run_round(t_g)?);
    }

    let predictions = orch.test_predictions(&split);
    let (pred, truth): (Vec<usize>, Vec<usize>) = predictions
        .iter()
        .map(|&(_, p, t)| (p, t))
        .unzip();
    let final_metrics = compute_metrics(&pred, &truth, c)?;

    Ok(ExperimentOutput {
        log,
        server_params: orch.server_params,
        client_params: orch.clients.into_iter().map(|c| c.params).collect(),
        final_metrics,
        predictions,
        partition,
        warnings,
        resolved_theta: theta,
    })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FGLC";
const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint layout: 16-byte header (magic, version, f64 count) followed by
/// the flat parameter vector, 64-bit little-endian.
pub fn write_checkpoint(path: &Path, flat: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CHECKPOINT_MAGIC)?;
    f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    f.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::InvalidArg(format!("{}: not a checkpoint file", path.display())));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::InvalidArg(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * len {
        return Err(Error::InvalidArg(format!(
            "{}: truncated checkpoint (expected {len} values)",
            path.display()
        )));
    }
    Ok(bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
