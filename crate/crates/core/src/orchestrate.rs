//! Central-node / cluster-node view of the engines: per-iteration message
//! schedule, payload accounting, and an in-process mailbox execution that
//! reproduces [`crate::solvers::run`] bit for bit.
//!
//! Per iteration every cluster uplinks its new local image. The central
//! node then updates the global image and the dual variable and sends back
//! what the clusters need for the next local step:
//!
//! - consensus: the global image (broadcast) and each cluster's own dual
//!   block (unicast), `(Q + 1) N` elements downlink;
//! - sharing: the global image, the dual variable and the sum of local
//!   images (all broadcast), `3N` elements downlink whatever `Q` is.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::ForwardOperator;
use crate::solvers::admm::{finish_iteration, validate_inputs};
use crate::solvers::{
    sum_images, ClusterProblem, Method, ReconstructionResult, SolverConfig, SolverState,
    Termination,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Central,
    Cluster(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Central => f.write_str("central"),
            NodeId::Cluster(q) => write!(f, "cluster_{q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Cluster to central node.
    Uplink,
    /// Central node to every cluster.
    Broadcast,
    /// Central node to one cluster.
    Unicast,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Uplink => "Uplink",
            Direction::Broadcast => "Broadcast",
            Direction::Unicast => "Unicast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    LocalImage,
    GlobalImage,
    DualFull,
    DualSlice,
    SumImage,
}

impl PayloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::LocalImage => "LocalImage",
            PayloadKind::GlobalImage => "GlobalImage",
            PayloadKind::DualFull => "DualFull",
            PayloadKind::DualSlice => "DualSlice",
            PayloadKind::SumImage => "SumImage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub iter: usize,
    pub direction: Direction,
    pub sender: NodeId,
    pub payload_kind: PayloadKind,
    /// Number of real elements carried.
    pub payload_len: usize,
}

/// Messages of one outer iteration (numbered 1), in sending order.
pub fn iteration_schedule(method: Method, q: usize, n: usize) -> Vec<MessageRecord> {
    let rec = |direction, sender, payload_kind| MessageRecord {
        iter: 1,
        direction,
        sender,
        payload_kind,
        payload_len: n,
    };
    let mut out: Vec<MessageRecord> = (0..q)
        .map(|c| rec(Direction::Uplink, NodeId::Cluster(c), PayloadKind::LocalImage))
        .collect();
    out.push(rec(Direction::Broadcast, NodeId::Central, PayloadKind::GlobalImage));
    match method {
        Method::Cadmm => out.extend(
            (0..q).map(|_| rec(Direction::Unicast, NodeId::Central, PayloadKind::DualSlice)),
        ),
        Method::Sadmm => {
            out.push(rec(Direction::Broadcast, NodeId::Central, PayloadKind::DualFull));
            out.push(rec(Direction::Broadcast, NodeId::Central, PayloadKind::SumImage));
        }
    }
    out
}

/// Per-iteration element counts derived from a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSummary {
    pub uplink: usize,
    /// Central-to-cluster elements with per-cluster dual unicasts.
    pub downlink: usize,
    /// Central-to-cluster elements if the whole dual variable were broadcast
    /// instead of unicast in slices.
    pub downlink_full_dual: usize,
}

impl PayloadSummary {
    pub fn total(&self) -> usize {
        self.uplink + self.downlink
    }
}

pub fn payload_summary(method: Method, q: usize, n: usize) -> PayloadSummary {
    let schedule = iteration_schedule(method, q, n);
    let sum = |pred: &dyn Fn(&MessageRecord) -> bool| -> usize {
        schedule.iter().filter(|m| pred(m)).map(|m| m.payload_len).sum()
    };
    let uplink = sum(&|m| m.direction == Direction::Uplink);
    let downlink = sum(&|m| m.direction != Direction::Uplink);
    let dual_slices = sum(&|m| m.payload_kind == PayloadKind::DualSlice);
    let downlink_full_dual = if dual_slices > 0 {
        downlink - dual_slices + q * n
    } else {
        downlink
    };
    PayloadSummary {
        uplink,
        downlink,
        downlink_full_dual,
    }
}

/// Trace as CSV with header `iter,direction,sender,payload_kind,payload_len`.
pub fn trace_to_csv(trace: &[MessageRecord]) -> String {
    let mut out = String::from("iter,direction,sender,payload_kind,payload_len\n");
    for m in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.iter,
            m.direction.as_str(),
            m.sender,
            m.payload_kind.as_str(),
            m.payload_len
        ));
    }
    out
}

/// Floats a cluster node keeps between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeMemory {
    /// Its own state (previous local image when the method needs it).
    pub own_state: usize,
    /// Buffers holding the latest received payloads.
    pub received: usize,
}

#[derive(Debug, Clone)]
struct Message {
    sender: NodeId,
    kind: PayloadKind,
    payload: Vec<f64>,
    /// Cluster data misfit `||y_q - A_q x_q||^2`, piggybacked on the local
    /// image for objective logging. Not counted as payload.
    misfit: f64,
}

impl Message {
    fn record(&self, iter: usize, direction: Direction) -> MessageRecord {
        MessageRecord {
            iter,
            direction,
            sender: self.sender,
            payload_kind: self.kind,
            payload_len: self.payload.len(),
        }
    }
}

/// A cluster node sees only its own operator and measurements.
struct ClusterNode<'a> {
    id: usize,
    problem: ClusterProblem<'a>,
    /// Previous local image; kept only when the method or warm start needs it.
    prev_local: Option<Vec<f64>>,
    global: Vec<f64>,
    dual: Vec<f64>,
    sum: Option<Vec<f64>>,
}

impl<'a> ClusterNode<'a> {
    fn new(id: usize, problem: ClusterProblem<'a>, method: Method, cfg: &SolverConfig) -> Self {
        let n = problem.image_len();
        let keep_prev = method == Method::Sadmm || cfg.warm_start;
        Self {
            id,
            problem,
            prev_local: keep_prev.then(|| vec![0.0; n]),
            global: vec![0.0; n],
            dual: vec![0.0; n],
            sum: (method == Method::Sadmm).then(|| vec![0.0; n]),
        }
    }

    fn receive(&mut self, msg: &Message) {
        let slot = match msg.kind {
            PayloadKind::GlobalImage => &mut self.global,
            PayloadKind::DualFull | PayloadKind::DualSlice => &mut self.dual,
            PayloadKind::SumImage => self.sum.get_or_insert_with(Vec::new),
            PayloadKind::LocalImage => return,
        };
        slot.clone_from(&msg.payload);
    }

    fn step(&mut self, method: Method, cfg: &SolverConfig) -> Result<Message> {
        let x = match method {
            Method::Cadmm => {
                let warm = if cfg.warm_start {
                    self.prev_local.as_deref()
                } else {
                    None
                };
                self.problem
                    .local_update_cadmm(&self.global, &self.dual, warm, cfg)?
            }
            Method::Sadmm => self.problem.local_update_sadmm(
                &self.global,
                self.sum.as_deref().unwrap_or_default(),
                self.prev_local.as_deref().unwrap_or_default(),
                &self.dual,
                cfg,
            )?,
        };
        let misfit = self.problem.misfit(&x)?;
        if let Some(prev) = self.prev_local.as_mut() {
            prev.clone_from(&x);
        }
        Ok(Message {
            sender: NodeId::Cluster(self.id),
            kind: PayloadKind::LocalImage,
            payload: x,
            misfit,
        })
    }

    fn memory(&self) -> NodeMemory {
        NodeMemory {
            own_state: self.prev_local.as_ref().map_or(0, Vec::len),
            received: self.global.len()
                + self.dual.len()
                + self.sum.as_ref().map_or(0, Vec::len),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MessagePassingRun {
    pub result: ReconstructionResult,
    pub trace: Vec<MessageRecord>,
    pub cluster_memory: Vec<NodeMemory>,
}

/// Runs `method` with the central node and the cluster nodes exchanging
/// messages through in-process mailboxes. Cluster handlers run concurrently;
/// the central node orders its inbox by sender before reducing, so delivery
/// order never affects the result.
pub fn run_message_passing(
    method: Method,
    operators: &[ForwardOperator],
    measurements: &[Vec<Complex64>],
    cfg: &SolverConfig,
) -> Result<MessagePassingRun> {
    let n = validate_inputs(operators, measurements, cfg)?;
    let q = operators.len();
    let mut nodes: Vec<ClusterNode> = operators
        .iter()
        .zip(measurements)
        .enumerate()
        .map(|(id, (op, y))| Ok(ClusterNode::new(id, ClusterProblem::new(op, y)?, method, cfg)))
        .collect::<Result<_>>()?;

    let mut state = SolverState::zeros(method, q, n);
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIters;

    for iter in 1..=cfg.max_outer_iters {
        let started = Instant::now();
        let mut inbox: Vec<Message> = nodes
            .par_iter_mut()
            .map(|node| node.step(method, cfg))
            .collect::<Result<_>>()?;
        inbox.sort_by_key(|m| m.sender);
        trace.extend(inbox.iter().map(|m| m.record(iter, Direction::Uplink)));

        let misfits: Vec<f64> = inbox.iter().map(|m| m.misfit).collect();
        state.local_images = inbox.into_iter().map(|m| m.payload).collect();
        let converged = finish_iteration(&mut state, &misfits, cfg, started)?;

        let central = |kind, payload: Vec<f64>| Message {
            sender: NodeId::Central,
            kind,
            payload,
            misfit: 0.0,
        };
        let global = central(PayloadKind::GlobalImage, state.global_image.clone());
        trace.push(global.record(iter, Direction::Broadcast));
        nodes.iter_mut().for_each(|node| node.receive(&global));
        match method {
            Method::Cadmm => {
                for node in nodes.iter_mut() {
                    let slice = state.dual[node.id * n..(node.id + 1) * n].to_vec();
                    let msg = central(PayloadKind::DualSlice, slice);
                    trace.push(msg.record(iter, Direction::Unicast));
                    node.receive(&msg);
                }
            }
            Method::Sadmm => {
                for msg in [
                    central(PayloadKind::DualFull, state.dual.clone()),
                    central(PayloadKind::SumImage, sum_images(&state.local_images)),
                ] {
                    trace.push(msg.record(iter, Direction::Broadcast));
                    nodes.iter_mut().for_each(|node| node.receive(&msg));
                }
            }
        }

        if converged {
            termination = Termination::Converged;
            break;
        }
    }

    let objective_history = state.residual_log.iter().map(|r| r.objective).collect();
    Ok(MessagePassingRun {
        result: ReconstructionResult {
            state,
            termination,
            objective_history,
        },
        trace,
        cluster_memory: nodes.iter().map(ClusterNode::memory).collect(),
    })
}
