//! Slot-synchronous simulation.
//!
//! One slot: arrivals are placed at their sources with the full deadline;
//! every policy proposes transmissions; hard limits are enforced according to
//! the policy kind; link and node usage is recorded; success draws move
//! packets; finally every surviving packet's time-to-go drops by one and
//! packets that run out are discarded.
//!
//! Arrivals stop after `T` slots but the run continues until every packet
//! born within the horizon has been delivered or discarded, so per-slot
//! averages count exactly the first `T` arrival cohorts.

pub mod baselines;
pub mod rng;
pub mod sweep;
pub mod truncate;

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{build_lp, extract_policy, solve_lp, LpStatus};
use crate::model::ProblemSpec;
use crate::policy::{Action, FlowPolicy, PolicyTable};
use baselines::HopTable;
use rng::{Purpose, Streams};
use truncate::{truncate_link, truncate_peak, Proposal, LIMIT_SLACK};

pub use sweep::{compare, loglog_slope, scale_sweep, CompareRow, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Optimal,
    TruncatedLink,
    TruncatedPeak,
    EdfSp,
    EdfBp,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Optimal,
        PolicyKind::TruncatedLink,
        PolicyKind::TruncatedPeak,
        PolicyKind::EdfSp,
        PolicyKind::EdfBp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::TruncatedLink => "truncated-link",
            PolicyKind::TruncatedPeak => "truncated-peak",
            PolicyKind::EdfSp => "edf-sp",
            PolicyKind::EdfBp => "edf-bp",
        }
    }

    pub fn uses_table(self) -> bool {
        matches!(
            self,
            PolicyKind::Optimal | PolicyKind::TruncatedLink | PolicyKind::TruncatedPeak
        )
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

/// A policy ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyImpl {
    pub kind: PolicyKind,
    /// Per-packet randomized table; required by the table-driven kinds.
    pub table: Option<PolicyTable>,
    /// Truncated packets leave the network (`true`) or wait in place.
    pub eject: bool,
}

impl PolicyImpl {
    pub fn with_table(kind: PolicyKind, table: PolicyTable) -> Self {
        Self {
            kind,
            table: Some(table),
            eject: true,
        }
    }

    pub fn baseline(kind: PolicyKind) -> Self {
        Self {
            kind,
            table: None,
            eject: true,
        }
    }

    /// Builds `kind` for `spec`, solving the LP when a table is needed.
    pub fn for_spec(kind: PolicyKind, spec: &ProblemSpec) -> Result<Self> {
        if !kind.uses_table() {
            return Ok(Self::baseline(kind));
        }
        Ok(Self::with_table(kind, optimal_table(spec)?))
    }
}

/// The LP-optimal randomized policy of `spec`.
pub fn optimal_table(spec: &ProblemSpec) -> Result<PolicyTable> {
    let sol = solve_lp(&build_lp(spec)?)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("LP is {:?}", sol.status)));
    }
    extract_policy(&sol, spec)
}

/// Draws an action from the distribution at `(node, ttg)`. Only the flow's
/// own table and the packet's local state are consulted.
pub fn decide(fp: &FlowPolicy, node: usize, ttg: u32, u: f64) -> Action {
    let dist = fp.actions(node, ttg);
    let mut acc = 0.0;
    for &(a, p) in dist {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // rounding leftovers go to the last listed action with positive mass
    dist.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map_or(Action::Wait, |(a, _)| *a)
}

#[derive(Debug, Clone)]
struct Packet {
    uid: u64,
    birth: u64,
    flow: usize,
    node: usize,
    ttg: u32,
    /// EDF-SP route (link indices) and the position of the next hop.
    route: Vec<usize>,
    hop: usize,
}

/// Number of batches used for batch-means standard errors.
pub const BATCHES: u64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub policy: PolicyKind,
    /// Scale index `N` (`1 / packet_size`, rounded).
    pub scale: u32,
    pub seed: u64,
    pub horizon: u64,
    pub flow_ids: Vec<u32>,
    /// Packets (not size units) delivered per flow.
    pub delivered: Vec<u64>,
    /// Timely throughput per flow in size units per slot.
    pub throughput: Vec<f64>,
    /// Batch-means standard error of `throughput`.
    pub throughput_se: Vec<f64>,
    pub objective: f64,
    pub objective_se: f64,
    /// Mean energy per slot at each node.
    pub node_power: Vec<f64>,
    /// Largest per-slot usage (size units) on each link.
    pub link_max_usage: Vec<f64>,
    /// Mean per-slot usage on each link.
    pub link_mean_usage: Vec<f64>,
    /// Largest per-slot energy at each node.
    pub node_max_energy: Vec<f64>,
    /// (slot, link) pairs whose usage exceeded the capacity.
    pub link_violations: u64,
    /// (slot, node) pairs whose energy exceeded the peak.
    pub peak_violations: u64,
    /// Packets removed by truncation or, for the baselines, because they
    /// could no longer make their deadline.
    pub ejected: u64,
    /// Packets whose deadline expired in the network.
    pub expired: u64,
}

impl SimMetrics {
    /// Frozen column order: policy, N, seed, T, then `r_<flow>` and
    /// `r_se_<flow>` per flow, objective, objective_se, `power_<node>` per
    /// node, link_violations, peak_violations, ejected, expired.
    pub fn csv_header(&self) -> String {
        let mut h = String::from("policy,N,seed,T");
        for id in &self.flow_ids {
            let _ = write!(h, ",r_{id}");
        }
        for id in &self.flow_ids {
            let _ = write!(h, ",r_se_{id}");
        }
        h.push_str(",objective,objective_se");
        for i in 0..self.node_power.len() {
            let _ = write!(h, ",power_{i}");
        }
        h.push_str(",link_violations,peak_violations,ejected,expired");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!("{},{},{},{}", self.policy, self.scale, self.seed, self.horizon);
        for x in self.throughput.iter().chain(&self.throughput_se) {
            let _ = write!(r, ",{x}");
        }
        let _ = write!(r, ",{},{}", self.objective, self.objective_se);
        for x in &self.node_power {
            let _ = write!(r, ",{x}");
        }
        let _ = write!(
            r,
            ",{},{},{},{}",
            self.link_violations, self.peak_violations, self.ejected, self.expired
        );
        r
    }
}

/// Runs `policy` on `spec` for `horizon` slots.
pub fn run_sim(spec: &ProblemSpec, policy: &PolicyImpl, horizon: u64, seed: u64) -> Result<SimMetrics> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon T must be >= 1".into()));
    }
    let table = match (policy.kind.uses_table(), &policy.table) {
        (true, Some(t)) => {
            t.check(spec)?;
            Some(t)
        }
        (true, None) => {
            return Err(Error::InvalidArgument(format!(
                "policy {} needs a policy table",
                policy.kind
            )))
        }
        (false, _) => None,
    };
    let streams = Streams::new(seed);
    let hops = HopTable::new(spec);
    let size = spec.packet_size;
    let nf = spec.flows.len();
    let nn = spec.num_nodes;
    let nl = spec.links.len();
    let caps: Vec<Option<f64>> = (0..nl).map(|k| spec.link_capacity_of(k)).collect();
    let peaks: Vec<Option<f64>> = (0..nn).map(|i| spec.peak_power_of(i)).collect();
    let arrivals: Vec<Binomial> = spec
        .flows
        .iter()
        .map(|f| {
            let (n, p) = f.arrival_trials();
            Binomial::new(n as u64, p).map_err(|e| Error::InvalidArgument(format!("flow {}: {e}", f.id)))
        })
        .collect::<Result<_>>()?;
    let baseline_option: Vec<usize> = spec.links.iter().map(|l| l.most_reliable_option()).collect();

    let mut packets: Vec<Packet> = Vec::new();
    let mut next_uid = 0u64;
    let mut delivered = vec![0u64; nf];
    let batches = BATCHES.min(horizon);
    let batch_len = horizon / batches;
    let batch_of = |birth: u64| (birth / batch_len).min(batches - 1) as usize;
    let mut batch_delivered = vec![vec![0u64; nf]; batches as usize];
    let mut energy_total = vec![0.0; nn];
    let mut node_max_energy = vec![0.0f64; nn];
    let mut link_total = vec![0.0; nl];
    let mut link_max = vec![0.0f64; nl];
    let mut link_violations = 0u64;
    let mut peak_violations = 0u64;
    let mut ejected = 0u64;
    let mut expired = 0u64;

    let mut proposals: Vec<Proposal> = Vec::new();
    let mut proposer: Vec<usize> = Vec::new();
    let mut queue = vec![vec![0.0; nn]; nf];

    // packets born before the horizon are followed until they leave
    let mut slot = 0u64;
    while slot < horizon || !packets.is_empty() {
        for (fi, f) in spec.flows.iter().enumerate() {
            if slot >= horizon {
                break;
            }
            let mut rng = streams.get(slot, Purpose::Arrival, fi);
            let k = arrivals[fi].sample(&mut rng);
            let mut route_rng = (policy.kind == PolicyKind::EdfSp).then(|| streams.get(slot, Purpose::Route, fi));
            for _ in 0..k {
                let route = match route_rng.as_mut() {
                    Some(r) => hops.sample_path(spec, f.source.0, f.dest.0, r),
                    None => Vec::new(),
                };
                packets.push(Packet {
                    uid: next_uid,
                    birth: slot,
                    flow: fi,
                    node: f.source.0,
                    ttg: f.deadline,
                    route,
                    hop: 0,
                });
                next_uid += 1;
            }
        }

        // baselines discard packets that can no longer make it
        if !policy.kind.uses_table() {
            let before = packets.len();
            packets.retain(|p| {
                let remaining = match policy.kind {
                    PolicyKind::EdfSp => (p.route.len() - p.hop) as u32,
                    _ => hops.dist[spec.flows[p.flow].dest.0][p.node],
                };
                remaining <= p.ttg
            });
            ejected += (before - packets.len()) as u64;
        }

        // proposals
        proposals.clear();
        proposer.clear();
        match policy.kind {
            PolicyKind::Optimal | PolicyKind::TruncatedLink | PolicyKind::TruncatedPeak => {
                let table = table.expect("checked above");
                let mut rngs: Vec<Option<rand_chacha::ChaCha8Rng>> = vec![None; nn];
                for (pi, p) in packets.iter().enumerate() {
                    let rng = rngs[p.node].get_or_insert_with(|| streams.get(slot, Purpose::Policy, p.node));
                    let u: f64 = rng.random();
                    if let Action::Transmit { link, option } = decide(&table.flows[p.flow], p.node, p.ttg, u) {
                        proposals.push(Proposal {
                            uid: p.uid,
                            node: p.node,
                            link,
                            option,
                            ttg: p.ttg,
                            size,
                            energy: spec.links[link].options[option].energy * size,
                        });
                        proposer.push(pi);
                    }
                }
            }
            PolicyKind::EdfSp => {
                for (pi, p) in packets.iter().enumerate() {
                    let link = p.route[p.hop];
                    let option = baseline_option[link];
                    proposals.push(Proposal {
                        uid: p.uid,
                        node: p.node,
                        link,
                        option,
                        ttg: p.ttg,
                        size,
                        energy: spec.links[link].options[option].energy * size,
                    });
                    proposer.push(pi);
                }
            }
            PolicyKind::EdfBp => {
                for q in queue.iter_mut() {
                    q.fill(0.0);
                }
                for p in &packets {
                    queue[p.flow][p.node] += size;
                }
                let mut taken = vec![false; packets.len()];
                for (k, l) in spec.links.iter().enumerate() {
                    let (i, j) = (l.from.0, l.to.0);
                    let mut ranked: Vec<(f64, usize)> = (0..nf)
                        .map(|f| {
                            let down = if spec.flows[f].dest.0 == j { 0.0 } else { queue[f][j] };
                            (queue[f][i] - down, f)
                        })
                        .filter(|(b, _)| *b > LIMIT_SLACK)
                        .collect();
                    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    let mut used = 0.0;
                    let cap = caps[k];
                    'flows: for (_, f) in ranked {
                        let mut cands: Vec<usize> = (0..packets.len())
                            .filter(|&pi| !taken[pi] && packets[pi].flow == f && packets[pi].node == i)
                            .collect();
                        cands.sort_by_key(|&pi| (packets[pi].ttg, packets[pi].uid));
                        for pi in cands {
                            if cap.is_some_and(|c| used + size > c + LIMIT_SLACK) {
                                break 'flows;
                            }
                            used += size;
                            taken[pi] = true;
                            let option = baseline_option[k];
                            proposals.push(Proposal {
                                uid: packets[pi].uid,
                                node: i,
                                link: k,
                                option,
                                ttg: packets[pi].ttg,
                                size,
                                energy: l.options[option].energy * size,
                            });
                            proposer.push(pi);
                        }
                    }
                }
            }
        }

        // enforcement
        let (scheduled, rejected): (Vec<usize>, Vec<usize>) = match policy.kind {
            PolicyKind::Optimal | PolicyKind::EdfBp => ((0..proposals.len()).collect(), Vec::new()),
            PolicyKind::TruncatedLink | PolicyKind::EdfSp => truncate_link(&proposals, &caps),
            PolicyKind::TruncatedPeak => truncate_peak(&proposals, &peaks),
        };
        let mut remove = vec![false; packets.len()];
        if policy.eject && matches!(policy.kind, PolicyKind::TruncatedLink | PolicyKind::TruncatedPeak) {
            for &k in &rejected {
                remove[proposer[k]] = true;
                ejected += 1;
            }
        }

        // usage
        let mut link_use = vec![0.0; nl];
        let mut node_use = vec![0.0; nn];
        for &k in &scheduled {
            let p = &proposals[k];
            link_use[p.link] += p.size;
            node_use[p.node] += p.energy;
        }
        for k in 0..nl {
            link_total[k] += link_use[k];
            link_max[k] = link_max[k].max(link_use[k]);
            if caps[k].is_some_and(|c| link_use[k] > c + LIMIT_SLACK) {
                link_violations += 1;
            }
        }
        for i in 0..nn {
            energy_total[i] += node_use[i];
            node_max_energy[i] = node_max_energy[i].max(node_use[i]);
            if peaks[i].is_some_and(|c| node_use[i] > c + LIMIT_SLACK) {
                peak_violations += 1;
            }
        }

        // success draws, link by link in uid order
        let mut order = scheduled;
        order.sort_by_key(|&k| (proposals[k].link, proposals[k].uid));
        let mut link_rng: Option<(usize, rand_chacha::ChaCha8Rng)> = None;
        for k in order {
            let pr = proposals[k];
            if link_rng.as_ref().is_none_or(|(l, _)| *l != pr.link) {
                link_rng = Some((pr.link, streams.get(slot, Purpose::Link, pr.link)));
            }
            let rng = &mut link_rng.as_mut().expect("set above").1;
            let u: f64 = rng.random();
            if u >= spec.links[pr.link].options[pr.option].p {
                continue;
            }
            let p = &mut packets[proposer[k]];
            let to = spec.links[pr.link].to.0;
            p.node = to;
            p.hop += 1;
            if to == spec.flows[p.flow].dest.0 {
                delivered[p.flow] += 1;
                batch_delivered[batch_of(p.birth)][p.flow] += 1;
                remove[proposer[k]] = true;
            }
        }

        // ageing
        let mut idx = 0;
        packets.retain_mut(|p| {
            let gone = remove[idx];
            idx += 1;
            if gone {
                return false;
            }
            p.ttg -= 1;
            if p.ttg == 0 {
                expired += 1;
                return false;
            }
            true
        });

        slot += 1;
    }

    let t = horizon as f64;
    let mut batch_means: Vec<Vec<f64>> = vec![Vec::new(); nf];
    let mut batch_obj: Vec<f64> = Vec::new();
    for (b, counts) in batch_delivered.iter().enumerate() {
        let slots = if b as u64 == batches - 1 {
            horizon - batch_len * (batches - 1)
        } else {
            batch_len
        };
        let mut obj = 0.0;
        for f in 0..nf {
            let r = counts[f] as f64 * size / slots as f64;
            obj += spec.flows[f].weight * r;
            batch_means[f].push(r);
        }
        batch_obj.push(obj);
    }
    let throughput: Vec<f64> = delivered.iter().map(|&d| d as f64 * size / t).collect();
    let objective = spec.flows.iter().zip(&throughput).map(|(f, r)| f.weight * r).sum();
    Ok(SimMetrics {
        policy: policy.kind,
        scale: (1.0 / size).round() as u32,
        seed,
        horizon,
        flow_ids: spec.flows.iter().map(|f| f.id).collect(),
        delivered,
        throughput,
        throughput_se: batch_means.iter().map(|b| batch_se(b)).collect(),
        objective,
        objective_se: batch_se(&batch_obj),
        node_power: energy_total.iter().map(|e| e / t).collect(),
        link_max_usage: link_max,
        link_mean_usage: link_total.iter().map(|u| u / t).collect(),
        node_max_energy,
        link_violations,
        peak_violations,
        ejected,
        expired,
    })
}

/// Standard error of the grand mean from batch means; zero with fewer than
/// two batches.
fn batch_se(means: &[f64]) -> f64 {
    let b = means.len();
    if b < 2 {
        return 0.0;
    }
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Standard error of a flow's empirical timely throughput over `horizon`
/// slots when each packet is delivered independently with probability
/// `q = r / rate`: per-slot delivered size has variance
/// `size^2 (E[K] q (1 - q) + Var(K) q^2)` with `K` the arrival count.
pub fn analytic_throughput_se(spec: &ProblemSpec, flow_index: usize, throughput: f64, horizon: u64) -> f64 {
    let f = &spec.flows[flow_index];
    let (n, p) = f.arrival_trials();
    let mean_k = n as f64 * p;
    let var_k = n as f64 * p * (1.0 - p);
    let q = if f.rate > 0.0 { throughput / f.rate } else { 0.0 };
    let var = spec.packet_size.powi(2) * (mean_k * q * (1.0 - q) + var_k * q * q);
    (var / horizon as f64).sqrt()
}
