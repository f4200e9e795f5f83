//! The single-packet transportation problem: a lone packet pays the node
//! price for every unit of energy it spends (plus any link price per
//! transmission) and earns the flow weight if it reaches its destination
//! before its deadline. Solved by backward induction over time-to-go.
//!
//! Time convention used throughout the crate: a packet may transmit only
//! while `ttg >= 1`; success moves it to `(j, ttg - 1)`, failure or waiting
//! leaves it at `(i, ttg - 1)`; a packet at a non-destination with
//! `ttg = 0` is dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::policy::{Action, FlowPolicy};

/// Absolute tolerance for membership in the optimal-action set.
pub const INDIFFERENCE_TOL: f64 = 1e-12;

/// Per-unit-energy node prices and optional per-transmission link prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    pub node: Vec<f64>,
    /// Empty means all link prices are zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link: Vec<f64>,
}

impl PriceVector {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        Self {
            node: vec![0.0; spec.num_nodes],
            link: Vec::new(),
        }
    }

    pub fn nodal(node: Vec<f64>) -> Self {
        Self { node, link: Vec::new() }
    }

    pub fn link_price(&self, link: usize) -> f64 {
        self.link.get(link).copied().unwrap_or(0.0)
    }

    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.node.len() != spec.num_nodes {
            return Err(Error::InvalidPrices(format!(
                "expected {} node prices, got {}",
                spec.num_nodes,
                self.node.len()
            )));
        }
        if !self.link.is_empty() && self.link.len() != spec.links.len() {
            return Err(Error::InvalidPrices(format!(
                "expected {} link prices, got {}",
                spec.links.len(),
                self.link.len()
            )));
        }
        if let Some(x) = self
            .node
            .iter()
            .chain(&self.link)
            .find(|x| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::InvalidPrices(format!(
                "price {x} is not a finite nonnegative number"
            )));
        }
        Ok(())
    }

    /// Price paid for one transmission on `link` at energy `option`.
    pub fn transmission_cost(&self, spec: &ProblemSpec, link: usize, option: usize) -> f64 {
        let l = &spec.links[link];
        self.node[l.from.0] * l.options[option].energy + self.link_price(link)
    }
}

/// Values and action values of one flow's single-packet problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTable {
    pub flow: u32,
    pub flow_index: usize,
    pub dest: usize,
    pub deadline: u32,
    /// `values[node][ttg]` for `ttg` in `0..=deadline`.
    pub values: Vec<Vec<f64>>,
    /// `action_values[node][ttg]`: every admissible action with its value;
    /// Wait first, then links in declaration order. Empty at terminal states.
    pub action_values: Vec<Vec<Vec<(Action, f64)>>>,
}

impl ValueTable {
    pub fn value(&self, node: usize, ttg: u32) -> f64 {
        self.values[node][ttg as usize]
    }

    /// Maximizing actions at `(node, ttg)` within [`INDIFFERENCE_TOL`].
    pub fn optimal_actions(&self, node: usize, ttg: u32) -> Vec<Action> {
        self.optimal_within(node, ttg, INDIFFERENCE_TOL)
    }

    pub fn optimal_within(&self, node: usize, ttg: u32, tol: f64) -> Vec<Action> {
        let v = self.value(node, ttg);
        self.action_values[node][ttg as usize]
            .iter()
            .filter(|(_, q)| *q >= v - tol)
            .map(|(a, _)| *a)
            .collect()
    }

    pub fn action_value(&self, node: usize, ttg: u32, action: Action) -> Option<f64> {
        self.action_values[node][ttg as usize]
            .iter()
            .find(|(a, _)| *a == action)
            .map(|(_, q)| *q)
    }

    /// Deterministic maximizer preferring Wait, then the earliest link.
    pub fn greedy_action(&self, node: usize, ttg: u32) -> Option<Action> {
        self.optimal_actions(node, ttg).first().copied()
    }

    /// The deterministic greedy policy (prefer Wait on ties).
    pub fn greedy_policy(&self) -> FlowPolicy {
        let dist = (0..self.values.len())
            .map(|i| {
                (0..=self.deadline)
                    .map(|s| match self.greedy_action(i, s) {
                        Some(a) => vec![(a, 1.0)],
                        None => Vec::new(),
                    })
                    .collect()
            })
            .collect();
        FlowPolicy {
            flow: self.flow,
            deadline: self.deadline,
            dist,
        }
    }
}

/// Backward induction for flow `flow_index` under `prices`.
pub fn solve_packet_dp(spec: &ProblemSpec, flow_index: usize, prices: &PriceVector) -> Result<ValueTable> {
    let flow = spec.flows.get(flow_index).ok_or(Error::UnknownFlow(flow_index))?;
    prices.check(spec)?;
    let n = spec.num_nodes;
    let tau = flow.deadline as usize;
    let dest = flow.dest.0;
    let adjacency = spec.adjacency();

    let mut values = vec![vec![0.0; tau + 1]; n];
    let mut action_values = vec![vec![Vec::new(); tau + 1]; n];
    values[dest].fill(flow.weight);

    for s in 1..=tau {
        for i in 0..n {
            if i == dest {
                continue;
            }
            let stay = values[i][s - 1];
            let mut qs = Vec::with_capacity(1 + adjacency[i].len());
            qs.push((Action::Wait, stay));
            let mut best = stay;
            for &k in &adjacency[i] {
                let link = &spec.links[k];
                let moved = values[link.to.0][s - 1];
                for (o, opt) in link.options.iter().enumerate() {
                    let q = -prices.transmission_cost(spec, k, o) + opt.p * moved + (1.0 - opt.p) * stay;
                    best = best.max(q);
                    qs.push((Action::Transmit { link: k, option: o }, q));
                }
            }
            values[i][s] = best;
            action_values[i][s] = qs;
        }
    }

    Ok(ValueTable {
        flow: flow.id,
        flow_index,
        dest,
        deadline: flow.deadline,
        values,
        action_values,
    })
}

/// Per-node transmit thresholds of one flow: transmit is optimal at
/// `(node, ttg)` iff `ttg > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub flow: u32,
    /// `None` at the destination.
    pub thresholds: Vec<Option<u32>>,
}

/// Reads thresholds off a value table under the prefer-Wait tie-break.
///
/// Fails if some link has several energy options, or if the strict-transmit
/// set at some node is not an up-set in time-to-go. The latter cannot happen
/// when every success probability is below 1; a perfectly reliable link can
/// create exact Wait/Transmit ties above a strict-transmit slot.
pub fn extract_thresholds(vt: &ValueTable, spec: &ProblemSpec) -> Result<ThresholdTable> {
    if let Some(k) = spec.links.iter().position(|l| l.options.len() != 1) {
        return Err(Error::MultipleEnergyLevels(k));
    }
    let mut thresholds = vec![None; vt.values.len()];
    for (i, th) in thresholds.iter_mut().enumerate() {
        if i == vt.dest {
            continue;
        }
        let wait_optimal = |s: u32| vt.greedy_action(i, s) == Some(Action::Wait);
        let mut threshold = 0;
        let mut seen_strict = false;
        for s in 1..=vt.deadline {
            if wait_optimal(s) {
                if seen_strict {
                    return Err(Error::NotThreshold { flow: vt.flow, node: i });
                }
                threshold = s;
            } else {
                seen_strict = true;
            }
        }
        *th = Some(threshold);
    }
    Ok(ThresholdTable {
        flow: vt.flow,
        thresholds,
    })
}
