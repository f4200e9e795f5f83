//! Randomized Markov packet policies: for each flow, node and time-to-go, a
//! distribution over Wait and Transmit(link, energy option).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemSpec;

/// A packet's decision in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    Wait,
    /// Transmit on `spec.links[link]` using `spec.links[link].options[option]`.
    Transmit {
        link: usize,
        option: usize,
    },
}

impl Action {
    pub fn is_transmit(self) -> bool {
        matches!(self, Action::Transmit { .. })
    }
}

/// Policy of one flow. `dist[node][ttg]` is a list of `(action, prob)`;
/// destination rows and `ttg = 0` rows are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolicy {
    pub flow: u32,
    pub deadline: u32,
    pub dist: Vec<Vec<Vec<(Action, f64)>>>,
}

impl FlowPolicy {
    /// Always-wait policy for flow `flow_index`.
    pub fn all_wait(spec: &ProblemSpec, flow_index: usize) -> Self {
        let f = &spec.flows[flow_index];
        let dist = (0..spec.num_nodes)
            .map(|i| {
                (0..=f.deadline)
                    .map(|s| {
                        if i == f.dest.0 || s == 0 {
                            Vec::new()
                        } else {
                            vec![(Action::Wait, 1.0)]
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            flow: f.id,
            deadline: f.deadline,
            dist,
        }
    }

    pub fn actions(&self, node: usize, ttg: u32) -> &[(Action, f64)] {
        &self.dist[node][ttg as usize]
    }

    /// Probability of `action` at `(node, ttg)`.
    pub fn prob(&self, node: usize, ttg: u32, action: Action) -> f64 {
        self.actions(node, ttg)
            .iter()
            .filter(|(a, _)| *a == action)
            .map(|(_, p)| p)
            .sum()
    }

    /// Total transmit probability at `(node, ttg)`.
    pub fn transmit_prob(&self, node: usize, ttg: u32) -> f64 {
        self.actions(node, ttg)
            .iter()
            .filter(|(a, _)| a.is_transmit())
            .map(|(_, p)| p)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub flows: Vec<FlowPolicy>,
}

impl PolicyTable {
    pub fn all_wait(spec: &ProblemSpec) -> Self {
        Self {
            flows: (0..spec.flows.len()).map(|f| FlowPolicy::all_wait(spec, f)).collect(),
        }
    }

    /// Checks shape against `spec` and that every non-empty distribution is
    /// a probability vector (within 1e-9) over valid actions.
    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.flows.len() != spec.flows.len() {
            return Err(Error::InvalidArgument("policy flow count mismatch".into()));
        }
        for (fp, f) in self.flows.iter().zip(&spec.flows) {
            if fp.deadline != f.deadline || fp.dist.len() != spec.num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "policy for flow {} does not match spec shape",
                    f.id
                )));
            }
            for (i, row) in fp.dist.iter().enumerate() {
                if row.len() != f.deadline as usize + 1 {
                    return Err(Error::InvalidArgument(format!(
                        "policy for flow {} node {i} has wrong ttg range",
                        f.id
                    )));
                }
                for (s, d) in row.iter().enumerate() {
                    if i == f.dest.0 || s == 0 {
                        continue;
                    }
                    let mut total = 0.0;
                    for &(a, p) in d {
                        if !(p >= 0.0 && p.is_finite()) {
                            return Err(Error::InvalidArgument("negative probability".into()));
                        }
                        if let Action::Transmit { link, option } = a {
                            let ok = spec
                                .links
                                .get(link)
                                .is_some_and(|l| l.from.0 == i && option < l.options.len());
                            if !ok {
                                return Err(Error::InvalidArgument(format!(
                                    "flow {} node {i} ttg {s}: invalid action {a:?}",
                                    f.id
                                )));
                            }
                        }
                        total += p;
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidArgument(format!(
                            "flow {} node {i} ttg {s}: probabilities sum to {total}",
                            f.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON rows `{flow, node, ttg, actions: [{kind, to?, energy?, prob}]}`
    /// for every non-terminal state.
    pub fn to_rows(&self, spec: &ProblemSpec) -> Vec<PolicyRow> {
        let mut rows = Vec::new();
        for (fp, f) in self.flows.iter().zip(&spec.flows) {
            for (node, row) in fp.dist.iter().enumerate() {
                if node == f.dest.0 {
                    continue;
                }
                for (ttg, d) in row.iter().enumerate().skip(1) {
                    rows.push(PolicyRow {
                        flow: fp.flow,
                        node,
                        ttg: ttg as u32,
                        actions: d.iter().map(|&(a, prob)| ActionRow::new(spec, a, prob)).collect(),
                    });
                }
            }
        }
        rows
    }

    /// Rebuilds a table from [`PolicyTable::to_rows`] output. States without
    /// a row default to Wait.
    pub fn from_rows(spec: &ProblemSpec, rows: &[PolicyRow]) -> Result<Self> {
        let mut table = Self::all_wait(spec);
        for r in rows {
            let fi = spec
                .flow_index(r.flow)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown flow {}", r.flow)))?;
            let f = &spec.flows[fi];
            if r.node >= spec.num_nodes || r.ttg == 0 || r.ttg > f.deadline || r.node == f.dest.0 {
                return Err(Error::InvalidArgument(format!(
                    "policy row out of range: flow {} node {} ttg {}",
                    r.flow, r.node, r.ttg
                )));
            }
            let mut dist = Vec::with_capacity(r.actions.len());
            for a in &r.actions {
                let action = match a.kind.as_str() {
                    "wait" => Action::Wait,
                    "transmit" => {
                        let to =
                            a.to.ok_or_else(|| Error::InvalidArgument("transmit action without `to`".into()))?;
                        let link = spec
                            .find_link(crate::model::NodeId(r.node), crate::model::NodeId(to))
                            .ok_or_else(|| Error::InvalidArgument(format!("no link {}-{to}", r.node)))?;
                        let energy = a.energy.unwrap_or(spec.links[link].options[0].energy);
                        let option = spec.links[link]
                            .options
                            .iter()
                            .position(|o| o.energy == energy)
                            .ok_or_else(|| {
                                Error::InvalidArgument(format!("link {}-{to} has no energy option {energy}", r.node))
                            })?;
                        Action::Transmit { link, option }
                    }
                    other => return Err(Error::InvalidArgument(format!("unknown action kind {other}"))),
                };
                dist.push((action, a.prob));
            }
            table.flows[fi].dist[r.node][r.ttg as usize] = dist;
        }
        table.check(spec)?;
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub flow: u32,
    pub node: usize,
    pub ttg: u32,
    pub actions: Vec<ActionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRow {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub prob: f64,
}

impl ActionRow {
    pub fn new(spec: &ProblemSpec, action: Action, prob: f64) -> Self {
        match action {
            Action::Wait => Self {
                kind: "wait".into(),
                to: None,
                energy: None,
                prob,
            },
            Action::Transmit { link, option } => Self {
                kind: "transmit".into(),
                to: Some(spec.links[link].to.0),
                energy: Some(spec.links[link].options[option].energy),
                prob,
            },
        }
    }
}
