//! The network-wide problem as a linear program over state-action
//! occupation probabilities `xi[f](i, action, s)`: for a packet of flow `f`,
//! the probability that it sits at node `i` with time-to-go `s` and takes
//! `action` there. Average budgets become linear rows; their multipliers are
//! the node (and link) prices.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::dp::PriceVector;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::policy::{Action, ActionRow, FlowPolicy, PolicyTable};
use crate::simplex::{self, Constraint, LinearProgram, RowKind};

/// Occupation mass below this is treated as zero when reading off a policy.
pub const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct VarKey {
    pub flow: usize,
    pub node: usize,
    pub ttg: u32,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarInfo {
    pub key: VarKey,
    /// Expected energy per slot contributed per unit of `xi` (rate times energy).
    pub energy_rate: f64,
    /// Expected transmissions per slot per unit of `xi` (zero for Wait).
    pub packet_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowLabel {
    InitialMass { flow: usize },
    Conservation { flow: usize, node: usize, ttg: u32 },
    NodePower { node: usize },
    LinkCapacity { link: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub num_nodes: usize,
    pub num_links: usize,
    pub vars: Vec<VarInfo>,
    pub program: LinearProgram,
    pub labels: Vec<RowLabel>,
    /// Variable and constraint counts of the unpruned formulation
    /// (`|V|^2 F Delta` and `|V| + |V| F Delta + F + |V|^2 F Delta`).
    pub unpruned_vars: usize,
    pub unpruned_rows: usize,
}

impl LpInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    /// Plain-text dump: one objective line, then one line per row, in the
    /// form `label: +c x12 -d x13 <= rhs`; then the variable legend.
    pub fn to_text(&self, spec: &ProblemSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} variables, {} rows (unpruned formulation: {} variables, {} rows)",
            self.num_vars(),
            self.num_rows(),
            self.unpruned_vars,
            self.unpruned_rows
        );
        out.push_str("max:");
        for (j, c) in self.program.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {c:+} x{j}");
            }
        }
        out.push('\n');
        for (c, label) in self.program.constraints.iter().zip(&self.labels) {
            let name = match *label {
                RowLabel::InitialMass { flow } => format!("init[f{}]", spec.flows[flow].id),
                RowLabel::Conservation { flow, node, ttg } => {
                    format!("cons[f{},n{node},s{ttg}]", spec.flows[flow].id)
                }
                RowLabel::NodePower { node } => format!("power[n{node}]"),
                RowLabel::LinkCapacity { link } => {
                    let l = &spec.links[link];
                    format!("cap[{}-{}]", l.from, l.to)
                }
            };
            let _ = write!(out, "{name}:");
            for &(j, a) in &c.coeffs {
                let _ = write!(out, " {a:+} x{j}");
            }
            let op = match c.kind {
                RowKind::Le => "<=",
                RowKind::Ge => ">=",
                RowKind::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("# variables\n");
        for (j, v) in self.vars.iter().enumerate() {
            let act = match v.key.action {
                Action::Wait => "wait".to_string(),
                Action::Transmit { link, option } => format!(
                    "tx->{} E={}",
                    spec.links[link].to, spec.links[link].options[option].energy
                ),
            };
            let _ = writeln!(
                out,
                "x{j}: flow {} node {} ttg {} {act}",
                spec.flows[v.key.flow].id, v.key.node, v.key.ttg
            );
        }
        out
    }
}

/// Builds the direct LP over states reachable from each flow's birth state.
///
/// Rows: initial mass per flow, flow conservation per reachable state below
/// the deadline, nodal power for every node with an average budget, and an
/// average packet-rate row for every link with a capacity.
pub fn build_lp(spec: &ProblemSpec) -> Result<LpInstance> {
    if spec.avg_power.is_none() && spec.link_capacity.is_none() {
        return Err(Error::MissingAverageConstraint);
    }
    let adjacency = spec.adjacency();
    let mut vars: Vec<VarInfo> = Vec::new();
    let mut objective = Vec::new();
    // (flow, node, ttg) -> range of variables
    let mut state_vars: HashMap<(usize, usize, u32), (usize, usize)> = HashMap::new();
    let mut states_by_flow: Vec<Vec<(usize, u32)>> = Vec::new();

    for (fi, f) in spec.flows.iter().enumerate() {
        let dest = f.dest.0;
        let tau = f.deadline;
        let mut reach = vec![vec![false; tau as usize + 1]; spec.num_nodes];
        reach[f.source.0][tau as usize] = true;
        let mut states = Vec::new();
        for s in (1..=tau).rev() {
            for i in 0..spec.num_nodes {
                if !reach[i][s as usize] || i == dest {
                    continue;
                }
                states.push((i, s));
                if s > 1 {
                    reach[i][s as usize - 1] = true;
                    for &k in &adjacency[i] {
                        let j = spec.links[k].to.0;
                        if j != dest {
                            reach[j][s as usize - 1] = true;
                        }
                    }
                }
                let start = vars.len();
                vars.push(VarInfo {
                    key: VarKey {
                        flow: fi,
                        node: i,
                        ttg: s,
                        action: Action::Wait,
                    },
                    energy_rate: 0.0,
                    packet_rate: 0.0,
                });
                objective.push(0.0);
                for &k in &adjacency[i] {
                    let link = &spec.links[k];
                    for (o, opt) in link.options.iter().enumerate() {
                        vars.push(VarInfo {
                            key: VarKey {
                                flow: fi,
                                node: i,
                                ttg: s,
                                action: Action::Transmit { link: k, option: o },
                            },
                            energy_rate: f.rate * opt.energy,
                            packet_rate: f.rate,
                        });
                        objective.push(if link.to.0 == dest {
                            f.rate * f.weight * opt.p
                        } else {
                            0.0
                        });
                    }
                }
                state_vars.insert((fi, i, s), (start, vars.len()));
            }
        }
        states_by_flow.push(states);
    }

    let mut constraints = Vec::new();
    let mut labels = Vec::new();
    for (fi, f) in spec.flows.iter().enumerate() {
        let (a, b) = state_vars[&(fi, f.source.0, f.deadline)];
        constraints.push(Constraint {
            coeffs: (a..b).map(|j| (j, 1.0)).collect(),
            kind: RowKind::Eq,
            rhs: 1.0,
        });
        labels.push(RowLabel::InitialMass { flow: fi });
    }

    // conservation rows: outflow(i, s) - inflow from level s + 1 = 0
    let mut row_of: HashMap<(usize, usize, u32), usize> = HashMap::new();
    for (fi, f) in spec.flows.iter().enumerate() {
        for &(i, s) in &states_by_flow[fi] {
            if s == f.deadline {
                continue;
            }
            let (a, b) = state_vars[&(fi, i, s)];
            row_of.insert((fi, i, s), constraints.len());
            constraints.push(Constraint {
                coeffs: (a..b).map(|j| (j, 1.0)).collect(),
                kind: RowKind::Eq,
                rhs: 0.0,
            });
            labels.push(RowLabel::Conservation {
                flow: fi,
                node: i,
                ttg: s,
            });
        }
    }
    for (j, v) in vars.iter().enumerate() {
        let VarKey {
            flow,
            node,
            ttg,
            action,
        } = v.key;
        if ttg <= 1 {
            continue;
        }
        let dest = spec.flows[flow].dest.0;
        let mut add = |target: usize, coef: f64| {
            if coef != 0.0 {
                let r = row_of[&(flow, target, ttg - 1)];
                constraints[r].coeffs.push((j, -coef));
            }
        };
        match action {
            Action::Wait => add(node, 1.0),
            Action::Transmit { link, option } => {
                let l = &spec.links[link];
                let p = l.options[option].p;
                if l.to.0 != dest {
                    add(l.to.0, p);
                }
                add(node, 1.0 - p);
            }
        }
    }

    if spec.avg_power.is_some() {
        for i in 0..spec.num_nodes {
            if let Some(budget) = spec.avg_power_of(i) {
                constraints.push(Constraint {
                    coeffs: vars
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| v.key.node == i && v.energy_rate != 0.0)
                        .map(|(j, v)| (j, v.energy_rate))
                        .collect(),
                    kind: RowKind::Le,
                    rhs: budget,
                });
                labels.push(RowLabel::NodePower { node: i });
            }
        }
    }
    if spec.link_capacity.is_some() {
        for k in 0..spec.links.len() {
            if let Some(cap) = spec.link_capacity_of(k) {
                constraints.push(Constraint {
                    coeffs: vars
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| {
                            matches!(v.key.action, Action::Transmit { link, .. } if link == k) && v.packet_rate != 0.0
                        })
                        .map(|(j, v)| (j, v.packet_rate))
                        .collect(),
                    kind: RowKind::Le,
                    rhs: cap,
                });
                labels.push(RowLabel::LinkCapacity { link: k });
            }
        }
    }

    let nv = spec.num_nodes;
    let nf = spec.flows.len();
    let delta = spec.delta as usize;
    Ok(LpInstance {
        num_nodes: spec.num_nodes,
        num_links: spec.links.len(),
        program: LinearProgram {
            num_vars: vars.len(),
            objective,
            constraints,
        },
        vars,
        labels,
        unpruned_vars: nv * nv * nf * delta,
        unpruned_rows: nv + nv * nf * delta + nf + nv * nv * nf * delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSolution {
    pub status: LpStatus,
    pub vars: Vec<VarInfo>,
    pub labels: Vec<RowLabel>,
    pub xi: Vec<f64>,
    /// Weighted timely-throughput `sum_f weight_f * r_f`.
    pub objective: f64,
    /// `sum_r rhs_r * y_r` at the returned duals.
    pub dual_objective: f64,
    pub row_duals: Vec<f64>,
    /// Node prices (zero where no budget) and link prices (empty when the
    /// spec has no capacities).
    pub prices: PriceVector,
    pub node_power: Vec<f64>,
    /// Expected transmissions per slot on each link.
    pub link_load: Vec<f64>,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub iterations: usize,
}

impl OccupationSolution {
    /// Budget minus usage on every node with an average-power row.
    pub fn power_slack(&self) -> Vec<(usize, f64, f64)> {
        self.labels
            .iter()
            .zip(&self.row_duals)
            .filter_map(|(l, y)| match *l {
                RowLabel::NodePower { node } => Some((node, *y)),
                _ => None,
            })
            .map(|(node, y)| (node, y, self.node_power[node]))
            .collect()
    }

    /// JSON document written by `solve --out`.
    pub fn to_json(&self, spec: &ProblemSpec) -> serde_json::Value {
        #[derive(Serialize)]
        struct XiRow {
            flow: u32,
            node: usize,
            ttg: u32,
            action: ActionRow,
            xi: f64,
        }
        let xi: Vec<XiRow> = self
            .vars
            .iter()
            .zip(&self.xi)
            .filter(|(_, x)| **x > ZERO_MASS)
            .map(|(v, x)| XiRow {
                flow: spec.flows[v.key.flow].id,
                node: v.key.node,
                ttg: v.key.ttg,
                action: ActionRow::new(spec, v.key.action, *x),
                xi: *x,
            })
            .collect();
        serde_json::json!({
            "status": self.status,
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "prices": self.prices,
            "node_power": self.node_power,
            "link_load": self.link_load,
            "max_primal_residual": self.max_primal_residual,
            "max_dual_residual": self.max_dual_residual,
            "xi": xi,
        })
    }
}

/// Solves the LP and collects primal values, prices and diagnostics.
///
/// The optimum is often not unique: mass can be sent towards a node whose
/// budget is slack and then left waiting there. Among optimal solutions the
/// one with the least total expected energy is returned (when the second
/// solve fails numerically the first optimum is kept); prices come from the
/// first solve.
pub fn solve_lp(lp: &LpInstance) -> Result<OccupationSolution> {
    let mut sol = simplex::solve(&lp.program).map_err(Error::Solver)?;
    if sol.status == simplex::Status::Optimal {
        let mut second = lp.program.clone();
        second.constraints.push(Constraint {
            coeffs: second
                .objective
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| (j, *c))
                .collect(),
            kind: RowKind::Ge,
            rhs: sol.objective,
        });
        second.objective = lp.vars.iter().map(|v| -v.energy_rate).collect();
        let lean = simplex::solve(&second).map_err(Error::Solver)?;
        if lean.status == simplex::Status::Optimal {
            sol.objective = lp.program.objective.iter().zip(&lean.x).map(|(c, x)| c * x).sum();
            sol.x = lean.x;
        }
    }
    let status = match sol.status {
        simplex::Status::Optimal => LpStatus::Optimal,
        simplex::Status::Infeasible => LpStatus::Infeasible,
        simplex::Status::Unbounded => LpStatus::Unbounded,
    };
    let mut node_power = vec![0.0; lp.num_nodes];
    let mut link_load = vec![0.0; lp.num_links];
    for (v, x) in lp.vars.iter().zip(&sol.x) {
        if let Action::Transmit { link, .. } = v.key.action {
            node_power[v.key.node] += v.energy_rate * x;
            link_load[link] += v.packet_rate * x;
        }
    }
    let mut prices = PriceVector::nodal(vec![0.0; lp.num_nodes]);
    if lp.labels.iter().any(|l| matches!(l, RowLabel::LinkCapacity { .. })) {
        prices.link = vec![0.0; lp.num_links];
    }
    for (label, y) in lp.labels.iter().zip(&sol.duals) {
        match *label {
            RowLabel::NodePower { node } => prices.node[node] = y.max(0.0),
            RowLabel::LinkCapacity { link } => prices.link[link] = y.max(0.0),
            _ => {}
        }
    }
    let optimal = status == LpStatus::Optimal;
    Ok(OccupationSolution {
        status,
        vars: lp.vars.clone(),
        labels: lp.labels.clone(),
        dual_objective: if optimal {
            lp.program.dual_objective(&sol.duals)
        } else {
            f64::NAN
        },
        max_primal_residual: if optimal {
            lp.program.max_primal_residual(&sol.x)
        } else {
            f64::NAN
        },
        max_dual_residual: if optimal {
            lp.program.max_dual_residual(&sol.duals)
        } else {
            f64::NAN
        },
        xi: sol.x,
        objective: sol.objective,
        row_duals: sol.duals,
        prices,
        node_power,
        link_load,
        iterations: sol.iterations,
    })
}

/// Normalizes occupation mass into per-state action distributions; states
/// with no mass get Wait.
pub fn extract_policy(sol: &OccupationSolution, spec: &ProblemSpec) -> Result<PolicyTable> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "cannot extract a policy from a {:?} LP",
            sol.status
        )));
    }
    let mut table = PolicyTable::all_wait(spec);
    let mut groups: HashMap<(usize, usize, u32), Vec<(Action, f64)>> = HashMap::new();
    for (v, &x) in sol.vars.iter().zip(&sol.xi) {
        groups
            .entry((v.key.flow, v.key.node, v.key.ttg))
            .or_default()
            .push((v.key.action, x.max(0.0)));
    }
    for ((flow, node, ttg), entries) in groups {
        let total: f64 = entries.iter().map(|(_, x)| x).sum();
        if total <= ZERO_MASS {
            continue;
        }
        let dist: Vec<(Action, f64)> = entries
            .into_iter()
            .filter(|(_, x)| *x > 0.0)
            .map(|(a, x)| (a, x / total))
            .collect();
        let fp: &mut FlowPolicy = &mut table.flows[flow];
        fp.dist[node][ttg as usize] = dist;
    }
    Ok(table)
}

/// Multipliers of the average-budget rows.
pub fn extract_prices(sol: &OccupationSolution) -> Result<PriceVector> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("no prices for a {:?} LP", sol.status)));
    }
    Ok(sol.prices.clone())
}
