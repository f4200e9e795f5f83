//! Exact evaluation of randomized Markov packet policies by forward
//! recursion of occupation probabilities, the dual function, and
//! subgradient price tatonnement.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dp::{solve_packet_dp, PriceVector};
use crate::error::{Error, Result};
use crate::lp::{build_lp, solve_lp, LpStatus};
use crate::model::ProblemSpec;
use crate::policy::{Action, FlowPolicy, PolicyTable};

/// Forward occupation probabilities of one flow's packet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationTable {
    pub flow: u32,
    /// `q[node][ttg]`: probability the packet is alive at `node` with `ttg`.
    /// The destination row stays zero; arriving mass goes to `delivered`.
    pub q: Vec<Vec<f64>>,
    /// `delivered[ttg]`: mass delivered by a transmission made at `ttg`.
    pub delivered: Vec<f64>,
    /// Mass still undelivered when the deadline expires.
    pub dropped: f64,
}

impl OccupationTable {
    pub fn total_delivered(&self) -> f64 {
        self.delivered.iter().sum()
    }
}

/// Runs the forward recursion for flow `flow_index` under `policy`.
pub fn occupation_measure(spec: &ProblemSpec, flow_index: usize, policy: &PolicyTable) -> Result<OccupationTable> {
    if flow_index >= spec.flows.len() {
        return Err(Error::UnknownFlow(flow_index));
    }
    let fp = policy.flows.get(flow_index).ok_or(Error::UnknownFlow(flow_index))?;
    Ok(forward(spec, flow_index, fp, |_, _, _, _| {}))
}

/// Forward recursion calling `on_tx(node, link, option, mass)` for every
/// transmission attempt.
fn forward(
    spec: &ProblemSpec,
    flow_index: usize,
    fp: &FlowPolicy,
    mut on_tx: impl FnMut(usize, usize, usize, f64),
) -> OccupationTable {
    let f = &spec.flows[flow_index];
    let tau = f.deadline as usize;
    let dest = f.dest.0;
    let mut q = vec![vec![0.0; tau + 1]; spec.num_nodes];
    let mut delivered = vec![0.0; tau + 1];
    q[f.source.0][tau] = 1.0;
    for s in (1..=tau).rev() {
        for i in 0..spec.num_nodes {
            let mass = q[i][s];
            if i == dest || mass == 0.0 {
                continue;
            }
            for &(a, pr) in fp.actions(i, s as u32) {
                let m = mass * pr;
                match a {
                    Action::Wait => q[i][s - 1] += m,
                    Action::Transmit { link, option } => {
                        on_tx(i, link, option, m);
                        let l = &spec.links[link];
                        let p = l.options[option].p;
                        if l.to.0 == dest {
                            delivered[s] += m * p;
                        } else {
                            q[l.to.0][s - 1] += m * p;
                        }
                        q[i][s - 1] += m * (1.0 - p);
                    }
                }
            }
        }
    }
    let dropped = (0..spec.num_nodes).filter(|&i| i != dest).map(|i| q[i][0]).sum();
    OccupationTable {
        flow: f.id,
        q,
        delivered,
        dropped,
    }
}

/// Long-run averages of a stationary policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    /// Timely throughput per flow, in packet-size units per slot.
    pub timely_throughput: Vec<f64>,
    /// Expected energy per slot at each node.
    pub node_power: Vec<f64>,
    /// Expected transmissions per slot on each link (size units).
    pub link_packets: Vec<f64>,
    /// Expected energy per slot on each link.
    pub link_energy: Vec<f64>,
    /// `sum_f weight_f * timely_throughput_f`.
    pub objective: f64,
}

pub fn evaluate(spec: &ProblemSpec, policy: &PolicyTable) -> Result<PerfReport> {
    policy.check(spec)?;
    let mut node_power = vec![0.0; spec.num_nodes];
    let mut link_packets = vec![0.0; spec.links.len()];
    let mut link_energy = vec![0.0; spec.links.len()];
    let mut throughput = Vec::with_capacity(spec.flows.len());
    for (fi, f) in spec.flows.iter().enumerate() {
        let a = f.rate;
        let table = forward(spec, fi, &policy.flows[fi], |i, k, o, m| {
            let e = spec.links[k].options[o].energy;
            node_power[i] += a * m * e;
            link_packets[k] += a * m;
            link_energy[k] += a * m * e;
        });
        throughput.push(a * table.total_delivered());
    }
    let objective = spec.flows.iter().zip(&throughput).map(|(f, r)| f.weight * r).sum();
    Ok(PerfReport {
        timely_throughput: throughput,
        node_power,
        link_packets,
        link_energy,
        objective,
    })
}

/// Value of the dual function at some prices, with the subgradient
/// produced by the greedy (prefer-Wait) maximizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualEval {
    pub value: f64,
    /// Power used minus budget on nodes with a budget; zero elsewhere.
    pub node_excess: Vec<f64>,
    /// Load minus capacity on links with a capacity; empty if none.
    pub link_excess: Vec<f64>,
}

/// `D(lambda) = sum_f A_f V_f(s_f, tau_f; lambda) + sum_i lambda_i P_i`
/// (+ `sum_l mu_l C_l`). Nodes without a budget must carry a zero price.
pub fn dual_function(spec: &ProblemSpec, prices: &PriceVector) -> Result<DualEval> {
    prices.check(spec)?;
    for (i, &l) in prices.node.iter().enumerate() {
        if l != 0.0 && spec.avg_power_of(i).is_none() {
            return Err(Error::InvalidPrices(format!(
                "node {i} has a price but no power budget"
            )));
        }
    }
    for (k, &m) in prices.link.iter().enumerate() {
        if m != 0.0 && spec.link_capacity_of(k).is_none() {
            return Err(Error::InvalidPrices(format!("link {k} has a price but no capacity")));
        }
    }
    let mut value = 0.0;
    let mut flows = Vec::with_capacity(spec.flows.len());
    for (fi, f) in spec.flows.iter().enumerate() {
        let vt = solve_packet_dp(spec, fi, prices)?;
        value += f.rate * vt.value(f.source.0, f.deadline);
        flows.push(vt.greedy_policy());
    }
    let report = evaluate(spec, &PolicyTable { flows })?;
    let mut node_excess = vec![0.0; spec.num_nodes];
    for (i, ex) in node_excess.iter_mut().enumerate() {
        if let Some(p) = spec.avg_power_of(i) {
            value += prices.node[i] * p;
            *ex = report.node_power[i] - p;
        }
    }
    let mut link_excess = Vec::new();
    if spec.link_capacity.is_some() {
        link_excess = vec![0.0; spec.links.len()];
        for (k, ex) in link_excess.iter_mut().enumerate() {
            if let Some(c) = spec.link_capacity_of(k) {
                value += prices.link_price(k) * c;
                *ex = report.link_packets[k] - c;
            }
        }
    }
    Ok(DualEval {
        value,
        node_excess,
        link_excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TatonnementStep {
    pub iter: usize,
    pub prices: PriceVector,
    pub node_excess: Vec<f64>,
    pub link_excess: Vec<f64>,
    pub dual_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TatonnementTrace {
    pub iterates: Vec<TatonnementStep>,
    pub converged: bool,
    /// The iterate with the smallest dual value.
    pub final_prices: PriceVector,
    pub best_value: f64,
    /// LP optimum used as the convergence reference, when one exists.
    pub reference: Option<f64>,
}

impl TatonnementTrace {
    /// CSV with columns `iter, lambda_0.., [mu_0..], excess_0.., [link_excess_0..], dual_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.iterates.first() else {
            return "iter,dual_value\n".into();
        };
        let n = first.prices.node.len();
        let m = first.prices.link.len();
        out.push_str("iter");
        for i in 0..n {
            let _ = write!(out, ",lambda_{i}");
        }
        for k in 0..m {
            let _ = write!(out, ",mu_{k}");
        }
        for i in 0..n {
            let _ = write!(out, ",excess_{i}");
        }
        for k in 0..first.link_excess.len() {
            let _ = write!(out, ",link_excess_{k}");
        }
        out.push_str(",dual_value\n");
        for st in &self.iterates {
            let _ = write!(out, "{}", st.iter);
            for x in st
                .prices
                .node
                .iter()
                .chain(&st.prices.link)
                .chain(&st.node_excess)
                .chain(&st.link_excess)
            {
                let _ = write!(out, ",{x}");
            }
            let _ = writeln!(out, ",{}", st.dual_value);
        }
        out
    }
}

/// Projected subgradient descent on the dual, starting from zero prices:
/// `lambda <- max(0, lambda + step * excess)`. Stops once the best dual
/// value is within `tol` of the LP optimum, or once the projected excess
/// has norm at most `tol`.
pub fn tatonnement(spec: &ProblemSpec, step: f64, max_iters: usize, tol: f64) -> Result<TatonnementTrace> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {step}"
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let reference = match build_lp(spec) {
        Ok(lp) => {
            let sol = solve_lp(&lp)?;
            (sol.status == LpStatus::Optimal).then_some(sol.objective)
        }
        Err(Error::MissingAverageConstraint) => None,
        Err(e) => return Err(e),
    };
    let mut prices = PriceVector::zeros(spec);
    if spec.link_capacity.is_some() {
        prices.link = vec![0.0; spec.links.len()];
    }
    let mut iterates = Vec::new();
    let mut best: Option<(f64, PriceVector)> = None;
    let mut converged = false;
    for iter in 1..=max_iters {
        let d = dual_function(spec, &prices)?;
        if best.as_ref().is_none_or(|(v, _)| d.value < *v) {
            best = Some((d.value, prices.clone()));
        }
        let projected = |x: &[f64], p: &[f64]| -> f64 {
            x.iter()
                .zip(p)
                .map(|(e, l)| if *l <= 0.0 { e.max(0.0) } else { *e })
                .map(|e| e * e)
                .sum::<f64>()
        };
        let norm = (projected(&d.node_excess, &prices.node) + projected(&d.link_excess, &prices.link)).sqrt();
        let best_value = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        iterates.push(TatonnementStep {
            iter,
            prices: prices.clone(),
            node_excess: d.node_excess.clone(),
            link_excess: d.link_excess.clone(),
            dual_value: d.value,
        });
        if reference.is_some_and(|r| best_value - r <= tol) || norm <= tol {
            converged = true;
            break;
        }
        for (l, e) in prices.node.iter_mut().zip(&d.node_excess) {
            *l = (*l + step * e).max(0.0);
        }
        for (m, e) in prices.link.iter_mut().zip(&d.link_excess) {
            *m = (*m + step * e).max(0.0);
        }
    }
    let (best_value, final_prices) = best.unwrap_or((f64::NAN, prices));
    Ok(TatonnementTrace {
        iterates,
        converged,
        final_prices,
        best_value,
        reference,
    })
}
