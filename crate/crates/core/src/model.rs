//! Problem instances: the directed graph, unreliable links with
//! energy-indexed success probabilities, flows, and the average/peak budgets.
//!
//! Node indices are 0-based on the wire and in memory.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index in `[0, num_nodes)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One transmit power level of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOption {
    /// Energy per transmission (watts over a one-second slot).
    pub energy: f64,
    /// Success probability at this energy.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub options: Vec<EnergyOption>,
}

impl LinkSpec {
    /// The option with the highest success probability; ties go to the
    /// cheaper energy. Used by the EDF baselines, which do not price energy.
    pub fn most_reliable_option(&self) -> usize {
        let mut best = 0;
        for (k, opt) in self.options.iter().enumerate().skip(1) {
            let cur = &self.options[best];
            if opt.p > cur.p || (opt.p == cur.p && opt.energy < cur.energy) {
                best = k;
            }
        }
        best
    }
}

/// Per-slot arrival distribution of a flow. The mean (in unit-size packets)
/// must equal the flow's `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    /// Exactly `rate` packets every slot; `rate` must be an integer.
    Deterministic,
    /// One packet with probability `rate`.
    Bernoulli,
    Binomial {
        trials: u32,
        prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: u32,
    pub source: NodeId,
    pub dest: NodeId,
    /// Relative deadline in slots.
    pub deadline: u32,
    pub weight: f64,
    /// Mean arrivals per slot, in unit-size packets.
    pub rate: f64,
    pub arrival: ArrivalModel,
}

impl FlowSpec {
    /// Arrivals per slot as `(trials, prob)`: every model here is a binomial.
    /// Deterministic is `(rate, 1)`, Bernoulli is `(1, rate)`.
    pub fn arrival_trials(&self) -> (u32, f64) {
        match self.arrival {
            ArrivalModel::Deterministic => (self.rate.round() as u32, 1.0),
            ArrivalModel::Bernoulli => (1, self.rate),
            ArrivalModel::Binomial { trials, prob } => (trials, prob),
        }
    }

    /// Mean number of packets (not packet-size units) per slot.
    pub fn mean_arrival_count(&self) -> f64 {
        let (n, p) = self.arrival_trials();
        n as f64 * p
    }
}

/// Immutable description of a problem instance. Construct via [`parse_spec`]
/// or [`ProblemSpec::validated`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub description: Option<String>,
    pub num_nodes: usize,
    pub links: Vec<LinkSpec>,
    pub flows: Vec<FlowSpec>,
    /// Per-node average-power budget; `None` entries are unconstrained.
    pub avg_power: Option<Vec<Option<f64>>>,
    /// Per-link capacity in unit-size packets per slot, indexed like `links`.
    pub link_capacity: Option<Vec<Option<f64>>>,
    /// Per-node peak energy per slot.
    pub peak_power: Option<Vec<Option<f64>>>,
    /// Size of one packet; 1 unless the instance was scaled.
    pub packet_size: f64,
    /// Maximum relative deadline over flows.
    pub delta: u32,
}

impl ProblemSpec {
    /// Recomputes `delta` and checks every invariant.
    pub fn validated(mut self) -> Result<Self> {
        self.delta = self.flows.iter().map(|f| f.deadline).max().unwrap_or(0);
        let diags = validate_spec(&self);
        if diags.iter().any(Diagnostic::is_error) {
            return Err(Error::InvalidSpec(diags));
        }
        Ok(self)
    }

    /// Indices of links leaving `node`, in declaration order.
    pub fn out_links(&self, node: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.from == node)
            .map(|(k, _)| k)
    }

    pub fn find_link(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.links.iter().position(|l| l.from == from && l.to == to)
    }

    /// `out[i]` lists link indices leaving node `i`.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes];
        for (k, l) in self.links.iter().enumerate() {
            if l.from.0 < self.num_nodes {
                out[l.from.0].push(k);
            }
        }
        out
    }

    pub fn avg_power_of(&self, node: usize) -> Option<f64> {
        self.avg_power.as_ref().and_then(|v| v.get(node).copied().flatten())
    }

    pub fn link_capacity_of(&self, link: usize) -> Option<f64> {
        self.link_capacity.as_ref().and_then(|v| v.get(link).copied().flatten())
    }

    pub fn peak_power_of(&self, node: usize) -> Option<f64> {
        self.peak_power.as_ref().and_then(|v| v.get(node).copied().flatten())
    }

    pub fn flow_index(&self, id: u32) -> Option<usize> {
        self.flows.iter().position(|f| f.id == id)
    }

    /// Every link offers exactly one energy level.
    pub fn single_energy_level(&self) -> bool {
        self.links.iter().all(|l| l.options.len() == 1)
    }

    /// The `N`-th member of the scaled family: each packet has size `1/N`
    /// and the per-slot arrival count is binomial with `N` times the trials
    /// of the base model and the same per-trial probability, so mean load in
    /// size units stays at `rate` while its relative spread shrinks like
    /// `1/sqrt(N)`. Capacities and budgets are unchanged. `N = 1` is the
    /// identity.
    pub fn scaled(&self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("scale factor N must be >= 1".into()));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.packet_size = self.packet_size / n as f64;
        for f in &mut out.flows {
            let (trials, prob) = f.arrival_trials();
            f.arrival = ArrivalModel::Binomial {
                trials: trials * n,
                prob,
            };
        }
        out.validated()
    }

    /// Sets per-flow deadlines (in flow order) and revalidates.
    pub fn with_deadlines(&self, deadlines: &[u32]) -> Result<Self> {
        if deadlines.len() != self.flows.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} deadlines, got {}",
                self.flows.len(),
                deadlines.len()
            )));
        }
        let mut out = self.clone();
        for (f, &d) in out.flows.iter_mut().zip(deadlines) {
            f.deadline = d;
        }
        out.validated()
    }

    /// Serializes to the JSON configuration document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&WireSpec::from(self)).expect("spec serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Field path into the configuration document, e.g. `links[2].options[0].p`.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.path, self.message)
    }
}

const MEAN_TOL: f64 = 1e-9;

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Checks every instance invariant. Returns an empty list iff the spec is
/// clean; warnings never block loading.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let n = spec.num_nodes;
    if n < 2 {
        d.push(Diagnostic::error("nodes", "at least 2 nodes required"));
    }
    let node_ok = |x: NodeId| x.0 < n;

    let mut seen_links = HashSet::new();
    for (k, l) in spec.links.iter().enumerate() {
        let path = format!("links[{k}]");
        if !node_ok(l.from) || !node_ok(l.to) {
            d.push(Diagnostic::error(&path, "references a node that does not exist"));
        }
        if l.from == l.to {
            d.push(Diagnostic::error(&path, "self-links are not allowed"));
        }
        if !seen_links.insert((l.from, l.to)) {
            d.push(Diagnostic::error(&path, format!("duplicate link {}-{}", l.from, l.to)));
        }
        if l.options.is_empty() {
            d.push(Diagnostic::error(
                format!("{path}.options"),
                "options must be non-empty",
            ));
        }
        let mut energies = HashSet::new();
        for (o, opt) in l.options.iter().enumerate() {
            let opath = format!("{path}.options[{o}]");
            if !(0.0..=1.0).contains(&opt.p) {
                d.push(Diagnostic::error(format!("{opath}.p"), "success_prob out of [0,1]"));
            }
            if !finite_nonneg(opt.energy) {
                d.push(Diagnostic::error(
                    format!("{opath}.energy"),
                    "energy must be finite and nonnegative",
                ));
            } else if !energies.insert(opt.energy.to_bits()) {
                d.push(Diagnostic::error(
                    format!("{opath}.energy"),
                    "energies must be distinct within a link",
                ));
            }
        }
        let mut sorted = l.options.clone();
        sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        if sorted.windows(2).any(|w| w[1].p < w[0].p) {
            d.push(Diagnostic::warning(
                format!("{path}.options"),
                "success probability is not increasing in energy",
            ));
        }
    }

    let adjacency = spec.adjacency();
    let mut ids = HashSet::new();
    for (k, f) in spec.flows.iter().enumerate() {
        let path = format!("flows[{k}]");
        if !ids.insert(f.id) {
            d.push(Diagnostic::error(
                format!("{path}.id"),
                format!("duplicate flow id {}", f.id),
            ));
        }
        let endpoints_ok = node_ok(f.source) && node_ok(f.dest);
        if !endpoints_ok {
            d.push(Diagnostic::error(&path, "references a node that does not exist"));
        }
        if f.source == f.dest {
            d.push(Diagnostic::error(&path, "source and dest must differ"));
        }
        if f.deadline < 1 {
            d.push(Diagnostic::error(format!("{path}.deadline"), "deadline must be >= 1"));
        }
        if !finite_nonneg(f.weight) {
            d.push(Diagnostic::error(
                format!("{path}.weight"),
                "weight must be nonnegative",
            ));
        }
        if !finite_nonneg(f.rate) {
            d.push(Diagnostic::error(format!("{path}.rate"), "rate must be nonnegative"));
        }
        check_arrival(f, spec.packet_size, &path, &mut d);
        if endpoints_ok && f.source != f.dest {
            match hop_distance(&adjacency, &spec.links, f.source, f.dest) {
                Some(h) if h <= f.deadline as usize => {}
                _ => d.push(Diagnostic::error(
                    &path,
                    format!("dest unreachable from source within {} hops", f.deadline),
                )),
            }
        }
    }

    for (key, budget) in [("avg_power", &spec.avg_power), ("peak_power", &spec.peak_power)] {
        if let Some(v) = budget {
            if v.len() != n {
                d.push(Diagnostic::error(key, format!("expected {n} entries, got {}", v.len())));
            }
            for (i, x) in v.iter().enumerate() {
                if let Some(x) = x {
                    if !finite_nonneg(*x) {
                        d.push(Diagnostic::error(format!("{key}[{i}]"), "must be nonnegative"));
                    }
                }
            }
        }
    }
    if let Some(caps) = &spec.link_capacity {
        if caps.len() != spec.links.len() {
            d.push(Diagnostic::error(
                "link_capacity",
                "internal capacity vector does not match link count",
            ));
        }
        for (k, c) in caps.iter().enumerate() {
            if let Some(c) = c {
                if !finite_nonneg(*c) {
                    d.push(Diagnostic::error(format!("link_capacity[{k}]"), "must be nonnegative"));
                }
            }
        }
    }
    if let (Some(avg), Some(peak)) = (&spec.avg_power, &spec.peak_power) {
        for (i, (a, p)) in avg.iter().zip(peak).enumerate() {
            if let (Some(a), Some(p)) = (a, p) {
                if p < a {
                    d.push(Diagnostic::warning(
                        format!("peak_power[{i}]"),
                        "peak budget below the average budget",
                    ));
                }
            }
        }
    }
    if spec.avg_power.is_none() && spec.link_capacity.is_none() && spec.peak_power.is_none() {
        d.push(Diagnostic::error(
            "",
            "at least one of avg_power, link_capacity, peak_power is required",
        ));
    }
    if !(spec.packet_size.is_finite() && spec.packet_size > 0.0) {
        d.push(Diagnostic::error("packet_size", "must be positive"));
    }
    let delta = spec.flows.iter().map(|f| f.deadline).max().unwrap_or(0);
    if spec.delta != delta {
        d.push(Diagnostic::error(
            "delta",
            format!("delta {} does not equal the maximum deadline {delta}", spec.delta),
        ));
    }
    d
}

fn check_arrival(f: &FlowSpec, size: f64, path: &str, d: &mut Vec<Diagnostic>) {
    let apath = format!("{path}.arrival");
    match f.arrival {
        ArrivalModel::Deterministic => {
            if f.rate.fract() != 0.0 || size != 1.0 {
                d.push(Diagnostic::error(apath, "deterministic arrivals need an integer rate"));
            }
        }
        ArrivalModel::Bernoulli => {
            if f.rate > 1.0 || size != 1.0 {
                d.push(Diagnostic::error(apath, "bernoulli arrivals need rate <= 1"));
            }
        }
        ArrivalModel::Binomial { trials, prob } => {
            if !(0.0..=1.0).contains(&prob) {
                d.push(Diagnostic::error(format!("{apath}.params.prob"), "must lie in [0,1]"));
            } else if (trials as f64 * prob * size - f.rate).abs() > MEAN_TOL * f.rate.max(1.0) {
                d.push(Diagnostic::error(
                    apath,
                    "binomial mean trials*prob*packet_size does not equal rate",
                ));
            }
        }
    }
}

/// Breadth-first hop count from `from` to `to`.
pub fn hop_distance(adjacency: &[Vec<usize>], links: &[LinkSpec], from: NodeId, to: NodeId) -> Option<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[from.0] = 0;
    queue.push_back(from.0);
    while let Some(u) = queue.pop_front() {
        if u == to.0 {
            return Some(dist[u]);
        }
        for &k in &adjacency[u] {
            let v = links[k].to.0;
            if v < dist.len() && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Wire format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    nodes: usize,
    links: Vec<WireLink>,
    flows: Vec<WireFlow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avg_power: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link_capacity: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    peak_power: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    packet_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireLink {
    from: usize,
    to: usize,
    options: Vec<EnergyOption>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFlow {
    id: u32,
    source: usize,
    dest: usize,
    deadline: u32,
    weight: f64,
    rate: f64,
    #[serde(default)]
    arrival: WireArrival,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireArrival {
    kind: WireArrivalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<WireBinomial>,
}

#[derive(Debug, Default, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WireArrivalKind {
    #[default]
    Deterministic,
    Bernoulli,
    Binomial,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBinomial {
    trials: u32,
    prob: f64,
}

fn link_key(l: &LinkSpec) -> String {
    format!("{}-{}", l.from.0, l.to.0)
}

impl From<&ProblemSpec> for WireSpec {
    fn from(s: &ProblemSpec) -> Self {
        let link_capacity = s.link_capacity.as_ref().map(|caps| {
            caps.iter()
                .zip(&s.links)
                .filter_map(|(c, l)| c.map(|c| (link_key(l), c)))
                .collect()
        });
        WireSpec {
            name: s.name.clone(),
            description: s.description.clone(),
            nodes: s.num_nodes,
            links: s
                .links
                .iter()
                .map(|l| WireLink {
                    from: l.from.0,
                    to: l.to.0,
                    options: l.options.clone(),
                })
                .collect(),
            flows: s
                .flows
                .iter()
                .map(|f| {
                    let arrival = match f.arrival {
                        ArrivalModel::Deterministic => WireArrival::default(),
                        ArrivalModel::Bernoulli => WireArrival {
                            kind: WireArrivalKind::Bernoulli,
                            params: None,
                        },
                        ArrivalModel::Binomial { trials, prob } => WireArrival {
                            kind: WireArrivalKind::Binomial,
                            params: Some(WireBinomial { trials, prob }),
                        },
                    };
                    WireFlow {
                        id: f.id,
                        source: f.source.0,
                        dest: f.dest.0,
                        deadline: f.deadline,
                        weight: f.weight,
                        rate: f.rate,
                        arrival,
                    }
                })
                .collect(),
            avg_power: s.avg_power.clone(),
            link_capacity,
            peak_power: s.peak_power.clone(),
            packet_size: (s.packet_size != 1.0).then_some(s.packet_size),
            delta: Some(s.delta),
        }
    }
}

fn syntax_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    Error::Syntax {
        line: inner.line(),
        column: inner.column(),
        path,
        message: inner.to_string(),
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_spec(text: &str) -> Result<ProblemSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let wire: WireSpec = serde_path_to_error::deserialize(de).map_err(syntax_error)?;

    let mut diags = Vec::new();
    let links: Vec<LinkSpec> = wire
        .links
        .iter()
        .map(|l| LinkSpec {
            from: NodeId(l.from),
            to: NodeId(l.to),
            options: l.options.clone(),
        })
        .collect();

    let link_capacity = wire.link_capacity.as_ref().map(|map| {
        let mut caps = vec![None; links.len()];
        for (key, &c) in map {
            match links.iter().position(|l| link_key(l) == *key) {
                Some(k) => caps[k] = Some(c),
                None => diags.push(Diagnostic::error(
                    format!("link_capacity.{key}"),
                    "no such link (keys are \"from-to\")",
                )),
            }
        }
        caps
    });

    let mut flows = Vec::with_capacity(wire.flows.len());
    for (k, f) in wire.flows.iter().enumerate() {
        let arrival = match (f.arrival.kind, f.arrival.params) {
            (WireArrivalKind::Deterministic, _) => ArrivalModel::Deterministic,
            (WireArrivalKind::Bernoulli, _) => ArrivalModel::Bernoulli,
            (WireArrivalKind::Binomial, Some(b)) => ArrivalModel::Binomial {
                trials: b.trials,
                prob: b.prob,
            },
            (WireArrivalKind::Binomial, None) => {
                diags.push(Diagnostic::error(
                    format!("flows[{k}].arrival.params"),
                    "binomial arrivals need {trials, prob}",
                ));
                ArrivalModel::Deterministic
            }
        };
        flows.push(FlowSpec {
            id: f.id,
            source: NodeId(f.source),
            dest: NodeId(f.dest),
            deadline: f.deadline,
            weight: f.weight,
            rate: f.rate,
            arrival,
        });
    }

    let delta = flows.iter().map(|f| f.deadline).max().unwrap_or(0);
    if let Some(declared) = wire.delta {
        if declared != delta {
            diags.push(Diagnostic::error(
                "delta",
                format!("declared delta {declared} does not equal the maximum deadline {delta}"),
            ));
        }
    }

    let spec = ProblemSpec {
        name: wire.name,
        description: wire.description,
        num_nodes: wire.nodes,
        links,
        flows,
        avg_power: wire.avg_power,
        link_capacity,
        peak_power: wire.peak_power,
        packet_size: wire.packet_size.unwrap_or(1.0),
        delta,
    };
    diags.extend(validate_spec(&spec));
    if diags.iter().any(Diagnostic::is_error) {
        return Err(Error::InvalidSpec(diags));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "nodes": 2,
        "links": [{"from": 0, "to": 1, "options": [{"energy": 1, "p": 1.0}]}],
        "flows": [{"id": 1, "source": 0, "dest": 1, "deadline": 1, "weight": 1, "rate": 1}],
        "avg_power": [1, 1]
    }"#;

    #[test]
    fn minimal_instance() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.delta, 1);
        assert_eq!(spec.num_nodes, 2);
        assert_eq!(spec.flows[0].arrival, ArrivalModel::Deterministic);
        assert!(spec.peak_power.is_none());
        assert_eq!(spec.packet_size, 1.0);
    }

    #[test]
    fn bad_success_prob_is_rejected() {
        let text = MINIMAL.replace("\"p\": 1.0", "\"p\": 1.3");
        let err = parse_spec(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("success_prob out of [0,1]"), "{msg}");
        assert!(msg.contains("links[0].options[0].p"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_location() {
        let err = parse_spec("{\n  \"nodes\": 2,\n  \"links\": [oops]\n}").unwrap_err();
        match err {
            Error::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_spec(&MINIMAL.replace("\"rate\": 1", "\"rate\": 1, \"bogus\": 2")).unwrap_err();
        match err {
            Error::Syntax { path, message, .. } => {
                assert!(path.starts_with("flows[0]"), "{path}");
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreachable_dest_is_an_error() {
        let mut spec = parse_spec(MINIMAL).unwrap();
        spec.links.clear();
        let d = validate_spec(&spec);
        assert!(d.iter().any(|x| x.is_error() && x.message.contains("unreachable")));
    }

    #[test]
    fn deadline_shorter_than_path_is_an_error() {
        let text = r#"{
            "nodes": 3,
            "links": [{"from": 0, "to": 1, "options": [{"energy": 1, "p": 1}]},
                      {"from": 1, "to": 2, "options": [{"energy": 1, "p": 1}]}],
            "flows": [{"id": 1, "source": 0, "dest": 2, "deadline": 1, "weight": 1, "rate": 1}],
            "avg_power": [1, 1, 1]
        }"#;
        assert!(matches!(parse_spec(text), Err(Error::InvalidSpec(_))));
        assert!(parse_spec(&text.replace("\"deadline\": 1", "\"deadline\": 2")).is_ok());
    }

    #[test]
    fn non_monotone_reliability_only_warns() {
        let text = MINIMAL.replace(
            r#"[{"energy": 1, "p": 1.0}]"#,
            r#"[{"energy": 1, "p": 0.9}, {"energy": 2, "p": 0.5}]"#,
        );
        let spec = parse_spec(&text).unwrap();
        let d = validate_spec(&spec);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Warning);
    }

    #[test]
    fn self_link_and_budget_presence() {
        let text = MINIMAL.replace(r#""from": 0, "to": 1"#, r#""from": 1, "to": 1"#);
        assert!(parse_spec(&text).is_err());
        let text = MINIMAL.replace(r#""avg_power": [1, 1]"#, r#""peak_power": [1, 1]"#);
        assert!(parse_spec(&text).is_ok());
        let text = MINIMAL.replace(r#", "avg_power": [1, 1]"#, "");
        let text = text.replace(
            r#"],
        "avg_power": [1, 1]"#,
            "]",
        );
        let err = parse_spec(&text).unwrap_err().to_string();
        assert!(err.contains("at least one of"), "{err}");
    }

    #[test]
    fn arrival_mean_must_match_rate() {
        let text = MINIMAL.replace(
            r#""rate": 1}"#,
            r#""rate": 1, "arrival": {"kind": "binomial", "params": {"trials": 4, "prob": 0.5}}}"#,
        );
        assert!(parse_spec(&text).is_err());
        let text = MINIMAL.replace(
            r#""rate": 1}"#,
            r#""rate": 1, "arrival": {"kind": "binomial", "params": {"trials": 4, "prob": 0.25}}}"#,
        );
        assert!(parse_spec(&text).is_ok());
        let text = MINIMAL.replace(r#""rate": 1}"#, r#""rate": 0.5}"#);
        assert!(parse_spec(&text).is_err(), "deterministic needs integer rate");
    }

    #[test]
    fn link_capacity_keys_resolve() {
        let text = MINIMAL.replace(r#""avg_power": [1, 1]"#, r#""link_capacity": {"0-1": 2}"#);
        let spec = parse_spec(&text).unwrap();
        assert_eq!(spec.link_capacity_of(0), Some(2.0));
        let text = MINIMAL.replace(r#""avg_power": [1, 1]"#, r#""link_capacity": {"1-0": 2}"#);
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn scaling_preserves_mean_load() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.scaled(1).unwrap(), spec);
        let s4 = spec.scaled(4).unwrap();
        assert_eq!(s4.packet_size, 0.25);
        assert_eq!(s4.flows[0].arrival, ArrivalModel::Binomial { trials: 4, prob: 1.0 });
        assert!((s4.flows[0].mean_arrival_count() * s4.packet_size - 1.0).abs() < 1e-12);
        let round = parse_spec(&s4.to_json()).unwrap();
        assert_eq!(round, s4);
    }
}
