//! Random instance generation and independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use deadline_mdp::model::{ArrivalModel, EnergyOption, FlowSpec, LinkSpec};
use deadline_mdp::{NodeId, PolicyTable, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Limits {
    pub max_nodes: usize,
    pub max_flows: usize,
    pub max_tau: u32,
    pub max_options: usize,
    pub link_caps: bool,
}

/// A random valid instance. Success probabilities lie strictly inside
/// (0, 1); energies of multiple options are distinct.
pub fn random_spec(seed: u64, lim: &Limits) -> ProblemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=lim.max_nodes);
        let mut links = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(0.55) {
                    let k = rng.random_range(1..=lim.max_options);
                    let mut options = Vec::new();
                    for o in 0..k {
                        options.push(EnergyOption {
                            energy: (o + 1) as f64 * rng.random_range(0.5..1.5),
                            p: rng.random_range(0.05..0.95),
                        });
                    }
                    links.push(LinkSpec {
                        from: NodeId(i),
                        to: NodeId(j),
                        options,
                    });
                }
            }
        }
        let nf = rng.random_range(1..=lim.max_flows);
        let flows = (0..nf)
            .map(|f| {
                let s = rng.random_range(0..n);
                let mut d = rng.random_range(0..n - 1);
                if d >= s {
                    d += 1;
                }
                FlowSpec {
                    id: f as u32 + 1,
                    source: NodeId(s),
                    dest: NodeId(d),
                    deadline: rng.random_range(1..=lim.max_tau),
                    weight: rng.random_range(0.5..5.0),
                    rate: rng.random_range(0.2..2.0),
                    arrival: ArrivalModel::Bernoulli,
                }
            })
            .map(|mut f| {
                if f.rate > 1.0 {
                    f.arrival = ArrivalModel::Binomial {
                        trials: 4,
                        prob: f.rate / 4.0,
                    };
                }
                f
            })
            .collect();
        let avg_power = Some(
            (0..n)
                .map(|_| rng.random_bool(0.8).then(|| rng.random_range(0.0..1.5)))
                .collect(),
        );
        let link_capacity = lim.link_caps.then(|| {
            (0..links.len())
                .map(|_| rng.random_bool(0.5).then(|| rng.random_range(0.1..1.0)))
                .collect()
        });
        let spec = ProblemSpec {
            name: None,
            description: None,
            num_nodes: n,
            links,
            flows,
            avg_power,
            link_capacity,
            peak_power: None,
            packet_size: 1.0,
            delta: 0,
        };
        if let Ok(s) = spec.validated() {
            return s;
        }
    }
}

/// Independent forward recursion of a packet under `policy`: returns
/// `(delivered probability, per-node expected attempts weighted by energy)`.
/// Written against the model definition, not the library's evaluator.
pub fn oracle_flow(spec: &ProblemSpec, flow: usize, policy: &PolicyTable) -> (f64, Vec<f64>) {
    let f = &spec.flows[flow];
    let fp = &policy.flows[flow];
    let mut alive = vec![0.0; spec.num_nodes];
    alive[f.source.0] = 1.0;
    let mut delivered = 0.0;
    let mut energy = vec![0.0; spec.num_nodes];
    let mut ttg = f.deadline;
    while ttg >= 1 {
        let mut next = vec![0.0; spec.num_nodes];
        for i in 0..spec.num_nodes {
            if alive[i] == 0.0 {
                continue;
            }
            let mut stay = 1.0;
            for (a, pr) in fp.actions(i, ttg) {
                if let deadline_mdp::Action::Transmit { link, option } = *a {
                    let l = &spec.links[link];
                    let opt = l.options[option];
                    energy[i] += alive[i] * pr * opt.energy;
                    let moved = alive[i] * pr * opt.p;
                    if l.to == f.dest {
                        delivered += moved;
                    } else {
                        next[l.to.0] += moved;
                    }
                    stay -= pr * opt.p;
                }
            }
            next[i] += alive[i] * stay;
        }
        alive = next;
        ttg -= 1;
    }
    (delivered, energy)
}

/// Best source value over every deterministic Markov policy of one flow,
/// found by enumeration. Each policy is evaluated by its own backward
/// recursion. States not reachable from the birth state are ignored.
pub fn brute_force_value(spec: &ProblemSpec, flow: usize, node_price: &[f64]) -> f64 {
    let f = &spec.flows[flow];
    let tau = f.deadline as usize;
    let n = spec.num_nodes;
    let dest = f.dest.0;
    // reachable states, processed later by descending ttg
    let mut reach = vec![vec![false; tau + 1]; n];
    reach[f.source.0][tau] = true;
    let mut states = Vec::new();
    for s in (1..=tau).rev() {
        for i in 0..n {
            if !reach[i][s] || i == dest {
                continue;
            }
            states.push((i, s));
            reach[i][s - 1] = true;
            for l in &spec.links {
                if l.from.0 == i {
                    reach[l.to.0][s - 1] = true;
                }
            }
        }
    }
    let choices: Vec<Vec<Option<usize>>> = states
        .iter()
        .map(|&(i, _)| {
            let mut c = vec![None];
            c.extend(
                spec.links
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.from.0 == i)
                    .map(|(k, _)| Some(k)),
            );
            c
        })
        .collect();
    let mut pick = vec![0usize; states.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut v = vec![vec![0.0; tau + 1]; n];
        v[dest].fill(f.weight);
        // states are listed by descending ttg, so evaluate in reverse
        for (k, &(i, s)) in states.iter().enumerate().rev() {
            v[i][s] = match choices[k][pick[k]] {
                None => v[i][s - 1],
                Some(link) => {
                    let l = &spec.links[link];
                    let opt = l.options[0];
                    -node_price[i] * opt.energy + opt.p * v[l.to.0][s - 1] + (1.0 - opt.p) * v[i][s - 1]
                }
            };
        }
        best = best.max(v[f.source.0][tau]);
        // odometer increment
        let mut k = 0;
        loop {
            if k == pick.len() {
                return best;
            }
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

pub const TINY: Limits = Limits {
    max_nodes: 4,
    max_flows: 2,
    max_tau: 3,
    max_options: 1,
    link_caps: false,
};

pub const SMALL: Limits = Limits {
    max_nodes: 6,
    max_flows: 3,
    max_tau: 5,
    max_options: 2,
    link_caps: false,
};

/// True if the slots where the greedy action transmits form an up-set in
/// time-to-go at every non-destination node.
pub fn transmit_set_is_upset(vt: &deadline_mdp::ValueTable, spec: &ProblemSpec, dest: usize) -> bool {
    (0..spec.num_nodes).filter(|&i| i != dest).all(|i| {
        let tx: Vec<bool> = (1..=vt.deadline)
            .map(|s| vt.greedy_action(i, s).is_some_and(|a| a.is_transmit()))
            .collect();
        tx.windows(2).all(|w| !w[0] || w[1])
    })
}

/// Runs the DP-vs-enumeration comparison on `count` tiny instances and
/// returns the largest absolute difference together with the number of
/// flows whose optimal value was positive, or a description of the first
/// threshold failure.
pub fn dp_oracle_sweep(count: u64) -> Result<(f64, usize), String> {
    use deadline_mdp::{solve_packet_dp, PriceVector};
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst: f64 = 0.0;
    let mut positive = 0;
    for seed in 0..count {
        let spec = random_spec(seed, &TINY);
        let prices: Vec<f64> = (0..spec.num_nodes).map(|_| rng.random_range(0.0..2.0)).collect();
        let pv = PriceVector::nodal(prices.clone());
        for f in 0..spec.flows.len() {
            let vt = solve_packet_dp(&spec, f, &pv).map_err(|e| e.to_string())?;
            let flow = &spec.flows[f];
            let dp = vt.value(flow.source.0, flow.deadline);
            let brute = brute_force_value(&spec, f, &prices);
            worst = worst.max((dp - brute).abs());
            if brute > 0.0 {
                positive += 1;
            }
            if !transmit_set_is_upset(&vt, &spec, flow.dest.0) {
                return Err(format!("instance {seed} flow {f}: transmit set is not an up-set"));
            }
        }
    }
    Ok((worst, positive))
}

pub struct DualityStats {
    /// Largest |primal - D(lp prices)|.
    pub max_gap: f64,
    /// Largest (budget - power) * price over budgeted nodes.
    pub max_cs: f64,
    /// Largest violation of weak duality at random prices (should be <= 0).
    pub max_weak: f64,
    /// Largest |oracle objective - lp objective| for the extracted policy.
    pub max_policy: f64,
}

/// Strong duality and complementary slackness over `count` random instances.
pub fn duality_sweep(count: u64, lim: &Limits) -> Result<DualityStats, String> {
    use deadline_mdp::{build_lp, dual_function, extract_policy, solve_lp, LpStatus, PriceVector};
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut st = DualityStats {
        max_gap: 0.0,
        max_cs: 0.0,
        max_weak: f64::NEG_INFINITY,
        max_policy: 0.0,
    };
    for seed in 0..count {
        let spec = random_spec(10_000 + seed, lim);
        let sol = solve_lp(&build_lp(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if sol.status != LpStatus::Optimal {
            return Err(format!("instance {seed}: LP is {:?}", sol.status));
        }
        let d = dual_function(&spec, &sol.prices).map_err(|e| e.to_string())?;
        st.max_gap = st.max_gap.max((sol.objective - d.value).abs());

        let policy = extract_policy(&sol, &spec).map_err(|e| e.to_string())?;
        let mut obj = 0.0;
        let mut power = vec![0.0; spec.num_nodes];
        for (fi, f) in spec.flows.iter().enumerate() {
            let (r, e) = oracle_flow(&spec, fi, &policy);
            obj += f.weight * f.rate * r;
            for (p, x) in power.iter_mut().zip(e) {
                *p += f.rate * x;
            }
        }
        st.max_policy = st.max_policy.max((obj - sol.objective).abs());
        for (i, &used) in power.iter().enumerate() {
            let price = sol.prices.node[i];
            if price < -1e-12 {
                return Err(format!("instance {seed}: negative price {price} at node {i}"));
            }
            if let Some(b) = spec.avg_power_of(i) {
                if used > b + 1e-7 {
                    return Err(format!("instance {seed}: node {i} uses {used} > {b}"));
                }
                st.max_cs = st.max_cs.max((b - used) * price);
            }
        }

        let random: Vec<f64> = (0..spec.num_nodes)
            .map(|i| {
                if spec.avg_power_of(i).is_some() {
                    rng.random_range(0.0..3.0)
                } else {
                    0.0
                }
            })
            .collect();
        let d = dual_function(&spec, &PriceVector::nodal(random)).map_err(|e| e.to_string())?;
        st.max_weak = st.max_weak.max(sol.objective - d.value);
    }
    Ok(st)
}

/// Hand-built optimal policy for example2: flow 1 transmits half the time
/// on its first attempt, flow 2 with probability 1/13, and both always
/// transmit from the middle node.
pub fn example2_reference_policy(spec: &ProblemSpec) -> PolicyTable {
    use deadline_mdp::policy::FlowPolicy;
    use deadline_mdp::Action;
    let l = |a: usize, b: usize| spec.find_link(NodeId(a), NodeId(b)).unwrap();
    let set = |fp: &mut FlowPolicy, node: usize, ttg: u32, link: usize, q: f64| {
        let mut row = vec![(Action::Transmit { link, option: 0 }, q)];
        if q < 1.0 {
            row.insert(0, (Action::Wait, 1.0 - q));
        }
        fp.dist[node][ttg as usize] = row;
    };
    let mut p1 = FlowPolicy::all_wait(spec, 0);
    set(&mut p1, 0, 3, l(0, 1), 0.5);
    set(&mut p1, 1, 2, l(1, 2), 1.0);
    set(&mut p1, 1, 1, l(1, 2), 1.0);
    let mut p2 = FlowPolicy::all_wait(spec, 1);
    set(&mut p2, 2, 3, l(2, 1), 1.0 / 13.0);
    set(&mut p2, 1, 2, l(1, 0), 1.0);
    set(&mut p2, 1, 1, l(1, 0), 1.0);
    PolicyTable { flows: vec![p1, p2] }
}
