//! Experiment drivers: the packet-size scaling sweep and the deadline sweep
//! comparing policies.

use rayon::prelude::*;
use serde::Serialize;

use super::{optimal_table, run_sim, PolicyImpl, PolicyKind, SimMetrics};
use crate::error::{Error, Result};
use crate::lp::{build_lp, solve_lp, LpStatus};
use crate::model::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    /// LP optimum of the average-constraint relaxation.
    pub bound: f64,
    /// Mean simulated objective of the truncated-link policy over seeds.
    pub simulated: f64,
    /// Standard error of `simulated` across seeds.
    pub simulated_se: f64,
    pub gap: f64,
    pub seeds: usize,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "N,bound,simulated,simulated_se,gap,seeds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n, self.bound, self.simulated, self.simulated_se, self.gap, self.seeds
        )
    }
}

/// For each `N`, simulates the truncated-link policy on the `N`-scaled
/// instance with seeds `base_seed .. base_seed + seeds` and reports the gap
/// to the LP bound. The LP (and so the policy) does not depend on `N`
/// because rates are measured in size units.
pub fn scale_sweep(
    spec: &ProblemSpec,
    ns: &[u32],
    horizon: u64,
    seeds: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    if spec.link_capacity.is_none() {
        return Err(Error::InvalidArgument("the scaling sweep needs link capacities".into()));
    }
    if seeds == 0 || ns.is_empty() {
        return Err(Error::InvalidArgument("need at least one N and one seed".into()));
    }
    let sol = solve_lp(&build_lp(spec)?)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("LP is {:?}", sol.status)));
    }
    let table = optimal_table(spec)?;
    let scaled: Vec<ProblemSpec> = ns.iter().map(|&n| spec.scaled(n)).collect::<Result<_>>()?;
    let cells: Vec<(usize, u64)> = (0..ns.len())
        .flat_map(|a| (0..seeds as u64).map(move |s| (a, base_seed + s)))
        .collect();
    let results: Vec<(usize, f64)> = cells
        .par_iter()
        .map(|&(a, seed)| {
            let policy = PolicyImpl::with_table(PolicyKind::TruncatedLink, table.clone());
            run_sim(&scaled[a], &policy, horizon, seed).map(|m| (a, m.objective))
        })
        .collect::<Result<_>>()?;
    Ok(ns
        .iter()
        .enumerate()
        .map(|(a, &n)| {
            let objs: Vec<f64> = results.iter().filter(|(b, _)| *b == a).map(|(_, o)| *o).collect();
            let (mean, se) = mean_se(&objs);
            SweepRow {
                n,
                bound: sol.objective,
                simulated: mean,
                simulated_se: se,
                gap: sol.objective - mean,
                seeds,
            }
        })
        .collect())
}

/// Least-squares slope of `ln gap` against `ln N`; `None` if fewer than two
/// rows or any gap is not positive.
pub fn loglog_slope(rows: &[SweepRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.gap > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    /// Deadline of the flows with the smallest deadline in the base spec.
    pub deadline: u32,
    pub metrics: SimMetrics,
}

impl CompareRow {
    pub fn csv_header(&self) -> String {
        format!("deadline,{}", self.metrics.csv_header())
    }

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.deadline, self.metrics.csv_row())
    }
}

/// Shifts every deadline so the smallest becomes `d`, keeping the offsets
/// between flows.
pub fn shift_deadlines(spec: &ProblemSpec, d: u32) -> Result<ProblemSpec> {
    let min = spec.flows.iter().map(|f| f.deadline).min().unwrap_or(0);
    let deadlines: Vec<u32> = spec.flows.iter().map(|f| d + (f.deadline - min)).collect();
    spec.with_deadlines(&deadlines)
}

/// Runs every policy for every deadline in `deadlines` and every seed in
/// `base_seed .. base_seed + seeds`. With `common_random_numbers` all
/// policies at one seed share the same random streams; otherwise each
/// policy gets its own seed offset.
pub fn compare(
    spec: &ProblemSpec,
    policies: &[PolicyKind],
    deadlines: std::ops::RangeInclusive<u32>,
    seeds: usize,
    base_seed: u64,
    horizon: u64,
    common_random_numbers: bool,
) -> Result<Vec<CompareRow>> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policies to compare".into()));
    }
    if seeds == 0 || deadlines.is_empty() {
        return Err(Error::InvalidArgument("need at least one deadline and one seed".into()));
    }
    let mut cells = Vec::new();
    for d in deadlines {
        let s = shift_deadlines(spec, d)?;
        let needs_table = policies.iter().any(|k| k.uses_table());
        let table = if needs_table { Some(optimal_table(&s)?) } else { None };
        for (pk, &kind) in policies.iter().enumerate() {
            let policy = match &table {
                Some(t) if kind.uses_table() => PolicyImpl::with_table(kind, t.clone()),
                _ => PolicyImpl::baseline(kind),
            };
            for k in 0..seeds as u64 {
                let seed = if common_random_numbers {
                    base_seed + k
                } else {
                    base_seed + k + ((pk as u64) << 32)
                };
                cells.push((d, s.clone(), policy.clone(), seed));
            }
        }
    }
    cells
        .par_iter()
        .map(|(d, s, policy, seed)| {
            run_sim(s, policy, horizon, *seed).map(|m| CompareRow {
                deadline: *d,
                metrics: m,
            })
        })
        .collect()
}
