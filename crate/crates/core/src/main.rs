use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use deadline_mdp::sim::{self, PolicyImpl, PolicyKind, SweepRow};
use deadline_mdp::{
    build_lp, bundled, evaluate, extract_policy, extract_prices, parse_spec, solve_lp, solve_packet_dp, tatonnement,
    validate_spec, Error, LpStatus, ProblemSpec, Result,
};

#[derive(Parser)]
#[command(
    name = "deadline-mdp",
    version,
    about = "Schedule deadline-constrained packets over unreliable multi-hop networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec and print its diagnostics.
    Validate { spec: String },
    /// Solve the LP and write solution, policy and prices.
    Solve {
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the LP in text form to lp.txt.
        #[arg(long)]
        dump_lp: bool,
        /// Also write per-flow single-packet value tables at the LP prices.
        #[arg(long)]
        dump_values: bool,
    },
    /// Compute prices from the LP duals or by tatonnement.
    Prices {
        spec: String,
        #[arg(long, value_enum, default_value_t = PriceMethod::Lp)]
        method: PriceMethod,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Write the tatonnement trace as CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Simulate one policy.
    Simulate {
        spec: String,
        #[arg(long)]
        policy: String,
        #[arg(long = "T")]
        horizon: u64,
        #[arg(long)]
        seed: u64,
        /// Truncated packets wait instead of leaving the network.
        #[arg(long)]
        keep: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compare policies across a deadline sweep.
    Compare {
        spec: String,
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        /// Inclusive range `lo:hi` for the smallest flow deadline.
        #[arg(long)]
        deadlines: String,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "T", default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        common_random_numbers: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Packet-size scaling sweep of the truncated-link policy.
    Sweep {
        spec: String,
        #[arg(long = "Ns", value_delimiter = ',', required = true)]
        ns: Vec<u32>,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "T", default_value_t = 10_000)]
        horizon: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PriceMethod {
    Lp,
    Tatonnement,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::InvalidSpec(diags) => {
                    for d in diags {
                        eprintln!("{d}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Reads a spec file, falling back to the bundled examples by name, and
/// logs its digest.
fn load(path: &str) -> Result<ProblemSpec> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => match bundled::by_name(path) {
            Some(t) => t.to_string(),
            None => return Err(e.into()),
        },
        Err(e) => return Err(e.into()),
    };
    eprintln!(
        "deadline-mdp {} spec {} sha256={}",
        env!("CARGO_PKG_VERSION"),
        path,
        hex::encode(Sha256::digest(text.as_bytes()))
    );
    parse_spec(&text)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let bad = || Error::InvalidArgument(format!("expected `lo:hi`, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { spec } => {
            let s = load(&spec)?;
            for d in validate_spec(&s) {
                println!("{d}");
            }
            println!(
                "ok: {} nodes, {} links, {} flows, max deadline {}",
                s.num_nodes,
                s.links.len(),
                s.flows.len(),
                s.delta
            );
        }
        Command::Solve {
            spec,
            out,
            dump_lp,
            dump_values,
        } => {
            let s = load(&spec)?;
            let lp = build_lp(&s)?;
            let sol = solve_lp(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Solver(format!("LP is {:?}", sol.status)));
            }
            let policy = extract_policy(&sol, &s)?;
            let prices = extract_prices(&sol)?;
            let report = evaluate(&s, &policy)?;
            fs::create_dir_all(&out)?;
            fs::write(
                out.join("solution.json"),
                serde_json::to_string_pretty(&sol.to_json(&s))? + "\n",
            )?;
            write_json(&out.join("policy.json"), &policy.to_rows(&s))?;
            write_json(&out.join("prices.json"), &prices)?;
            if dump_lp {
                fs::write(out.join("lp.txt"), lp.to_text(&s))?;
            }
            if dump_values {
                let tables = (0..s.flows.len())
                    .map(|f| solve_packet_dp(&s, f, &prices))
                    .collect::<Result<Vec<_>>>()?;
                write_json(&out.join("values.json"), &tables)?;
            }
            println!("objective {}", sol.objective);
            println!(
                "variables {} rows {} (unpruned {} / {})",
                lp.num_vars(),
                lp.num_rows(),
                lp.unpruned_vars,
                lp.unpruned_rows
            );
            for (i, p) in report.node_power.iter().enumerate() {
                match s.avg_power_of(i) {
                    Some(b) => println!("node {i} power {p} budget {b} price {}", prices.node[i]),
                    None => println!("node {i} power {p}"),
                }
            }
            for (f, r) in s.flows.iter().zip(&report.timely_throughput) {
                println!("flow {} throughput {r}", f.id);
            }
        }
        Command::Prices {
            spec,
            method,
            eps,
            iters,
            tol,
            trace,
        } => {
            let s = load(&spec)?;
            match method {
                PriceMethod::Lp => {
                    let sol = solve_lp(&build_lp(&s)?)?;
                    println!("{}", serde_json::to_string_pretty(&extract_prices(&sol)?)?);
                }
                PriceMethod::Tatonnement => {
                    let tr = tatonnement(&s, eps, iters, tol)?;
                    if let Some(p) = trace {
                        fs::write(p, tr.to_csv())?;
                    }
                    println!("{}", serde_json::to_string_pretty(&tr.final_prices)?);
                    println!(
                        "best dual value {} after {} iterations ({})",
                        tr.best_value,
                        tr.iterates.len(),
                        if tr.converged { "converged" } else { "not converged" }
                    );
                }
            }
        }
        Command::Simulate {
            spec,
            policy,
            horizon,
            seed,
            keep,
            json,
        } => {
            let s = load(&spec)?;
            let kind: PolicyKind = policy.parse()?;
            let mut p = PolicyImpl::for_spec(kind, &s)?;
            p.eject = !keep;
            let m = sim::run_sim(&s, &p, horizon, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&m)?);
            } else {
                println!("{}\n{}", m.csv_header(), m.csv_row());
            }
        }
        Command::Compare {
            spec,
            policies,
            deadlines,
            seeds,
            seed,
            horizon,
            common_random_numbers,
            out,
        } => {
            let s = load(&spec)?;
            let kinds = policies
                .iter()
                .filter(|p| !p.is_empty())
                .map(|p| p.parse())
                .collect::<Result<Vec<PolicyKind>>>()?;
            let rows = sim::compare(
                &s,
                &kinds,
                parse_range(&deadlines)?,
                seeds,
                seed,
                horizon,
                common_random_numbers,
            )?;
            let mut text = String::new();
            if let Some(first) = rows.first() {
                text.push_str(&first.csv_header());
                text.push('\n');
            }
            for r in &rows {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Sweep {
            spec,
            ns,
            seeds,
            seed,
            horizon,
            out,
        } => {
            let s = load(&spec)?;
            let rows = sim::scale_sweep(&s, &ns, horizon, seeds, seed)?;
            let mut text = format!("{}\n", SweepRow::CSV_HEADER);
            for r in &rows {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            match sim::loglog_slope(&rows) {
                Some(k) => eprintln!("log-log slope of gap vs N: {k}"),
                None => eprintln!("log-log slope undefined (need two N values with positive gap)"),
            }
        }
    }
    Ok(())
}
