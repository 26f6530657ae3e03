use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use wkserver::game::{self, CostLedger, GameSetup, RunOptions};
use wkserver::potential::{verify_limit, verify_suite, DEFAULT_MAX_SWEEPS, MAX_EXACT_K};
use wkserver::ratio::{evaluate, harmonic_p, limit_optimality_sweep, optimal_p, WeightVector};
use wkserver::report::DEFAULT_SLACK;
use wkserver::sample::{random_monotone_p, stream_rng};
use wkserver::{alpha_growth_bound, check_constant_identities, ConstantTable, ProbVector, Report, SolverConfig, SubsetMask};

use crate::args::{BackendArg, Input, Output, Solver};
use crate::error::CliError;

/// What a command printed, and whether its checks held.
pub struct Outcome {
    pub text: String,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
    AuditFailed,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, status: Status::Ok }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Weights in sorted order (when given) and rates aligned with them.
struct Resolved {
    beta: Option<WeightVector>,
    p: ProbVector,
}

impl Input {
    fn k_hint(&self) -> Result<Option<usize>, CliError> {
        let mut k = self.k;
        for len in [self.beta.as_ref().map(Vec::len), self.p.as_ref().map(Vec::len)].into_iter().flatten() {
            match k {
                Some(known) if known != len => {
                    return Err(CliError::Usage(format!("vector of length {len} does not match k = {known}")));
                }
                _ => k = Some(len),
            }
        }
        Ok(k)
    }

    fn resolve(&self, need_beta: bool) -> Result<Resolved, CliError> {
        self.k_hint()?;
        let beta = self.beta.clone().map(WeightVector::new).transpose()?;
        let p = match (&beta, &self.p) {
            (None, _) if need_beta => return Err(CliError::Usage("--beta is required".into())),
            (None, Some(p)) => ProbVector::new(p.clone())?,
            (None, None) => return Err(CliError::Usage("give --p, or --beta with a rate choice".into())),
            (Some(b), Some(p)) => ProbVector::new(b.from_user_order(p))?,
            (Some(b), None) if self.optimal => optimal_p(b, &ConstantTable::build(b.k())?)?,
            (Some(b), None) if self.harmonic => harmonic_p(b)?,
            (Some(_), None) => {
                return Err(CliError::Usage("choose the rates with --p, --optimal or --harmonic".into()));
            }
        };
        if beta.is_none() && (self.optimal || self.harmonic) {
            return Err(CliError::Usage("--optimal and --harmonic need --beta".into()));
        }
        Ok(Resolved { beta, p })
    }
}

pub fn constants(k: usize, out: Output) -> Result<Outcome, CliError> {
    let table = ConstantTable::build(k)?;
    let identities = check_constant_identities(&table);
    let growth = alpha_growth_bound(k)?;
    let status = if identities.all_hold() && growth { Status::Ok } else { Status::CheckFailed };
    let text = match out {
        Output::Json => {
            let mut v = table.to_json();
            v["identities"] = serde_json::to_value(&identities).expect("plain data");
            v["alpha_below_growth_bound"] = json!(growth);
            pretty(&v)
        }
        Output::Csv => {
            let mut s = String::from("mask,C\n");
            for bits in 1..(1u32 << k) {
                writeln!(s, "{bits},{}", table.c(SubsetMask::new(bits, k)?)).unwrap();
            }
            s
        }
        Output::Human => {
            let mut s = String::new();
            for (m, a) in table.alphas().iter().enumerate() {
                writeln!(s, "alpha_{} = {a}", m + 1).unwrap();
            }
            for bits in 1..(1u32 << k) {
                let mask = SubsetMask::new(bits, k)?;
                writeln!(s, "C{mask} = {}", table.c(mask)).unwrap();
            }
            writeln!(s, "identities hold: {}", identities.all_hold()).unwrap();
            writeln!(s, "alpha_{k} < 1.6^(2^{k}): {growth}").unwrap();
            s
        }
    };
    Ok(Outcome { text, status })
}

fn solver_config(solver: &Solver) -> SolverConfig {
    match solver.backend {
        BackendArg::Direct => SolverConfig::Direct,
        BackendArg::Gs => SolverConfig::GaussSeidel { tol: solver.tol, max_sweeps: solver.max_sweeps },
    }
}

pub fn potentials(input: &Input, solver: &Solver, out: Output) -> Result<Outcome, CliError> {
    let resolved = input.resolve(false)?;
    let table = solver_config(solver).solve(&resolved.p)?;
    let text = match out {
        Output::Json => pretty(&table.to_json()),
        Output::Csv => {
            let mut s = String::from("mask,f,phi\n");
            writeln!(s, "0,,{}", table.phi_values()[0]).unwrap();
            for bits in 1..table.phi_values().len() {
                writeln!(s, "{bits},{},{}", table.f_values()[bits], table.phi_values()[bits]).unwrap();
            }
            s
        }
        Output::Human => {
            let k = table.k();
            let mut s = format!("k = {k}, p = [{}], residual = {:e}\n", join(table.p().as_slice()), table.residual());
            for bits in 0..table.phi_values().len() as u32 {
                let mask = SubsetMask::new(bits, k)?;
                if bits == 0 {
                    writeln!(s, "phi{mask} = {}", table.phi(mask)).unwrap();
                } else {
                    writeln!(s, "phi{mask} = {}  f = {}", table.phi(mask), table.f(mask)).unwrap();
                }
            }
            s
        }
    };
    Ok(Outcome::ok(text))
}

pub fn ratio(input: &Input, out: Output) -> Result<Outcome, CliError> {
    let resolved = input.resolve(true)?;
    let beta = resolved.beta.expect("required above");
    let result = evaluate(&beta, &resolved.p)?;
    let p_user = beta.to_user_order(resolved.p.as_slice());
    let beta_user = beta.to_user_order(beta.as_slice());
    let per_server = result.per_server_user_order();
    let text = match out {
        Output::Json => pretty(&result.to_json()),
        Output::Csv => {
            let mut s = String::from("server,beta,p,per_server\n");
            for i in 0..beta.k() {
                writeln!(s, "{i},{},{},{}", beta_user[i], p_user[i], per_server[i]).unwrap();
            }
            writeln!(s, "alpha_tilde,arg_t,lower_bound,s").unwrap();
            writeln!(s, "{},{},{},{}", result.alpha_tilde, result.user_arg_t(), result.lower_bound, result.s).unwrap();
            s
        }
        Output::Human => format!(
            "alpha~ = {}\nadversary server = {}\nlower bound = {}\nseparation s = {}\np = [{}]\n",
            result.alpha_tilde,
            result.user_arg_t(),
            result.lower_bound,
            result.s,
            join(&p_user)
        ),
    };
    Ok(Outcome::ok(text))
}

const MAX_LISTED_FAILURES: usize = 20;

pub fn verify(k: usize, trials: usize, seed: u64, tol: f64, slack: f64, out: Output) -> Result<Outcome, CliError> {
    let c = ConstantTable::build(k)?;
    let per_trial: Vec<Report> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let p = random_monotone_p(k, &mut stream_rng(seed, trial as u64))?;
            verify_suite(&p, &c, tol, DEFAULT_MAX_SWEEPS, slack)
        })
        .collect::<Result<_, _>>()?;
    let mut total = Report::failures_only(slack);
    let rows: Vec<(usize, usize, f64)> = per_trial.iter().map(|r| (r.checks, r.failures, r.max_defect)).collect();
    for r in per_trial {
        total.merge(r);
    }
    let status = if total.passed() { Status::Ok } else { Status::CheckFailed };
    let text = match out {
        Output::Json => pretty(&json!({
            "k": k,
            "trials": trials,
            "seed": seed,
            "checks": total.checks,
            "failures": total.failures,
            "max_defect": total.max_defect,
            "slack": slack,
            "failing": &total.records[..total.records.len().min(MAX_LISTED_FAILURES)],
        })),
        Output::Csv => {
            let mut s = String::from("trial,checks,failures,max_defect\n");
            for (i, (checks, failures, defect)) in rows.iter().enumerate() {
                writeln!(s, "{i},{checks},{failures},{defect}").unwrap();
            }
            s
        }
        Output::Human => {
            let mut s = format!(
                "k = {k}, {trials} trials: {} checks, {} failures, max defect {:e}\n",
                total.checks, total.failures, total.max_defect
            );
            for r in total.records.iter().take(MAX_LISTED_FAILURES) {
                writeln!(s, "FAIL {} S={} i={:?}: {} vs {}", r.check, r.s, r.i, r.lhs, r.rhs).unwrap();
            }
            s
        }
    };
    Ok(Outcome { text, status })
}

pub struct SimulateArgs<'a> {
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
    pub audit: bool,
    pub transcript: Option<&'a Path>,
}

pub fn simulate(input: &Input, args: SimulateArgs<'_>, out: Output) -> Result<Outcome, CliError> {
    let resolved = input.resolve(true)?;
    let beta = resolved.beta.expect("required above");
    let mut setup = GameSetup::new(beta, resolved.p)?;
    if !args.audit {
        setup = setup.without_audit();
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }

    let first = match args.transcript {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            let options = RunOptions { keep_audit_records: false, transcript: Some(&mut w) };
            let ledger = game::run_with(&setup, args.steps, args.seed, 0, options)?;
            w.flush()?;
            ledger
        }
        None => game::run(&setup, args.steps, args.seed, 0)?,
    };
    let rest: Vec<CostLedger> = (1..args.trials)
        .into_par_iter()
        .map(|trial| game::run(&setup, args.steps, args.seed, trial))
        .collect::<Result<_, _>>()?;
    let ledgers: Vec<CostLedger> = std::iter::once(first).chain(rest).collect();
    let pooled = game::pool(&ledgers);

    let ratio = setup.ratio();
    let band = [ratio.lower_bound - 3.0 * pooled.std_error, ratio.alpha_tilde + 3.0 * pooled.std_error];
    let in_band = band[0] <= pooled.ratio && pooled.ratio <= band[1];
    let status = if pooled.audit_failures > 0 || pooled.evict_bound_violations > 0 {
        Status::AuditFailed
    } else {
        Status::Ok
    };

    let b = setup.beta();
    let text = match out {
        Output::Json => pretty(&json!({
            "k": setup.k(),
            "beta": b.to_user_order(b.as_slice()),
            "p": b.to_user_order(setup.p().as_slice()),
            "t": b.user_index(setup.t()),
            "alpha_tilde": ratio.alpha_tilde,
            "lower_bound": ratio.lower_bound,
            "s": ratio.s,
            "trials": ledgers.iter().map(|l| l.to_json(&setup)).collect::<Vec<_>>(),
            "pooled": pooled,
            "band": band,
            "in_band": in_band,
        })),
        Output::Csv => {
            let mut s = String::from("trial,alg,adv,adv_evict,ratio,ratio_t,ratio_adjusted,audit_failures\n");
            for l in &ledgers {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    l.stream,
                    l.alg_cost,
                    l.adv_t_cost,
                    l.adv_evict_cost,
                    l.ratio(),
                    l.ratio_t(),
                    l.ratio_adjusted(),
                    l.audit.failures
                )
                .unwrap();
            }
            s
        }
        Output::Human => {
            let mut s = format!(
                "alpha~ = {}, lower bound = {}, adversary server = {}\n",
                ratio.alpha_tilde,
                ratio.lower_bound,
                b.user_index(setup.t())
            );
            for l in &ledgers {
                writeln!(s, "trial {}: ratio {} (ALG/ADV {}, adjusted {})", l.stream, l.ratio(), l.ratio_t(), l.ratio_adjusted())
                    .unwrap();
            }
            writeln!(
                s,
                "pooled ratio {} +- {} over {} trials, band [{}, {}]: {}",
                pooled.ratio,
                pooled.std_error,
                pooled.trials,
                band[0],
                band[1],
                if in_band { "inside" } else { "outside" }
            )
            .unwrap();
            writeln!(s, "audit failures: {}", pooled.audit_failures).unwrap();
            s
        }
    };
    Ok(Outcome { text, status })
}

pub fn sweep(k: usize, r: &[f64], threshold: f64, near_optimal: f64, out: Output) -> Result<Outcome, CliError> {
    let c = ConstantTable::build(k)?;
    let grid = limit_optimality_sweep(k, r, &c, near_optimal, DEFAULT_SLACK)?;
    let limit = if k <= MAX_EXACT_K { Some(verify_limit(k, &c, r, threshold)?) } else { None };
    let passed = grid.passed() && limit.as_ref().is_none_or(|l| l.passed());
    let status = if passed { Status::Ok } else { Status::CheckFailed };
    let text = match out {
        Output::Json => pretty(&json!({ "sweep": grid, "limit": limit })),
        Output::Csv => {
            let mut s = String::from("r,alpha_at_optimal,grid_min,grid_advantage,max_gap\n");
            for (n, point) in grid.points.iter().enumerate() {
                let gap = limit.as_ref().map(|l| l.max_gap[n].to_string()).unwrap_or_default();
                writeln!(s, "{},{},{},{},{gap}", point.r, point.alpha_at_optimal, point.grid_min, point.grid_advantage).unwrap();
            }
            s
        }
        Output::Human => {
            let mut s = format!("k = {k}, alpha_k = {}\n", grid.alpha_k);
            for (n, point) in grid.points.iter().enumerate() {
                write!(
                    s,
                    "r = {}: alpha~ at optimal {}, grid min {}, grid advantage {:e}",
                    point.r, point.alpha_at_optimal, point.grid_min, point.grid_advantage
                )
                .unwrap();
                if let Some(l) = &limit {
                    write!(s, ", largest gap {:e}", l.max_gap[n]).unwrap();
                }
                s.push('\n');
            }
            let failures = grid.report.records.iter().chain(limit.iter().flat_map(|l| &l.report.records));
            for rec in failures.filter(|x| !x.pass) {
                writeln!(s, "FAIL {} S={}: {} vs {}", rec.check, rec.s, rec.lhs, rec.rhs).unwrap();
            }
            s
        }
    };
    Ok(Outcome { text, status })
}
