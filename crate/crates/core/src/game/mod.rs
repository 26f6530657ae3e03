//! The memoryless algorithm against the adaptive adversary on the uniform
//! space with `2k` points.
//!
//! Each request is served first by the adversary and then by the algorithm.
//! When the two sides agree everywhere the adversary moves its server `t`
//! (the maximizer of the upper-bound functional) to a free point and
//! requests it; otherwise it requests `a_i` for the smallest `i` with
//! `a_i != s_i`. Whenever an algorithm server `j` lands on `a_i` with
//! `i < j`, adversary server `i` steps to a free point. Costs are booked to
//! ALG, ADV (moves from full agreement) and ADV' (those evictions).

mod state;

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use serde::Serialize;

pub use state::{init_game, AdversaryMove, AdversaryTurn, GameState};

use crate::error::{Error, Result};
use crate::potential::{PotentialTable, ProbVector, SolverConfig, TopCurrents};
use crate::ratio::{functional, RatioResult, WeightVector};
use crate::report::{defect_scale, DEFAULT_SLACK};
use crate::sample::stream_rng;

/// Everything a run needs besides its seed: sorted weights, rates in the
/// same order, the adversary's server and the potentials for the audit.
#[derive(Debug, Clone)]
pub struct GameSetup {
    beta: WeightVector,
    p: ProbVector,
    t: usize,
    ratio: RatioResult,
    table: PotentialTable,
    /// `sum_j p_j beta_j`, the factor between `phi` and the unscaled
    /// potential.
    weighted_total: f64,
    sampler: WeightedIndex<f64>,
    pub audit: bool,
    pub slack: f64,
}

impl GameSetup {
    /// `p` is indexed like the sorted weights. The adversary's server is the
    /// maximizer of the functional, evaluated for any positive `p`.
    pub fn new(beta: WeightVector, p: ProbVector) -> Result<Self> {
        if beta.k() != p.k() {
            return Err(Error::DimensionMismatch { expected: beta.k(), found: p.k() });
        }
        let ratio = functional(&beta, &p, &TopCurrents::accurate(&p)?)?;
        let table = SolverConfig::Direct.solve(&p)?;
        let weighted_total = (0..p.k()).map(|i| p.get(i) * beta.get(i)).sum();
        let sampler = WeightedIndex::new(p.as_slice()).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(Self { t: ratio.arg_t, beta, p, ratio, table, weighted_total, sampler, audit: true, slack: DEFAULT_SLACK })
    }

    /// Overrides the adversary's server (sorted index).
    pub fn with_t(mut self, t: usize) -> Result<Self> {
        if t >= self.beta.k() {
            return Err(Error::Invalid(format!("server {t} out of range for k = {}", self.beta.k())));
        }
        self.t = t;
        Ok(self)
    }

    pub fn without_audit(mut self) -> Self {
        self.audit = false;
        self
    }

    pub fn k(&self) -> usize {
        self.beta.k()
    }

    pub fn beta(&self) -> &WeightVector {
        &self.beta
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn ratio(&self) -> &RatioResult {
        &self.ratio
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    /// Unscaled potential `-(sum_j p_j beta_j) phi_S`.
    pub fn unscaled_potential(&self, s: u32) -> f64 {
        -self.weighted_total * self.table.phi_bits(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Adversary,
    Algorithm,
    Eviction,
}

/// One audited relation: `delta_phi` against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub step: u64,
    pub phase: Phase,
    pub delta_phi: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub checks: u64,
    pub failures: u64,
    pub max_defect: f64,
    /// Adversary moves from full agreement.
    pub t_moves: u64,
    /// Failing records, plus every record when requested.
    pub records: Vec<AuditRecord>,
    #[serde(skip)]
    keep_passing: bool,
    #[serde(skip)]
    slack: f64,
}

impl AuditSummary {
    fn new(slack: f64, keep_passing: bool) -> Self {
        Self { checks: 0, failures: 0, max_defect: 0.0, t_moves: 0, records: Vec::new(), keep_passing, slack }
    }

    fn record(&mut self, step: u64, phase: Phase, delta_phi: f64, bound: f64, defect: f64) {
        let pass = defect <= self.slack && delta_phi.is_finite() && bound.is_finite();
        self.checks += 1;
        if defect > self.max_defect || defect.is_nan() {
            self.max_defect = defect;
        }
        if !pass {
            self.failures += 1;
        }
        if self.keep_passing || !pass {
            self.records.push(AuditRecord { step, phase, delta_phi, bound, pass });
        }
    }

    fn expect_eq(&mut self, step: u64, phase: Phase, value: f64, target: f64) {
        let defect = (value - target).abs() / defect_scale(value, target);
        self.record(step, phase, value, target, defect);
    }

    /// `value >= bound`.
    fn expect_geq(&mut self, step: u64, phase: Phase, value: f64, bound: f64) {
        let defect = (bound - value).max(0.0) / defect_scale(value, bound);
        self.record(step, phase, value, bound, defect);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostLedger {
    pub k: usize,
    pub seed: u64,
    pub stream: u64,
    pub steps: u64,
    pub t: usize,
    pub alg_cost: f64,
    pub adv_t_cost: f64,
    pub adv_evict_cost: f64,
    pub phi_initial: f64,
    pub phi_final: f64,
    /// Prefixes at which `s * ALG < ADV'` beyond slack (every eviction is paid for by an
    /// earlier, heavier algorithm move, so this should stay zero).
    pub evict_bound_violations: u64,
    pub audit: AuditSummary,
}

impl CostLedger {
    /// `ALG / (ADV + ADV')`.
    pub fn ratio(&self) -> f64 {
        self.alg_cost / (self.adv_t_cost + self.adv_evict_cost)
    }

    /// `ALG / ADV`.
    pub fn ratio_t(&self) -> f64 {
        self.alg_cost / self.adv_t_cost
    }

    /// `(ALG + phi_final - phi_initial) / ADV`, which removes the additive
    /// constant from the ratio.
    pub fn ratio_adjusted(&self) -> f64 {
        (self.alg_cost + self.phi_final - self.phi_initial) / self.adv_t_cost
    }

    /// The flat JSON form, with weights, rates and `t` in the caller's
    /// server order.
    pub fn to_json(&self, setup: &GameSetup) -> serde_json::Value {
        let beta = setup.beta();
        serde_json::json!({
            "k": self.k,
            "beta": beta.to_user_order(beta.as_slice()),
            "p": beta.to_user_order(setup.p().as_slice()),
            "t": beta.user_index(self.t),
            "n": self.steps,
            "seed": self.seed,
            "stream": self.stream,
            "alg": self.alg_cost,
            "adv": self.adv_t_cost,
            "adv_evict": self.adv_evict_cost,
            "ratio": self.ratio(),
            "ratio_t": self.ratio_t(),
            "ratio_adjusted": self.ratio_adjusted(),
            "audit_failures": self.audit.failures,
            "audit_checks": self.audit.checks,
            "evict_bound_violations": self.evict_bound_violations,
        })
    }
}

/// Ratios pooled over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pooled {
    pub trials: usize,
    /// `sum ALG / sum (ADV + ADV')`.
    pub ratio: f64,
    /// `sum ALG / sum ADV`.
    pub ratio_t: f64,
    /// Standard error of the mean of the per-trial `ALG / (ADV + ADV')`.
    pub std_error: f64,
    pub audit_failures: u64,
    pub evict_bound_violations: u64,
}

pub fn pool(ledgers: &[CostLedger]) -> Pooled {
    let n = ledgers.len();
    let alg: f64 = ledgers.iter().map(|l| l.alg_cost).sum();
    let adv: f64 = ledgers.iter().map(|l| l.adv_t_cost).sum();
    let evict: f64 = ledgers.iter().map(|l| l.adv_evict_cost).sum();
    let std_error = if n < 2 {
        0.0
    } else {
        let ratios: Vec<f64> = ledgers.iter().map(CostLedger::ratio).collect();
        let mean = ratios.iter().sum::<f64>() / n as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Pooled {
        trials: n,
        ratio: alg / (adv + evict),
        ratio_t: alg / adv,
        std_error,
        audit_failures: ledgers.iter().map(|l| l.audit.failures).sum(),
        evict_bound_violations: ledgers.iter().map(|l| l.evict_bound_violations).sum(),
    }
}

/// Column header of the optional transcript.
pub const TRANSCRIPT_HEADER: &str = "step,phase,request,mover,cost,state_mask,phi";

/// Options for a single game.
#[derive(Default)]
pub struct RunOptions<'w> {
    /// Keep passing audit records as well as failing ones.
    pub keep_audit_records: bool,
    /// Receives one CSV row per move.
    pub transcript: Option<&'w mut dyn Write>,
}

/// Plays `n_steps` requests.
pub fn run(setup: &GameSetup, n_steps: u64, seed: u64, stream: u64) -> Result<CostLedger> {
    run_with(setup, n_steps, seed, stream, RunOptions::default())
}

pub fn run_with(setup: &GameSetup, n_steps: u64, seed: u64, stream: u64, mut options: RunOptions<'_>) -> Result<CostLedger> {
    let k = setup.k();
    let beta = setup.beta.as_slice();
    let mut rng = stream_rng(seed, stream);
    let mut g = init_game(k)?;
    let phi_initial = setup.unscaled_potential(g.agreement_bits());
    let mut ledger = CostLedger {
        k,
        seed,
        stream,
        steps: 0,
        t: setup.t,
        alg_cost: 0.0,
        adv_t_cost: 0.0,
        adv_evict_cost: 0.0,
        phi_initial,
        phi_final: phi_initial,
        evict_bound_violations: 0,
        audit: AuditSummary::new(setup.slack, options.keep_audit_records),
    };
    let s = setup.beta.separation();
    let io = |e: std::io::Error| Error::Internal(format!("transcript: {e}"));
    if let Some(w) = options.transcript.as_deref_mut() {
        writeln!(w, "{TRANSCRIPT_HEADER}").map_err(io)?;
    }

    for step in 1..=n_steps {
        let before = g.agreement_bits();
        let turn = g.adversary_turn(setup.t, beta)?;
        let after_adv = g.agreement_bits();
        if setup.audit {
            audit_adversary(setup, &mut ledger.audit, step, &turn, before, after_adv);
        }
        let mover = match turn.kind {
            AdversaryMove::Chase { server } | AdversaryMove::TMove { server } => server,
        };
        ledger.adv_t_cost += turn.cost;
        if let Some(w) = options.transcript.as_deref_mut() {
            let phi = setup.unscaled_potential(after_adv);
            writeln!(w, "{step},adversary,{},{mover},{},{after_adv},{phi}", turn.request, turn.cost).map_err(io)?;
        }

        if setup.audit {
            audit_algorithm(setup, &mut ledger.audit, step, &g, turn.request)?;
        }
        let j = g.algorithm_turn(turn.request, &setup.sampler, &mut rng)?;
        ledger.alg_cost += beta[j];
        let after_alg = g.agreement_bits();
        if let Some(w) = options.transcript.as_deref_mut() {
            let phi = setup.unscaled_potential(after_alg);
            writeln!(w, "{step},algorithm,{},{j},{},{after_alg},{phi}", turn.request, beta[j]).map_err(io)?;
        }

        for i in g.eviction_fixup()? {
            ledger.adv_evict_cost += beta[i];
            let after_evict = g.agreement_bits();
            if setup.audit {
                let delta = setup.unscaled_potential(after_evict) - setup.unscaled_potential(after_alg);
                ledger.audit.expect_eq(step, Phase::Eviction, delta, 0.0);
                if after_evict != after_alg {
                    ledger.audit.record(step, Phase::Eviction, delta, 0.0, f64::INFINITY);
                }
            }
            if let Some(w) = options.transcript.as_deref_mut() {
                let a = g.adversary()[i];
                let phi = setup.unscaled_potential(after_evict);
                writeln!(w, "{step},eviction,{a},{i},{},{after_evict},{phi}", beta[i]).map_err(io)?;
            }
        }
        g.check_invariant()?;
        let (paid, owed) = (s * ledger.alg_cost, ledger.adv_evict_cost);
        if (owed - paid) / defect_scale(paid, owed) > setup.slack {
            ledger.evict_bound_violations += 1;
        }
        ledger.steps = step;
    }
    ledger.phi_final = setup.unscaled_potential(g.agreement_bits());
    Ok(ledger)
}

/// A move from full agreement raises the unscaled potential by
/// `(sum_j p_j beta_j) I([k] \ t -> [k]) / p_t`, at least `alpha~ beta_t`
/// for the maximizing `t`. A chasing request changes nothing.
fn audit_adversary(
    setup: &GameSetup,
    audit: &mut AuditSummary,
    step: u64,
    turn: &AdversaryTurn,
    before: u32,
    after: u32,
) {
    let delta = setup.unscaled_potential(after) - setup.unscaled_potential(before);
    match turn.kind {
        AdversaryMove::TMove { server } => {
            audit.t_moves += 1;
            let bound = setup.ratio.alpha_tilde * setup.beta.get(server);
            audit.expect_geq(step, Phase::Adversary, delta, bound);
            if server == setup.ratio.arg_t {
                audit.expect_eq(step, Phase::Adversary, delta, bound);
            }
        }
        AdversaryMove::Chase { .. } => audit.expect_eq(step, Phase::Adversary, delta, 0.0),
    }
}

/// Enumerates every possible mover from the current state, eviction
/// included, and compares the exact expected potential change with the
/// exact expected cost: `-E[delta phi] = E[cost] = sum_j p_j beta_j / sum_j p_j`.
fn audit_algorithm(
    setup: &GameSetup,
    audit: &mut AuditSummary,
    step: u64,
    g: &GameState,
    request: usize,
) -> Result<()> {
    let p = setup.p.as_slice();
    let total: f64 = p.iter().sum();
    let phi_before = setup.unscaled_potential(g.agreement_bits());
    let mut expected_drop = 0.0;
    let mut expected_cost = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        let mut next = g.clone();
        next.move_algorithm(j, request)?;
        next.eviction_fixup()?;
        let prob = pj / total;
        expected_drop += prob * (phi_before - setup.unscaled_potential(next.agreement_bits()));
        expected_cost += prob * setup.beta.get(j);
    }
    audit.expect_eq(step, Phase::Algorithm, expected_drop, expected_cost);
    Ok(())
}
