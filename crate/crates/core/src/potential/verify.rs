//! Numerical checks of the structural properties of the potentials.
//!
//! Every check records `lhs <= rhs` (or `lhs == rhs`) into a [`Report`];
//! `S` in a record is the source set of the current involved. Checks whose
//! hypotheses need a non-increasing `p` refuse other inputs with
//! [`Error::NonMonotone`] instead of reporting spurious failures.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::exact::{ratio, rational, solve_exact, to_f64, MAX_EXACT_K};
use super::{solve_gauss_seidel_observed, PotentialTable, ProbVector, SolverConfig};
use crate::constants::ConstantTable;
use crate::error::{Error, Result};
use crate::lattice::{full_mask, smallest_missing, Elements};
use crate::report::Report;

/// `1 + sum_{j in S} I(S \ j -> S)`.
fn inflow(t: &PotentialTable, s: u32) -> f64 {
    1.0 + Elements(s).map(|j| t.current_bits(s, j)).sum::<f64>()
}

fn missing(s: u32, k: usize) -> impl Iterator<Item = usize> {
    Elements(!s & full_mask(k))
}

fn check_dims(t: &PotentialTable, c: &ConstantTable) -> Result<()> {
    if c.k() == t.k() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: t.k(), found: c.k() })
    }
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `I(S -> S | i) = 1 + sum_{j in S} I(S \ j -> S)` for every `S` other
/// than the full set, `i` its smallest missing element. Holds for any `p`.
pub fn verify_tight_system(t: &PotentialTable, slack: f64) -> Report {
    let mut report = Report::new(slack);
    for s in 0..full_mask(t.k()) {
        let i = smallest_missing(s);
        report.eq("tight_system", s, Some(i), None, t.current_bits(s | (1 << i), i), inflow(t, s));
    }
    report
}

/// `I(S -> S | i) >= 1 + sum_{j in S} I(S \ j -> S)` for every `i` not in
/// `S`, with equality at the smallest missing `i`.
pub fn verify_feasibility(t: &PotentialTable, slack: f64) -> Result<Report> {
    t.p().require_monotone()?;
    let mut report = Report::new(slack);
    for s in 0..full_mask(t.k()) {
        let rhs = inflow(t, s);
        let first = smallest_missing(s);
        for i in missing(s, t.k()) {
            let current = t.current_bits(s | (1 << i), i);
            if i == first {
                report.eq("feasibility_tight", s, Some(i), None, current, rhs);
            } else {
                report.leq("feasibility", s, Some(i), None, rhs, current);
            }
        }
    }
    Ok(report)
}

/// `I(S -> S | i) <= I(S -> S | j)` for `i < j`, both missing from `S`.
pub fn verify_current_monotonicity(t: &PotentialTable, slack: f64) -> Result<Report> {
    t.p().require_monotone()?;
    let mut report = Report::new(slack);
    for s in 0..full_mask(t.k()) {
        let out: Vec<(usize, f64)> = missing(s, t.k()).map(|i| (i, t.current_bits(s | (1 << i), i))).collect();
        for (a, &(i, lhs)) in out.iter().enumerate() {
            for &(j, rhs) in &out[a + 1..] {
                report.leq("current_monotonicity", s, Some(i), Some(j), lhs, rhs);
            }
        }
    }
    Ok(report)
}

/// Set-function form `phi(S | i) + phi(S | j) <= phi(S | i | j) + phi(S)`,
/// and current form `I(S' -> S' | i) <= I(S -> S | i)` for every `S'`
/// contained in `S`, `i` missing from `S`.
pub fn verify_supermodularity(t: &PotentialTable, slack: f64) -> Result<Report> {
    t.p().require_monotone()?;
    let k = t.k();
    let mut report = Report::new(slack);
    for s in 0..=full_mask(k) {
        let out: Vec<usize> = missing(s, k).collect();
        for (a, &i) in out.iter().enumerate() {
            for &j in &out[a + 1..] {
                let lhs = t.phi_bits(s | (1 << i)) + t.phi_bits(s | (1 << j));
                let rhs = t.phi_bits(s | (1 << i) | (1 << j)) + t.phi_bits(s);
                report.leq("supermodularity", s, Some(i), Some(j), lhs, rhs);
            }
        }
        for &i in &out {
            let upper = t.current_bits(s | (1 << i), i);
            // Every proper submask of s, including the empty set.
            let mut sub = s;
            while sub != 0 {
                sub = (sub - 1) & s;
                report.leq_pair("supermodular_current", sub, s, i, t.current_bits(sub | (1 << i), i), upper);
            }
        }
    }
    Ok(report)
}

/// `1 <= I(S -> S | i) <= C_S` with `i` the smallest element missing from `S`.
pub fn verify_current_bounds(t: &PotentialTable, c: &ConstantTable, slack: f64) -> Result<Report> {
    t.p().require_monotone()?;
    check_dims(t, c)?;
    let mut report = Report::new(slack);
    for s in 0..full_mask(t.k()) {
        let i = smallest_missing(s);
        let current = t.current_bits(s | (1 << i), i);
        report.leq("current_lower", s, Some(i), None, 1.0, current);
        report.leq("current_upper", s, Some(i), None, current, big_to_f64(c.c_bits(s)));
    }
    Ok(report)
}

/// With the last two rates equal, swapping the last two servers leaves `f`
/// and `phi` unchanged: for `S` inside `{0..k-2}` containing `k-2`,
/// `f_S = f_T` and `phi_S = phi_T` where `T = S \ {k-2} | {k-1}`.
pub fn verify_symmetry(p: &ProbVector, config: &SolverConfig, slack: f64) -> Result<Report> {
    let k = p.k();
    if k < 2 || p.get(k - 1) != p.get(k - 2) {
        return Err(Error::Precondition("symmetry needs k >= 2 and p[k-1] == p[k-2]".into()));
    }
    let t = config.solve(p)?;
    let (a, b) = (1u32 << (k - 2), 1u32 << (k - 1));
    let mut report = Report::new(slack);
    for low in 0..a {
        let s = low | a;
        let swapped = low | b;
        report.eq("symmetry_f", s, None, None, t.f_bits(s), t.f_bits(swapped));
        report.eq("symmetry_phi", s, None, None, t.phi_bits(s), t.phi_bits(swapped));
    }
    Ok(report)
}

/// Lowering the last rate to `pk_smaller` never lowers any `f_S`.
pub fn verify_p_monotonicity(p: &ProbVector, pk_smaller: f64, config: &SolverConfig, slack: f64) -> Result<Report> {
    let k = p.k();
    if !(pk_smaller > 0.0 && pk_smaller <= p.get(k - 1)) {
        return Err(Error::Precondition(format!(
            "need 0 < p'_k <= p_k = {}, got {pk_smaller}",
            p.get(k - 1)
        )));
    }
    let mut lowered = p.as_slice().to_vec();
    lowered[k - 1] = pk_smaller;
    let lowered = ProbVector::new(lowered)?;
    let before = config.solve(p)?;
    let after = config.solve(&lowered)?;
    let mut report = Report::new(slack);
    for s in 1..=full_mask(k) {
        report.leq("p_monotonicity", s, None, None, before.f_bits(s), after.f_bits(s));
    }
    Ok(report)
}

/// Converged ordering of `f` within each level. For `S` containing the top
/// server `m` and `l < l'` consecutive elements missing below `m`:
/// `f_{S | l} >= f_S` and `p_l (f_{S | l} - f_S) <= p_l' (f_{S | l'} - f_S)`.
pub fn verify_f_ordering(t: &PotentialTable, slack: f64) -> Result<Report> {
    t.p().require_monotone()?;
    let p = t.p().as_slice();
    let mut report = Report::new(slack);
    for top in 0..t.k() {
        let level = 1usize << top;
        let f = &t.f_values()[level..2 * level];
        level_ordering(&mut report, p, top, f, "f_ordering_increase", "f_ordering_weighted");
    }
    Ok(report)
}

fn level_ordering(report: &mut Report, p: &[f64], top: usize, f: &[f64], part1: &'static str, part2: &'static str) {
    let n = f.len();
    let level = 1u32 << top;
    for low in 0..n - 1 {
        let s = low as u32 | level;
        let gaps: Vec<usize> = Elements(!(low as u32) & (n as u32 - 1)).collect();
        for &l in &gaps {
            report.leq(part1, s, Some(l), None, f[low], f[low | (1 << l)]);
        }
        for w in gaps.windows(2) {
            let (l, m) = (w[0], w[1]);
            let lhs = p[l] * (f[low | (1 << l)] - f[low]);
            let rhs = p[m] * (f[low | (1 << m)] - f[low]);
            report.leq(part2, s, Some(l), Some(m), lhs, rhs);
        }
    }
}

/// Runs Gauss-Seidel and checks every sweep: iterates never decrease, and
/// for non-increasing `p` the two ordering claims of
/// [`verify_f_ordering`] already hold at each sweep.
///
/// The report keeps failing records only, since the number of checks grows
/// with the sweep count.
pub fn verify_iteration(p: &ProbVector, tol: f64, max_sweeps: usize, slack: f64) -> Result<(Report, PotentialTable)> {
    let mut report = Report::failures_only(slack);
    let monotone = p.is_monotone();
    let table = solve_gauss_seidel_observed(p, tol, max_sweeps, |sweep| {
        let level = 1u32 << sweep.top;
        for (low, (&before, &after)) in sweep.previous.iter().zip(sweep.current).enumerate() {
            report.leq("iteration_monotone", low as u32 | level, None, None, before, after);
        }
        if monotone {
            level_ordering(&mut report, sweep.p, sweep.top, sweep.current, "sweep_increase", "sweep_weighted");
        }
    })?;
    Ok((report, table))
}

/// Every check above for one non-increasing `p`, on the direct solution
/// and on the Gauss-Seidel solution produced while auditing its sweeps.
/// Symmetry uses `p` with its last rate raised to the one before it, and
/// the rate comparison halves the last rate. Passing records are dropped.
pub fn verify_suite(p: &ProbVector, c: &ConstantTable, tol: f64, max_sweeps: usize, slack: f64) -> Result<Report> {
    p.require_monotone()?;
    let k = p.k();
    let mut report = Report::failures_only(slack);
    let (iteration, iterated) = verify_iteration(p, tol, max_sweeps, slack)?;
    report.merge(iteration);
    for t in [SolverConfig::Direct.solve(p)?, iterated] {
        report.merge(verify_tight_system(&t, slack));
        report.merge(verify_feasibility(&t, slack)?);
        report.merge(verify_current_monotonicity(&t, slack)?);
        report.merge(verify_supermodularity(&t, slack)?);
        report.merge(verify_current_bounds(&t, c, slack)?);
        report.merge(verify_f_ordering(&t, slack)?);
    }
    let gs = SolverConfig::GaussSeidel { tol, max_sweeps };
    for config in [SolverConfig::Direct, gs] {
        if k >= 2 {
            let mut tied = p.as_slice().to_vec();
            tied[k - 1] = tied[k - 2];
            report.merge(verify_symmetry(&ProbVector::new(tied)?, &config, slack)?);
        }
        report.merge(verify_p_monotonicity(p, p.get(k - 1) / 2.0, &config, slack)?);
    }
    Ok(report)
}

/// Exact behaviour of the currents under well-separated weights.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub k: usize,
    pub r_values: Vec<f64>,
    /// `gaps[n][s] = C_S - I(S -> S | i)` at `r_values[n]`, `i` the smallest
    /// missing element; the full set is omitted.
    pub gaps: Vec<Vec<f64>>,
    /// Largest gap at each `r`.
    pub max_gap: Vec<f64>,
    /// Upper-bound functional at the optimal rates for each `r`.
    pub alpha_tilde: Vec<f64>,
    pub alpha_k: f64,
    pub threshold: f64,
    pub report: Report,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Solves exactly at `p_i = C_{[k] \ {i}} / r^i` (weights `beta_i = r^i`)
/// for each `r` and checks that every gap `C_S - I` is nonnegative,
/// non-increasing in `r`, and below `threshold` at the largest `r`.
pub fn verify_limit(k: usize, c: &ConstantTable, r_values: &[f64], threshold: f64) -> Result<LimitReport> {
    if c.k() != k {
        return Err(Error::DimensionMismatch { expected: k, found: c.k() });
    }
    if k > MAX_EXACT_K {
        return Err(Error::DimensionOutOfRange { k, max: MAX_EXACT_K });
    }
    if r_values.is_empty() || r_values.iter().any(|r| !(r.is_finite() && *r > 1.0)) {
        return Err(Error::Precondition("r values must be finite and greater than 1".into()));
    }
    if r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("r values must be strictly increasing".into()));
    }

    let full = full_mask(k);
    let complement = c.complement_constants();
    let alpha_k = ratio(&c.alpha(k), &BigUint::from(1u32));
    let mut report = Report::new(0.0);
    let mut gaps: Vec<Vec<BigRational>> = Vec::with_capacity(r_values.len());
    let mut alpha_tilde = Vec::with_capacity(r_values.len());

    for &r in r_values {
        let r = rational(r);
        let mut scale = BigRational::from_integer(1.into());
        let mut p = Vec::with_capacity(k);
        for ci in &complement {
            p.push(ratio(ci, &BigUint::from(1u32)) / &scale);
            scale *= &r;
        }
        let t = solve_exact(&p)?;
        let row: Vec<BigRational> = (0..full)
            .map(|s| {
                let i = smallest_missing(s);
                ratio(c.c_bits(s), &BigUint::from(1u32)) - t.current(s | (1 << i), i)
            })
            .collect();
        gaps.push(row);

        // p_j beta_j = C_{[k] \ j}, so the functional reduces to
        // alpha_k * max_i I_i / C_{[k] \ i}.
        let best = (0..k)
            .map(|i| t.current(full, i) / ratio(&complement[i], &BigUint::from(1u32)))
            .max()
            .expect("k >= 1");
        alpha_tilde.push(to_f64(&(&alpha_k * best)));
    }

    let zero = BigRational::zero();
    for s in 0..full {
        let i = smallest_missing(s);
        for (n, row) in gaps.iter().enumerate() {
            let g = &row[s as usize];
            report.decided("limit_gap_nonnegative", s, Some(i), 0.0, to_f64(g), *g >= zero);
            if n > 0 {
                let prev = &gaps[n - 1][s as usize];
                report.decided("limit_gap_shrinks", s, Some(i), to_f64(g), to_f64(prev), g <= prev);
            }
        }
        let last = to_f64(&gaps[gaps.len() - 1][s as usize]);
        report.decided("limit_gap_small", s, Some(i), last, threshold, last < threshold);
    }

    let gaps: Vec<Vec<f64>> = gaps.iter().map(|row| row.iter().map(to_f64).collect()).collect();
    let max_gap = gaps.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
    Ok(LimitReport {
        k,
        r_values: r_values.to_vec(),
        gaps,
        max_gap,
        alpha_tilde,
        alpha_k: big_to_f64(&c.alpha(k)),
        threshold,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::solve_direct;
    use crate::report::DEFAULT_SLACK;

    fn table(p: &[f64]) -> PotentialTable {
        solve_direct(&ProbVector::new(p.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn suite_passes_and_is_vacuous_at_k1() {
        use crate::potential::{DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
        for p in [vec![1.0], vec![0.9, 0.4, 0.4, 0.05], vec![1.0, 0.7, 0.3, 0.2, 0.1]] {
            let p = ProbVector::new(p).unwrap();
            let c = ConstantTable::build(p.k()).unwrap();
            let r = verify_suite(&p, &c, DEFAULT_TOL, DEFAULT_MAX_SWEEPS, DEFAULT_SLACK).unwrap();
            assert!(r.passed(), "{:?}", r.records.first());
            assert!(r.checks > 0);
            assert!(r.records.is_empty());
        }
        let bad = ProbVector::new(vec![0.1, 0.5]).unwrap();
        let c = ConstantTable::build(2).unwrap();
        assert!(verify_suite(&bad, &c, 1e-12, 1000, DEFAULT_SLACK).is_err());
    }

    #[test]
    fn k2_closed_form_checks() {
        let t = table(&[3.0, 2.0]);
        let r = verify_tight_system(&t, DEFAULT_SLACK);
        assert!(r.passed());
        // S = {1} (0-based mask 0b10): 11/5 = 1 + 6/5.
        let rec = r.records.iter().find(|x| x.s == 0b10).unwrap();
        assert!((rec.lhs - 11.0 / 5.0).abs() < 1e-14 && (rec.rhs - 11.0 / 5.0).abs() < 1e-14);

        let feas = verify_feasibility(&t, DEFAULT_SLACK).unwrap();
        assert!(feas.passed());
        let off = feas.records_for("feasibility").find(|x| x.s == 0).unwrap();
        assert!((off.rhs - 6.0 / 5.0).abs() < 1e-14);

        assert!(verify_current_monotonicity(&t, DEFAULT_SLACK).unwrap().passed());
        let sm = verify_supermodularity(&t, DEFAULT_SLACK).unwrap();
        assert!(sm.passed());
        let rec = sm.records_for("supermodularity").next().unwrap();
        assert!((rec.lhs - (1.0 / 3.0 + 3.0 / 5.0)).abs() < 1e-14);
        assert!((rec.rhs - 4.0 / 3.0).abs() < 1e-14);

        let c = ConstantTable::build(2).unwrap();
        let b = verify_current_bounds(&t, &c, DEFAULT_SLACK).unwrap();
        assert!(b.passed());
        let top = b.records_for("current_upper").find(|x| x.s == 0b10).unwrap();
        assert_eq!(top.rhs, 3.0);
        let base = b.records_for("current_upper").find(|x| x.s == 0).unwrap();
        assert_eq!((base.lhs, base.rhs), (1.0, 1.0));
    }

    #[test]
    fn hypotheses_are_enforced() {
        let t = table(&[2.0, 3.0]);
        assert!(verify_tight_system(&t, DEFAULT_SLACK).passed());
        assert_eq!(verify_feasibility(&t, DEFAULT_SLACK).unwrap_err(), Error::NonMonotone);
        assert_eq!(verify_supermodularity(&t, DEFAULT_SLACK).unwrap_err(), Error::NonMonotone);
        let c = ConstantTable::build(3).unwrap();
        assert!(verify_current_bounds(&table(&[3.0, 2.0]), &c, DEFAULT_SLACK).is_err());
        let p = ProbVector::new(vec![3.0, 2.0]).unwrap();
        assert!(verify_symmetry(&p, &SolverConfig::Direct, DEFAULT_SLACK).is_err());
        assert!(verify_p_monotonicity(&p, 2.5, &SolverConfig::Direct, DEFAULT_SLACK).is_err());
        assert!(verify_p_monotonicity(&p, 0.0, &SolverConfig::Direct, DEFAULT_SLACK).is_err());
    }

    #[test]
    fn symmetry_k2() {
        let p = ProbVector::new(vec![1.7, 1.7]).unwrap();
        let r = verify_symmetry(&p, &SolverConfig::Direct, DEFAULT_SLACK).unwrap();
        assert!(r.passed());
        let f = r.records_for("symmetry_f").next().unwrap();
        assert!((f.lhs - 1.0).abs() < 1e-14 && (f.rhs - 1.0).abs() < 1e-14);
        let phi = r.records_for("symmetry_phi").next().unwrap();
        assert!((phi.lhs - 1.0 / 1.7).abs() < 1e-14);
    }

    #[test]
    fn p_monotonicity_k2() {
        let p = ProbVector::new(vec![3.0, 2.0]).unwrap();
        let r = verify_p_monotonicity(&p, 1.0, &SolverConfig::Direct, DEFAULT_SLACK).unwrap();
        assert!(r.passed());
        let rec = r.records.iter().find(|x| x.s == 0b10).unwrap();
        assert!((rec.lhs - 1.2).abs() < 1e-14 && (rec.rhs - 1.5).abs() < 1e-14);
        let same = verify_p_monotonicity(&p, 2.0, &SolverConfig::Direct, DEFAULT_SLACK).unwrap();
        assert!(same.records.iter().all(|x| x.defect == 0.0 && x.lhs == x.rhs));
    }

    #[test]
    fn iteration_and_ordering_k5() {
        let p = ProbVector::new(vec![0.93, 0.7, 0.52, 0.5, 0.11]).unwrap();
        let (r, t) = verify_iteration(&p, 1e-13, 100_000, DEFAULT_SLACK).unwrap();
        assert!(r.passed(), "{:?}", r.records.first());
        assert!(r.checks > 1000);
        assert!(verify_f_ordering(&t, DEFAULT_SLACK).unwrap().passed());
    }

    #[test]
    fn corrupted_table_fails_tight_system() {
        let t = table(&[0.8, 0.5, 0.2]);
        let mut json = t.to_json();
        json["phi"]["3"] = serde_json::json!(t.phi_bits(3) * 1.01);
        let bad = PotentialTable::from_json(&json).unwrap();
        assert!(!verify_tight_system(&bad, DEFAULT_SLACK).passed());
    }

    #[test]
    fn limit_k1_and_k2() {
        let c1 = ConstantTable::build(1).unwrap();
        let l = verify_limit(1, &c1, &[10.0, 100.0], 1e-3).unwrap();
        assert!(l.passed());
        assert_eq!(l.gaps, vec![vec![0.0], vec![0.0]]);
        assert_eq!(l.alpha_tilde, vec![1.0, 1.0]);

        // k = 2: p = (3, 2/r), the gap at S = {1} is 2 p_2 / (p_1 + p_2).
        let c2 = ConstantTable::build(2).unwrap();
        let l = verify_limit(2, &c2, &[10.0, 1e6], 1e-3).unwrap();
        assert!(l.passed());
        for (n, r) in [10.0, 1e6].iter().enumerate() {
            let p2 = 2.0 / r;
            let expected = 2.0 * p2 / (3.0 + p2);
            assert!((l.gaps[n][0b10] - expected).abs() <= 1e-12 * expected);
            assert_eq!(l.alpha_tilde[n], 5.0);
        }
    }

    #[test]
    fn limit_rejects_bad_r() {
        let c = ConstantTable::build(2).unwrap();
        assert!(verify_limit(2, &c, &[100.0, 10.0], 1e-3).is_err());
        assert!(verify_limit(2, &c, &[1.0], 1e-3).is_err());
        assert!(verify_limit(3, &c, &[10.0], 1e-3).is_err());
    }
}
