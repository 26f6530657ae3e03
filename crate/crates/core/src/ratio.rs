//! The upper-bound functional `alpha~(beta, p)`, the optimal and Harmonic
//! rates, and the matching lower bound for well-separated weights.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::constants::ConstantTable;
use crate::error::{Error, Result};
use crate::potential::exact::{ratio, to_f64};
use crate::potential::{ProbVector, TopCurrents};
use crate::report::{defect_scale, Report};

/// Server weights in ascending order, remembering where each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    beta: Vec<f64>,
    /// `beta[r]` is the user's server `order[r]`.
    order: Vec<usize>,
}

impl WeightVector {
    /// Sorts `beta` ascending (stably) and records the permutation.
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        validate_positive(&beta)?;
        let mut order: Vec<usize> = (0..beta.len()).collect();
        order.sort_by(|&a, &b| beta[a].total_cmp(&beta[b]));
        let sorted = order.iter().map(|&i| beta[i]).collect();
        Ok(Self { beta: sorted, order })
    }

    /// Accepts weights that are already non-decreasing.
    pub fn from_sorted(beta: Vec<f64>) -> Result<Self> {
        validate_positive(&beta)?;
        if beta.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::UnsortedWeights);
        }
        let order = (0..beta.len()).collect();
        Ok(Self { beta, order })
    }

    /// `beta_i = r^i`, the separated weights of the limit arguments.
    pub fn geometric(k: usize, r: f64) -> Result<Self> {
        Self::from_sorted((0..k).map(|i| r.powi(i as i32)).collect())
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn get(&self, i: usize) -> f64 {
        self.beta[i]
    }

    /// User-order index of sorted server `i`.
    pub fn user_index(&self, i: usize) -> usize {
        self.order[i]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Rearranges values given per sorted server into user order.
    pub fn to_user_order<T: Clone>(&self, values: &[T]) -> Vec<T> {
        let mut out = values.to_vec();
        for (r, &u) in self.order.iter().enumerate() {
            out[u] = values[r].clone();
        }
        out
    }

    /// Rearranges values given in user order into sorted order.
    pub fn from_user_order<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.order.iter().map(|&u| values[u].clone()).collect()
    }

    /// `s = max_i beta_i / beta_{i+1}`; zero when `k = 1`, where no pair
    /// exists and the lower bound coincides with the upper bound.
    pub fn separation(&self) -> f64 {
        self.beta.windows(2).map(|w| w[0] / w[1]).fold(0.0, f64::max)
    }
}

fn validate_positive(beta: &[f64]) -> Result<()> {
    if beta.is_empty() || beta.len() > crate::lattice::MAX_K {
        return Err(Error::DimensionOutOfRange { k: beta.len(), max: crate::lattice::MAX_K });
    }
    match beta.iter().position(|b| !(b.is_finite() && *b > 0.0)) {
        Some(index) => Err(Error::NonPositive { index, value: beta[index] }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioResult {
    pub alpha_tilde: f64,
    /// Sorted index of the first server attaining the maximum.
    pub arg_t: usize,
    pub lower_bound: f64,
    pub s: f64,
    /// `I([k] \ {i} -> [k]) / (p_i beta_i)` per sorted server.
    pub per_server: Vec<f64>,
    order: Vec<usize>,
}

impl RatioResult {
    pub fn user_arg_t(&self) -> usize {
        self.order[self.arg_t]
    }

    /// `per_server` in the caller's original server order.
    pub fn per_server_user_order(&self) -> Vec<f64> {
        let mut out = self.per_server.clone();
        for (r, &u) in self.order.iter().enumerate() {
            out[u] = self.per_server[r];
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data serializes")
    }
}

impl Serialize for RatioResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("RatioResult", 5)?;
        st.serialize_field("alpha_tilde", &self.alpha_tilde)?;
        st.serialize_field("arg_t", &self.user_arg_t())?;
        st.serialize_field("lower_bound", &self.lower_bound)?;
        st.serialize_field("s", &self.s)?;
        st.serialize_field("per_server", &self.per_server_user_order())?;
        st.end()
    }
}

/// `alpha~(beta, p) = (sum_j p_j beta_j) max_i I([k] \ i -> [k]) / (p_i beta_i)`
/// for non-increasing `p`, using the given currents into the full set.
pub fn alpha_tilde(beta: &WeightVector, p: &ProbVector, currents: &TopCurrents) -> Result<RatioResult> {
    p.require_monotone()?;
    functional(beta, p, currents)
}

/// [`alpha_tilde`] with currents computed by the cancellation-free route.
pub fn evaluate(beta: &WeightVector, p: &ProbVector) -> Result<RatioResult> {
    p.require_monotone()?;
    functional(beta, p, &TopCurrents::accurate(p)?)
}

/// The same max expression without the monotonicity hypothesis. The value
/// is only a proven bound for non-increasing `p`; the simulator uses it to
/// pick the adversary's server for arbitrary rates.
pub fn functional(beta: &WeightVector, p: &ProbVector, currents: &TopCurrents) -> Result<RatioResult> {
    let k = beta.k();
    for found in [p.k(), currents.k()] {
        if found != k {
            return Err(Error::DimensionMismatch { expected: k, found });
        }
    }
    let weighted: Vec<f64> = (0..k).map(|i| p.get(i) * beta.get(i)).collect();
    let total: f64 = weighted.iter().sum();
    let per_server: Vec<f64> = (0..k).map(|i| currents.get(i) / weighted[i]).collect();
    let mut arg_t = 0;
    for i in 1..k {
        if per_server[i] > per_server[arg_t] {
            arg_t = i;
        }
    }
    let alpha_tilde = total * per_server[arg_t];
    let s = beta.separation();
    Ok(RatioResult {
        alpha_tilde,
        arg_t,
        lower_bound: lower_bound_ratio(alpha_tilde, s)?,
        s,
        per_server,
        order: beta.order.clone(),
    })
}

/// `p_i = C_{[k] \ {i}} / beta_i`, scaled by the largest constant so the
/// entries stay in floating range.
pub fn optimal_p(beta: &WeightVector, c: &ConstantTable) -> Result<ProbVector> {
    if c.k() != beta.k() {
        return Err(Error::DimensionMismatch { expected: beta.k(), found: c.k() });
    }
    let complement = c.complement_constants();
    let largest = complement.iter().max().expect("k >= 1");
    let p = complement.iter().enumerate().map(|(i, ci)| to_f64(&ratio(ci, largest)) / beta.get(i)).collect();
    ProbVector::new(p)
}

/// `p_i = 1 / beta_i`.
pub fn harmonic_p(beta: &WeightVector) -> Result<ProbVector> {
    ProbVector::new(beta.as_slice().iter().map(|b| 1.0 / b).collect())
}

/// `alpha~ / (1 + s alpha~)`.
pub fn lower_bound_ratio(alpha_tilde: f64, s: f64) -> Result<f64> {
    if !(alpha_tilde.is_finite() && alpha_tilde > 0.0) {
        return Err(Error::Invalid(format!("alpha~ must be positive and finite, got {alpha_tilde}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Invalid(format!("separation must lie in [0, 1], got {s}")));
    }
    Ok(alpha_tilde / (1.0 + s * alpha_tilde))
}

/// Perturbation factors `1 + delta` applied to each optimal rate.
pub const GRID_DELTAS: [f64; 5] = [-0.1, -0.01, 0.0, 0.01, 0.1];

/// Largest `k` for which the grid is the full cross product.
pub const FULL_GRID_MAX_K: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub r: f64,
    pub alpha_at_optimal: f64,
    pub grid_min: f64,
    /// `1 - grid_min / alpha_at_optimal`, floored at zero: how much a
    /// perturbed profile beats the optimal one.
    pub grid_advantage: f64,
    /// Perturbation of each sorted rate at the grid minimum.
    pub argmin_delta: Vec<f64>,
    pub grid_points: usize,
    /// Grid points skipped because the perturbed rates were not
    /// non-increasing.
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub k: usize,
    pub alpha_k: f64,
    pub points: Vec<SweepPoint>,
    pub report: Report,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn grid(k: usize) -> Vec<Vec<f64>> {
    if k <= FULL_GRID_MAX_K {
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    GRID_DELTAS.iter().map(move |&d| {
                        let mut v = prefix.clone();
                        v.push(d);
                        v
                    })
                })
                .collect();
        }
        out
    } else {
        let mut out = vec![vec![0.0; k]];
        for i in 0..k {
            for &d in GRID_DELTAS.iter().filter(|d| **d != 0.0) {
                let mut v = vec![0.0; k];
                v[i] = d;
                out.push(v);
            }
        }
        out
    }
}

/// For each `r`, with `beta_i = r^i`: `alpha~` at the optimal rates and the
/// minimum over multiplicative perturbations of them.
///
/// At finite `r` a perturbed profile can do slightly better than the optimal
/// one; the optimum is exact only in the limit. Checks that `alpha~` at the
/// optimum never exceeds `alpha_k` and rises with `r`, that the grid's
/// relative advantage over it shrinks with `r`, and that at the largest `r`
/// the advantage is at most `near_optimal`.
pub fn limit_optimality_sweep(
    k: usize,
    r_values: &[f64],
    c: &ConstantTable,
    near_optimal: f64,
    slack: f64,
) -> Result<SweepReport> {
    if c.k() != k {
        return Err(Error::DimensionMismatch { expected: k, found: c.k() });
    }
    if r_values.iter().any(|r| !(r.is_finite() && *r > 1.0)) || r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("r values must be increasing and greater than 1".into()));
    }
    let alpha_k = big_to_f64(&c.alpha(k));
    let deltas = grid(k);
    let mut report = Report::new(slack);
    let mut points: Vec<SweepPoint> = Vec::with_capacity(r_values.len());

    for &r in r_values {
        let beta = WeightVector::geometric(k, r)?;
        let p = optimal_p(&beta, c)?;
        let at_optimal = evaluate(&beta, &p)?.alpha_tilde;
        let mut grid_min = f64::INFINITY;
        let mut argmin_delta = vec![0.0; k];
        let mut skipped = 0;
        for delta in &deltas {
            let q = ProbVector::new(p.as_slice().iter().zip(delta).map(|(x, d)| x * (1.0 + d)).collect())?;
            if !q.is_monotone() {
                skipped += 1;
                continue;
            }
            let value = evaluate(&beta, &q)?.alpha_tilde;
            if value < grid_min {
                grid_min = value;
                argmin_delta.clone_from(delta);
            }
        }

        let advantage = (1.0 - grid_min / at_optimal).max(0.0);
        let s = points.len() as u32;
        report.leq("optimal_below_alpha_k", s, None, None, at_optimal, alpha_k);
        if let Some(prev) = points.last() {
            report.leq("optimal_rises_with_r", s, None, None, prev.alpha_at_optimal, at_optimal);
            report.leq("grid_advantage_shrinks", s, None, None, advantage, prev.grid_advantage);
        }
        points.push(SweepPoint {
            r,
            alpha_at_optimal: at_optimal,
            grid_min,
            grid_advantage: advantage,
            argmin_delta,
            grid_points: deltas.len(),
            skipped,
        });
    }
    if let Some(last) = points.last() {
        let s = points.len() as u32 - 1;
        report.leq("grid_near_optimal", s, None, None, last.grid_advantage, near_optimal);
    }
    Ok(SweepReport { k, alpha_k, points, report })
}

/// Relative distance `|a - b| / max(1, |a|, |b|)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / defect_scale(a, b)
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(beta: &[f64]) -> WeightVector {
        WeightVector::new(beta.to_vec()).unwrap()
    }

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn k2_unit_weights() {
        let r = evaluate(&w(&[1.0, 1.0]), &pv(&[3.0, 2.0])).unwrap();
        assert!((r.per_server[0] - 11.0 / 15.0).abs() < 1e-15);
        assert!((r.per_server[1] - 1.0).abs() < 1e-15);
        assert!((r.alpha_tilde - 5.0).abs() < 1e-14);
        assert_eq!(r.arg_t, 1);
        assert_eq!(r.s, 1.0);
    }

    #[test]
    fn k1_is_one() {
        for b in [0.5, 1.0, 1e6] {
            let r = evaluate(&w(&[b]), &pv(&[7.0])).unwrap();
            assert!((r.alpha_tilde - 1.0).abs() < 1e-15);
            assert_eq!(r.s, 0.0);
            assert_eq!(r.lower_bound, r.alpha_tilde);
        }
    }

    /// With p = (3, 0.02) and beta = (1, 100): p_1 beta_1 + p_2 beta_2 = 5,
    /// the first ratio is I_a / 3 with I_a = 1 + 6 / 3.02 < 3, the second
    /// is 2 / 2 = 1, so the maximum is 1 and alpha~ = 5.
    #[test]
    fn k2_separated_weights() {
        let r = evaluate(&w(&[1.0, 100.0]), &pv(&[3.0, 0.02])).unwrap();
        let i_a = 1.0 + 6.0 / 3.02;
        assert!((r.per_server[0] - i_a / 3.0).abs() < 1e-14);
        assert!((r.per_server[1] - 1.0).abs() < 1e-14);
        assert!((r.alpha_tilde - 5.0).abs() < 1e-13);
        assert!((r.lower_bound - 5.0 / 1.05).abs() < 1e-13);
    }

    #[test]
    fn optimal_rates() {
        let c2 = ConstantTable::build(2).unwrap();
        let p = optimal_p(&w(&[1.0, 10.0]), &c2).unwrap();
        // (3, 0.2) scaled by 1/3.
        assert!((p.get(0) - 1.0).abs() < 1e-15 && (p.get(1) - 0.2 / 3.0).abs() < 1e-15);
        let c1 = ConstantTable::build(1).unwrap();
        assert_eq!(optimal_p(&w(&[4.0]), &c1).unwrap().as_slice(), &[0.25]);
        let c3 = ConstantTable::build(3).unwrap();
        let p = optimal_p(&w(&[1.0, 1.0, 1.0]), &c3).unwrap();
        // C_{2,3} = 3 * 7 = 21, C_{1,3} = 2 * 7 = 14, C_{1,2} = 2 * 3 = 6,
        // summing to alpha_3 = 41.
        let expected = [1.0, 14.0 / 21.0, 6.0 / 21.0];
        for (a, b) in p.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(optimal_p(&w(&[1.0, 2.0]), &c3).is_err());
    }

    #[test]
    fn harmonic_rates() {
        let p = harmonic_p(&w(&[1.0, 10.0])).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.1]);
        let r = evaluate(&w(&[1.0, 10.0]), &p).unwrap();
        assert!(r.alpha_tilde <= 10.0);
        let u = harmonic_p(&w(&[2.0, 2.0, 2.0])).unwrap();
        assert!(u.as_slice().iter().all(|x| *x == 0.5));
    }

    #[test]
    fn lower_bound_values() {
        assert!((lower_bound_ratio(5.0, 0.01).unwrap() - 5.0 / 1.05).abs() < 1e-15);
        assert!((lower_bound_ratio(4.978, 0.01).unwrap() - 4.742).abs() < 1e-3);
        assert!((lower_bound_ratio(5.0, 1e-12).unwrap() - 5.0).abs() < 1e-10);
        assert!(lower_bound_ratio(0.0, 0.5).is_err());
        assert!(lower_bound_ratio(5.0, 1.5).is_err());
    }

    #[test]
    fn user_order_round_trip() {
        let beta = w(&[100.0, 1.0, 10.0]);
        assert_eq!(beta.as_slice(), &[1.0, 10.0, 100.0]);
        assert_eq!(beta.order(), &[1, 2, 0]);
        assert_eq!(beta.to_user_order(&[1.0, 10.0, 100.0]), vec![100.0, 1.0, 10.0]);
        assert_eq!(beta.from_user_order(&[100.0, 1.0, 10.0]), vec![1.0, 10.0, 100.0]);
        assert!((beta.separation() - 0.1).abs() < 1e-15);

        let c = ConstantTable::build(3).unwrap();
        let r = evaluate(&beta, &optimal_p(&beta, &c).unwrap()).unwrap();
        let json = r.to_json();
        assert_eq!(json["arg_t"], r.order[r.arg_t]);
        assert_eq!(json["per_server"][0], r.per_server[2]);
        assert!(WeightVector::from_sorted(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_non_monotone_rates() {
        let beta = w(&[1.0, 1.0]);
        let p = pv(&[1.0, 2.0]);
        assert_eq!(evaluate(&beta, &p).unwrap_err(), Error::NonMonotone);
        assert!(functional(&beta, &p, &TopCurrents::accurate(&p).unwrap()).is_ok());
    }

    #[test]
    fn sweep_small_k() {
        let c1 = ConstantTable::build(1).unwrap();
        let s = limit_optimality_sweep(1, &[10.0, 1e3], &c1, 1e-3, 1e-9).unwrap();
        assert!(s.passed());
        assert!(s.points.iter().all(|p| (p.alpha_at_optimal - 1.0).abs() < 1e-15));

        let c2 = ConstantTable::build(2).unwrap();
        let s = limit_optimality_sweep(2, &[1e4], &c2, 1e-3, 1e-9).unwrap();
        assert!(s.passed(), "{:?}", s.report.records);
        let a = s.points[0].alpha_at_optimal;
        assert!((4.999..=5.0 + 1e-12).contains(&a), "{a}");
        assert_eq!(s.points[0].grid_points, 25);

        let c3 = ConstantTable::build(3).unwrap();
        let s = limit_optimality_sweep(3, &[1e3], &c3, 1e-3, 1e-9).unwrap();
        assert!((s.points[0].alpha_at_optimal - 41.0).abs() <= 0.41);
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid(4).len(), 625);
        assert_eq!(grid(6).len(), 1 + 6 * 4);
        assert!(grid(3).iter().any(|d| d.iter().all(|x| *x == 0.0)));
    }
}
