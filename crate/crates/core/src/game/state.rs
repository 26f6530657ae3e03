//! Positions on the `2k`-point uniform space and the three kinds of move.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::SubsetMask;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    k: usize,
    /// Adversary server positions.
    a: Vec<usize>,
    /// Algorithm server positions.
    s: Vec<usize>,
}

/// What the adversary did before issuing a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryMove {
    /// Requested `a_i` for the smallest disagreeing `i`; nothing moved.
    Chase { server: usize },
    /// From full agreement, moved server `t` to a free point.
    TMove { server: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryTurn {
    pub request: usize,
    pub cost: f64,
    pub kind: AdversaryMove,
}

/// Both sides start on points `0..k`, in full agreement.
pub fn init_game(k: usize) -> Result<GameState> {
    crate::lattice::check_k(k)?;
    Ok(GameState { k, a: (0..k).collect(), s: (0..k).collect() })
}

impl GameState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> usize {
        2 * self.k
    }

    pub fn adversary(&self) -> &[usize] {
        &self.a
    }

    pub fn algorithm(&self) -> &[usize] {
        &self.s
    }

    pub(crate) fn agreement_bits(&self) -> u32 {
        self.a.iter().zip(&self.s).enumerate().filter(|(_, (a, s))| a == s).fold(0, |m, (i, _)| m | (1 << i))
    }

    /// `{i : a_i = s_i}`, recomputed from the positions on every call.
    pub fn agreement(&self) -> SubsetMask {
        SubsetMask::new(self.agreement_bits(), self.k).expect("k checked at construction")
    }

    fn occupied(&self, point: usize) -> bool {
        self.a.contains(&point) || self.s.contains(&point)
    }

    /// Lowest-indexed point holding no server of either side.
    fn free_point(&self) -> Result<usize> {
        (0..self.points()).find(|&x| !self.occupied(x)).ok_or_else(|| Error::Internal("no free point".into()))
    }

    /// Positions distinct on each side, and `a_i != s_j` whenever `i < j`.
    pub fn check_invariant(&self) -> Result<()> {
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.a[i] == self.a[j] || self.s[i] == self.s[j] {
                    return Err(Error::Internal(format!("servers {i} and {j} share a point")));
                }
                if self.a[i] == self.s[j] {
                    return Err(Error::Internal(format!("adversary {i} sits on algorithm server {j}")));
                }
            }
        }
        Ok(())
    }

    /// One adversary turn with `t` the server moved from full agreement.
    pub fn adversary_turn(&mut self, t: usize, beta: &[f64]) -> Result<AdversaryTurn> {
        if t >= self.k {
            return Err(Error::Invalid(format!("server {t} out of range for k = {}", self.k)));
        }
        let turn = match (0..self.k).find(|&i| self.a[i] != self.s[i]) {
            Some(i) => AdversaryTurn { request: self.a[i], cost: 0.0, kind: AdversaryMove::Chase { server: i } },
            None => {
                let point = self.free_point()?;
                self.a[t] = point;
                AdversaryTurn { request: point, cost: beta[t], kind: AdversaryMove::TMove { server: t } }
            }
        };
        if self.s.contains(&turn.request) {
            return Err(Error::Internal(format!("request {} is already covered", turn.request)));
        }
        Ok(turn)
    }

    /// Moves algorithm server `j` onto `request`.
    pub fn move_algorithm(&mut self, j: usize, request: usize) -> Result<()> {
        if self.s.contains(&request) {
            return Err(Error::Precondition(format!("request {request} is already covered")));
        }
        self.s[j] = request;
        Ok(())
    }

    /// Samples the mover with probability proportional to `sampler`'s
    /// weights and moves it; returns the mover.
    pub fn algorithm_turn(&mut self, request: usize, sampler: &WeightedIndex<f64>, rng: &mut impl Rng) -> Result<usize> {
        if self.s.contains(&request) {
            return Err(Error::Precondition(format!("request {request} is already covered")));
        }
        let j = sampler.sample(rng);
        self.s[j] = request;
        Ok(j)
    }

    /// Moves every adversary server `i` that now shares a point with some
    /// algorithm server `j > i` to a free point, smallest `i` first.
    /// Returns the servers moved.
    pub fn eviction_fixup(&mut self) -> Result<Vec<usize>> {
        let mut moved = Vec::new();
        for i in 0..self.k {
            if self.s[i + 1..].contains(&self.a[i]) {
                self.a[i] = self.free_point()?;
                moved.push(i);
            }
        }
        Ok(moved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_in_full_agreement() {
        let g = init_game(2).unwrap();
        assert_eq!(g.adversary(), &[0, 1]);
        assert_eq!(g.algorithm(), &[0, 1]);
        assert_eq!(g.agreement().bits(), 0b11);
        assert_eq!(init_game(1).unwrap().agreement().bits(), 1);
        assert!(init_game(0).is_err());
    }

    /// From full agreement with t the second server: request point 2,
    /// pay beta_2, leaving agreement {first server}. The next turn chases
    /// a_2 = 2 at no cost.
    #[test]
    fn hand_trace_k2() {
        let beta = [1.0, 1000.0];
        let mut g = init_game(2).unwrap();
        let turn = g.adversary_turn(1, &beta).unwrap();
        assert_eq!(turn, AdversaryTurn { request: 2, cost: 1000.0, kind: AdversaryMove::TMove { server: 1 } });
        assert_eq!(g.adversary(), &[0, 2]);
        assert_eq!(g.agreement().bits(), 0b01);

        let again = g.adversary_turn(1, &beta).unwrap();
        assert_eq!(again, AdversaryTurn { request: 2, cost: 0.0, kind: AdversaryMove::Chase { server: 1 } });
        assert_eq!(g.adversary(), &[0, 2]);
    }

    #[test]
    fn eviction_after_collision() {
        let beta = [1.0, 1000.0];
        let mut g = init_game(2).unwrap();
        // Adversary moves its first server; the algorithm answers with its
        // second server, which lands on a_1.
        let turn = g.adversary_turn(0, &beta).unwrap();
        assert_eq!(turn.request, 2);
        g.move_algorithm(1, turn.request).unwrap();
        assert!(g.check_invariant().is_err());
        assert_eq!(g.eviction_fixup().unwrap(), vec![0]);
        g.check_invariant().unwrap();
        // Points 0, 1 and 2 are taken; the evicted server goes to 3.
        assert_eq!(g.adversary(), &[3, 1]);
        assert_eq!(g.algorithm(), &[0, 2]);
        assert_eq!(g.agreement().bits(), 0);
    }

    #[test]
    fn no_collision_no_eviction() {
        let mut g = init_game(3).unwrap();
        let turn = g.adversary_turn(2, &[1.0, 2.0, 3.0]).unwrap();
        g.move_algorithm(2, turn.request).unwrap();
        assert!(g.eviction_fixup().unwrap().is_empty());
        assert_eq!(g.agreement().bits(), 0b111);
    }

    #[test]
    fn covered_request_is_rejected() {
        let mut g = init_game(2).unwrap();
        assert!(g.move_algorithm(0, 1).is_err());
    }
}
