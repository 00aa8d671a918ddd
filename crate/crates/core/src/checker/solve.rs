//! Optimal reachability probabilities on a digitized MDP.

use super::digitize::Mdp;
use super::precompute::qualitative_precompute;
use super::query::Opt;
use super::{CheckError, CheckOptions, Method};
use crate::ratio;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    /// Exact values, present when the topological pass applied.
    pub exact: Option<Vec<BigRational>>,
    pub iterations: u64,
    pub method: Method,
}

fn big(p: &ratio::Prob) -> BigRational {
    BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
}

/// Maybe-states in reverse topological order (successors first), or `None`
/// when the maybe-subgraph has a cycle.
fn reverse_topological(mdp: &Mdp, maybe: &[bool]) -> Option<Vec<usize>> {
    let n = mdp.len();
    let mut outdeg = vec![0usize; n];
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| maybe[s]) {
        let mut succ: Vec<usize> = mdp.choices[s]
            .iter()
            .flat_map(|c| c.successors.iter().map(|&(t, _)| t))
            .filter(|&t| maybe[t])
            .collect();
        succ.sort_unstable();
        succ.dedup();
        outdeg[s] = succ.len();
        for t in succ {
            pred[t].push(s);
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&s| maybe[s] && outdeg[s] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let t = order[head];
        head += 1;
        for &s in &pred[t] {
            outdeg[s] -= 1;
            if outdeg[s] == 0 {
                order.push(s);
            }
        }
    }
    (order.len() == maybe.iter().filter(|m| **m).count()).then_some(order)
}

fn better(opt: Opt, a: f64, b: f64) -> bool {
    match opt {
        Opt::Max => a > b,
        Opt::Min => a < b,
    }
}

/// Computes the optimal probability of eventually reaching `target` from
/// every state.
pub fn optimal_reachability(
    mdp: &Mdp,
    target: &[bool],
    opt: Opt,
    opts: &CheckOptions,
) -> Result<Solution, CheckError> {
    let (zero, one) = qualitative_precompute(mdp, target, opt);
    let maybe: Vec<bool> = (0..mdp.len()).map(|s| !zero[s] && !one[s]).collect();
    let fixed = |s: usize| if one[s] { 1.0 } else { 0.0 };

    if !opts.force_value_iteration {
        if let Some(order) = reverse_topological(mdp, &maybe) {
            let mut exact: Vec<BigRational> =
                (0..mdp.len()).map(|s| if one[s] { BigRational::one() } else { BigRational::zero() }).collect();
            for &s in &order {
                let mut best: Option<BigRational> = None;
                for c in &mdp.choices[s] {
                    let v = c
                        .successors
                        .iter()
                        .fold(BigRational::zero(), |acc, (t, p)| acc + big(p) * &exact[*t]);
                    best = Some(match (best, opt) {
                        (None, _) => v,
                        (Some(b), Opt::Max) => b.max(v),
                        (Some(b), Opt::Min) => b.min(v),
                    });
                }
                exact[s] = best.unwrap_or_else(BigRational::zero);
            }
            let values = exact.iter().map(ratio::big_to_f64).collect();
            return Ok(Solution { values, exact: Some(exact), iterations: 1, method: Method::TopologicalExact });
        }
    }

    let probs: Vec<Vec<Vec<(usize, f64)>>> = mdp
        .choices
        .iter()
        .map(|cs| {
            cs.iter()
                .map(|c| c.successors.iter().map(|(t, p)| (*t, ratio::to_f64(p))).collect())
                .collect()
        })
        .collect();
    let mut cur: Vec<f64> = (0..mdp.len()).map(fixed).collect();
    let mut next = cur.clone();
    let active: Vec<usize> = (0..mdp.len()).filter(|&s| maybe[s]).collect();
    let mut iterations = 0u64;
    loop {
        if iterations >= opts.max_iterations {
            return Err(CheckError::Diverged { iterations });
        }
        iterations += 1;
        let mut delta = 0.0f64;
        for &s in &active {
            let mut best: Option<f64> = None;
            for c in &probs[s] {
                let v: f64 = c.iter().map(|(t, p)| p * cur[*t]).sum();
                if best.is_none_or(|b| better(opt, v, b)) {
                    best = Some(v);
                }
            }
            let v = best.unwrap_or(0.0);
            delta = delta.max((v - cur[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut cur, &mut next);
        if delta < opts.epsilon {
            break;
        }
    }
    Ok(Solution { values: cur, exact: None, iterations, method: Method::ValueIteration })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::precompute::tests::mdp_from;
    use crate::ratio::Prob;

    fn solve(m: &Mdp, opt: Opt, force_vi: bool) -> Solution {
        let opts = CheckOptions { force_value_iteration: force_vi, ..CheckOptions::default() };
        optimal_reachability(m, &m.target, opt, &opts).unwrap()
    }

    #[test]
    fn single_target_state() {
        let m = mdp_from(vec![vec![]], vec![true]);
        assert_eq!(solve(&m, Opt::Max, false).values, vec![1.0]);
    }

    #[test]
    fn coin_or_sure_thing() {
        let half = Prob::new(1, 2);
        let m = mdp_from(
            vec![vec![vec![(1, half), (2, half)], vec![(1, Prob::from_integer(1))]], vec![], vec![]],
            vec![false, true, false],
        );
        for vi in [false, true] {
            assert_eq!(solve(&m, Opt::Max, vi).values[0], 1.0);
            assert_eq!(solve(&m, Opt::Min, vi).values[0], 0.5);
        }
        let s = solve(&m, Opt::Min, false);
        assert_eq!(s.method, Method::TopologicalExact);
        assert_eq!(s.exact.unwrap()[0], BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn cyclic_maybe_states_use_value_iteration() {
        // 0 -> 1/2 back to 0, 1/4 target, 1/4 sink; value 1/2.
        let q = Prob::new(1, 4);
        let m = mdp_from(
            vec![vec![vec![(0, Prob::new(1, 2)), (1, q), (2, q)]], vec![], vec![]],
            vec![false, true, false],
        );
        let s = solve(&m, Opt::Max, false);
        assert_eq!(s.method, Method::ValueIteration);
        assert!((s.values[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn iteration_limit_reports_divergence() {
        let q = Prob::new(1, 4);
        let m = mdp_from(
            vec![vec![vec![(0, Prob::new(1, 2)), (1, q), (2, q)]], vec![], vec![]],
            vec![false, true, false],
        );
        let opts = CheckOptions { max_iterations: 3, ..CheckOptions::default() };
        let e = optimal_reachability(&m, &m.target, Opt::Max, &opts).unwrap_err();
        assert!(matches!(e, CheckError::Diverged { iterations: 3 }));
    }
}
