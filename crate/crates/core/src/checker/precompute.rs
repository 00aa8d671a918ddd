//! Graph-based detection of states with optimal reachability exactly 0 or 1.

use super::digitize::Mdp;
use super::query::Opt;

fn predecessors(mdp: &Mdp) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); mdp.len()];
    for (s, choices) in mdp.choices.iter().enumerate() {
        for c in choices {
            for &(t, _) in &c.successors {
                if pred[t].last() != Some(&s) {
                    pred[t].push(s);
                }
            }
        }
    }
    pred
}

/// States that reach `seed` through states satisfying `through`, seed included.
fn backward_reach(pred: &[Vec<usize>], seed: &[bool], through: &dyn Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = seed.to_vec();
    let mut stack: Vec<usize> = (0..seed.len()).filter(|&s| seed[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] && through(s) {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Largest set from which some scheduler keeps out of `target` forever.
fn prob0e(mdp: &Mdp, target: &[bool]) -> Vec<bool> {
    let mut keep: Vec<bool> = target.iter().map(|t| !t).collect();
    loop {
        let mut changed = false;
        for s in 0..mdp.len() {
            if !keep[s] || mdp.choices[s].is_empty() {
                continue;
            }
            let stays = mdp.choices[s].iter().any(|c| c.successors.iter().all(|&(t, _)| keep[t]));
            if !stays {
                keep[s] = false;
                changed = true;
            }
        }
        if !changed {
            return keep;
        }
    }
}

/// States from which some scheduler reaches `target` with probability 1.
fn prob1e(mdp: &Mdp, target: &[bool], pred: &[Vec<usize>]) -> Vec<bool> {
    let mut u = vec![true; mdp.len()];
    loop {
        let mut r = target.to_vec();
        let mut stack: Vec<usize> = (0..mdp.len()).filter(|&s| r[s]).collect();
        while let Some(t) = stack.pop() {
            for &s in &pred[t] {
                if r[s] || !u[s] {
                    continue;
                }
                let ok = mdp.choices[s].iter().any(|c| {
                    c.successors.iter().all(|&(x, _)| u[x]) && c.successors.iter().any(|&(x, _)| r[x])
                });
                if ok {
                    r[s] = true;
                    stack.push(s);
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Returns `(zero, one)`: states whose optimal probability of reaching
/// `target` is exactly 0, respectively exactly 1. The sets are disjoint and
/// `one` contains `target`.
pub fn qualitative_precompute(mdp: &Mdp, target: &[bool], opt: Opt) -> (Vec<bool>, Vec<bool>) {
    let pred = predecessors(mdp);
    match opt {
        Opt::Max => {
            let reach = backward_reach(&pred, target, &|_| true);
            let zero = reach.iter().map(|r| !r).collect();
            (zero, prob1e(mdp, target, &pred))
        }
        Opt::Min => {
            let zero = prob0e(mdp, target);
            let escape = backward_reach(&pred, &zero, &|s| !target[s]);
            let one = escape.iter().map(|e| !e).collect();
            (zero, one)
        }
    }
}
