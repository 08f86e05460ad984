use super::{DecodeGraph, Emissions, Scorer};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Best node sequence through a graph, one node per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath<T> {
    pub nodes: Vec<usize>,
    pub loglik: T,
}

const NONE: u32 = u32::MAX;

/// Exact Viterbi search. Ties prefer staying in the current node, then the
/// lower-numbered predecessor.
pub fn viterbi<T: Real>(graph: &DecodeGraph<T>, emissions: &Emissions<T>) -> Result<StatePath<T>> {
    let n = graph.len();
    let frames = emissions.n_frames();
    let mut preds: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for a in 0..n {
        for &(b, lp) in graph.successors(a) {
            preds[b].push((a, lp));
        }
    }
    let unit = |i: usize| graph.nodes()[i].unit;
    let ninf = T::neg_infinity();

    let mut score = vec![ninf; n];
    for &(s, lp) in graph.start() {
        score[s] = lp + emissions.get(0, unit(s));
    }
    let mut back = vec![NONE; n * frames];
    let mut next = vec![ninf; n];
    for t in 1..frames {
        let row = &mut back[t * n..(t + 1) * n];
        for b in 0..n {
            let mut best = score[b] + graph.stay(b);
            let mut arg = b as u32;
            for &(a, lp) in &preds[b] {
                let cand = score[a] + lp;
                if cand > best {
                    best = cand;
                    arg = a as u32;
                }
            }
            next[b] = best + emissions.get(t, unit(b));
            row[b] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut best = ninf;
    let mut arg = None;
    for &(e, lp) in graph.end() {
        let cand = score[e] + lp;
        if cand > best || (arg.is_none() && cand.is_nan()) {
            best = cand;
            arg = Some(e);
        }
    }
    if best.is_nan() {
        return Err(Error::Numeric("NaN in Viterbi scores".into()));
    }
    let Some(mut node) = arg.filter(|_| best > ninf) else {
        let required = graph.min_frames();
        return Err(if frames < required {
            Error::NoValidPath { frames, required }
        } else {
            Error::Numeric("every path has zero probability".into())
        });
    };
    let mut nodes = vec![0; frames];
    for t in (0..frames).rev() {
        nodes[t] = node;
        if t > 0 {
            node = back[t * n + node] as usize;
        }
    }
    Ok(StatePath { nodes, loglik: best })
}

/// Log-likelihood of an explicit node sequence, `None` if it is not a path.
pub fn path_loglik<T: Real>(graph: &DecodeGraph<T>, emissions: &Emissions<T>, nodes: &[usize]) -> Option<T> {
    if nodes.len() != emissions.n_frames() || nodes.is_empty() {
        return None;
    }
    let unit = |i: usize| graph.nodes()[i].unit;
    let start = graph.start().iter().find(|&&(s, _)| s == nodes[0])?.1;
    let mut total = start + emissions.get(0, unit(nodes[0]));
    for t in 1..nodes.len() {
        let (a, b) = (nodes[t - 1], nodes[t]);
        let lp = if a == b {
            graph.stay(a)
        } else {
            graph.successors(a).iter().find(|&&(m, _)| m == b)?.1
        };
        total = total + lp + emissions.get(t, unit(b));
    }
    let end = graph.end().iter().find(|&&(e, _)| e == nodes[nodes.len() - 1])?.1;
    Some(total + end)
}

/// Removes consecutive repeats.
pub fn collapse(units: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(units.len());
    for &u in units {
        if out.last() != Some(&u) {
            out.push(u);
        }
    }
    out
}

/// Viterbi over the unconstrained unit loop: any unit may follow any other
/// different unit, leaving a unit costs its exit log-probability, and the
/// last unit also pays its exit. Returns per-frame units and the score.
/// Ties prefer staying, then the lower unit id.
pub fn free_loop_viterbi<T: Real>(emissions: &Emissions<T>, scorer: &impl Scorer<T>) -> (Vec<usize>, T) {
    let n = emissions.n_units();
    let frames = emissions.n_frames();
    let stay: Vec<T> = (0..n).map(|u| scorer.stay_logprob(u)).collect();
    let exit: Vec<T> = (0..n).map(|u| scorer.exit_logprob(u)).collect();
    let mut score: Vec<T> = emissions.row(0).to_vec();
    let mut back = vec![0u32; n * frames];
    let mut next = vec![T::zero(); n];
    for t in 1..frames {
        // best and runner-up of score + exit, for "switch from some other unit"
        let (mut b1, mut b2) = ((T::neg_infinity(), usize::MAX), (T::neg_infinity(), usize::MAX));
        for a in 0..n {
            let v = score[a] + exit[a];
            if v > b1.0 || b1.1 == usize::MAX {
                b2 = b1;
                b1 = (v, a);
            } else if v > b2.0 || b2.1 == usize::MAX {
                b2 = (v, a);
            }
        }
        for b in 0..n {
            let mut best = score[b] + stay[b];
            let mut arg = b;
            let sw = if b1.1 != b { b1 } else { b2 };
            if sw.1 != usize::MAX && sw.0 > best {
                best = sw.0;
                arg = sw.1;
            }
            next[b] = best + emissions.get(t, b);
            back[t * n + b] = arg as u32;
        }
        std::mem::swap(&mut score, &mut next);
    }
    let mut best = (T::neg_infinity(), 0);
    for u in 0..n {
        let v = score[u] + exit[u];
        if v > best.0 {
            best = (v, u);
        }
    }
    let mut units = vec![0; frames];
    let mut u = best.1;
    for t in (0..frames).rev() {
        units[t] = u;
        if t > 0 {
            u = back[t * n + u] as usize;
        }
    }
    (units, best.0)
}

/// Best score of the emissions constrained to the left-to-right chain over
/// `units`; `-inf` when the chain needs more frames than are available.
pub fn constrained_score<T: Real>(emissions: &Emissions<T>, units: &[usize], scorer: &impl Scorer<T>) -> Result<T> {
    if units.len() > emissions.n_frames() {
        return Ok(T::neg_infinity());
    }
    let graph = DecodeGraph::chain(units, scorer, "")?;
    Ok(viterbi(&graph, emissions)?.loglik)
}
