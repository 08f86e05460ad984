use super::{Dictionary, Scorer};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphNode {
    pub unit: usize,
    /// Index into the graph's word list.
    pub word: usize,
    /// Position inside the word's pronunciation.
    pub position: usize,
}

/// HMM search space: nodes in topological order, each with a self-loop and
/// forward edges to later nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeGraph<T> {
    nodes: Vec<GraphNode>,
    stay: Vec<T>,
    successors: Vec<Vec<(usize, T)>>,
    start: Vec<(usize, T)>,
    end: Vec<(usize, T)>,
    words: Vec<String>,
}

impl<T: Real> DecodeGraph<T> {
    /// Left-to-right chain over `units`, treated as a single word `word`.
    pub fn chain(units: &[usize], scorer: &impl Scorer<T>, word: &str) -> Result<Self> {
        Self::concatenate(&[(word.to_string(), units)], scorer)
    }

    fn concatenate(words: &[(String, &[usize])], scorer: &impl Scorer<T>) -> Result<Self> {
        let mut g = Self {
            nodes: Vec::new(),
            stay: Vec::new(),
            successors: Vec::new(),
            start: Vec::new(),
            end: Vec::new(),
            words: Vec::new(),
        };
        for (wi, (word, pron)) in words.iter().enumerate() {
            if pron.is_empty() {
                return Err(Error::InvalidArgument(format!("empty pronunciation for `{word}`")));
            }
            g.words.push(word.clone());
            for (p, &unit) in pron.iter().enumerate() {
                if unit >= scorer.n_units() {
                    return Err(Error::InvalidArgument(format!(
                        "`{word}` uses unit a{unit} but only {} units exist",
                        scorer.n_units()
                    )));
                }
                let id = g.nodes.len();
                if let Some(prev) = id.checked_sub(1) {
                    let exit = scorer.exit_logprob(g.nodes[prev].unit);
                    g.successors[prev].push((id, exit));
                }
                g.nodes.push(GraphNode {
                    unit,
                    word: wi,
                    position: p,
                });
                g.stay.push(scorer.stay_logprob(unit));
                g.successors.push(Vec::new());
            }
        }
        let last = g.nodes.len() - 1;
        g.start.push((0, T::zero()));
        g.end.push((last, scorer.exit_logprob(g.nodes[last].unit)));
        Ok(g)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn stay(&self, node: usize) -> T {
        self.stay[node]
    }

    pub fn successors(&self, node: usize) -> &[(usize, T)] {
        &self.successors[node]
    }

    pub fn start(&self) -> &[(usize, T)] {
        &self.start
    }

    pub fn end(&self) -> &[(usize, T)] {
        &self.end
    }

    /// Fewest frames any start-to-end path needs.
    pub fn min_frames(&self) -> usize {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        for &(s, _) in &self.start {
            dist[s] = 1;
        }
        for n in 0..self.nodes.len() {
            if dist[n] == usize::MAX {
                continue;
            }
            for &(m, _) in &self.successors[n] {
                dist[m] = dist[m].min(dist[n] + 1);
            }
        }
        self.end.iter().map(|&(e, _)| dist[e]).min().unwrap_or(usize::MAX)
    }
}

/// Concatenates the pronunciation chains of `transcript`.
pub fn build_graph<T: Real>(
    transcript: &[String],
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<DecodeGraph<T>> {
    if transcript.is_empty() {
        return Err(Error::InvalidArgument("cannot build a graph for an empty transcript".into()));
    }
    let words = transcript
        .iter()
        .map(|w| Ok((w.clone(), dict.lookup(w)?)))
        .collect::<Result<Vec<_>>>()?;
    DecodeGraph::concatenate(&words, scorer)
}
