use super::{build_graph, viterbi, Dictionary, Emissions, Scorer};
use crate::corpus::Utterance;
use crate::error::Result;
use crate::scalar::Real;

/// Transcript-constrained Viterbi alignment of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<T> {
    /// Unit id of every frame.
    pub labels: Vec<usize>,
    /// First and last frame (inclusive) of every transcript word.
    pub word_bounds: Vec<(usize, usize)>,
    pub loglik: T,
}

pub fn force_align<T: Real>(
    utterance: &Utterance<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<Alignment<T>> {
    let emissions = scorer.emissions(&utterance.features)?;
    force_align_emissions(&emissions, &utterance.transcript, dict, scorer)
}

/// [`force_align`] on a precomputed emission table.
pub fn force_align_emissions<T: Real>(
    emissions: &Emissions<T>,
    transcript: &[String],
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<Alignment<T>> {
    let graph = build_graph(transcript, dict, scorer)?;
    let path = viterbi(&graph, emissions)?;
    let nodes = graph.nodes();
    let labels = path.nodes.iter().map(|&n| nodes[n].unit).collect();
    let mut word_bounds = vec![(usize::MAX, 0); transcript.len()];
    for (t, &n) in path.nodes.iter().enumerate() {
        let b = &mut word_bounds[nodes[n].word];
        b.0 = b.0.min(t);
        b.1 = t;
    }
    Ok(Alignment {
        labels,
        word_bounds,
        loglik: path.loglik,
    })
}
