use super::super::hmm::collapse;
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{Emissions, Scorer};
use crate::scalar::Real;

/// One time step of a master utterance: the frames emitted together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    /// `(utterance slot, frame index)` of each grouped frame.
    pub members: Vec<(usize, usize)>,
    /// Unit assigned by the alignment that produced the column.
    pub unit: Option<usize>,
}

/// Sequence of frame groups built from one or more aligned utterances.
///
/// Every frame of every merged utterance sits in exactly one column, in
/// temporal order per utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterUtterance {
    columns: Vec<Column>,
    slots: Vec<usize>,
}

impl MasterUtterance {
    /// A raw utterance occupying `slot`, one frame per column.
    pub fn single(slot: usize, n_frames: usize) -> Self {
        Self {
            columns: (0..n_frames)
                .map(|t| Column {
                    members: vec![(slot, t)],
                    unit: None,
                })
                .collect(),
            slots: vec![slot],
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Slots of the merged utterances, sorted.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    /// Number of merged utterances.
    pub fn multiplicity(&self) -> usize {
        self.slots.len()
    }

    /// Column unit labels with repeats collapsed; empty if unlabeled.
    pub fn unit_sequence(&self) -> Vec<usize> {
        let labels: Vec<usize> = self.columns.iter().filter_map(|c| c.unit).collect();
        collapse(&labels)
    }

    /// Per-frame unit labels of the utterance in `slot`.
    pub fn segmentation(&self, slot: usize) -> Vec<usize> {
        let mut frames: Vec<(usize, usize)> = self
            .columns
            .iter()
            .flat_map(|c| {
                let unit = c.unit.unwrap_or(usize::MAX);
                c.members.iter().filter(move |m| m.0 == slot).map(move |m| (m.1, unit))
            })
            .collect();
        frames.sort_unstable();
        frames.into_iter().map(|(_, u)| u).collect()
    }

    /// Column-by-unit emission table: sum of the grouped frames' scores.
    fn column_scores<T: Real>(&self, tables: &[Emissions<T>], n_units: usize) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.columns.len() * n_units];
        for (c, col) in self.columns.iter().enumerate() {
            let row = &mut out[c * n_units..(c + 1) * n_units];
            for &(slot, t) in &col.members {
                let table = tables
                    .get(slot)
                    .ok_or_else(|| Error::InvalidArgument(format!("no emission table for slot {slot}")))?;
                if t >= table.n_frames() || table.n_units() != n_units {
                    return Err(Error::InvalidArgument(format!(
                        "emission table for slot {slot} does not cover frame {t}"
                    )));
                }
                for (r, &e) in row.iter_mut().zip(table.row(t)) {
                    *r = *r + e;
                }
            }
        }
        Ok(out)
    }
}

/// Result of a two-sided joint alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAlignment<T> {
    /// Shared unit sequence, no consecutive repeats.
    pub common_units: Vec<usize>,
    pub joint_loglik: T,
    /// The merged master utterance with unit-labeled columns.
    pub master: MasterUtterance,
}

impl<T: Real> JointAlignment<T> {
    /// Per-frame unit labels of every merged utterance, by slot.
    pub fn segmentations(&self) -> Vec<(usize, Vec<usize>)> {
        self.master
            .slots()
            .iter()
            .map(|&s| (s, self.master.segmentation(s)))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Move {
    Start,
    Left,
    Right,
    Both,
    Switch,
}

/// Exact joint Viterbi between two (master) utterances.
///
/// Cells are `(i, j, a)`: left column `i` and right column `j` are the latest
/// emitted and both sides currently sit in unit `a`. Within a unit either side
/// or both advance, paying the stay log-probability once per advancing
/// utterance. A switch to a different unit advances both sides at once and
/// pays the exit log-probability once per merged utterance, so every
/// utterance spends at least one frame in every unit of the shared sequence.
/// The final unit pays its exit as well. Ties prefer staying over switching,
/// then the lower unit id.
///
/// Time and memory are `O(C1·C2·N)`: the best switch source per cell comes
/// from the top two scores of the diagonal predecessor.
pub fn align_masters<T: Real>(
    left: &MasterUtterance,
    right: &MasterUtterance,
    tables: &[Emissions<T>],
    scorer: &impl Scorer<T>,
) -> Result<JointAlignment<T>> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidArgument("joint alignment needs nonempty inputs".into()));
    }
    if left.slots.iter().any(|s| right.slots.contains(s)) {
        return Err(Error::InvalidArgument("an utterance cannot be aligned with itself twice".into()));
    }
    let n = scorer.n_units();
    let ea = left.column_scores(tables, n)?;
    let eb = right.column_scores(tables, n)?;
    let (ca, cb) = (left.len(), right.len());
    let wa: Vec<T> = left.columns.iter().map(|c| T::lit(c.members.len() as f64)).collect();
    let wb: Vec<T> = right.columns.iter().map(|c| T::lit(c.members.len() as f64)).collect();
    let m_total = T::lit((left.multiplicity() + right.multiplicity()) as f64);
    let stay: Vec<T> = (0..n).map(|u| scorer.stay_logprob(u)).collect();
    let leave: Vec<T> = (0..n).map(|u| m_total * scorer.exit_logprob(u)).collect();

    let ninf = T::neg_infinity();
    let row_len = cb * n;
    let mut prev = vec![ninf; row_len];
    let mut cur = vec![ninf; row_len];
    let mut moves = vec![Move::Start; ca * row_len];
    let mut from = vec![0u32; ca * row_len];

    for i in 0..ca {
        for j in 0..cb {
            // top-two switch sources at the diagonal predecessor
            let mut best1 = (ninf, usize::MAX);
            let mut best2 = (ninf, usize::MAX);
            if i > 0 && j > 0 {
                for a in 0..n {
                    let v = prev[(j - 1) * n + a] + leave[a];
                    if v > best1.0 || best1.1 == usize::MAX {
                        best2 = best1;
                        best1 = (v, a);
                    } else if v > best2.0 || best2.1 == usize::MAX {
                        best2 = (v, a);
                    }
                }
            }
            for a in 0..n {
                let cell = i * row_len + j * n + a;
                let (score, mv, src) = if i == 0 && j == 0 {
                    (ea[a] + eb[a], Move::Start, a)
                } else {
                    let mut best = (ninf, Move::Start, a);
                    if i > 0 && j > 0 {
                        let v = prev[(j - 1) * n + a] + ea[i * n + a] + eb[j * n + a] + (wa[i] + wb[j]) * stay[a];
                        best = (v, Move::Both, a);
                    }
                    if i > 0 {
                        let v = prev[j * n + a] + ea[i * n + a] + wa[i] * stay[a];
                        if v > best.0 || best.1 == Move::Start {
                            best = (v, Move::Left, a);
                        }
                    }
                    if j > 0 {
                        let v = cur[(j - 1) * n + a] + eb[j * n + a] + wb[j] * stay[a];
                        if v > best.0 || best.1 == Move::Start {
                            best = (v, Move::Right, a);
                        }
                    }
                    if i > 0 && j > 0 {
                        let sw = if best1.1 != a { best1 } else { best2 };
                        if sw.1 != usize::MAX {
                            let v = sw.0 + ea[i * n + a] + eb[j * n + a];
                            if v > best.0 {
                                best = (v, Move::Switch, sw.1);
                            }
                        }
                    }
                    best
                };
                cur[j * n + a] = score;
                moves[cell] = mv;
                from[cell] = src as u32;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|v| *v = ninf);
    }

    // `prev` now holds the last left column
    let mut end = (ninf, usize::MAX);
    for a in 0..n {
        let v = prev[(cb - 1) * n + a] + leave[a];
        if v > end.0 || end.1 == usize::MAX {
            end = (v, a);
        }
    }
    if end.0.is_nan() {
        return Err(Error::Numeric("NaN in joint Viterbi scores".into()));
    }
    if end.0 == ninf {
        return Err(Error::Numeric("joint alignment has zero probability".into()));
    }

    let (mut i, mut j, mut a) = (ca - 1, cb - 1, end.1);
    let mut columns = Vec::with_capacity(ca + cb);
    loop {
        let cell = i * row_len + j * n + a;
        let mv = moves[cell];
        let mut members = Vec::new();
        if mv != Move::Right {
            members.extend_from_slice(&left.columns[i].members);
        }
        if mv != Move::Left {
            members.extend_from_slice(&right.columns[j].members);
        }
        columns.push(Column {
            members,
            unit: Some(a),
        });
        match mv {
            Move::Start => break,
            Move::Left => i -= 1,
            Move::Right => j -= 1,
            Move::Both => {
                i -= 1;
                j -= 1;
            }
            Move::Switch => {
                a = from[cell] as usize;
                i -= 1;
                j -= 1;
            }
        }
    }
    columns.reverse();
    let mut slots: Vec<usize> = left.slots.iter().chain(&right.slots).copied().collect();
    slots.sort_unstable();
    let master = MasterUtterance { columns, slots };
    Ok(JointAlignment {
        common_units: master.unit_sequence(),
        joint_loglik: end.0,
        master,
    })
}

/// Joint alignment of two raw utterances given their emission tables.
pub fn joint_viterbi2_emissions<T: Real>(
    e1: &Emissions<T>,
    e2: &Emissions<T>,
    scorer: &impl Scorer<T>,
) -> Result<JointAlignment<T>> {
    let tables = [e1.clone(), e2.clone()];
    align_masters(
        &MasterUtterance::single(0, e1.n_frames()),
        &MasterUtterance::single(1, e2.n_frames()),
        &tables,
        scorer,
    )
}

/// Joint alignment of two raw utterances.
pub fn joint_viterbi2<T: Real>(
    u1: &FeatureMatrix<T>,
    u2: &FeatureMatrix<T>,
    scorer: &impl Scorer<T>,
) -> Result<JointAlignment<T>> {
    if u1.dim() != u2.dim() {
        return Err(Error::DimensionMismatch {
            context: "joint alignment inputs".into(),
            expected: u1.dim(),
            found: u2.dim(),
        });
    }
    joint_viterbi2_emissions(&scorer.emissions(u1)?, &scorer.emissions(u2)?, scorer)
}
