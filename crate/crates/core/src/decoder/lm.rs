use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";

const LN_10: f64 = std::f64::consts::LN_10;

/// Returned when a query names a word outside the model's vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Oov(pub String);

impl fmt::Display for Oov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "word {:?} is not in the language model", self.0)
    }
}

/// Bigram model with unigram backoff. Probabilities are held as the
/// log10 values of the ARPA file; queries return natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramLm {
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    unigram: Vec<f64>,
    backoff: Vec<Option<f64>>,
    bigram: BTreeMap<(usize, usize), f64>,
}

impl BigramLm {
    /// Builds a model from log10 unigram entries `(word, prob, backoff)` and
    /// log10 bigram entries `(w1, w2, prob)`.
    pub fn from_log10(
        unigrams: Vec<(String, f64, Option<f64>)>,
        bigrams: Vec<(String, String, f64)>,
    ) -> Result<Self> {
        let mut lm = Self {
            vocab: Vec::new(),
            index: BTreeMap::new(),
            unigram: Vec::new(),
            backoff: Vec::new(),
            bigram: BTreeMap::new(),
        };
        for (w, p, b) in unigrams {
            if p > 0.0 || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("unigram {w:?} log-probability {p}")));
            }
            if lm.index.insert(w.clone(), lm.vocab.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate unigram {w:?}")));
            }
            lm.vocab.push(w);
            lm.unigram.push(p);
            lm.backoff.push(b);
        }
        for (a, b, p) in bigrams {
            let ia = lm.id(&a).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let ib = lm.id(&b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            if p > 0.0 || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("bigram {a} {b} log-probability {p}")));
            }
            if lm.bigram.insert((ia, ib), p).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate bigram {a} {b}")));
            }
        }
        Ok(lm)
    }

    /// Every word equally likely in every context.
    pub fn flat<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let p = -(words.len() as f64).log10();
        Self::from_log10(
            words.iter().map(|w| (w.as_ref().to_string(), p, None)).collect(),
            Vec::new(),
        )
    }

    /// Absolute-discounting bigram estimated from word sequences, with
    /// sentence boundary tokens. `discount` lies in (0, 1).
    pub fn from_counts<S: AsRef<str>>(sentences: &[Vec<S>], discount: f64) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidArgument("discount must lie in (0, 1)".into()));
        }
        let mut uni: BTreeMap<String, usize> = BTreeMap::new();
        let mut ctx: BTreeMap<String, usize> = BTreeMap::new();
        let mut bi: BTreeMap<(String, String), usize> = BTreeMap::new();
        for s in sentences {
            let mut prev = SENTENCE_START.to_string();
            for w in s.iter().map(|w| w.as_ref().to_string()).chain([SENTENCE_END.to_string()]) {
                *uni.entry(w.clone()).or_default() += 1;
                *ctx.entry(prev.clone()).or_default() += 1;
                *bi.entry((prev, w.clone())).or_default() += 1;
                prev = w;
            }
        }
        if uni.len() <= 1 {
            return Err(Error::InvalidArgument("no words to estimate a language model from".into()));
        }
        let total: usize = uni.values().sum();
        let p_uni = |w: &str| uni.get(w).map_or(0.0, |&c| c as f64 / total as f64);
        let mut unigrams = vec![(SENTENCE_START.to_string(), -99.0, Some(0.0))];
        unigrams.extend(uni.keys().map(|w| (w.clone(), p_uni(w).log10(), None)));
        let mut bigrams = Vec::new();
        let mut mass_seen: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
        for ((a, b), &c) in &bi {
            let n = ctx[a] as f64;
            let p = (c as f64 - discount) / n;
            bigrams.push((a.clone(), b.clone(), p.log10()));
            let e = mass_seen.entry(a.clone()).or_default();
            e.0 += p;
            e.1 += p_uni(b);
            e.2 += 1;
        }
        for u in unigrams.iter_mut() {
            if let Some(&(seen, seen_uni, _)) = mass_seen.get(&u.0) {
                let left = 1.0 - seen;
                let denom = 1.0 - seen_uni;
                u.2 = Some(if denom > 1e-12 && left > 0.0 { (left / denom).log10() } else { 0.0 });
            }
        }
        Self::from_log10(unigrams, bigrams)
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    fn id(&self, word: &str) -> std::result::Result<usize, Oov> {
        self.index.get(word).copied().ok_or_else(|| Oov(word.to_string()))
    }

    /// Natural-log unigram probability.
    pub fn unigram(&self, word: &str) -> std::result::Result<f64, Oov> {
        Ok(self.unigram[self.id(word)?] * LN_10)
    }

    /// Natural-log `P(word | prev)`: the bigram when listed, otherwise
    /// `backoff(prev) + unigram(word)`.
    pub fn query(&self, prev: &str, word: &str) -> std::result::Result<f64, Oov> {
        let (a, b) = (self.id(prev)?, self.id(word)?);
        let log10 = match self.bigram.get(&(a, b)) {
            Some(&p) => p,
            None => self.backoff[a].unwrap_or(0.0) + self.unigram[b],
        };
        Ok(log10 * LN_10)
    }

    /// ARPA text of the model.
    pub fn to_arpa(&self) -> String {
        let mut out = format!(
            "\\data\\\nngram 1={}\nngram 2={}\n\n\\1-grams:\n",
            self.vocab.len(),
            self.bigram.len()
        );
        for (i, w) in self.vocab.iter().enumerate() {
            match self.backoff[i] {
                Some(b) => out.push_str(&format!("{}\t{}\t{}\n", self.unigram[i], w, b)),
                None => out.push_str(&format!("{}\t{}\n", self.unigram[i], w)),
            }
        }
        out.push_str("\n\\2-grams:\n");
        for (&(a, b), p) in &self.bigram {
            out.push_str(&format!("{}\t{} {}\n", p, self.vocab[a], self.vocab[b]));
        }
        out.push_str("\n\\end\\\n");
        out
    }

    /// Parses ARPA text holding 1- and 2-gram sections.
    pub fn from_arpa(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::parse(origin, line, msg);
        #[derive(PartialEq)]
        enum Section {
            Preamble,
            Data,
            Grams(usize),
            End,
        }
        let mut section = Section::Preamble;
        let mut declared: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        let mut unigrams = Vec::new();
        let mut bigrams = Vec::new();
        let mut header_line = 0;
        let check_count = |order: usize, found: usize, line: usize, declared: &BTreeMap<usize, (usize, usize)>| {
            let (n, decl_line) = declared.get(&order).copied().unwrap_or((0, 0));
            if n != found {
                Err(perr(
                    line,
                    format!("{order}-gram section has {found} entries but line {decl_line} declares {n}"),
                ))
            } else {
                Ok(())
            }
        };
        let lines: Vec<&str> = text.lines().collect();
        for (i, raw) in lines.iter().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('\\') {
                if let Section::Grams(order) = section {
                    let found = if order == 1 { unigrams.len() } else { bigrams.len() };
                    check_count(order, found, header_line, &declared)?;
                }
                section = match line {
                    "\\data\\" if section == Section::Preamble => Section::Data,
                    "\\1-grams:" if section == Section::Data => Section::Grams(1),
                    "\\2-grams:" if section == Section::Grams(1) => Section::Grams(2),
                    "\\end\\" if matches!(section, Section::Grams(_)) => Section::End,
                    _ => return Err(perr(ln, format!("unexpected section header {line:?}"))),
                };
                header_line = ln;
                continue;
            }
            match section {
                Section::Preamble => {}
                Section::Data => {
                    let rest = line
                        .strip_prefix("ngram ")
                        .ok_or_else(|| perr(ln, format!("expected 'ngram N=count', got {line:?}")))?;
                    let (o, c) = rest
                        .split_once('=')
                        .ok_or_else(|| perr(ln, "expected 'ngram N=count'".into()))?;
                    let o: usize = o.trim().parse().map_err(|_| perr(ln, "bad n-gram order".into()))?;
                    let c: usize = c.trim().parse().map_err(|_| perr(ln, "bad n-gram count".into()))?;
                    if !(1..=2).contains(&o) {
                        return Err(perr(ln, format!("{o}-grams are not supported")));
                    }
                    declared.insert(o, (c, ln));
                }
                Section::Grams(order) => {
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    let p: f64 = toks[0]
                        .parse()
                        .map_err(|_| perr(ln, format!("bad log-probability {:?}", toks[0])))?;
                    let parse_backoff = |t: &str| t.parse::<f64>().map_err(|_| perr(ln, format!("bad backoff {t:?}")));
                    match (order, toks.len()) {
                        (1, 2) => unigrams.push((toks[1].to_string(), p, None)),
                        (1, 3) => unigrams.push((toks[1].to_string(), p, Some(parse_backoff(toks[2])?))),
                        (2, 3) => bigrams.push((toks[1].to_string(), toks[2].to_string(), p)),
                        _ => return Err(perr(ln, format!("malformed {order}-gram entry"))),
                    }
                }
                Section::End => return Err(perr(ln, "content after \\end\\".into())),
            }
        }
        if section != Section::End {
            return Err(perr(lines.len(), "missing \\end\\".into()));
        }
        if declared.contains_key(&2) && !declared.contains_key(&1) {
            return Err(perr(0, "missing unigram count".into()));
        }
        Self::from_log10(unigrams, bigrams).map_err(|e| perr(0, e.to_string()))
    }
}

pub fn load_arpa_bigram(path: &Path) -> Result<BigramLm> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BigramLm::from_arpa(&text, &path.display().to_string())
}

pub fn write_arpa_bigram(path: &Path, lm: &BigramLm) -> Result<()> {
    std::fs::write(path, lm.to_arpa()).map_err(|e| Error::io(path, e))
}
