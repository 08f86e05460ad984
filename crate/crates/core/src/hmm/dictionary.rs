use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Word to unit-sequence mapping, one pronunciation per word.
///
/// Text form: `WORD<TAB>a17 a3 a3 a240`, one entry per line, `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Dictionary {
    entries: BTreeMap<String, Vec<usize>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, pron: Vec<usize>) -> Result<()> {
        let word = word.into();
        if pron.is_empty() {
            return Err(Error::InvalidArgument(format!("empty pronunciation for `{word}`")));
        }
        self.entries.insert(word, pron);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[usize]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Pronunciation of `word` or an out-of-dictionary error naming it.
    pub fn lookup(&self, word: &str) -> Result<&[usize]> {
        self.get(word).ok_or_else(|| Error::OutOfDictionary(word.to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in word order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.entries.iter().map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Checks every unit id is below `n_units`.
    pub fn validate(&self, n_units: usize) -> Result<()> {
        for (w, p) in &self.entries {
            if let Some(&u) = p.iter().find(|&&u| u >= n_units) {
                return Err(Error::InvalidArgument(format!(
                    "`{w}` uses unit a{u} but only {n_units} units exist"
                )));
            }
        }
        Ok(())
    }

    /// Number of words whose pronunciation differs from `other` (including
    /// words missing from either side).
    pub fn changes_from(&self, other: &Dictionary) -> usize {
        let mut n = self
            .entries
            .iter()
            .filter(|(w, p)| other.entries.get(*w) != Some(p))
            .count();
        n += other.entries.keys().filter(|w| !self.entries.contains_key(*w)).count();
        n
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, p) in &self.entries {
            let units: Vec<String> = p.iter().map(|u| format!("a{u}")).collect();
            let _ = writeln!(out, "{w}\t{}", units.join(" "));
        }
        out
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut dict = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let word = toks.next().expect("nonempty line");
            let pron = toks
                .map(|t| {
                    t.strip_prefix('a')
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| Error::parse(origin, i + 1, format!("bad unit `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if pron.is_empty() {
                return Err(Error::parse(origin, i + 1, format!("`{word}` has no units")));
            }
            if dict.contains(word) {
                return Err(Error::parse(origin, i + 1, format!("duplicate entry `{word}`")));
            }
            dict.insert(word, pron)?;
        }
        Ok(dict)
    }
}

impl FromIterator<(String, Vec<usize>)> for Dictionary {
    fn from_iter<I: IntoIterator<Item = (String, Vec<usize>)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
