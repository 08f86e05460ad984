use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Corpus, FeatureMatrix, Utterance};
use crate::error::{Error, Result};
use crate::scalar::{parse_real, Real};

/// Parses the feature text format: one frame per line, space-separated
/// decimals, `#` comment lines and blank lines ignored.
pub fn parse_features<T: Real>(text: &str, origin: &str) -> Result<FeatureMatrix<T>> {
    let mut data = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_real(tok).map_err(|m| Error::parse(origin, lineno + 1, m))?);
        }
        let n = data.len() - before;
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::DimensionMismatch {
                    context: format!("{origin}:{}", lineno + 1),
                    expected: d,
                    found: n,
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(origin, 0, "no frames"))?;
    FeatureMatrix::from_flat(data, dim)
}

pub fn read_features<T: Real>(path: &Path) -> Result<FeatureMatrix<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, &path.display().to_string())
}

/// Renders frames in the text feature format; values round-trip exactly.
pub fn format_features<T: Real>(features: &FeatureMatrix<T>) -> String {
    let mut out = String::new();
    for frame in features.frames() {
        let mut first = true;
        for v in frame {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_features<T: Real>(path: &Path, features: &FeatureMatrix<T>) -> Result<()> {
    fs::write(path, format_features(features)).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_scp(text: &str, scp_path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let base = scp_path.parent().unwrap_or_else(|| Path::new("."));
    let origin = scp_path.display().to_string();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, char::is_whitespace);
        let id = parts.next().unwrap_or_default();
        let file = parts
            .next()
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .ok_or_else(|| Error::parse(&origin, lineno + 1, format!("`{id}` has no feature path")))?;
        let file = Path::new(file);
        let resolved = if file.is_absolute() {
            file.to_path_buf()
        } else {
            base.join(file)
        };
        entries.push((id.to_string(), resolved));
    }
    Ok(entries)
}

fn parse_transcripts(text: &str) -> HashMap<String, Vec<String>> {
    let mut map = HashMap::new();
    for line in text.lines() {
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (id, words) = match trimmed.split_once('\t') {
            Some((id, words)) => (id.trim(), words),
            None => trimmed
                .trim()
                .split_once(char::is_whitespace)
                .unwrap_or((trimmed.trim(), "")),
        };
        let words = words.split_whitespace().map(str::to_string).collect();
        map.insert(id.to_string(), words);
    }
    map
}

/// Loads a corpus from an `.scp` list (`id path`) and a `.trn` transcript
/// file (`id<TAB>word word ...`). Relative feature paths resolve against the
/// directory of the `.scp` file.
pub fn load_corpus<T: Real>(scp_path: &Path, transcript_path: &Path) -> Result<Corpus<T>> {
    let entries = parse_scp(&read_text(scp_path)?, scp_path)?;
    let mut transcripts = parse_transcripts(&read_text(transcript_path)?);
    let mut utterances = Vec::with_capacity(entries.len());
    let mut dim = None;
    for (id, path) in entries {
        let transcript = transcripts
            .remove(&id)
            .ok_or_else(|| Error::MissingTranscript(id.clone()))?;
        if transcript.is_empty() {
            return Err(Error::EmptyTranscript(id));
        }
        let features = read_features::<T>(&path).map_err(|e| Error::InUtterance {
            id: id.clone(),
            source: Box::new(e),
        })?;
        match dim {
            None => dim = Some(features.dim()),
            Some(d) if d != features.dim() => {
                return Err(Error::DimensionMismatch {
                    context: format!("utterance `{id}`"),
                    expected: d,
                    found: features.dim(),
                })
            }
            _ => {}
        }
        utterances.push(Utterance {
            id,
            features,
            transcript,
        });
    }
    Corpus::new(utterances)
}

/// Reads every feature file listed in an `.scp` file, in list order.
pub fn load_feature_list<T: Real>(scp_path: &Path) -> Result<Vec<(String, FeatureMatrix<T>)>> {
    parse_scp(&read_text(scp_path)?, scp_path)?
        .into_iter()
        .map(|(id, path)| {
            let f = read_features(&path).map_err(|e| Error::InUtterance {
                id: id.clone(),
                source: Box::new(e),
            })?;
            Ok((id, f))
        })
        .collect()
}

/// Writes `id path` lines.
pub fn write_scp<'a>(path: &Path, entries: impl IntoIterator<Item = (&'a str, &'a Path)>) -> Result<()> {
    let mut out = String::new();
    for (id, file) in entries {
        let _ = writeln!(out, "{id} {}", file.display());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `id<TAB>word word ...` lines for every utterance.
pub fn write_transcripts<T: Real>(path: &Path, corpus: &Corpus<T>) -> Result<()> {
    let mut out = String::new();
    for u in corpus.utterances() {
        let _ = writeln!(out, "{}\t{}", u.id, u.transcript.join(" "));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let m: FeatureMatrix<f64> = parse_features("# header\n1 2.5\n\n-3e-2 4\n", "x").unwrap();
        assert_eq!(m.n_frames(), 2);
        assert_eq!(m.frame(1), &[-0.03, 4.0]);
    }

    #[test]
    fn reports_line_of_bad_token() {
        let err = parse_features::<f64>("1 2\n3 abc\n", "feat.txt").unwrap_err();
        assert!(err.to_string().contains("feat.txt:2"), "{err}");
    }

    #[test]
    fn format_round_trips() {
        let m = FeatureMatrix::from_rows(&[[0.1f64, 1.0 / 3.0], [1e-300, -2.5e10]]).unwrap();
        let back: FeatureMatrix<f64> = parse_features(&format_features(&m), "x").unwrap();
        assert_eq!(m, back);
        let m32 = FeatureMatrix::from_rows(&[[0.1f32, 1.0 / 3.0]]).unwrap();
        assert_eq!(m32, parse_features(&format_features(&m32), "x").unwrap());
    }
}
