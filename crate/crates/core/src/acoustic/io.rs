//! Versioned plain-text model files.
//!
//! ```text
//! version=1
//! n_units=2
//! dim=3
//! floor 0.001 0.001 0.001
//! unit 0
//! stay -0.6931471805599453
//! exit -0.6931471805599453
//! n_comp 1
//! w 1
//! mean 0 0 0
//! var 1 1 1
//! ...
//! ```
//! `stay` and `exit` are natural-log probabilities. Values are written in
//! shortest round-trip form, so parsing restores them exactly.

use std::fmt::Write as _;

use super::{AcousticModelSet, DiagGaussian, GmmEmission};
use crate::error::{Error, Result};
use crate::scalar::{parse_real, Real};

fn join<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn format_models<T: Real>(models: &AcousticModelSet<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version=1");
    let _ = writeln!(out, "n_units={}", models.n_units());
    let _ = writeln!(out, "dim={}", models.dim());
    let _ = writeln!(out, "floor {}", join(models.var_floor()));
    for (u, gmm) in models.units().iter().enumerate() {
        let _ = writeln!(out, "unit {u}");
        let _ = writeln!(out, "stay {}", models.stay_logprobs()[u]);
        let _ = writeln!(out, "exit {}", models.exit_logprobs()[u]);
        let _ = writeln!(out, "n_comp {}", gmm.n_components());
        for (w, c) in gmm.weights().iter().zip(gmm.components()) {
            let _ = writeln!(out, "w {w}");
            let _ = writeln!(out, "mean {}", join(c.mean()));
            let _ = writeln!(out, "var {}", join(c.variance()));
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    origin: &'a str,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l);
            }
        }
        Err(Error::parse(self.origin, self.line, "unexpected end of model file"))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.line, msg)
    }

    fn key_value(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_content()?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected `{key}=`"))),
        }
    }

    fn tagged(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let l = self.next_content()?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(tag) {
            return Err(self.err(format!("expected `{tag}`")));
        }
        Ok(toks.collect())
    }

    fn reals<T: Real>(&mut self, tag: &str, n: usize) -> Result<Vec<T>> {
        let toks = self.tagged(tag)?;
        if toks.len() != n {
            return Err(self.err(format!("`{tag}` needs {n} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| parse_real(t).map_err(|m| self.err(m)))
            .collect()
    }

    fn count(&mut self, tag: &str) -> Result<usize> {
        let toks = self.tagged(tag)?;
        match toks.as_slice() {
            [v] => v.parse().map_err(|_| self.err(format!("bad `{tag}` value `{v}`"))),
            _ => Err(self.err(format!("`{tag}` takes one value"))),
        }
    }
}

pub fn parse_models<T: Real>(text: &str, origin: &str) -> Result<AcousticModelSet<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        origin,
        line: 0,
    };
    if lines.key_value("version")? != "1" {
        return Err(lines.err("unsupported model version"));
    }
    let n_units: usize = lines
        .key_value("n_units")?
        .parse()
        .map_err(|_| lines.err("bad n_units"))?;
    let dim: usize = lines.key_value("dim")?.parse().map_err(|_| lines.err("bad dim"))?;
    let floor = lines.reals::<T>("floor", dim)?;
    let mut units = Vec::with_capacity(n_units);
    let mut stay = Vec::with_capacity(n_units);
    let mut exit = Vec::with_capacity(n_units);
    for u in 0..n_units {
        if lines.count("unit")? != u {
            return Err(lines.err(format!("expected unit {u}")));
        }
        stay.push(lines.reals::<T>("stay", 1)?[0]);
        exit.push(lines.reals::<T>("exit", 1)?[0]);
        let n_comp = lines.count("n_comp")?;
        let mut weights = Vec::with_capacity(n_comp);
        let mut comps = Vec::with_capacity(n_comp);
        for _ in 0..n_comp {
            weights.push(lines.reals::<T>("w", 1)?[0]);
            let mean = lines.reals("mean", dim)?;
            let var = lines.reals("var", dim)?;
            comps.push(DiagGaussian::new(mean, var).map_err(|e| lines.err(e.to_string()))?);
        }
        units.push(GmmEmission::new(weights, comps).map_err(|e| lines.err(e.to_string()))?);
    }
    AcousticModelSet::new(units, stay, exit, floor)
}

pub fn read_models<T: Real>(path: &std::path::Path) -> Result<AcousticModelSet<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_models(&text, &path.display().to_string())
}

pub fn write_models<T: Real>(path: &std::path::Path, models: &AcousticModelSet<T>) -> Result<()> {
    std::fs::write(path, format_models(models)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_value_count() {
        let text = "version=1\nn_units=1\ndim=2\nfloor 1 2 3\n";
        let err = parse_models::<f64>(text, "m.txt").unwrap_err();
        assert!(err.to_string().contains("m.txt:4"), "{err}");
    }

    #[test]
    fn rejects_unknown_version() {
        assert!(parse_models::<f64>("version=2\n", "m").is_err());
    }
}
