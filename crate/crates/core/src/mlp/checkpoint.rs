use std::path::Path;

use super::{Layer, MlpModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "aaelex-mlp";

/// Serializes a network and its state priors: a text header terminated by
/// `end\n`, then little-endian f64 values (input mean, input scale, each
/// layer's weights then bias, priors).
pub fn encode_checkpoint<T: Real>(model: &MlpModel<T>, priors: &[T]) -> Vec<u8> {
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let header = format!(
        "{MAGIC} version=1\nframe_dim={}\ncontext={}\nlayers={}\npriors={}\nend\n",
        model.frame_dim(),
        model.context(),
        sizes.join(" "),
        priors.len()
    );
    let mut out = header.into_bytes();
    let values = model
        .input_mean()
        .iter()
        .chain(model.input_scale())
        .chain(model.layers().iter().flat_map(|l| l.weights.iter().chain(&l.bias)))
        .chain(priors);
    for v in values {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

/// Inverse of [`encode_checkpoint`].
pub fn decode_checkpoint<T: Real>(bytes: &[u8], origin: &str) -> Result<(MlpModel<T>, Vec<T>)> {
    let perr = |line: usize, msg: String| Error::parse(origin, line, msg);
    let mut pos = 0;
    let mut fields = Vec::new();
    loop {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| perr(fields.len() + 1, "unterminated header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| perr(fields.len() + 1, "header is not UTF-8".into()))?;
        pos += nl + 1;
        if line == "end" {
            break;
        }
        fields.push(line.to_string());
    }
    if fields.first().map(String::as_str) != Some(&format!("{MAGIC} version=1")) {
        return Err(perr(1, "not a version 1 network checkpoint".into()));
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        fields
            .iter()
            .enumerate()
            .find_map(|(i, f)| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')).map(|v| (i + 1, v)))
            .ok_or_else(|| perr(fields.len() + 1, format!("missing {key}")))
    };
    let num = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.trim().parse().map_err(|_| perr(line, format!("bad {key} value {v:?}")))
    };
    let frame_dim = num("frame_dim")?;
    let context = num("context")?;
    let n_priors = num("priors")?;
    let (line, sizes) = get("layers")?;
    let sizes: Vec<usize> = sizes
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| perr(line, format!("bad layer size {s:?}"))))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(perr(line, "need at least two layer sizes".into()));
    }

    let payload = &bytes[pos..];
    if payload.len() % 8 != 0 {
        return Err(perr(0, "payload length is not a multiple of 8".into()));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))));
    let expected = 2 * frame_dim + sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() + n_priors;
    if payload.len() / 8 != expected {
        return Err(perr(0, format!("expected {expected} values, found {}", payload.len() / 8)));
    }
    let mut take = |n: usize| -> Vec<T> { values.by_ref().take(n).collect() };
    let mean = take(frame_dim);
    let scale = take(frame_dim);
    let layers = sizes
        .windows(2)
        .map(|w| Layer {
            weights: take(w[0] * w[1]),
            bias: take(w[1]),
            n_in: w[0],
            n_out: w[1],
        })
        .collect();
    let priors = take(n_priors);
    let model = MlpModel::from_parts(layers, frame_dim, context, mean, scale)
        .map_err(|e| perr(0, e.to_string()))?;
    Ok((model, priors))
}

pub fn write_checkpoint<T: Real>(path: &Path, model: &MlpModel<T>, priors: &[T]) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, priors)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<(MlpModel<T>, Vec<T>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &path.display().to_string())
}
