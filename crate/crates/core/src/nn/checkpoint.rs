//! Plain-text weights format `tailminer-weights-v1`.
//!
//! ```text
//! tailminer-weights-v1
//! meta <key> <value>
//! layers <n>
//! layer <index> <in> <out> <relu|identity>
//! weights <out*in values, row-major>
//! biases <out values>
//! end
//! ```
//!
//! Values are written with 17 significant digits so save → load is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use super::layer::{Activation, DenseLayer};
use super::network::Network;
use super::tensor::Matrix;
use crate::error::{Error, Result};
use crate::fsutil::{fmt_f64, read_to_string, write_atomic};

pub const SCHEMA: &str = "tailminer-weights-v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub network: Network,
}

impl Checkpoint {
    pub fn new(network: Network) -> Self {
        Checkpoint {
            meta: BTreeMap::new(),
            network,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_usize(&self, key: &str) -> Result<usize> {
        self.meta
            .get(key)
            .ok_or_else(|| Error::invalid(format!("checkpoint is missing meta key `{key}`")))?
            .parse()
            .map_err(|_| Error::invalid(format!("checkpoint meta `{key}` is not an integer")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(SCHEMA);
        out.push('\n');
        for (k, v) in &self.meta {
            out.push_str(&format!("meta {k} {v}\n"));
        }
        out.push_str(&format!("layers {}\n", self.network.layers.len()));
        for (i, layer) in self.network.layers.iter().enumerate() {
            out.push_str(&format!(
                "layer {i} {} {} {}\n",
                layer.input_dim(),
                layer.output_dim(),
                layer.activation.tag()
            ));
            push_values(&mut out, "weights", layer.weights.as_slice());
            push_values(&mut out, "biases", &layer.biases);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))
        };

        let (ln, header) = next("schema header")?;
        if header.trim() != SCHEMA {
            return Err(err(
                ln,
                format!("expected schema `{SCHEMA}`, found `{header}`"),
            ));
        }
        let mut meta = BTreeMap::new();
        let count = loop {
            let (ln, line) = next("`layers` line")?;
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(ln, "meta line needs a key and a value".into()))?;
                meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("layers ") {
                break rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(ln, format!("bad layer count `{rest}`")))?;
            } else {
                return Err(err(ln, format!("unexpected line `{line}`")));
            }
        };

        let mut layers = Vec::with_capacity(count);
        for idx in 0..count {
            let (ln, line) = next("`layer` line")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 || parts[0] != "layer" || parts[1] != idx.to_string() {
                return Err(err(
                    ln,
                    format!("expected `layer {idx} <in> <out> <activation>`"),
                ));
            }
            let input: usize = parts[2]
                .parse()
                .map_err(|_| err(ln, "bad input dim".into()))?;
            let output: usize = parts[3]
                .parse()
                .map_err(|_| err(ln, "bad output dim".into()))?;
            let activation = Activation::from_tag(parts[4])
                .ok_or_else(|| err(ln, format!("unknown activation `{}`", parts[4])))?;

            let (ln, line) = next("`weights` line")?;
            let weights = parse_values(line, "weights", input * output).map_err(|m| err(ln, m))?;
            let (ln, line) = next("`biases` line")?;
            let biases = parse_values(line, "biases", output).map_err(|m| err(ln, m))?;
            let layer = DenseLayer::new(
                Matrix::from_vec(output, input, weights)?,
                biases,
                activation,
            )?;
            layers.push(layer);
        }
        let (ln, line) = next("`end`")?;
        if line.trim() != "end" {
            return Err(err(ln, format!("expected `end`, found `{line}`")));
        }
        Ok(Checkpoint {
            meta,
            network: Network::new(layers)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn push_values(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

fn parse_values(line: &str, tag: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(format!("expected `{tag}` line"));
    }
    let values = parts
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad number `{p}`"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!(
            "{tag}: expected {expected} values, found {}",
            values.len()
        ));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::build_mlp;
    use crate::rng::seeded;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = build_mlp(5, &[7, 3], 4, Activation::Identity, &mut seeded(9, 1));
        let ckpt = Checkpoint::new(net).with_meta("kind", "backbone");
        let back = Checkpoint::from_text(&ckpt.to_text(), "mem").unwrap();
        assert_eq!(back, ckpt);
        for (a, b) in back.network.layers.iter().zip(&ckpt.network.layers) {
            for (x, y) in a.weights.as_slice().iter().zip(b.weights.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rejects_wrong_schema_and_counts() {
        assert!(Checkpoint::from_text("other-v2\nlayers 0\nend\n", "mem").is_err());
        let text =
            "tailminer-weights-v1\nlayers 1\nlayer 0 2 1 relu\nweights 1 2 3\nbiases 0\nend\n";
        match Checkpoint::from_text(text, "mem").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
    }
}
