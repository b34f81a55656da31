//! Flat `key = value` text format for [`EncoderSpec`].
//!
//! `kind` selects the family and every field of that family must be given.
//! The only keys with defaults are `layer_norm` (off), `dropout` (0),
//! `clamp` (off), sinusoid `base` (10000), md-sine `base_x`/`base_y`
//! (10000/5000) and `scale` (1). Unknown or repeated keys are errors; `#`
//! starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::embed::EmbedConfig;
use super::fourier::{FourierPEConfig, WeightInit};
use super::sine::{MdSineConfig, SineConfig, DEFAULT_BASE, MD_SINE_BASES};
use super::spec::{EncoderSpec, MlpOnlyConfig, ZeroConfig};
use crate::error::{Error, Result};

struct Fields {
    map: BTreeMap<String, (usize, String)>,
    used: Vec<String>,
}

impl Fields {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
            }
            if map.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(Fields { map, used: Vec::new() })
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.push(key.to_string());
        }
        v
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        match self.raw(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{key}` from `{v}`"))),
            None => Err(Error::Config(format!("missing key `{key}`"))),
        }
    }

    fn get_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        if self.map.contains_key(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    fn flag_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, v)) if v == "on" || v == "true" => Ok(true),
            Some((_, v)) if v == "off" || v == "false" => Ok(false),
            Some((line, v)) => Err(Error::Config(format!(
                "line {line}: `{key}` must be on or off, got `{v}`"
            ))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<usize>> {
        let (line, v) = self
            .raw(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        v.split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::Config(format!(
                    "line {line}: `{key}` must be a comma-separated list of integers"
                ))
            })
    }

    fn finish(self) -> Result<()> {
        for (k, (line, _)) in &self.map {
            if !self.used.contains(k) {
                return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

pub fn parse_spec(text: &str) -> Result<EncoderSpec> {
    let mut f = Fields::parse(text)?;
    let kind: String = f.get("kind")?;
    let spec = match kind.as_str() {
        "learnable-fourier" | "fixed-fourier" => {
            let init = match f.get::<String>("init")?.as_str() {
                "normal" => WeightInit::Normal,
                "uniform" => WeightInit::Uniform {
                    lo: f.get("init_lo")?,
                    hi: f.get("init_hi")?,
                },
                other => return Err(Error::Config(format!("unknown init `{other}`"))),
            };
            EncoderSpec::Fourier(FourierPEConfig {
                fourier_dim: f.get("fourier_dim")?,
                hidden_dim: f.get("hidden_dim")?,
                encoding_dim: f.get("encoding_dim")?,
                groups: f.get("groups")?,
                coords_per_group: f.get("coords_per_group")?,
                gamma: f.get("gamma")?,
                init,
                use_layer_norm: f.flag_or("layer_norm", false)?,
                dropout: f.get_or("dropout", 0.0)?,
                trainable_fourier: kind == "learnable-fourier",
            })
        }
        "sine-1d" | "sine-concat" => {
            let c = SineConfig {
                encoding_dim: f.get("encoding_dim")?,
                coords: if kind == "sine-1d" { 1 } else { f.get("coords")? },
                base: f.get_or("base", DEFAULT_BASE)?,
                scale: f.get_or("scale", 1.0)?,
            };
            if kind == "sine-1d" {
                EncoderSpec::Sine1D(c)
            } else {
                EncoderSpec::SineConcat(c)
            }
        }
        "md-sine" => EncoderSpec::MdSine(MdSineConfig {
            encoding_dim: f.get("encoding_dim")?,
            bases: [
                f.get_or("base_x", MD_SINE_BASES[0])?,
                f.get_or("base_y", MD_SINE_BASES[1])?,
            ],
            scale: f.get_or("scale", 1.0)?,
        }),
        "embed" => EncoderSpec::Embed(EmbedConfig {
            vocab: f.list("vocab")?,
            widths: f.list("widths")?,
            init_std: f.get("init_std")?,
            clamp: f.flag_or("clamp", false)?,
        }),
        "mlp" => EncoderSpec::MlpOnly(MlpOnlyConfig {
            groups: f.get("groups")?,
            coords_per_group: f.get("coords_per_group")?,
            hidden_dim: f.get("hidden_dim")?,
            encoding_dim: f.get("encoding_dim")?,
            use_layer_norm: f.flag_or("layer_norm", false)?,
            dropout: f.get_or("dropout", 0.0)?,
        }),
        "zero" => EncoderSpec::Zero(ZeroConfig {
            input_width: f.get("input_width")?,
            encoding_dim: f.get("encoding_dim")?,
        }),
        other => return Err(Error::Config(format!("unknown encoder kind `{other}`"))),
    };
    f.finish()?;
    spec.validate()?;
    Ok(spec)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Writes every field explicitly. Floats use the shortest representation
/// that parses back to the same value.
pub fn serialize_spec(spec: &EncoderSpec) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("kind", spec.kind().to_string());
    match spec {
        EncoderSpec::Fourier(c) => {
            kv("groups", c.groups.to_string());
            kv("coords_per_group", c.coords_per_group.to_string());
            kv("fourier_dim", c.fourier_dim.to_string());
            kv("hidden_dim", c.hidden_dim.to_string());
            kv("encoding_dim", c.encoding_dim.to_string());
            kv("gamma", c.gamma.to_string());
            match c.init {
                WeightInit::Normal => kv("init", "normal".into()),
                WeightInit::Uniform { lo, hi } => {
                    kv("init", "uniform".into());
                    kv("init_lo", lo.to_string());
                    kv("init_hi", hi.to_string());
                }
            }
            kv("layer_norm", on_off(c.use_layer_norm).into());
            kv("dropout", c.dropout.to_string());
        }
        EncoderSpec::Sine1D(c) | EncoderSpec::SineConcat(c) => {
            kv("encoding_dim", c.encoding_dim.to_string());
            if matches!(spec, EncoderSpec::SineConcat(_)) {
                kv("coords", c.coords.to_string());
            }
            kv("base", c.base.to_string());
            kv("scale", c.scale.to_string());
        }
        EncoderSpec::MdSine(c) => {
            kv("encoding_dim", c.encoding_dim.to_string());
            kv("base_x", c.bases[0].to_string());
            kv("base_y", c.bases[1].to_string());
            kv("scale", c.scale.to_string());
        }
        EncoderSpec::Embed(c) => {
            kv("vocab", join(&c.vocab));
            kv("widths", join(&c.widths));
            kv("init_std", c.init_std.to_string());
            kv("clamp", on_off(c.clamp).into());
        }
        EncoderSpec::MlpOnly(c) => {
            kv("groups", c.groups.to_string());
            kv("coords_per_group", c.coords_per_group.to_string());
            kv("hidden_dim", c.hidden_dim.to_string());
            kv("encoding_dim", c.encoding_dim.to_string());
            kv("layer_norm", on_off(c.use_layer_norm).into());
            kv("dropout", c.dropout.to_string());
        }
        EncoderSpec::Zero(c) => {
            kv("input_width", c.input_width.to_string());
            kv("encoding_dim", c.encoding_dim.to_string());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_round_trip() {
        let spec = EncoderSpec::Fourier(
            FourierPEConfig::new(2, 2, 64, 64, 128, 100.0)
                .unwrap()
                .with_dropout(0.2)
                .unwrap()
                .with_init(WeightInit::Uniform { lo: -0.1, hi: 0.3 })
                .unwrap()
                .with_layer_norm(true),
        );
        let text = serialize_spec(&spec);
        assert_eq!(parse_spec(&text).unwrap(), spec);
    }

    #[test]
    fn documented_defaults_apply() {
        let text = "kind = fixed-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 8\n\
                    hidden_dim = 4\nencoding_dim = 8\ngamma = 1\ninit = normal # comment\n";
        match parse_spec(text).unwrap() {
            EncoderSpec::Fourier(c) => {
                assert!(!c.use_layer_norm && c.dropout == 0.0 && !c.trainable_fourier);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_unknown_and_duplicate_keys_fail() {
        assert!(parse_spec("kind = zero\nencoding_dim = 4\n").is_err());
        assert!(parse_spec("kind = zero\ninput_width = 2\nencoding_dim = 4\ncolour = red\n").is_err());
        assert!(parse_spec("kind = zero\ninput_width = 2\ninput_width = 2\nencoding_dim = 4\n").is_err());
        assert!(parse_spec("kind = warp\n").is_err());
        assert!(parse_spec("kind = zero\ninput_width\n").is_err());
    }

    #[test]
    fn baseline_round_trips() {
        let specs = [
            EncoderSpec::Sine1D(SineConfig::new(768, 1).unwrap()),
            EncoderSpec::SineConcat(SineConfig {
                scale: 0.125,
                ..SineConfig::new(128, 4).unwrap()
            }),
            EncoderSpec::MdSine(MdSineConfig::new(768).unwrap()),
            EncoderSpec::Embed(EmbedConfig {
                clamp: true,
                ..EmbedConfig::new(vec![64, 64], vec![384, 384], 0.02).unwrap()
            }),
            EncoderSpec::MlpOnly(MlpOnlyConfig::new(2, 2, 32, 64).unwrap()),
            EncoderSpec::Zero(ZeroConfig {
                input_width: 2,
                encoding_dim: 16,
            }),
        ];
        for spec in specs {
            assert_eq!(parse_spec(&serialize_spec(&spec)).unwrap(), spec);
        }
    }
}
