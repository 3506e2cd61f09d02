//! Declarative layer graphs and the static parameter/MAC analyzer.
//!
//! A graph is a chain of layer specs, one per config line:
//!
//! ```text
//! # kind kernel stride in_channels out_channels
//! conv 3 1 3 64
//! pool 2 2 64 64
//! interp_down 2 1 64 64
//! ```
//!
//! Convolutions use same-padding (`out = ceil(in / stride)`); parameters
//! count `k*k*Cin*Cout + Cout` (bias included) and MACs count
//! `k*k*Cin*Cout*Wout*Hout`. Pooling, upsampling, concat, and split carry
//! no parameters. `concat`/`split` are channel bookkeeping for chains that
//! model side branches.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Pool,
    Upsample,
    Concat,
    Split,
    InterpDown,
    InterpUp,
}

impl LayerKind {
    fn parse(token: &str) -> Result<Self> {
        Ok(match token {
            "conv" => Self::Conv,
            "pool" => Self::Pool,
            "upsample" => Self::Upsample,
            "concat" => Self::Concat,
            "split" => Self::Split,
            "interp_down" => Self::InterpDown,
            "interp_up" => Self::InterpUp,
            other => return Err(Error::Parse(format!("unknown layer kind `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Conv => "conv",
            Self::Pool => "pool",
            Self::Upsample => "upsample",
            Self::Concat => "concat",
            Self::Split => "split",
            Self::InterpDown => "interp_down",
            Self::InterpUp => "interp_up",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            kernel,
            stride,
            in_channels,
            out_channels,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::GraphShape {
                index,
                kind: self.kind.name().into(),
                reason: "kernel, stride, and channel counts must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Parses one layer per non-comment line: `kind kernel stride cin cout`.
pub fn parse_graph(text: &str) -> Result<Vec<LayerSpec>> {
    let mut layers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected `kind kernel stride in out`, got `{line}`",
                lineno + 1
            )));
        }
        let parse_num = |t: &str, what: &str| -> Result<usize> {
            t.parse()
                .map_err(|e| Error::Parse(format!("line {}: bad {what}: {e}", lineno + 1)))
        };
        layers.push(LayerSpec {
            kind: LayerKind::parse(tok[0])?,
            kernel: parse_num(tok[1], "kernel")?,
            stride: parse_num(tok[2], "stride")?,
            in_channels: parse_num(tok[3], "in_channels")?,
            out_channels: parse_num(tok[4], "out_channels")?,
        });
    }
    Ok(layers)
}

/// Per-layer analysis row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerReport {
    pub index: usize,
    pub kind: LayerKind,
    pub out_shape: (usize, usize, usize),
    pub params: u64,
    pub macs: u64,
}

/// Walks the chain from `(channels, width, height)` and reports per-layer
/// parameter and MAC counts. Shape inconsistencies name the offending
/// layer.
pub fn layer_table(
    graph: &[LayerSpec],
    input: (usize, usize, usize),
) -> Result<Vec<LayerReport>> {
    let (mut c, mut w, mut h) = input;
    if c == 0 || w == 0 || h == 0 {
        return Err(Error::InvalidParameter(
            "input dimensions must be positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(graph.len());
    for (index, layer) in graph.iter().enumerate() {
        layer.validate(index)?;
        let shape_err = |reason: String| Error::GraphShape {
            index,
            kind: layer.kind.name().into(),
            reason,
        };
        let (params, macs) = match layer.kind {
            LayerKind::Conv => {
                if layer.in_channels != c {
                    return Err(shape_err(format!(
                        "expects {} input channels, chain carries {c}",
                        layer.in_channels
                    )));
                }
                w = w.div_ceil(layer.stride);
                h = h.div_ceil(layer.stride);
                c = layer.out_channels;
                let k2 = (layer.kernel * layer.kernel) as u64;
                let params = k2 * layer.in_channels as u64 * layer.out_channels as u64
                    + layer.out_channels as u64;
                let macs = k2
                    * layer.in_channels as u64
                    * layer.out_channels as u64
                    * (w as u64)
                    * (h as u64);
                (params, macs)
            }
            LayerKind::Pool => {
                if layer.in_channels != c {
                    return Err(shape_err(format!(
                        "expects {} input channels, chain carries {c}",
                        layer.in_channels
                    )));
                }
                w /= layer.stride;
                h /= layer.stride;
                if w == 0 || h == 0 {
                    return Err(shape_err("pooled dimensions collapsed to zero".into()));
                }
                (0, 0)
            }
            LayerKind::Upsample => {
                if layer.in_channels != c {
                    return Err(shape_err(format!(
                        "expects {} input channels, chain carries {c}",
                        layer.in_channels
                    )));
                }
                w *= layer.stride;
                h *= layer.stride;
                (0, 0)
            }
            LayerKind::Concat => {
                if layer.out_channels < c {
                    return Err(shape_err(format!(
                        "concat cannot shrink channels: {c} -> {}",
                        layer.out_channels
                    )));
                }
                c = layer.out_channels;
                (0, 0)
            }
            LayerKind::Split => {
                if layer.out_channels > c {
                    return Err(shape_err(format!(
                        "split cannot grow channels: {c} -> {}",
                        layer.out_channels
                    )));
                }
                c = layer.out_channels;
                (0, 0)
            }
            LayerKind::InterpDown => {
                if layer.in_channels != c {
                    return Err(shape_err(format!(
                        "expects {} input channels, chain carries {c}",
                        layer.in_channels
                    )));
                }
                if w % 4 != 0 || h % 4 != 0 {
                    return Err(shape_err(format!(
                        "interp_down needs dims divisible by 4, got {w}x{h}"
                    )));
                }
                w = w / 4 * 3;
                h = h / 4 * 3;
                // depthwise 2x2 conv with bias
                let params = 4 * c as u64 + c as u64;
                let macs = 4 * c as u64 * w as u64 * h as u64;
                (params, macs)
            }
            LayerKind::InterpUp => {
                if layer.in_channels != c {
                    return Err(shape_err(format!(
                        "expects {} input channels, chain carries {c}",
                        layer.in_channels
                    )));
                }
                if w % 2 != 0 || h % 2 != 0 {
                    return Err(shape_err(format!(
                        "interp_up needs dims divisible by 2, got {w}x{h}"
                    )));
                }
                w = w / 2 * 3;
                h = h / 2 * 3;
                let params = 4 * c as u64 + c as u64;
                let macs = 4 * c as u64 * w as u64 * h as u64;
                (params, macs)
            }
        };
        rows.push(LayerReport {
            index,
            kind: layer.kind,
            out_shape: (c, w, h),
            params,
            macs,
        });
    }
    Ok(rows)
}

/// Total `(params, macs)` over the chain.
pub fn count_params_macs(
    graph: &[LayerSpec],
    input: (usize, usize, usize),
) -> Result<(u64, u64)> {
    let rows = layer_table(graph, input)?;
    Ok(rows.iter().fold((0, 0), |(p, m), r| {
        (p + r.params, m + r.macs)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg_first_conv_counts() {
        let graph = [LayerSpec::conv(3, 1, 3, 64)];
        let (params, macs) = count_params_macs(&graph, (3, 224, 224)).unwrap();
        assert_eq!(params, 1792);
        assert_eq!(macs, 86_704_128);
    }

    #[test]
    fn empty_graph_is_free() {
        assert_eq!(count_params_macs(&[], (3, 224, 224)).unwrap(), (0, 0));
    }

    #[test]
    fn pointwise_conv_params() {
        let graph = [LayerSpec::conv(1, 1, 192, 128)];
        let (params, _) = count_params_macs(&graph, (192, 14, 14)).unwrap();
        assert_eq!(params, 24_704);
    }

    #[test]
    fn shape_error_names_layer() {
        let graph = [LayerSpec::conv(3, 1, 3, 64), LayerSpec::conv(3, 1, 3, 64)];
        let err = count_params_macs(&graph, (3, 32, 32)).unwrap_err();
        match err {
            Error::GraphShape { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_round_trips_kinds_and_skips_comments() {
        let text = "# backbone\nconv 3 1 3 64\npool 2 2 64 64  # halve\ninterp_down 2 1 64 64\n";
        let graph = parse_graph(text).unwrap();
        assert_eq!(graph.len(), 3);
        assert_eq!(graph[0].kind, LayerKind::Conv);
        assert_eq!(graph[1].kind, LayerKind::Pool);
        assert_eq!(graph[2].kind, LayerKind::InterpDown);
        assert!(parse_graph("warp 1 1 1 1").is_err());
        assert!(parse_graph("conv 3 1 3").is_err());
    }

    #[test]
    fn interp_layers_track_dims() {
        let graph = parse_graph("pool 2 2 8 8\ninterp_down 2 1 8 8\n").unwrap();
        let rows = layer_table(&graph, (8, 32, 32)).unwrap();
        assert_eq!(rows[0].out_shape, (8, 16, 16));
        assert_eq!(rows[1].out_shape, (8, 12, 12));
        assert_eq!(rows[1].params, 4 * 8 + 8);
    }

    #[test]
    fn split_block_params_beat_full_width()
    {
        // two 3x3 convs on all 64 channels vs the split block: heavy pair on
        // 32 plus simple 1x1 pair on 32
        let full = [
            LayerSpec::conv(3, 1, 64, 64),
            LayerSpec::conv(3, 1, 64, 64),
        ];
        let (full_params, _) = count_params_macs(&full, (64, 32, 32)).unwrap();
        let heavy = [
            LayerSpec::conv(3, 1, 32, 32),
            LayerSpec::conv(3, 1, 32, 32),
        ];
        let light = [
            LayerSpec::conv(1, 1, 32, 32),
            LayerSpec::conv(1, 1, 32, 32),
        ];
        let (heavy_params, _) = count_params_macs(&heavy, (32, 32, 32)).unwrap();
        let (light_params, _) = count_params_macs(&light, (32, 32, 32)).unwrap();
        let split_params = heavy_params + light_params;
        assert!(
            split_params < full_params,
            "split {split_params} vs full {full_params} (ratio {:.3})",
            split_params as f64 / full_params as f64
        );
    }
}
