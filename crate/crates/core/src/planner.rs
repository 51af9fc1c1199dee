//! Static shape and parameter accounting for a three-stage ResNet-style
//! classifier, plus the label-smoothed cross-entropy used to train it.
//!
//! Layout: 3x3 stem conv to `nf` channels; three stages at widths `nf`,
//! `2nf`, `4nf`, each a 3x3 transition conv, `nresb[s]` residual blocks and a
//! 2x pooling; adaptive pooling to 1x1; two fully connected layers
//! `4nf -> 2nf -> K`. Convolutions keep spatial size. Biases are counted on
//! every conv and linear layer, batch norm adds `2 * C_out` per conv.
//! Shortcut projections are not modelled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Two 3x3 convolutions at stage width.
    Plain,
    /// 1x1 down to width/4, 3x3 at width/4, 1x1 back up to width.
    Bottleneck,
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Self::Plain),
            "bottleneck" => Ok(Self::Bottleneck),
            _ => Err(Error::InvalidParam(format!("unknown block kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub nf: usize,
    pub block_kind: BlockKind,
    pub nresb: [usize; 3],
    pub batchnorm: bool,
    pub n_classes: usize,
    pub input: InputShape,
}

/// Named configurations. The three-stage block counts are chosen so the
/// weight-layer depth lands near the named ResNet; `resnet101-like` is the
/// selected best model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Resnet18Like,
    Resnet34Like,
    Resnet50Like,
    Resnet101Like,
    BestModel,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Self::Resnet18Like,
        Self::Resnet34Like,
        Self::Resnet50Like,
        Self::Resnet101Like,
        Self::BestModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Resnet18Like => "resnet18-like",
            Self::Resnet34Like => "resnet34-like",
            Self::Resnet50Like => "resnet50-like",
            Self::Resnet101Like => "resnet101-like",
            Self::BestModel => "best-model",
        }
    }

    /// Config for 224x224 RGB input and 16 classes.
    pub fn config(self) -> NetConfig {
        let (nf, block_kind, nresb) = match self {
            Self::Resnet18Like => (64, BlockKind::Plain, [2, 2, 2]),
            Self::Resnet34Like => (64, BlockKind::Plain, [4, 6, 4]),
            Self::Resnet50Like => (64, BlockKind::Bottleneck, [4, 6, 4]),
            Self::Resnet101Like | Self::BestModel => (128, BlockKind::Bottleneck, [6, 10, 6]),
        };
        NetConfig {
            nf,
            block_kind,
            nresb,
            batchnorm: true,
            n_classes: 16,
            input: InputShape {
                height: 224,
                width: 224,
                channels: 3,
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidParam(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv { kernel: usize, in_channels: usize, out_channels: usize, batchnorm: bool },
    Pool,
    AdaptivePool,
    Linear { in_features: usize, out_features: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub name: String,
    pub kind: LayerKind,
    /// (height, width, channels) after the layer.
    pub output: (usize, usize, usize),
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetPlan {
    pub config: NetConfig,
    pub layers: Vec<LayerPlan>,
    pub total_params: u64,
    /// Counting assumptions baked into the totals.
    pub notes: Vec<String>,
}

impl NetPlan {
    pub fn conv_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv { .. }))
            .count()
    }

    /// Convolutional plus fully connected layers.
    pub fn weight_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv { .. } | LayerKind::Linear { .. }))
            .count()
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<24} {:>18} {:>14}\n", "layer", "output (HxWxC)", "params");
        for l in &self.layers {
            let shape = format!("{}x{}x{}", l.output.0, l.output.1, l.output.2);
            out.push_str(&format!("{:<24} {:>18} {:>14}\n", l.name, shape, l.params));
        }
        out.push_str(&format!("{:<24} {:>18} {:>14}\n", "total", "", self.total_params));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,height,width,channels,params\n");
        for l in &self.layers {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                l.name, l.output.0, l.output.1, l.output.2, l.params
            ));
        }
        out
    }
}

fn conv_params(kernel: usize, cin: usize, cout: usize, batchnorm: bool) -> u64 {
    let (k, cin, cout) = (kernel as u64, cin as u64, cout as u64);
    k * k * cin * cout + cout + if batchnorm { 2 * cout } else { 0 }
}

struct PlanBuilder {
    layers: Vec<LayerPlan>,
    h: usize,
    w: usize,
    c: usize,
    batchnorm: bool,
}

impl PlanBuilder {
    fn conv(&mut self, name: String, kernel: usize, out_channels: usize) {
        let params = conv_params(kernel, self.c, out_channels, self.batchnorm);
        self.layers.push(LayerPlan {
            name,
            kind: LayerKind::Conv {
                kernel,
                in_channels: self.c,
                out_channels,
                batchnorm: self.batchnorm,
            },
            output: (self.h, self.w, out_channels),
            params,
        });
        self.c = out_channels;
    }

    fn pool(&mut self, name: String) {
        self.h /= 2;
        self.w /= 2;
        self.layers.push(LayerPlan {
            name,
            kind: LayerKind::Pool,
            output: (self.h, self.w, self.c),
            params: 0,
        });
    }

    fn linear(&mut self, name: &str, out_features: usize) {
        let (i, o) = (self.c as u64, out_features as u64);
        self.layers.push(LayerPlan {
            name: name.to_owned(),
            kind: LayerKind::Linear {
                in_features: self.c,
                out_features,
            },
            output: (1, 1, out_features),
            params: i * o + o,
        });
        self.c = out_features;
    }
}

pub fn plan_network(cfg: &NetConfig) -> Result<NetPlan> {
    if cfg.nf == 0 {
        return Err(Error::InvalidParam("nf must be at least 1".into()));
    }
    if cfg.n_classes == 0 {
        return Err(Error::InvalidParam("n_classes must be at least 1".into()));
    }
    let InputShape {
        height,
        width,
        channels,
    } = cfg.input;
    if height < 8 || width < 8 || channels == 0 {
        return Err(Error::InvalidParam(format!(
            "input {height}x{width}x{channels} is too small for three 2x poolings"
        )));
    }
    let widths = [cfg.nf, 2 * cfg.nf, 4 * cfg.nf];
    if cfg.block_kind == BlockKind::Bottleneck {
        for (s, (&w, &n)) in widths.iter().zip(&cfg.nresb).enumerate() {
            if n > 0 && w % 4 != 0 {
                return Err(Error::InvalidParam(format!(
                    "stage {} width {w} is not divisible by 4 for bottleneck blocks",
                    s + 1
                )));
            }
        }
    }

    let mut b = PlanBuilder {
        layers: Vec::new(),
        h: height,
        w: width,
        c: channels,
        batchnorm: cfg.batchnorm,
    };
    b.conv("stem".into(), 3, cfg.nf);
    for (s, (&width, &blocks)) in widths.iter().zip(&cfg.nresb).enumerate() {
        let stage = s + 1;
        b.conv(format!("stage{stage}.transition"), 3, width);
        for blk in 1..=blocks {
            match cfg.block_kind {
                BlockKind::Plain => {
                    b.conv(format!("stage{stage}.block{blk}.conv1"), 3, width);
                    b.conv(format!("stage{stage}.block{blk}.conv2"), 3, width);
                }
                BlockKind::Bottleneck => {
                    b.conv(format!("stage{stage}.block{blk}.reduce"), 1, width / 4);
                    b.conv(format!("stage{stage}.block{blk}.conv"), 3, width / 4);
                    b.conv(format!("stage{stage}.block{blk}.expand"), 1, width);
                }
            }
        }
        b.pool(format!("stage{stage}.pool"));
    }
    b.h = 1;
    b.w = 1;
    b.layers.push(LayerPlan {
        name: "adaptive_pool".into(),
        kind: LayerKind::AdaptivePool,
        output: (1, 1, b.c),
        params: 0,
    });
    let hidden = (b.c / 2).max(1);
    b.linear("fc1", hidden);
    b.linear("fc2", cfg.n_classes);

    let total_params = b.layers.iter().map(|l| l.params).sum();
    Ok(NetPlan {
        config: *cfg,
        layers: b.layers,
        total_params,
        notes: vec![
            "conv biases counted even with batch norm".into(),
            "batch norm counted as 2*C_out (scale, shift) per conv".into(),
            "head is 4nf -> 2nf -> K".into(),
            "bottleneck inner width is width/4".into(),
            "shortcut projections not counted".into(),
        ],
    })
}

/// Cross-entropy against `(1 - eps) * onehot + eps / K`.
pub fn label_smoothing_loss(p: &[f64], true_class: usize, epsilon: f64) -> Result<f64> {
    let k = p.len();
    if true_class >= k {
        return Err(Error::InvalidParam(format!(
            "class {true_class} out of range for {k} probabilities"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParam(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    if p.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidParam(
            "probabilities must be positive; the loss is undefined at zero".into(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParam(format!("probabilities sum to {sum}, not 1")));
    }
    let off = epsilon / k as f64;
    Ok(p
        .iter()
        .enumerate()
        .map(|(c, &pc)| {
            let q = if c == true_class { 1.0 - epsilon + off } else { off };
            -q * pc.ln()
        })
        .sum())
}
