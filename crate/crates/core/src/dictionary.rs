//! Observable dictionaries that lift a state `x ∈ R^n` to `z(x) ∈ R^m`.
//!
//! A [`Dictionary`] is an ordered list of [`Block`]s. Each block contributes a
//! fixed number of observables and the lifted vector is their concatenation.
//! State-inclusive dictionaries put the raw state first so that reading the
//! state back out of a lifted vector is a fixed prefix slice.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

/// Fully connected layer, `act(W x + b)` with `W` stored as rows (out × in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.w.len()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.w.iter().zip(&self.b).map(|(row, b)| {
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            self.act.apply(s + b)
        }));
    }
}

/// Weights of the hidden stack of a feed-forward network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpWeights {
    pub input_dim: usize,
    pub layers: Vec<DenseLayer>,
}

/// On-disk form of an exported network: the weights plus whether the raw
/// state is concatenated in front of the network outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpWeightsFile {
    pub input_dim: usize,
    pub layers: Vec<DenseLayer>,
    #[serde(default)]
    pub include_state: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dim: Option<usize>,
}

impl MlpWeights {
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    /// Checks that every layer is rectangular, finite, and chains into the next.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Schema("input_dim must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Schema("network has no layers".into()));
        }
        let mut width = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.w.is_empty() {
                return Err(Error::Schema(format!("layer {i} has no rows")));
            }
            if layer.w.iter().any(|row| row.len() != width) {
                return Err(Error::Schema(format!(
                    "layer {i} expects {width} inputs but a weight row has a different length"
                )));
            }
            if layer.b.len() != layer.out_dim() {
                return Err(Error::Schema(format!(
                    "layer {i} has {} rows but {} biases",
                    layer.out_dim(),
                    layer.b.len()
                )));
            }
            if layer.w.iter().flatten().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("layer {i} has non-finite parameters")));
            }
            width = layer.out_dim();
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Reads an exported weight file. Returns the weights and the file's
    /// `include_state` flag.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<(Self, bool)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<(Self, bool)> {
        let file: MlpWeightsFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let weights = MlpWeights {
            input_dim: file.input_dim,
            layers: file.layers,
        };
        weights.validate()?;
        if let Some(declared) = file.output_dim {
            if declared != weights.output_dim() {
                return Err(Error::Schema(format!(
                    "declared output_dim {declared} but last layer has width {}",
                    weights.output_dim()
                )));
            }
        }
        Ok((weights, file.include_state))
    }

    pub fn to_file_repr(&self, include_state: bool) -> MlpWeightsFile {
        MlpWeightsFile {
            input_dim: self.input_dim,
            layers: self.layers.clone(),
            include_state,
            output_dim: Some(self.output_dim()),
        }
    }
}

/// Gaussian radial basis functions on a uniform tensor grid of centers.
///
/// Each observable is `exp(-Σ_d (x_d - c_d)² / (2 σ_d²))`; `σ_d` is the
/// center spacing along axis `d` times the width factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfGrid {
    pub grid_shape: Vec<usize>,
    pub bounds: Bounds,
    pub widths: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthRule {
    SpacingScaled(f64),
}

impl Default for WidthRule {
    fn default() -> Self {
        WidthRule::SpacingScaled(1.0)
    }
}

impl RbfGrid {
    pub fn new(grid_shape: &[usize], bounds: &Bounds, rule: WidthRule) -> Result<Self> {
        if grid_shape.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: grid_shape.len(),
            });
        }
        if grid_shape.contains(&0) {
            return Err(Error::Spec("every grid_shape entry must be at least 1".into()));
        }
        bounds.check_nondegenerate()?;
        let WidthRule::SpacingScaled(factor) = rule;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Spec(format!("width factor must be positive, got {factor}")));
        }
        let widths = grid_shape
            .iter()
            .enumerate()
            .map(|(d, &s)| {
                let spacing = if s > 1 {
                    bounds.width(d) / (s - 1) as f64
                } else {
                    bounds.width(d)
                };
                spacing * factor
            })
            .collect();
        Ok(RbfGrid {
            grid_shape: grid_shape.to_vec(),
            bounds: bounds.clone(),
            widths,
            centers: bounds.grid(grid_shape),
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.bounds.dim();
        if self.widths.len() != n || self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Schema("rbf widths must be positive, one per axis".into()));
        }
        if self.centers.len() != self.grid_shape.iter().product::<usize>() {
            return Err(Error::Schema("rbf center count does not match grid_shape".into()));
        }
        let tol = 1e-12 * self.bounds.diagonal();
        for c in &self.centers {
            if c.len() != n {
                return Err(Error::Schema("rbf center has wrong dimension".into()));
            }
            let inside = c
                .iter()
                .enumerate()
                .all(|(d, v)| *v >= self.bounds.lo[d] - tol && *v <= self.bounds.hi[d] + tol);
            if !inside {
                return Err(Error::Schema("rbf center outside its bounding box".into()));
            }
        }
        Ok(())
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (slot, c) in out.iter_mut().zip(&self.centers) {
            let r2: f64 = x
                .iter()
                .zip(c)
                .zip(&self.widths)
                .map(|((a, b), w)| {
                    let u = (a - b) / w;
                    u * u
                })
                .sum();
            *slot = (-0.5 * r2).exp();
        }
    }
}

/// One contiguous group of observables inside a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    /// The raw state, passed through unchanged.
    State,
    /// The constant function 1.
    Constant,
    Rbf(RbfGrid),
    Mlp(MlpWeights),
}

impl Block {
    fn width(&self, input_dim: usize) -> usize {
        match self {
            Block::State => input_dim,
            Block::Constant => 1,
            Block::Rbf(g) => g.len(),
            Block::Mlp(w) => w.output_dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    StateOnly,
    RbfGrid,
    MlpImported,
    Composite,
}

/// Ordered set of scalar observables `g_1 … g_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryRepr", into = "DictionaryRepr")]
pub struct Dictionary {
    input_dim: usize,
    output_dim: usize,
    blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DictionaryRepr {
    input_dim: usize,
    blocks: Vec<Block>,
}

impl TryFrom<DictionaryRepr> for Dictionary {
    type Error = Error;

    fn try_from(r: DictionaryRepr) -> Result<Self> {
        Dictionary::composite(r.input_dim, r.blocks)
    }
}

impl From<Dictionary> for DictionaryRepr {
    fn from(d: Dictionary) -> Self {
        DictionaryRepr {
            input_dim: d.input_dim,
            blocks: d.blocks,
        }
    }
}

impl Dictionary {
    /// Builds a dictionary from an explicit list of blocks.
    pub fn composite(input_dim: usize, blocks: Vec<Block>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Spec("input_dim must be positive".into()));
        }
        for block in &blocks {
            match block {
                Block::Rbf(g) => {
                    g.validate()?;
                    if g.bounds.dim() != input_dim {
                        return Err(Error::DimensionMismatch {
                            expected: input_dim,
                            got: g.bounds.dim(),
                        });
                    }
                }
                Block::Mlp(w) => {
                    w.validate()?;
                    if w.input_dim != input_dim {
                        return Err(Error::DimensionMismatch {
                            expected: input_dim,
                            got: w.input_dim,
                        });
                    }
                }
                Block::State | Block::Constant => {}
            }
        }
        let output_dim = blocks.iter().map(|b| b.width(input_dim)).sum();
        if output_dim == 0 {
            return Err(Error::Spec("dictionary has no observables".into()));
        }
        Ok(Dictionary {
            input_dim,
            output_dim,
            blocks,
        })
    }

    pub fn state_only(input_dim: usize) -> Result<Self> {
        Self::composite(input_dim, vec![Block::State])
    }

    /// State variables followed by Gaussian RBFs on a uniform center grid.
    /// `m = Π grid_shape + n`.
    pub fn rbf_grid(grid_shape: &[usize], bounds: &Bounds, rule: WidthRule) -> Result<Self> {
        let grid = RbfGrid::new(grid_shape, bounds, rule)?;
        Self::composite(bounds.dim(), vec![Block::State, Block::Rbf(grid)])
    }

    /// Hidden stack of an exported network as a dictionary, optionally preceded by the raw state.
    pub fn from_mlp(weights: MlpWeights, include_state: bool) -> Result<Self> {
        weights.validate()?;
        let n = weights.input_dim;
        let mut blocks = Vec::with_capacity(2);
        if include_state {
            blocks.push(Block::State);
        }
        blocks.push(Block::Mlp(weights));
        Self::composite(n, blocks)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn kind(&self) -> DictionaryKind {
        match self.blocks.as_slice() {
            [Block::State] => DictionaryKind::StateOnly,
            [Block::State, Block::Rbf(_)] => DictionaryKind::RbfGrid,
            [Block::Mlp(_)] | [Block::State, Block::Mlp(_)] => DictionaryKind::MlpImported,
            _ => DictionaryKind::Composite,
        }
    }

    /// Slots of `z` holding the raw state, if the dictionary has a state block.
    pub fn state_block(&self) -> Option<Range<usize>> {
        let mut offset = 0;
        for b in &self.blocks {
            if matches!(b, Block::State) {
                return Some(offset..offset + self.input_dim);
            }
            offset += b.width(self.input_dim);
        }
        None
    }

    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = vec![0.0; self.output_dim];
        self.lift_into(x, &mut z);
        Ok(z)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Unchecked lift into a caller-provided buffer of length `output_dim`.
    pub(crate) fn lift_into(&self, x: &[f64], z: &mut [f64]) {
        let mut offset = 0;
        for block in &self.blocks {
            let w = block.width(self.input_dim);
            let out = &mut z[offset..offset + w];
            match block {
                Block::State => out.copy_from_slice(x),
                Block::Constant => out[0] = 1.0,
                Block::Rbf(g) => g.eval_into(x, out),
                Block::Mlp(net) => out.copy_from_slice(&net.forward(x)),
            }
            offset += w;
        }
    }

    pub fn extract_state<'a>(&self, z: &'a [f64]) -> Result<&'a [f64]> {
        let range = self.state_block().ok_or(Error::NotStateInclusive)?;
        if z.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                got: z.len(),
            });
        }
        Ok(&z[range])
    }

    /// Short human label, e.g. `state+rbf(5x5)`.
    pub fn describe(&self) -> String {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::State => "state".to_string(),
                Block::Constant => "const".to_string(),
                Block::Rbf(g) => format!(
                    "rbf({})",
                    g.grid_shape
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join("x")
                ),
                Block::Mlp(w) => format!(
                    "mlp({})",
                    w.layers
                        .iter()
                        .map(|l| l.out_dim().to_string())
                        .collect::<Vec<_>>()
                        .join("/")
                ),
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}
