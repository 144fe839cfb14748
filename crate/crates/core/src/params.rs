//! Named parameter tensors shared by all model kinds.

use std::collections::BTreeMap;

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Ordered name -> tensor map. Iteration order is the name order, which
/// fixes the layout of checkpoints and the order of optimizer updates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Matrix>,
}

/// One gradient tensor per parameter tensor, same names and shapes.
pub type GradientSet = ParamSet;

/// Fan-in for weights that read unit-norm text embeddings. A hashed
/// embedding has only a few nonzero coordinates, so scaling by the full
/// input width would shrink the projected features to near zero.
pub const UNIT_NORM_FAN_IN: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// uniform(-s, s) with s = init_scale / sqrt(fan_in)
    Uniform { fan_in: usize },
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize),
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, init: Init) -> Self {
        Self {
            name: name.into(),
            shape: (rows, cols),
            init,
        }
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_specs(specs: &[ParamSpec], init_scale: f64, rng: &mut impl Rng) -> Self {
        let mut set = Self::new();
        for spec in specs {
            let (r, c) = spec.shape;
            let m = match spec.init {
                Init::Zeros => Matrix::zeros(r, c),
                Init::Ones => Matrix::filled(r, c, 1.0),
                Init::Uniform { fan_in } => {
                    let s = init_scale / (fan_in.max(1) as f64).sqrt();
                    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-s..=s)).collect())
                }
            };
            set.insert(spec.name.clone(), m);
        }
        set
    }

    /// Every entry drawn from uniform(-scale, scale), regardless of the
    /// tensor's [`Init`] rule. Used to probe gradients at generic points.
    pub fn random_like(&self, scale: f64, rng: &mut impl Rng) -> Self {
        let mut out = Self::new();
        for (name, m) in &self.tensors {
            let (r, c) = m.shape();
            out.insert(
                name.clone(),
                Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..=scale)).collect()),
            );
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, m)| (k.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, m: Matrix) {
        self.tensors.insert(name.into(), m);
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors.get_mut(name)
    }

    /// Panics when `name` is absent; callers validate shapes up front.
    pub fn tensor(&self, name: &str) -> &Matrix {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Matrix)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Matrix)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|m| m.data().len()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in &self.tensors {
            if !m.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
        }
        Ok(())
    }

    /// Names and shapes must equal `specs` exactly.
    pub fn check_shapes(&self, specs: &[ParamSpec]) -> Result<()> {
        if specs.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                self.tensors.len()
            )));
        }
        for spec in specs {
            let m = self
                .get(&spec.name)
                .ok_or_else(|| Error::DimensionMismatch(format!("missing tensor {}", spec.name)))?;
            if m.shape() != spec.shape {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    spec.name,
                    m.shape(),
                    spec.shape
                )));
            }
        }
        Ok(())
    }

    /// Same names and shapes as `other`.
    pub fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::DimensionMismatch("tensor count differs".into()));
        }
        for ((a, ma), (b, mb)) in self.tensors.iter().zip(&other.tensors) {
            if a != b || ma.shape() != mb.shape() {
                return Err(Error::DimensionMismatch(format!("tensor {a} vs {b}")));
            }
        }
        Ok(())
    }

    /// Registers every tensor as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .tensors
                .iter()
                .map(|(k, m)| (k.clone(), tape.leaf(m.clone())))
                .collect(),
        }
    }
}

/// Tape leaves for a [`ParamSet`].
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}
