//! Single-comment scorer: a two-layer network from one comment's embedding
//! to a score in (0, 1), plus the mapping of that score onto the 0-4 scale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid_scalar, Tape, Var};
use crate::error::{Error, Result};
use crate::params::{BoundParams, Init, ParamSet, ParamSpec, UNIT_NORM_FAN_IN};
use crate::tensor::Matrix;

/// Lower edges of bins 1..=4. Bins are left-closed and right-open, except
/// the last, which also holds 1.0.
const BIN_EDGES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentOnlyConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl Default for CommentOnlyConfig {
    fn default() -> Self {
        Self {
            input_dim: 64,
            hidden_dim: 32,
        }
    }
}

impl CommentOnlyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("comment-only dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("hidden.weight", self.input_dim, self.hidden_dim, Init::Uniform { fan_in: UNIT_NORM_FAN_IN }),
            ParamSpec::new("hidden.bias", 1, self.hidden_dim, Init::Zeros),
            ParamSpec::new("output.weight", self.hidden_dim, 1, Init::Uniform { fan_in: self.hidden_dim }),
            ParamSpec::new("output.bias", 1, 1, Init::Zeros),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommentOnly {
    config: CommentOnlyConfig,
    params: ParamSet,
}

impl CommentOnly {
    pub fn new(config: CommentOnlyConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config.param_specs())?;
        Ok(Self { config, params })
    }

    pub fn init(config: CommentOnlyConfig, init_scale: f64, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let params = ParamSet::from_specs(&config.param_specs(), init_scale, rng);
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &CommentOnlyConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    /// Pre-sigmoid scores, one row per input row (`n x 1`).
    pub fn trace(&self, tape: &mut Tape, p: &BoundParams, features: &Matrix) -> Result<Var> {
        if features.cols() != self.config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature width {} vs input_dim {}",
                features.cols(),
                self.config.input_dim
            )));
        }
        self.params.check_finite()?;
        let x = tape.leaf(features.clone());
        let h = tape.matmul(x, p.var("hidden.weight"));
        let h = tape.add_row(h, p.var("hidden.bias"));
        let h = tape.tanh(h);
        let z = tape.matmul(h, p.var("output.weight"));
        Ok(tape.add_row(z, p.var("output.bias")))
    }

    pub fn scores(&self, features: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let z = self.trace(&mut tape, &p, features)?;
        Ok(tape.value(z).data().iter().map(|&v| sigmoid_scalar(v)).collect())
    }

    pub fn comment_score(&self, feature: &[f64]) -> Result<f64> {
        let m = Matrix::from_vec(1, feature.len(), feature.to_vec());
        Ok(self.scores(&m)?[0])
    }
}

/// Maps a score in `[0, 1]` onto `0..=4` with bins of width 0.2.
pub fn map_to_bins(p: f64) -> Result<u8> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::ScoreOutOfRange(p));
    }
    Ok(BIN_EDGES.iter().filter(|&&e| p >= e).count() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins() {
        assert_eq!(map_to_bins(0.15).unwrap(), 0);
        assert_eq!(map_to_bins(1.0).unwrap(), 4);
        assert_eq!(map_to_bins(0.40).unwrap(), 2);
        assert_eq!(map_to_bins(0.0).unwrap(), 0);
        assert_eq!(map_to_bins(0.999).unwrap(), 4);
        for bad in [-0.01, 1.0001, f64::NAN, f64::INFINITY] {
            assert!(map_to_bins(bad).is_err());
        }
    }

    #[test]
    fn zero_network_scores_half() {
        let cfg = CommentOnlyConfig { input_dim: 6, hidden_dim: 3 };
        let params = ParamSet::from_specs(&cfg.param_specs(), 1.0, &mut rand::rngs::mock::StepRng::new(0, 0))
            .zeros_like();
        let model = CommentOnly::new(cfg, params).unwrap();
        assert_eq!(model.comment_score(&[1.0, -2.0, 3.0, 0.0, 0.5, 9.0]).unwrap(), 0.5);
        assert!(matches!(model.comment_score(&[1.0]), Err(Error::DimensionMismatch(_))));
    }
}
