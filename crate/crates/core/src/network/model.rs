use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{NodeId, Rng, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    /// Dense + ReLU blocks of the given widths, then a linear head to the
    /// feature dimension.
    Mlp { input_dim: usize, hidden: Vec<usize> },
    /// conv3×3 → ReLU → maxpool2 blocks, then flatten → dense to the feature
    /// dimension.
    CnnVis2d {
        in_channels: usize,
        height: usize,
        width: usize,
        channels: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder: EncoderSpec,
    pub feature_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn mlp(input_dim: usize, hidden: &[usize], feature_dim: usize, num_classes: usize) -> Self {
        Self {
            encoder: EncoderSpec::Mlp {
                input_dim,
                hidden: hidden.to_vec(),
            },
            feature_dim,
            num_classes,
        }
    }

    /// Three blocks of 32/64/128 channels feeding a 2-D feature layer.
    pub fn cnn_vis2d(in_channels: usize, height: usize, width: usize, num_classes: usize) -> Self {
        Self {
            encoder: EncoderSpec::CnnVis2d {
                in_channels,
                height,
                width,
                channels: vec![32, 64, 128],
            },
            feature_dim: 2,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.feature_dim < 2 {
            return bad(format!("feature_dim must be >= 2, got {}", self.feature_dim));
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        match &self.encoder {
            EncoderSpec::Mlp { input_dim, hidden } => {
                if *input_dim == 0 || hidden.contains(&0) {
                    return bad("MLP widths must be positive".into());
                }
            }
            EncoderSpec::CnnVis2d {
                in_channels,
                height,
                width,
                channels,
            } => {
                if *in_channels == 0 || channels.is_empty() || channels.contains(&0) {
                    return bad("CNN channels must be positive and non-empty".into());
                }
                let div = 1usize << channels.len();
                if *height == 0 || *width == 0 || height % div != 0 || width % div != 0 {
                    return bad(format!(
                        "CNN input {height}x{width} must be divisible by {div} for {} pooling blocks",
                        channels.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of hidden blocks before the feature head.
    pub fn num_blocks(&self) -> usize {
        match &self.encoder {
            EncoderSpec::Mlp { hidden, .. } => hidden.len(),
            EncoderSpec::CnnVis2d { channels, .. } => channels.len(),
        }
    }

    /// Representation index of the encoder output (feature layer). Index 0 is
    /// the input and `1..=num_blocks()` are block outputs.
    pub fn feature_layer(&self) -> usize {
        self.num_blocks() + 1
    }

    /// Shape of one input sample.
    pub fn sample_shape(&self) -> Vec<usize> {
        match &self.encoder {
            EncoderSpec::Mlp { input_dim, .. } => vec![*input_dim],
            EncoderSpec::CnnVis2d {
                in_channels,
                height,
                width,
                ..
            } => vec![*in_channels, *height, *width],
        }
    }

    /// Parameter shapes and names in declaration order.
    fn layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        // (name, shape, fan_in); fan_in 0 marks a bias
        let mut out = Vec::new();
        let head_in = match &self.encoder {
            EncoderSpec::Mlp { input_dim, hidden } => {
                let mut prev = *input_dim;
                for (i, &w) in hidden.iter().enumerate() {
                    out.push((format!("encoder.block{i}.weight"), vec![prev, w], prev));
                    out.push((format!("encoder.block{i}.bias"), vec![w], 0));
                    prev = w;
                }
                prev
            }
            EncoderSpec::CnnVis2d {
                in_channels,
                height,
                width,
                channels,
            } => {
                let mut prev = *in_channels;
                for (i, &c) in channels.iter().enumerate() {
                    out.push((format!("encoder.block{i}.kernel"), vec![c, prev, 3, 3], prev * 9));
                    out.push((format!("encoder.block{i}.bias"), vec![c], 0));
                    prev = c;
                }
                let shrink = 1usize << channels.len();
                prev * (height / shrink) * (width / shrink)
            }
        };
        let d = self.feature_dim;
        out.push(("encoder.head.weight".into(), vec![head_in, d], head_in));
        out.push(("encoder.head.bias".into(), vec![d], 0));
        out.push((
            "classifier.weight".into(),
            vec![d, self.num_classes],
            d,
        ));
        out.push(("classifier.bias".into(), vec![self.num_classes], 0));
        out
    }
}

/// Encoder followed by a single dense classifier layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    names: Vec<String>,
    params: Vec<Tensor>,
}

/// Parameter node handles of a model recorded on one tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    ids: Vec<NodeId>,
}

impl BoundParams {
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

/// Which parameter groups receive gradients during a pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainable {
    All,
    ClassifierOnly,
}

impl Model {
    /// Kaiming-uniform fan-in weights (`U(±√(6/fan_in))`), zero biases.
    pub fn init(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape, fan_in) in spec.layout() {
            let numel: usize = shape.iter().product();
            let data = if fan_in == 0 {
                vec![0.0; numel]
            } else {
                let bound = (6.0 / fan_in as f64).sqrt();
                (0..numel).map(|_| rng.uniform_range(-bound, bound)).collect()
            };
            names.push(name);
            params.push(Tensor::new(shape, data)?);
        }
        Ok(Self {
            spec,
            names,
            params,
        })
    }

    /// Rebuilds a model from explicit parameter tensors in declaration order.
    pub fn from_params(spec: ModelSpec, params: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if layout.len() != params.len() {
            return Err(Error::shape(
                "model",
                format!("expected {} parameters, got {}", layout.len(), params.len()),
            ));
        }
        for ((name, shape, _), p) in layout.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "model",
                    format!("{name}: expected {shape:?}, got {:?}", p.shape()),
                ));
            }
        }
        Ok(Self {
            spec,
            names: layout.into_iter().map(|l| l.0).collect(),
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    /// Number of leading parameters that belong to the encoder.
    pub fn encoder_param_count(&self) -> usize {
        self.params.len() - 2
    }

    /// Replaces the classifier with a fresh `d → num_classes` layer.
    pub fn reset_classifier(&mut self, num_classes: usize, rng: &mut Rng) -> Result<()> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument("classifier needs >= 2 classes".into()));
        }
        let d = self.spec.feature_dim;
        let bound = (6.0 / d as f64).sqrt();
        let w = (0..d * num_classes)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        let k = self.encoder_param_count();
        self.params[k] = Tensor::new(vec![d, num_classes], w)?;
        self.params[k + 1] = Tensor::zeros(&[num_classes]);
        self.spec.num_classes = num_classes;
        Ok(())
    }

    /// Records every parameter on `tape`. Parameters outside the trainable
    /// group become constants.
    pub fn bind(&self, tape: &mut Tape, trainable: Trainable) -> BoundParams {
        let k = self.encoder_param_count();
        let ids = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| match trainable {
                Trainable::All => tape.param(p),
                Trainable::ClassifierOnly if i >= k => tape.param(p),
                Trainable::ClassifierOnly => tape.constant(p.clone()),
            })
            .collect();
        BoundParams { ids }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let want = self.spec.sample_shape();
        if x.shape().len() != want.len() + 1 || x.shape()[1..] != want[..] {
            return Err(Error::shape(
                "forward_features",
                format!("input {:?} does not match N×{want:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// Applies encoder stages to a representation at layer `from`, producing
    /// the representation at layer `to` (`0 <= from <= to <= feature_layer`).
    pub fn encode_between(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        mut h: NodeId,
        from: usize,
        to: usize,
    ) -> Result<NodeId> {
        let fl = self.spec.feature_layer();
        if from > to || to > fl {
            return Err(Error::InvalidArgument(format!(
                "invalid layer range {from}..{to} (feature layer {fl})"
            )));
        }
        let p = bound.ids();
        let cnn = matches!(self.spec.encoder, EncoderSpec::CnnVis2d { .. });
        for stage in from..to {
            let (w, b) = (p[2 * stage], p[2 * stage + 1]);
            h = if stage + 1 == fl {
                if cnn {
                    h = tape.flatten(h);
                }
                tape.dense(h, w, b)?
            } else if cnn {
                let c = tape.conv2d(h, w)?;
                let c = tape.add_channel_bias(c, b)?;
                let r = tape.relu(c);
                tape.maxpool2(r)?
            } else {
                let d = tape.dense(h, w, b)?;
                tape.relu(d)
            };
        }
        Ok(h)
    }

    pub fn encode(&self, tape: &mut Tape, bound: &BoundParams, x: NodeId) -> Result<NodeId> {
        self.check_input(tape.value(x))?;
        self.encode_between(tape, bound, x, 0, self.spec.feature_layer())
    }

    pub fn classify(&self, tape: &mut Tape, bound: &BoundParams, z: NodeId) -> Result<NodeId> {
        let k = self.encoder_param_count();
        let width = tape.value(z).shape().get(1).copied();
        if tape.value(z).rank() != 2 || width != Some(self.spec.feature_dim) {
            return Err(Error::shape(
                "forward_logits",
                format!(
                    "features {:?} do not match width {}",
                    tape.value(z).shape(),
                    self.spec.feature_dim
                ),
            ));
        }
        tape.dense(z, bound.ids()[k], bound.ids()[k + 1])
    }

    /// Encoder output for a batch, without recording gradients.
    pub fn forward_features(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind_constant(&mut tape);
        let xi = tape.constant(x.clone());
        let z = self.encode(&mut tape, &bound, xi)?;
        Ok(tape.value(z).clone())
    }

    /// Classifier logits for a feature batch.
    pub fn forward_logits(&self, z: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind_constant(&mut tape);
        let zi = tape.constant(z.clone());
        let o = self.classify(&mut tape, &bound, zi)?;
        Ok(tape.value(o).clone())
    }

    fn bind_constant(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            ids: self.params.iter().map(|p| tape.constant(p.clone())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;

    fn zero_model(spec: ModelSpec) -> Model {
        let params = spec
            .layout()
            .into_iter()
            .map(|(_, s, _)| Tensor::zeros(&s))
            .collect();
        Model::from_params(spec, params).unwrap()
    }

    #[test]
    fn zero_mlp_gives_zero_features_and_uniform_confidence() {
        let m = zero_model(ModelSpec::mlp(3, &[4], 2, 5));
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let z = m.forward_features(&x).unwrap();
        assert_eq!(z.data(), &[0.0, 0.0]);
        let p = softmax(&m.forward_logits(&z).unwrap()).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn identity_linear_encoder() {
        let spec = ModelSpec::mlp(2, &[], 2, 2);
        let eye = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let params = vec![eye.clone(), Tensor::zeros(&[2]), eye, Tensor::zeros(&[2])];
        let m = Model::from_params(spec, params).unwrap();
        let z = m
            .forward_features(&Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap())
            .unwrap();
        assert_eq!(z.data(), &[3.0, 4.0]);
        let o = m
            .forward_logits(&Tensor::from_rows(&[vec![10.0, 0.0]]).unwrap())
            .unwrap();
        assert_eq!(o.argmax_row(0), 0);
    }

    #[test]
    fn cnn_vis2d_emits_two_dim_features() {
        let spec = ModelSpec::cnn_vis2d(3, 32, 32, 4);
        let m = Model::init(spec, &mut Rng::new(0)).unwrap();
        let mut rng = Rng::new(1);
        let x = Tensor::new(
            vec![4, 3, 32, 32],
            (0..4 * 3 * 32 * 32).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let z = m.forward_features(&x).unwrap();
        assert_eq!(z.shape(), &[4, 2]);
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let m = Model::init(ModelSpec::mlp(3, &[4], 2, 2), &mut Rng::new(0)).unwrap();
        assert!(m.forward_features(&Tensor::zeros(&[2, 4])).is_err());
        assert!(m.forward_logits(&Tensor::zeros(&[2, 3])).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ModelSpec::mlp(3, &[4], 1, 2).validate().is_err());
        assert!(ModelSpec::mlp(3, &[4], 2, 1).validate().is_err());
        assert!(ModelSpec::cnn_vis2d(3, 12, 12, 4).validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_in_bounds() {
        let spec = ModelSpec::mlp(8, &[16], 2, 3);
        let a = Model::init(spec.clone(), &mut Rng::new(9)).unwrap();
        let b = Model::init(spec, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a.params()[0].data().iter().all(|v| v.abs() <= bound));
        assert!(a.params()[1].data().iter().all(|&v| v == 0.0));
    }
}
