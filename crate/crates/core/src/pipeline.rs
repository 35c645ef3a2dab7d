//! Image → (CNN features) → HOSVD classifier, as used by the CLI and the
//! service.

use thiserror::Error;

use crate::classifier::{
    train_matrix_mode, train_vector_mode_from_samples, ClassificationResult, ClassifierError,
    HosvdModel, InputShape, Sample,
};
use crate::cnn::{extract_batch, CnnError, CnnNetwork};
use crate::data::{decode_pnm, preprocess, DataError, LabeledDataset, PnmError, Samples};
use crate::eval::{train_fold_cnn, CnnTraining, EvalError};
use crate::tensor::Matrix;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid image: {0}")]
    Image(#[from] PnmError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Config(String),
}

/// A loaded model plus, for vector mode, its feature extractor. Immutable
/// after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    model: HosvdModel,
    cnn: Option<CnnNetwork>,
}

impl Pipeline {
    /// Checks that images can reach the model: vector mode needs a network
    /// whose hidden width equals the model dimension; matrix mode needs a
    /// square input shape (the network, if any, is unused).
    pub fn new(model: HosvdModel, cnn: Option<CnnNetwork>) -> Result<Self, PipelineError> {
        match (model.input_shape(), &cnn) {
            (InputShape::Vector(d), Some(net)) if net.descriptor.hidden == d => {}
            (InputShape::Vector(d), Some(net)) => {
                return Err(PipelineError::Config(format!(
                    "model expects {d}-dimensional features but the network produces {}",
                    net.descriptor.hidden
                )))
            }
            (InputShape::Vector(_), None) => {
                return Err(PipelineError::Config(
                    "a vector-mode model needs a CNN feature extractor for image input".into(),
                ))
            }
            (InputShape::Matrix(h, w), _) if h != w => {
                return Err(PipelineError::Config(format!(
                    "matrix-mode model expects non-square {h}x{w} input"
                )))
            }
            (InputShape::Matrix(..), _) => {}
        }
        Ok(Self { model, cnn })
    }

    pub fn model(&self) -> &HosvdModel {
        &self.model
    }

    pub fn cnn(&self) -> Option<&CnnNetwork> {
        self.cnn.as_ref()
    }

    /// Side length images are resized to.
    pub fn input_side(&self) -> usize {
        match (self.model.input_shape(), &self.cnn) {
            (InputShape::Matrix(h, _), _) => h,
            (InputShape::Vector(_), Some(net)) => net.descriptor.input_side,
            (InputShape::Vector(_), None) => unreachable!("validated in new"),
        }
    }

    /// Classifies an already preprocessed `side × side` image.
    pub fn classify_image(&self, image: &Matrix) -> Result<ClassificationResult, PipelineError> {
        match self.model.input_shape() {
            InputShape::Matrix(..) => Ok(self.model.classify(Sample::Matrix(image))?),
            InputShape::Vector(_) => {
                let net = self.cnn.as_ref().expect("validated in new");
                let (features, _) = net.forward_extract(image)?;
                Ok(self.model.classify(Sample::Vector(&features.0))?)
            }
        }
    }

    /// Decodes raw P5/P6 bytes, preprocesses and classifies.
    pub fn classify_image_bytes(
        &self,
        bytes: &[u8],
    ) -> Result<ClassificationResult, PipelineError> {
        let img = decode_pnm(bytes)?;
        self.classify_image(&preprocess(&img, self.input_side()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainMode {
    Vector { rank: usize },
    Matrix { ranks: [usize; 3] },
}

/// Trains a complete pipeline on a dataset.
///
/// Image datasets in vector mode first train the CNN on every image, then
/// fit the classifier to its features. Feature datasets support vector mode
/// only and produce no network.
pub fn train_pipeline(
    ds: &LabeledDataset,
    mode: TrainMode,
    cnn: &CnnTraining,
    seed: u64,
) -> Result<(HosvdModel, Option<CnnNetwork>), PipelineError> {
    match (&ds.samples, mode) {
        (Samples::Images(images), TrainMode::Vector { rank }) => {
            let net = train_fold_cnn(images, &ds.labels, seed, cnn)?;
            let feats: Vec<Vec<f64>> = extract_batch(&net, images)?
                .into_iter()
                .map(|(f, _)| f.0)
                .collect();
            let model = train_vector_mode_from_samples(&feats, &ds.labels, rank)?;
            Ok((model, Some(net)))
        }
        (Samples::Images(images), TrainMode::Matrix { ranks }) => {
            Ok((train_matrix_mode(images, &ds.labels, ranks)?, None))
        }
        (Samples::Features(feats), TrainMode::Vector { rank }) => Ok((
            train_vector_mode_from_samples(feats, &ds.labels, rank)?,
            None,
        )),
        (Samples::Features(_), TrainMode::Matrix { .. }) => Err(PipelineError::Config(
            "matrix mode needs an image dataset".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{model_from_bytes, model_to_bytes};
    use crate::cnn::CnnDescriptor;
    use crate::data::{encode_pnm, synth_dataset, ImageU8, SynthKind};

    fn to_pgm(m: &Matrix) -> Vec<u8> {
        let px = m
            .as_slice()
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        encode_pnm(&ImageU8::new(m.cols(), m.rows(), 1, px).unwrap())
    }

    #[test]
    fn vector_pipeline_bytes_match_in_memory() {
        let ds = synth_dataset(1, 4, SynthKind::Images { side: 16 }, 4.0);
        let cfg = CnnTraining {
            epochs: 1,
            ..CnnTraining::default()
        };
        let (model, net) = train_pipeline(&ds, TrainMode::Vector { rank: 2 }, &cfg, 3).unwrap();
        let p = Pipeline::new(model, net).unwrap();
        assert_eq!(p.input_side(), 16);
        for img in ds.images().unwrap() {
            let direct = p.classify_image(img).unwrap();
            assert_eq!(p.classify_image_bytes(&to_pgm(img)).unwrap(), direct);
        }
        assert!(matches!(
            p.classify_image_bytes(b"P7 junk"),
            Err(PipelineError::Image(_))
        ));
    }

    #[test]
    fn matrix_pipeline_resizes_input() {
        let ds = synth_dataset(1, 4, SynthKind::Images { side: 16 }, 4.0);
        let (model, net) = train_pipeline(
            &ds,
            TrainMode::Matrix { ranks: [4, 4, 2] },
            &CnnTraining::default(),
            3,
        )
        .unwrap();
        assert!(net.is_none());
        let p = Pipeline::new(model, None).unwrap();
        let big = ImageU8::new(32, 32, 1, vec![90; 1024]).unwrap();
        let r = p.classify_image_bytes(&encode_pnm(&big)).unwrap();
        assert_eq!(r.residuals.len(), 2);
    }

    #[test]
    fn configuration_errors() {
        let ds = synth_dataset(1, 4, SynthKind::Features { dim: 6 }, 4.0);
        let (model, net) = train_pipeline(
            &ds,
            TrainMode::Vector { rank: 2 },
            &CnnTraining::default(),
            0,
        )
        .unwrap();
        assert!(net.is_none());
        assert!(matches!(
            Pipeline::new(model.clone(), None),
            Err(PipelineError::Config(_))
        ));
        let wrong = CnnNetwork::init(
            CnnDescriptor {
                hidden: 5,
                ..CnnDescriptor::SMALL
            },
            0,
        )
        .unwrap();
        assert!(matches!(
            Pipeline::new(model.clone(), Some(wrong)),
            Err(PipelineError::Config(_))
        ));
        assert!(train_pipeline(
            &ds,
            TrainMode::Matrix { ranks: [1, 1, 1] },
            &CnnTraining::default(),
            0
        )
        .is_err());
        // model bytes survive the trip unchanged
        assert_eq!(model_from_bytes(&model_to_bytes(&model)).unwrap(), model);
    }
}
