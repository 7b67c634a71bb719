use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    accumulate_gradients, loss, predict, BiLstmParams, ModelConfig, Objective, Optimizer,
    OptimizerKind, Target,
};
use crate::parser::TemplateId;

use super::window::EventWindow;

/// Template ids used as classification targets, in ascending order; the
/// class index of a template is its position here.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    ids: Vec<TemplateId>,
}

impl ClassMap {
    pub fn new(ids: impl IntoIterator<Item = TemplateId>) -> Self {
        let mut ids: Vec<TemplateId> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        ClassMap { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: TemplateId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn id_of(&self, index: usize) -> TemplateId {
        self.ids[index]
    }

    pub fn ids(&self) -> &[TemplateId] {
        &self.ids
    }
}

/// Network parameters together with what is needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub config: ModelConfig,
    pub params: BiLstmParams,
    pub classes: ClassMap,
}

impl DetectorModel {
    pub fn new(config: ModelConfig, classes: ClassMap, seed: u64) -> Result<Self> {
        if config.objective == Objective::Classification && classes.len() != config.num_classes {
            return Err(Error::config(format!(
                "{} classes given, config expects {}",
                classes.len(),
                config.num_classes
            )));
        }
        let params = BiLstmParams::init(&config, seed)?;
        Ok(DetectorModel {
            config,
            params,
            classes,
        })
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        predict(&self.params, inputs, &self.config)
    }

    fn target<'a>(&self, w: &'a EventWindow) -> Result<Target<'a>> {
        Ok(match self.config.objective {
            Objective::Classification => Target::Class(
                self.classes
                    .index_of(w.target_class)
                    .ok_or(Error::UnknownTemplate(w.target_class))?,
            ),
            Objective::Regression => Target::Vector(&w.target_embedding),
        })
    }

    /// Loss of the model on one window.
    pub fn window_loss(&self, w: &EventWindow) -> Result<f64> {
        let pred = self.predict(&w.inputs)?;
        loss(&self.config, &pred, self.target(w)?)
    }

    pub fn mean_loss(&self, windows: &[EventWindow]) -> Result<f64> {
        if windows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut total = 0.0;
        for w in windows {
            total += self.window_loss(w)?;
        }
        Ok(total / windows.len() as f64)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let meta = serde_json::json!({ "classes": self.classes.ids() });
        crate::nn::save_checkpoint(&self.params, &self.config, &meta, path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let (config, params, meta) = crate::nn::load_checkpoint(path)?;
        let ids: Vec<TemplateId> =
            serde_json::from_value(meta.get("classes").cloned().unwrap_or_default())
                .map_err(|e| Error::format(format!("checkpoint class list: {e}")))?;
        let classes = ClassMap::new(ids);
        if config.objective == Objective::Classification && classes.len() != config.num_classes {
            return Err(Error::format("class list does not match num_classes"));
        }
        Ok(DetectorModel {
            config,
            params,
            classes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap per batch.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            lr: 1e-3,
            optimizer: OptimizerKind::default(),
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch training in place and
/// returns the mean training loss of each epoch.
pub fn fit(
    model: &mut DetectorModel,
    windows: &[EventWindow],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut grads = BiLstmParams::zeros(&model.config);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero_grad();
            for &i in batch {
                let w = &windows[i];
                let target = model.target(w)?;
                total += accumulate_gradients(
                    &model.params,
                    &w.inputs,
                    target,
                    &model.config,
                    &mut grads,
                )?;
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(max_norm) = cfg.clip_norm {
                let norm = grads
                    .tensors()
                    .iter()
                    .flat_map(|t| t.data())
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            opt.step(&mut model.params, &grads);
        }
        let mean = total / windows.len() as f64;
        if !mean.is_finite() || !model.params.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        curve.push(mean);
    }
    Ok(curve)
}

/// Fresh model trained on `windows`. Returns the model and its loss curve.
pub fn train(
    windows: &[EventWindow],
    config: ModelConfig,
    classes: ClassMap,
    cfg: &TrainConfig,
) -> Result<(DetectorModel, Vec<f64>)> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut model = DetectorModel::new(config, classes, cfg.seed)?;
    let curve = fit(&mut model, windows, cfg)?;
    Ok((model, curve))
}
