use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::TemplateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub delta: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            delta: 10,
            stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.stride == 0 {
            return Err(Error::config("window delta and stride must be at least 1"));
        }
        Ok(())
    }
}

/// `delta` consecutive embeddings and the event that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct EventWindow {
    /// Stream index of the first input event.
    pub start: usize,
    pub inputs: Vec<Vec<f64>>,
    pub target_embedding: Vec<f64>,
    pub target_class: TemplateId,
}

impl EventWindow {
    /// Stream index of the target event.
    pub fn target_index(&self) -> usize {
        self.start + self.inputs.len()
    }
}

/// One window per start index `0, stride, 2*stride, ...` whose target still
/// falls inside the stream.
pub fn make_windows<E: AsRef<[f64]>>(
    events: &[(TemplateId, E)],
    cfg: &WindowConfig,
) -> Result<Vec<EventWindow>> {
    cfg.validate()?;
    if events.len() < cfg.delta + 1 {
        return Err(Error::TooFewEvents {
            needed: cfg.delta + 1,
            got: events.len(),
        });
    }
    Ok((0..events.len() - cfg.delta)
        .step_by(cfg.stride)
        .map(|start| {
            let (target_class, target) = &events[start + cfg.delta];
            EventWindow {
                start,
                inputs: events[start..start + cfg.delta]
                    .iter()
                    .map(|(_, e)| e.as_ref().to_vec())
                    .collect(),
                target_embedding: target.as_ref().to_vec(),
                target_class: *target_class,
            }
        })
        .collect())
}
