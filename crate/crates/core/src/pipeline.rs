//! Raw lines to verdicts: parse, embed, window, train, calibrate, detect.

use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate_regression_threshold, detect_stream, make_windows, ClassMap, DecisionParams,
    DetectorModel, EventWindow, StreamEvent, TrainConfig, Verdict, WindowConfig,
};
use crate::embedding::{EmbeddingStore, TemplateEmbedder};
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, Objective};
use crate::parser::{HeaderRule, ParsedEvent, ParserConfig, ParserState, RawLogLine, TemplateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSettings {
    pub parser: ParserConfig,
    pub window: WindowConfig,
    pub hidden_size: usize,
    pub train: TrainConfig,
    pub decision: DecisionParams,
}

impl DetectorSettings {
    pub fn new(objective: Objective) -> Self {
        DetectorSettings {
            parser: ParserConfig::default(),
            window: WindowConfig::default(),
            hidden_size: 64,
            train: TrainConfig::default(),
            decision: DecisionParams::new(objective),
        }
    }

    pub fn objective(&self) -> Objective {
        self.decision.mode
    }
}

/// Numbers lines from 1 and drops those left empty by the header rule.
pub fn raw_lines<S: AsRef<str>>(lines: &[S], header: &HeaderRule) -> Vec<RawLogLine> {
    lines
        .iter()
        .enumerate()
        .filter_map(|(i, l)| RawLogLine::from_text(i as u64 + 1, l.as_ref(), header))
        .collect()
}

pub fn parse_corpus(
    lines: &[RawLogLine],
    config: &ParserConfig,
) -> Result<(ParserState, Vec<ParsedEvent>)> {
    let mut parser = ParserState::new(config.clone())?;
    let events = parser.parse_stream(lines);
    Ok((parser, events))
}

/// Embeds the parser's current templates.
pub fn embed_templates<E: TemplateEmbedder + ?Sized>(
    parser: &ParserState,
    embedder: &E,
) -> Result<EmbeddingStore> {
    let rendered: Vec<(TemplateId, String)> =
        parser.templates().map(|t| (t.id, t.render())).collect();
    EmbeddingStore::from_templates(
        rendered.iter().map(|(id, s)| (*id, s.as_str())),
        embedder,
        parser.snapshot_hash(),
    )
}

pub fn event_vectors(
    events: &[ParsedEvent],
    store: &EmbeddingStore,
) -> Result<Vec<(TemplateId, Vec<f64>)>> {
    events
        .iter()
        .map(|e| {
            let v = store
                .vector(e.template_id)
                .ok_or(Error::UnknownTemplate(e.template_id))?;
            Ok((e.template_id, v.to_vec()))
        })
        .collect()
}

pub fn model_config(settings: &DetectorSettings, store: &EmbeddingStore) -> ModelConfig {
    ModelConfig {
        embed_dim: store.dim(),
        hidden_size: settings.hidden_size,
        window: settings.window.delta,
        num_classes: store.len(),
        objective: settings.objective(),
    }
}

/// Everything needed to score new lines.
#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub parser: ParserState,
    pub store: EmbeddingStore,
    pub model: DetectorModel,
    pub decision: DecisionParams,
    pub loss_curve: Vec<f64>,
    pub windows: Vec<EventWindow>,
}

/// Learns templates, vectors and the sequence model from normal lines and
/// calibrates the regression threshold on the training windows.
pub fn train_detector<E: TemplateEmbedder + ?Sized>(
    lines: &[RawLogLine],
    settings: &DetectorSettings,
    embedder: &E,
) -> Result<TrainedDetector> {
    let (parser, events) =
        parse_corpus(lines, &settings.parser).map_err(|e| e.in_stage("parse"))?;
    let store = embed_templates(&parser, embedder).map_err(|e| e.in_stage("embed"))?;
    let vectors = event_vectors(&events, &store).map_err(|e| e.in_stage("embed"))?;
    let windows = make_windows(&vectors, &settings.window).map_err(|e| e.in_stage("window"))?;
    if windows.is_empty() {
        return Err(Error::TooFewEvents {
            needed: settings.window.delta + 1,
            got: vectors.len(),
        }
        .in_stage("window"));
    }
    let config = model_config(settings, &store);
    let mut model = DetectorModel::new(config, ClassMap::new(store.ids()), settings.train.seed)
        .map_err(|e| e.in_stage("train"))?;
    let loss_curve = crate::detector::fit(&mut model, &windows, &settings.train)
        .map_err(|e| e.in_stage("train"))?;
    let mut decision = settings.decision.clone();
    if decision.mode == Objective::Regression {
        decision.threshold = calibrate_regression_threshold(&model, &windows, decision.q)
            .map_err(|e| e.in_stage("calibrate"))?;
    }
    Ok(TrainedDetector {
        parser,
        store,
        model,
        decision,
        loss_curve,
        windows,
    })
}

/// Resolves lines against a frozen parser. Lines that join a known template
/// keep its id and vector; anything else is parsed on a scratch copy of the
/// parser and its template string is embedded afresh.
pub fn stream_events<E: TemplateEmbedder + ?Sized>(
    lines: &[RawLogLine],
    parser: &ParserState,
    store: &EmbeddingStore,
    embedder: &E,
) -> Result<Vec<StreamEvent>> {
    let mut scratch: Option<ParserState> = None;
    lines
        .iter()
        .map(|line| {
            if let Some(id) = parser
                .match_line(&line.content)
                .filter(|id| store.contains(*id))
            {
                return Ok(StreamEvent {
                    line_no: line.line_no,
                    template_id: Some(id),
                    embedding: store.vector(id).expect("checked").to_vec(),
                });
            }
            let scratch = scratch.get_or_insert_with(|| parser.clone());
            let event = scratch.parse_line(line);
            let template = scratch
                .template(event.template_id)
                .expect("just parsed")
                .render();
            Ok(StreamEvent {
                line_no: line.line_no,
                template_id: None,
                embedding: embedder.embed_template(&template)?.into_inner(),
            })
        })
        .collect()
}

impl TrainedDetector {
    pub fn stream_events<E: TemplateEmbedder + ?Sized>(
        &self,
        lines: &[RawLogLine],
        embedder: &E,
    ) -> Result<Vec<StreamEvent>> {
        stream_events(lines, &self.parser, &self.store, embedder)
    }

    pub fn detect<E: TemplateEmbedder + ?Sized>(
        &self,
        lines: &[RawLogLine],
        embedder: &E,
    ) -> Result<Vec<Verdict>> {
        let events = self
            .stream_events(lines, embedder)
            .map_err(|e| e.in_stage("embed"))?;
        detect_stream(&self.model, &events, &self.decision, &self.store)
            .map_err(|e| e.in_stage("detect"))
    }
}
