use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use logvec_core::alteration::{
    corpus_vocabulary, synthesize_dataset_b, write_provenance, AlterationConfig, AlteredCorpusSpec,
};
use logvec_core::detector::{
    calibrate_regression_threshold, make_windows, read_labels, read_verdicts, render_verdicts,
    write_labels, DecisionParams, DetectorModel, Label,
};
use logvec_core::embedding::{load_store, save_store, EmbeddingStore, FallbackEmbedder};
use logvec_core::eval::synth::{generate, SynthConfig};
use logvec_core::eval::{
    alter_messages, alter_segments, compute_metrics, detector_settings, header_rule,
    label_by_identifiers, label_verdicts, make_embedder, run_experiment, ExperimentSpec,
    LabeledCorpus,
};
use logvec_core::nn::Objective;
use logvec_core::parser::{
    read_templates, template_set_hash, write_events, write_templates, ParserState,
};
use logvec_core::pipeline::{parse_corpus, raw_lines, train_detector, TrainedDetector};
use logvec_core::transfer::{run_transfer_experiment, TransferConfig};
use serde::{Deserialize, Serialize};

use crate::{Cli, Command};

const DETECTOR_FILE: &str = "detector.json";
const PARSER_FILE: &str = "parser.json";
const TEMPLATES_FILE: &str = "templates.tsv";
const STORE_FILE: &str = "embeddings.logvec";
const MODEL_FILE: &str = "model.ckpt";

/// Everything in a model directory besides the binary artifacts.
#[derive(Debug, Serialize, Deserialize)]
struct DetectorMeta {
    spec: ExperimentSpec,
    decision: DecisionParams,
    loss_curve: Vec<f64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Parse {
            input,
            out,
            templates,
            state,
            config,
        } => parse(
            &input,
            &out,
            templates,
            state.as_deref(),
            &load_spec(config.as_deref(), seed)?,
        ),
        Command::EmbedFallback {
            templates,
            dim,
            out,
        } => embed_fallback(&templates, dim, seed.unwrap_or(0), &out),
        Command::Train {
            input,
            objective,
            config,
            out,
        } => train(
            &input,
            objective,
            &load_spec(config.as_deref(), seed)?,
            &out,
        ),
        Command::Calibrate { model, input, q } => calibrate(&model, &input, q),
        Command::Detect { model, input, out } => detect(&model, &input, out.as_deref()),
        Command::Alter {
            input,
            out,
            kind,
            intensity,
            fraction,
            block_len,
            segment,
            labels,
            label,
            labels_out,
            severity,
            provenance,
        } => {
            let seed = seed.unwrap_or(0);
            let lines = read_lines(&input)?;
            if let Some(severity) = severity {
                let (b, records) = synthesize_dataset_b(
                    &lines,
                    &AlteredCorpusSpec::new(fraction, severity, seed),
                )?;
                write_lines(&out, &b)?;
                if let Some(p) = provenance {
                    write_provenance(&p, &records)?;
                }
                println!("altered {} of {} lines", records.len(), lines.len());
                return Ok(());
            }
            let kind = kind.expect("clap requires kind without severity");
            let corpus = LabeledCorpus {
                train: Vec::new(),
                labels: labels
                    .as_deref()
                    .map(read_labels)
                    .transpose()?
                    .unwrap_or_default(),
                test: lines,
            };
            let (altered_lines, altered_labels, altered) = if kind.is_semantic() {
                let vocab = corpus_vocabulary(&corpus.test);
                alter_messages(&corpus, &vocab, kind, intensity, fraction, label, seed)?
            } else {
                let cfg = AlterationConfig {
                    kind,
                    intensity,
                    block_len,
                    seed,
                };
                alter_segments(&corpus, &cfg, segment, fraction, label)?
            };
            write_lines(&out, &altered_lines)?;
            if let Some(p) = labels_out {
                write_labels(&altered_labels, &p)?;
            }
            println!("altered {} of {} lines", altered.len(), altered_lines.len());
            Ok(())
        }
        Command::Transfer {
            train,
            target,
            labels,
            config,
            out,
        } => transfer(
            &train,
            &target,
            labels.as_deref(),
            &load_spec(config.as_deref(), seed)?,
            out.as_deref(),
        ),
        Command::Eval {
            verdicts,
            labels,
            out,
        } => {
            let verdicts = read_verdicts(&verdicts)?;
            let labels = read_labels(&labels)?;
            let m = compute_metrics(&label_verdicts(&verdicts, &labels))?;
            println!(
                "precision {:.4} recall {:.4} f1 {:.4}",
                m.precision, m.recall, m.f1
            );
            emit(out.as_deref(), &serde_json::to_string_pretty(&m)?)
        }
        Command::Experiment {
            spec,
            out,
            verdicts_dir,
        } => {
            let spec = load_spec(Some(&spec), seed)?;
            if let Some(dir) = &verdicts_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let report = run_experiment(&spec, verdicts_dir.as_deref())?;
            match out {
                Some(path) => fs::write(&path, report.to_json())
                    .with_context(|| format!("writing {}", path.display())),
                None => {
                    print!("{}", report.to_json());
                    Ok(())
                }
            }
        }
        Command::Synth {
            out,
            train_events,
            test_events,
            noise_pct,
            anomaly_pct,
        } => {
            let corpus = generate(&SynthConfig {
                train_events,
                test_events,
                noise_pct,
                anomaly_pct,
                seed: seed.unwrap_or(0),
            })?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_lines(&out.join("train.log"), &corpus.train)?;
            write_lines(&out.join("test.log"), &corpus.test)?;
            write_labels(&corpus.labels, out.join("labels.tsv"))?;
            let anomalies = corpus
                .labels
                .values()
                .filter(|l| **l == Label::Anomaly)
                .count();
            println!(
                "{} train lines, {} test lines, {anomalies} anomalous",
                corpus.train.len(),
                corpus.test.len()
            );
            Ok(())
        }
        Command::Ingest { input, ids, out } => {
            let lines = read_lines(&input)?;
            let ids = read_lines(&ids)?;
            let labels = label_by_identifiers(&lines, &ids);
            write_labels(&labels, &out)?;
            let anomalies = labels.values().filter(|l| **l == Label::Anomaly).count();
            println!("{anomalies} of {} lines anomalous", labels.len());
            Ok(())
        }
    }
}

/// Reads a key=value settings file; `--seed` replaces `experiment.seed`.
fn load_spec(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentSpec> {
    let mut pairs = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentSpec::parse_pairs(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => BTreeMap::new(),
    };
    if let Some(seed) = seed {
        pairs.insert("experiment.seed".into(), seed.to_string());
    }
    Ok(ExperimentSpec::from_pairs(&pairs)?)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(String::from).collect())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    if let Some(path) = out {
        fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn parse(
    input: &Path,
    out: &Path,
    templates: Option<PathBuf>,
    state: Option<&Path>,
    spec: &ExperimentSpec,
) -> Result<()> {
    let lines = raw_lines(&read_lines(input)?, &header_rule(spec));
    let settings = detector_settings(spec, Objective::Classification);
    let (parser, events) = parse_corpus(&lines, &settings.parser)?;
    let templates = templates.unwrap_or_else(|| {
        let stem = out
            .file_stem()
            .map_or("events".into(), |s| s.to_string_lossy().into_owned());
        out.with_file_name(format!("{stem}.templates.tsv"))
    });
    write_events(&events, out)?;
    write_templates(&parser, &templates)?;
    if let Some(p) = state {
        parser.save(p)?;
    }
    println!("{} events, {} templates", events.len(), parser.len());
    Ok(())
}

fn embed_fallback(templates: &Path, dim: usize, seed: u64, out: &Path) -> Result<()> {
    let rows = read_templates(templates)?;
    let hash = template_set_hash(rows.iter().map(|(id, t)| (*id, t.as_str())));
    let embedder = FallbackEmbedder::new(dim, seed)?;
    let store = EmbeddingStore::from_templates(
        rows.iter().map(|(id, t)| (*id, t.as_str())),
        &embedder,
        hash,
    )?;
    save_store(&store, out)?;
    println!("{} vectors of dimension {dim}", store.len());
    Ok(())
}

fn train(input: &Path, objective: Objective, spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let lines = raw_lines(&read_lines(input)?, &header_rule(spec));
    let embedder = make_embedder(spec)?;
    let detector = train_detector(
        &lines,
        &detector_settings(spec, objective),
        embedder.as_ref(),
    )?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    detector.parser.save(out.join(PARSER_FILE))?;
    write_templates(&detector.parser, out.join(TEMPLATES_FILE))?;
    save_store(&detector.store, out.join(STORE_FILE))?;
    detector.model.save(out.join(MODEL_FILE))?;
    let meta = DetectorMeta {
        spec: spec.clone(),
        decision: detector.decision.clone(),
        loss_curve: detector.loss_curve.clone(),
    };
    write_meta(out, &meta)?;
    println!(
        "{} templates, {} windows, final loss {:.6}, threshold {}",
        detector.store.len(),
        detector.windows.len(),
        detector.loss_curve.last().copied().unwrap_or(f64::NAN),
        detector.decision.threshold
    );
    Ok(())
}

fn write_meta(dir: &Path, meta: &DetectorMeta) -> Result<()> {
    let path = dir.join(DETECTOR_FILE);
    fs::write(&path, serde_json::to_string_pretty(meta)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn load_detector(dir: &Path) -> Result<(DetectorMeta, TrainedDetector)> {
    let path = dir.join(DETECTOR_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let meta: DetectorMeta =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let detector = TrainedDetector {
        parser: ParserState::load(dir.join(PARSER_FILE))?,
        store: load_store(dir.join(STORE_FILE))?,
        model: DetectorModel::load(dir.join(MODEL_FILE))?,
        decision: meta.decision.clone(),
        loss_curve: meta.loss_curve.clone(),
        windows: Vec::new(),
    };
    Ok((meta, detector))
}

fn calibrate(dir: &Path, input: &Path, q: Option<f64>) -> Result<()> {
    let (mut meta, detector) = load_detector(dir)?;
    if detector.decision.mode != Objective::Regression {
        bail!("only regression detectors have a threshold to calibrate");
    }
    let lines = raw_lines(&read_lines(input)?, &header_rule(&meta.spec));
    let embedder = make_embedder(&meta.spec)?;
    // lines outside the known templates carry no class and are left out
    let known: Vec<_> = detector
        .stream_events(&lines, embedder.as_ref())?
        .into_iter()
        .filter_map(|e| e.template_id.map(|id| (id, e.embedding)))
        .collect();
    let windows = make_windows(
        &known,
        &detector_settings(&meta.spec, Objective::Regression).window,
    )?;
    let q = q.unwrap_or(meta.decision.q);
    meta.decision.q = q;
    meta.decision.threshold = calibrate_regression_threshold(&detector.model, &windows, q)?;
    write_meta(dir, &meta)?;
    println!(
        "threshold {} at q={q} over {} windows",
        meta.decision.threshold,
        windows.len()
    );
    Ok(())
}

fn detect(dir: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let (meta, detector) = load_detector(dir)?;
    let lines = raw_lines(&read_lines(input)?, &header_rule(&meta.spec));
    let embedder = make_embedder(&meta.spec)?;
    let verdicts = detector.detect(&lines, embedder.as_ref())?;
    let text = render_verdicts(&verdicts);
    match out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            let flagged = verdicts
                .iter()
                .filter(|v| v.label == Label::Anomaly)
                .count();
            println!("{flagged} of {} events flagged", verdicts.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn transfer(
    train: &Path,
    target: &Path,
    labels: Option<&Path>,
    spec: &ExperimentSpec,
    out: Option<&Path>,
) -> Result<()> {
    let header = header_rule(spec);
    let lines_a = raw_lines(&read_lines(train)?, &header);
    let lines_b = raw_lines(&read_lines(target)?, &header);
    let labels = labels.map(read_labels).transpose()?.unwrap_or_default();
    let settings: Vec<_> = spec
        .objectives
        .iter()
        .map(|o| detector_settings(spec, *o))
        .collect();
    let cfg = TransferConfig {
        pretrain_epochs: spec.transfer_pretrain_epochs,
        few_shot_fraction: spec.transfer_few_shot_fraction,
        few_shot_epochs: spec.transfer_few_shot_epochs,
        zero_shot_only: spec.transfer_zero_shot_only,
    };
    let embedder = make_embedder(spec)?;
    let report = run_transfer_experiment(
        &lines_a,
        &lines_b,
        &labels,
        &settings,
        &cfg,
        embedder.as_ref(),
    )?;
    for r in &report.results {
        let tuned = r
            .fine_tuned
            .as_ref()
            .map_or("-".to_string(), |t| format!("{:.4}", t.metrics.f1));
        println!(
            "{}: zero-shot F1 {:.4}, fine-tuned F1 {tuned}",
            r.objective, r.zero_shot.metrics.f1
        );
    }
    emit(out, &serde_json::to_string_pretty(&report)?)
}
