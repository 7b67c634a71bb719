//! Acceptance gate. Every criterion prints one PASS or FAIL line; the
//! process exits nonzero when any of them fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::grammar::{corpus, expected, raw_lines, GRAMMAR};
use common::{
    config, max_relative_gradient_error, nearest_rank_oracle, random_window, reference_bilstm,
};
use logvec_core::detector::{calibrate_regression_threshold, window_errors};
use logvec_core::eval::{
    detector_settings, header_rule, load_corpus, make_embedder, run_experiment, ExperimentSpec,
    Metrics, Report,
};
use logvec_core::nn::{bilstm_forward, BiLstmParams, Objective};
use logvec_core::parser::{ParserConfig, ParserState};
use logvec_core::pipeline::{self, train_detector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spec(text: &str) -> ExperimentSpec {
    ExperimentSpec::parse(text).expect("acceptance spec parses")
}

fn parser_recovery() -> Outcome {
    let lines = corpus(500, 11);
    let raw = raw_lines(&lines);
    let started = Instant::now();
    let mut parser = ParserState::new(ParserConfig::default()).map_err(|e| e.to_string())?;
    let events = parser.parse_stream(&raw);
    let elapsed = started.elapsed();

    let mut assigned: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for ((truth, _), e) in lines.iter().zip(&events) {
        assigned.entry(*truth).or_default().insert(e.template_id);
    }
    let distinct: BTreeSet<u32> = assigned.values().flatten().copied().collect();
    let one_to_one = assigned.values().all(|s| s.len() == 1) && distinct.len() == GRAMMAR.len();
    let rendered: BTreeSet<String> = parser.templates().map(|t| t.render()).collect();
    let wanted: BTreeSet<String> = GRAMMAR.iter().map(|t| expected(t)).collect();
    check(
        parser.len() == 20 && one_to_one && rendered == wanted && elapsed < Duration::from_secs(5),
        format!(
            "{} templates from {} lines, assignment {}, {:.2?}",
            parser.len(),
            raw.len(),
            if one_to_one { "exact" } else { "wrong" },
            elapsed
        ),
    )
}

fn gradient_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    for objective in [Objective::Classification, Objective::Regression] {
        for seed in 0..3 {
            worst = worst.max(max_relative_gradient_error(objective, seed, 1e-4));
        }
    }
    check(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over both losses"),
    )
}

fn forward_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for draw in 0..50 {
        let p = BiLstmParams::init(&config(Objective::Classification), 1000 + draw)
            .map_err(|e| e.to_string())?;
        let w = random_window(&mut rng, 3, 8);
        let z = bilstm_forward(&p, &w).map_err(|e| e.to_string())?;
        for (a, b) in z.iter().zip(&reference_bilstm(&p, &w)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(
        worst <= 1e-10,
        format!("max deviation {worst:.2e} over 50 draws"),
    )
}

fn percentile_semantics() -> Outcome {
    let spec = ExperimentSpec::default();
    let corpus = load_corpus(&spec).map_err(|e| e.to_string())?;
    let embedder = make_embedder(&spec).map_err(|e| e.to_string())?;
    let train = pipeline::raw_lines(&corpus.train, &header_rule(&spec));
    let detector = train_detector(
        &train,
        &detector_settings(&spec, Objective::Regression),
        embedder.as_ref(),
    )
    .map_err(|e| e.to_string())?;
    let errors = window_errors(&detector.model, &detector.windows).map_err(|e| e.to_string())?;
    let n = errors.len() as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [90u32, 98, 99, 100] {
        let t = calibrate_regression_threshold(&detector.model, &detector.windows, q as f64)
            .map_err(|e| e.to_string())?;
        let flagged = errors.iter().filter(|&&e| e > t).count() as f64 / n;
        ok &= t == nearest_rank_oracle(&errors, q) && flagged <= (100 - q) as f64 / 100.0 + 1.0 / n;
        parts.push(format!("q={q}: {:.4}", flagged));
    }
    check(
        ok,
        format!("{} windows, flagged {}", errors.len(), parts.join(", ")),
    )
}

fn f1_of(report: &Report, objective: Objective) -> f64 {
    report
        .results
        .iter()
        .find(|r| r.objective == objective)
        .map_or(f64::NAN, |r| r.metrics.f1)
}

fn end_to_end(report: &Report, elapsed: Duration) -> Outcome {
    let c = f1_of(report, Objective::Classification);
    let r = f1_of(report, Objective::Regression);
    check(
        c >= 0.9 && r >= 0.8 && elapsed < Duration::from_secs(120),
        format!(
            "classification F1 {c:.3}, regression F1 {r:.3}, {:.1?}",
            elapsed
        ),
    )
}

fn robustness(report: &Report) -> Outcome {
    let mut ok = !report.results.is_empty();
    let mut parts = Vec::new();
    for r in &report.results {
        let Some(first) = r.sweep.iter().find(|p| p.intensity == 1) else {
            return Err(format!("{}: no l=1 point", r.objective));
        };
        let rise = first.mean_false_positive_rate - r.false_positive_rate;
        let rates: Vec<f64> = r.sweep.iter().map(|p| p.mean_altered_flag_rate).collect();
        let monotone = rates.windows(2).all(|w| w[1] >= w[0]);
        ok &= rise <= 0.05 && monotone;
        parts.push(format!(
            "{}: FPR +{:.1}pp, flag rate {}",
            r.objective,
            100.0 * rise,
            rates
                .iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join("/")
        ));
    }
    check(ok, parts.join("; "))
}

fn transfer(report: &Report) -> Outcome {
    let Some(t) = &report.transfer else {
        return Err("no transfer section".into());
    };
    let mut ok = t.results.len() == 2;
    let mut parts = Vec::new();
    for r in &t.results {
        let reduction = r.loss_reduction.unwrap_or(f64::NAN);
        let tuned = r.fine_tuned.as_ref().map_or(f64::NAN, |f| f.metrics.f1);
        ok &= reduction >= 0.2 && tuned >= r.zero_shot.metrics.f1;
        parts.push(format!(
            "{}: loss -{:.0}%, F1 {:.3} -> {:.3}",
            r.objective,
            100.0 * reduction,
            r.zero_shot.metrics.f1,
            tuned
        ));
    }
    check(ok, parts.join("; "))
}

fn all_metrics(report: &Report) -> Vec<Metrics> {
    let mut out = Vec::new();
    for r in &report.results {
        out.push(r.metrics);
        out.extend(
            r.sweep
                .iter()
                .flat_map(|p| p.runs.iter().map(|run| run.metrics)),
        );
    }
    if let Some(t) = &report.transfer {
        for r in &t.results {
            out.push(r.zero_shot.metrics);
            out.extend(r.fine_tuned.iter().map(|f| f.metrics));
        }
    }
    out
}

fn metrics_identity(reports: &[&Report]) -> Outcome {
    let all: Vec<Metrics> = reports.iter().flat_map(|r| all_metrics(r)).collect();
    let bad = all
        .iter()
        .filter(|m| m.precision + m.recall > 0.0)
        .filter(|m| (m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() > 0.005)
        .count();
    let row = Metrics::from_counts(88, 12, 0, 0);
    let shown = format!("{:.2} {:.2} {:.2}", row.precision, row.recall, row.f1);
    check(
        bad == 0 && shown == "0.88 1.00 0.94",
        format!("{} triples, {bad} off; 88/12/0 gives {shown}", all.len()),
    )
}

fn determinism(first: &Report, spec: &ExperimentSpec) -> Outcome {
    let again = run_experiment(spec, None).map_err(|e| e.to_string())?;
    let small = self::spec(
        "experiment.type=semantic\nexperiment.seed=3\nsynth.train_events=800\nsynth.test_events=800\n\
         train.epochs=3\nalter.kind=SemDelete\nalter.label=anomaly\nalter.seeds=2\n",
    );
    let a = run_experiment(&small, None).map_err(|e| e.to_string())?;
    let b = run_experiment(&small, None).map_err(|e| e.to_string())?;
    let same = first.to_json() == again.to_json() && a.to_json() == b.to_json();
    check(
        same,
        format!(
            "detection and semantic reports {}",
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report_line = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  {name:<22} {detail}"),
        Err(detail) => {
            failures += 1;
            println!("FAIL  {name:<22} {detail}");
        }
    };

    report_line("parser recovery", parser_recovery());
    report_line("gradient fidelity", gradient_fidelity());
    report_line("forward oracle", forward_oracle());
    report_line("percentile semantics", percentile_semantics());

    let detection_spec = ExperimentSpec::default();
    let started = Instant::now();
    let detection = run_experiment(&detection_spec, None);
    let elapsed = started.elapsed();

    let semantic = run_experiment(
        &spec("experiment.type=semantic\nalter.kind=SemSwap\nalter.label=normal\nalter.intensities=1,2,4\nalter.seeds=5\nalter.fraction=10\n"),
        None,
    );
    let transfer_report = run_experiment(
        &spec("experiment.type=transfer\ntransfer.severity=different\ntransfer.fraction=15\ntransfer.few_shot_epochs=20\n"),
        None,
    );

    match (&detection, &semantic, &transfer_report) {
        (Ok(d), Ok(s), Ok(t)) => {
            report_line("end-to-end detection", end_to_end(d, elapsed));
            report_line("robustness", robustness(s));
            report_line("transfer", transfer(t));
            report_line("metrics identity", metrics_identity(&[d, s, t]));
            report_line("determinism", determinism(d, &detection_spec));
        }
        _ => {
            for (name, r) in [
                ("experiment run", &detection),
                ("semantic run", &semantic),
                ("transfer run", &transfer_report),
            ] {
                if let Err(e) = r {
                    report_line(name, Err(e.to_string()));
                }
            }
        }
    }

    println!("{failures} criteria failed");
    if failures > 0 {
        std::process::exit(1);
    }
}
