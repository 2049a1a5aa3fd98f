use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use prevalence_core::bayes::{self, Priors};
use prevalence_core::calibration::{self, CalibrationResult};
use prevalence_core::naive::{self, NaiveEstimate};
use prevalence_core::plot::series_svg;
use prevalence_core::study::{self, SeriesOptions};
use prevalence_core::synthetic::{self, CommunityScenario};
use prevalence_core::textmodel::{self, CvReport, TrainOptions};
use prevalence_core::{Corpus, Error, LinearModel, PosteriorSummary, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// Creates the output directory and archives the resolved config in it.
pub fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_json(&cfg.out.join("run_config.json"), cfg)
}

fn train_options(cfg: &RunConfig) -> TrainOptions {
    TrainOptions {
        weighting: cfg.weighting,
        seed: cfg.seed,
        ..TrainOptions::default()
    }
}

#[derive(Serialize)]
struct IngestReport<'a> {
    input: &'a Path,
    input_reviews: usize,
    after_filter: usize,
    written: usize,
    min_chars: usize,
    rating: Option<u8>,
    sample: Option<usize>,
    label_counts: LabelCounts,
}

#[derive(Serialize)]
struct LabelCounts {
    truthful: usize,
    deceptive: usize,
    unlabeled: usize,
}

fn label_counts(c: &Corpus) -> LabelCounts {
    let (truthful, deceptive) = c.label_counts();
    LabelCounts {
        truthful,
        deceptive,
        unlabeled: c.len() - truthful - deceptive,
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let input = cfg.require(&cfg.input, "input")?;
    let corpus = Corpus::load_jsonl(input)?;
    let filtered = corpus.filter_reviews(cfg.ingest.min_chars, cfg.ingest.rating);
    let kept = match cfg.ingest.sample {
        Some(n) => filtered.sample_uniform(n, cfg.seed)?,
        None => filtered.clone(),
    };
    kept.save_jsonl(cfg.out.join("corpus.jsonl"))?;
    write_json(
        &cfg.out.join("ingest_report.json"),
        &IngestReport {
            input,
            input_reviews: corpus.len(),
            after_filter: filtered.len(),
            written: kept.len(),
            min_chars: cfg.ingest.min_chars,
            rating: cfg.ingest.rating,
            sample: cfg.ingest.sample,
            label_counts: label_counts(&kept),
        },
    )
}

#[derive(Serialize)]
struct TrainReport {
    selected_c: f64,
    /// Mean stratified-CV balanced accuracy per grid value.
    grid_scores: Vec<(f64, f64)>,
    nested: CvReport,
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let corpus = Corpus::load_jsonl(cfg.require(&cfg.train, "train")?)?;
    let opts = train_options(cfg);
    let (c, grid_scores) =
        textmodel::select_c_with(&corpus, &cfg.c_grid, cfg.cv_folds, cfg.seed, &opts)?;
    let model = textmodel::train_with(&corpus, c, &opts)?;
    let nested = textmodel::nested_cv_report(&corpus, &cfg.c_grid, cfg.cv_folds, cfg.seed, &opts)?;
    model.save(cfg.out.join("model.json"))?;
    eprintln!(
        "C = {c}; nested CV mean balanced accuracy {:.4}",
        nested.mean_balanced_accuracy
    );
    write_json(
        &cfg.out.join("cv_report.json"),
        &TrainReport {
            selected_c: c,
            grid_scores,
            nested,
        },
    )
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let train = Corpus::load_jsonl(cfg.require(&cfg.train, "train")?)?;
    let dev = Corpus::load_jsonl(cfg.require(&cfg.dev, "dev")?)?;
    let model = LinearModel::load(cfg.require(&cfg.model, "model")?)?;
    let cal = calibration::calibrate(&train, &dev, &model, &train_options(cfg))?;
    cal.save(cfg.out.join("calibration.json"))?;
    eprintln!("eta = {:.4}, theta = {:.4}", cal.eta, cal.theta);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NaiveOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<NaiveEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Estimates<'a> {
    n_test: usize,
    pi_f: f64,
    naive: NaiveOutcome,
    bayes: &'a PosteriorSummary,
    assumptions: &'a [String],
}

pub fn estimate(cfg: &RunConfig) -> Result<()> {
    let test = Corpus::load_jsonl(cfg.require(&cfg.test, "test")?)?;
    let model = LinearModel::load(cfg.require(&cfg.model, "model")?)?;
    let cal = CalibrationResult::load(cfg.require(&cfg.calibration, "calibration")?)?;
    if test.is_empty() {
        return Err(Error::Invalid("test corpus is empty".into()));
    }
    let outputs: Vec<bool> = model
        .predict_corpus(&test)
        .iter()
        .map(|l| l.is_deceptive())
        .collect();
    let pi_f = naive::positive_rate(&outputs)?;
    let naive = match naive::naive_estimate(pi_f, cal.eta, cal.theta) {
        Ok(e) => NaiveOutcome {
            estimate: Some(e),
            error: None,
        },
        Err(e) => NaiveOutcome {
            estimate: None,
            error: Some(e.to_string()),
        },
    };
    let priors = Priors {
        alpha: cfg.gibbs.alpha,
        beta: cal.beta,
        gamma: cal.gamma,
    };
    let post = bayes::estimate(&outputs, &priors, &cfg.gibbs())?;

    let mut predictions = String::from("id,f\n");
    for (r, f) in test.iter().zip(&outputs) {
        let _ = writeln!(predictions, "{},{}", r.id, *f as u8);
    }
    write(&cfg.out.join("predictions.csv"), predictions)?;
    let mut samples = Vec::new();
    post.write_samples_csv(&mut samples)
        .map_err(|e| Error::io(cfg.out.join("posterior_samples.csv"), e))?;
    write(&cfg.out.join("posterior_samples.csv"), samples)?;
    write_json(
        &cfg.out.join("estimates.json"),
        &Estimates {
            n_test: test.len(),
            pi_f,
            naive,
            bayes: &post,
            assumptions: &cal.assumptions,
        },
    )?;
    eprintln!(
        "pi_f = {pi_f:.4}; pi_bayes = {:.4} [{:.4}, {:.4}]",
        post.pi_mean, post.pi_ci95.0, post.pi_ci95.1
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationManifest<'a> {
    seed: u64,
    params: &'a synthetic::SimulationParams,
    files: Vec<String>,
    test_deceptive: usize,
    draw_positive_outputs: usize,
    dev_deceptive_hidden: usize,
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let params = &cfg.simulate.params;
    let sim = synthetic::simulate(params, cfg.seed)?;
    let mut files = vec![
        "train.jsonl".to_string(),
        "dev.jsonl".into(),
        "test.jsonl".into(),
        "generative_draw.csv".into(),
    ];
    sim.train.save_jsonl(cfg.out.join("train.jsonl"))?;
    sim.dev.save_jsonl(cfg.out.join("dev.jsonl"))?;
    sim.test.save_jsonl(cfg.out.join("test.jsonl"))?;
    let mut draw = String::from("id,y,f\n");
    for ((r, y), f) in sim.test.iter().zip(&sim.labels).zip(&sim.outputs) {
        let _ = writeln!(draw, "{},{},{}", r.id, *y as u8, *f as u8);
    }
    write(&cfg.out.join("generative_draw.csv"), draw)?;

    if cfg.simulate.communities {
        let scenarios = [
            CommunityScenario {
                vocab_overlap: params.vocab_overlap,
                ..CommunityScenario::two_tier("Yelp", cfg.seed ^ 0x59)
            },
            CommunityScenario {
                vocab_overlap: params.vocab_overlap,
                ..CommunityScenario::flat("Orbitz", 0.01, 1_500, cfg.seed ^ 0x4f)
            },
        ];
        for s in scenarios {
            let name = format!("community_{}.jsonl", slug(&s.community));
            s.generate()?.save_jsonl(cfg.out.join(&name))?;
            files.push(name);
        }
    }
    write_json(
        &cfg.out.join("simulation.json"),
        &SimulationManifest {
            seed: cfg.seed,
            params,
            files,
            test_deceptive: sim.labels.iter().filter(|&&y| y).count(),
            draw_positive_outputs: sim.outputs.iter().filter(|&&f| f).count(),
            dev_deceptive_hidden: sim.dev.label_counts().1,
        },
    )
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

pub fn study(cfg: &RunConfig) -> Result<()> {
    if cfg.communities.is_empty() {
        return Err(Error::Invalid(
            "study needs at least one --community corpus".into(),
        ));
    }
    let model = LinearModel::load(cfg.require(&cfg.model, "model")?)?;
    let cal = CalibrationResult::load(cfg.require(&cfg.calibration, "calibration")?)?;
    let profiles = match &cfg.profiles {
        Some(p) => study::load_profiles(p)?,
        None => study::default_profiles(),
    };
    let opts = SeriesOptions {
        granularity: cfg.granularity,
        cumulative: cfg.cumulative,
        min_reviews: cfg.min_reviews,
        gibbs: cfg.gibbs(),
    };
    let mut reviews = Vec::new();
    let mut warnings = Vec::new();
    for path in &cfg.communities {
        let c = Corpus::load_jsonl(path)?;
        if c.is_empty() {
            let w = format!("{}: empty community corpus, skipped", path.display());
            eprintln!("warning: {w}");
            warnings.push(w);
        }
        reviews.extend(c.into_reviews());
    }
    let all = Corpus::new(reviews, "study input")?;

    let mut series_set = Vec::new();
    for (name, corpus) in all.group_by_community() {
        let outputs = study::classify(&corpus, &model);
        for &k in &cfg.reviewer_k {
            let s = study::run_series_with_outputs(&corpus, &outputs, &cal, &opts, k)?;
            let stem = format!("series_{}_k{k}", slug(&name));
            write(&cfg.out.join(format!("{stem}.csv")), s.to_csv())?;
            let svg = series_svg(
                &format!("{name}, reviewer threshold k={k}"),
                std::slice::from_ref(&s),
            );
            write(&cfg.out.join(format!("{stem}.svg")), svg)?;
            for b in &s.skipped {
                warnings.push(format!(
                    "{name} k={k}: bucket {} has {} reviews, not estimated",
                    b.start.format("%Y-%m-%d"),
                    b.n_reviews
                ));
            }
            series_set.push(s);
        }
    }
    let mut report = study::compare_hypotheses(&series_set, &profiles);
    report.notes.extend(warnings);
    write_json(&cfg.out.join("hypothesis_report.json"), &report)?;
    write_json(&cfg.out.join("series.json"), &series_set)
}

pub fn report(cfg: &RunConfig, from: &[PathBuf]) -> Result<()> {
    let mut md = String::from("# Prevalence report\n");
    let mut found = 0;
    for dir in from {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            ));
        }
        let est = dir.join("estimates.json");
        if est.exists() {
            found += 1;
            let v: serde_json::Value = read_json(&est)?;
            let _ = writeln!(md, "\n## Estimate ({})\n", dir.display());
            let _ = writeln!(md, "| quantity | value |\n|---|---|");
            let _ = writeln!(md, "| test reviews | {} |", v["n_test"]);
            let _ = writeln!(md, "| pi_f | {} |", fmt(&v["pi_f"]));
            match v["naive"]["estimate"].get("pi_naive") {
                Some(p) => {
                    let _ = writeln!(
                        md,
                        "| pi_naive | {} ({}) |",
                        fmt(p),
                        v["naive"]["estimate"]["range"].as_str().unwrap_or("")
                    );
                }
                None => {
                    let _ = writeln!(
                        md,
                        "| pi_naive | undefined: {} |",
                        v["naive"]["error"].as_str().unwrap_or("")
                    );
                }
            }
            let b = &v["bayes"];
            let _ = writeln!(
                md,
                "| pi_bayes | {} [{}, {}] |",
                fmt(&b["pi_mean"]),
                fmt(&b["pi_ci95"][0]),
                fmt(&b["pi_ci95"][1])
            );
            let _ = writeln!(md, "| eta | {} |", fmt(&b["eta_mean"]));
            let _ = writeln!(md, "| theta | {} |", fmt(&b["theta_mean"]));
        }
        let hyp = dir.join("hypothesis_report.json");
        if hyp.exists() {
            found += 1;
            let r: study::HypothesisReport = read_json(&hyp)?;
            let _ = writeln!(md, "\n## Study ({})\n", dir.display());
            let _ = writeln!(md, "| community | posting cost | k | final pi_bayes | final pi_naive | trend / year |\n|---|---|---|---|---|---|");
            for row in &r.rows {
                let opt =
                    |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} |",
                    row.community,
                    row.posting_cost
                        .map(|c| format!("{c:?}"))
                        .unwrap_or_else(|| "unknown".into()),
                    row.policy_k,
                    opt(row.final_pi_bayes),
                    opt(row.final_pi_naive),
                    opt(row.trend_per_year)
                );
            }
            let flag = |f: Option<bool>| {
                f.map(|b| b.to_string())
                    .unwrap_or_else(|| "undetermined".into())
            };
            let _ = writeln!(
                md,
                "\nH1 (low posting cost shows more deception): {}",
                flag(r.h1_low_cost_exceeds_high_cost)
            );
            let _ = writeln!(
                md,
                "\nH2 (prevalence falls as k rises): {}",
                flag(r.h2_decreases_with_threshold)
            );
            for n in &r.notes {
                let _ = writeln!(md, "\n- {n}");
            }
        }
    }
    if found == 0 {
        return Err(Error::Invalid(
            "no estimates.json or hypothesis_report.json in the given directories".into(),
        ));
    }
    write(&cfg.out.join("report.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn fmt(v: &serde_json::Value) -> String {
    v.as_f64()
        .map(|x| format!("{x:.4}"))
        .unwrap_or_else(|| "n/a".into())
}
