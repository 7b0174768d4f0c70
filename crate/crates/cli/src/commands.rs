use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use stabenc::data::{
    compare_vectors, load_digits, load_image, pca_embed, save_image, FidelityMetrics, GrayImage,
    PgmFormat,
};
use stabenc::encode::{build_exact_circuit, pad_and_repair, InputVector};
use stabenc::optimize::{train, Method, OptimizerConfig};
use stabenc::qnn::{evaluate, predict_all, Architecture, Metrics, QnnModel, StateLoader};
use stabenc::rasa::{depth_report, run_rasa, ApproxMode, ChiSchedule, DepthReport, RasaParams};
use stabenc::sim::{apply, StateVector};

use crate::config::{
    Command, DataArgs, EncodeExactArgs, EncodeRasaArgs, EvalArgs, LoaderArg, MethodArg, ModeArg,
    ModelArg, RunConfig, TrainArgs,
};

pub fn run(cfg: &RunConfig) -> Result<()> {
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
    match &cfg.command {
        Command::EncodeExact(a) => encode_exact(a)?,
        Command::EncodeRasa(a) => encode_rasa(a, cfg.seed)?,
        Command::Train(a) => train_model(a, cfg.seed)?,
        Command::Eval(a) => eval_model(a, cfg.seed)?,
    }
    write_json(&cfg.config_path(), cfg).context("writing run configuration")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

struct LoadedImage {
    image: GrayImage,
    pixels: Vec<f64>,
    x: InputVector,
}

fn load_encodable(path: &Path, epsilon: f64) -> Result<LoadedImage> {
    let image = load_image(path).with_context(|| format!("loading image {}", path.display()))?;
    image
        .check_encodable()
        .with_context(|| format!("checking image {}", path.display()))?;
    let pixels = image.to_vector();
    let x = pad_and_repair(&pixels, epsilon).context("preparing the input vector")?;
    Ok(LoadedImage { image, pixels, x })
}

fn save_reconstruction(path: &Path, like: &GrayImage, values: &[f64]) -> Result<()> {
    let img = GrayImage::from_values_rescaled(like.width, like.height, values, like.maxval)?;
    ensure_parent(path)?;
    save_image(path, &img, PgmFormat::Plain).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ExactReport {
    mode: &'static str,
    n: usize,
    /// One unit per multi-controlled block: `2^n − 1`.
    depth_measured: usize,
    gate_count: usize,
    q_in: usize,
    exact_depth_formula: usize,
    norm: f64,
    repaired_entries: usize,
    fidelity: FidelityMetrics,
}

fn encode_exact(a: &EncodeExactArgs) -> Result<()> {
    let started = Instant::now();
    let input = load_encodable(&a.input, a.epsilon)?;
    let n = input.x.n_qubits();
    if a.qin < 1 || a.qin > n {
        anyhow::bail!(stabenc::Error::InvalidParameter(format!(
            "--qin must lie in 1..={n}, got {}",
            a.qin
        )));
    }
    let (circuit, norm) =
        build_exact_circuit(&input.x).context("building the exact encoding circuit")?;
    let state =
        apply(&circuit, &StateVector::zero(n)?).context("simulating the encoding circuit")?;
    let rec: Vec<f64> = state.amplitudes().iter().map(|c| c.re * norm).collect();
    let fidelity =
        compare_vectors(&input.pixels, &rec, f64::from(input.image.maxval)).context("scoring")?;
    save_reconstruction(&a.out, &input.image, &rec)?;
    let report = ExactReport {
        mode: "exact",
        n,
        depth_measured: circuit.depth_units,
        gate_count: circuit.gate_count(),
        q_in: a.qin,
        exact_depth_formula: depth_report(n, a.qin, 1, &[]).exact_depth,
        norm,
        repaired_entries: input.x.modified_indices().len(),
        fidelity,
    };
    write_json(&a.report, &report)?;
    eprintln!(
        "encode-exact: n = {n}, depth {} units, fidelity {:.12}, {:.2}s",
        report.depth_measured,
        fidelity.state_fidelity,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Serialize)]
struct RasaReport {
    params: RasaParams,
    #[serde(flatten)]
    depth: DepthReport,
    fidelity: FidelityMetrics,
}

fn parse_chi(s: &str) -> Result<ChiSchedule> {
    if s.eq_ignore_ascii_case("rule") {
        return Ok(ChiSchedule::Rule);
    }
    let chi: f64 = s.parse().map_err(|_| {
        stabenc::Error::InvalidParameter(format!("--chi expects a count or `rule`, got `{s}`"))
    })?;
    if !(chi >= 1.0 && chi.fract() == 0.0 && chi <= u64::MAX as f64) {
        anyhow::bail!(stabenc::Error::InvalidParameter(format!(
            "--chi must be a positive integer, got `{s}`"
        )));
    }
    Ok(ChiSchedule::Fixed(chi as u64))
}

fn encode_rasa(a: &EncodeRasaArgs, seed: u64) -> Result<()> {
    let started = Instant::now();
    let input = load_encodable(&a.input, a.epsilon)?;
    let params = RasaParams {
        alpha: a.alpha,
        p: a.p,
        q_in: a.qin,
        chi: parse_chi(&a.chi)?,
        mode: match a.mode {
            ModeArg::Shot => ApproxMode::ShotSampled,
            ModeArg::Exact => ApproxMode::ExactAmplitudes,
        },
        epsilon: a.epsilon,
        seed,
    };
    let out = run_rasa(&input.x, &params).context("running the recursive encoding")?;
    let rec = out
        .reconstruct()
        .context("simulating the encoding circuit")?;
    let fidelity =
        compare_vectors(&input.pixels, &rec, f64::from(input.image.maxval)).context("scoring")?;
    save_reconstruction(&a.out, &input.image, &rec)?;
    eprintln!(
        "{:>4} {:>6} {:>9} {:>10} {:>8}",
        "q", "eta", "eta_mean", "chi", "depth"
    );
    for l in &out.report.levels {
        let chi = l.chi.map_or("-".to_string(), |c| c.to_string());
        eprintln!(
            "{:>4} {:>6} {:>9.2} {:>10} {:>8}",
            l.q, l.eta, l.eta_mean, chi, l.depth_measured
        );
    }
    eprintln!(
        "encode-rasa: depth measured {} (formula {}, exact {}), fidelity {:.6}, {:.2}s",
        out.report.final_depth_measured,
        out.report.approx_depth_formula,
        out.report.exact_depth_formula,
        fidelity.state_fidelity,
        started.elapsed().as_secs_f64()
    );
    write_json(
        &a.report,
        &RasaReport {
            params,
            depth: out.report,
            fidelity,
        },
    )
}

fn loader(arg: LoaderArg) -> StateLoader {
    match arg {
        LoaderArg::Inject => StateLoader::Inject,
        LoaderArg::ExactCircuit => StateLoader::ExactCircuit,
    }
}

/// Data qubits for 64-pixel digit images.
const DIGIT_QUBITS: usize = 6;

fn load_split(
    d: &DataArgs,
    seed: u64,
) -> Result<(stabenc::data::LabeledDataset, stabenc::data::LabeledDataset)> {
    let (a, b) = d
        .digit_pair()
        .map_err(|e| stabenc::Error::InvalidParameter(e.to_string()))?;
    load_digits(&d.data, a, b, d.split, seed)
        .with_context(|| format!("loading digits from {}", d.data.display()))
}

fn trace_path(model_out: &Path) -> PathBuf {
    let stem = model_out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    model_out.with_file_name(format!("{stem}.trace.csv"))
}

fn train_model(a: &TrainArgs, seed: u64) -> Result<()> {
    let (train_set, _) = load_split(&a.data, seed)?;
    let states = train_set
        .states(loader(a.data.loader))
        .context("preparing training states")?;
    let arch = match a.model {
        ModelArg::Qp => Architecture::SingleQp,
        ModelArg::Qnn2 => Architecture::TwoLayer,
    };
    let template = QnnModel::new(arch, DIGIT_QUBITS)?;
    let config = OptimizerConfig {
        method: match a.method {
            MethodArg::NelderMead => Method::NelderMead,
            MethodArg::CoordinateDescent => Method::CoordinateDescent,
        },
        max_iterations: a.max_iter,
        ftol: a.ftol,
        initial_theta: None,
        initial_step: a.step,
        restarts: a.restarts,
        perturbation: a.perturb,
        rng_seed: seed,
        batch_size: a.batch_size,
    };
    let outcome = train(&template, &states, &config).context("training")?;
    let trace = trace_path(&a.out);
    ensure_parent(&trace)?;
    outcome
        .result
        .trace
        .save(&trace)
        .with_context(|| format!("writing {}", trace.display()))?;
    let mut model = outcome.model;
    model.training_meta.trace_file = trace.file_name().map(|s| s.to_string_lossy().into_owned());
    write_json(&a.out, &model)?;
    println!(
        "final training cost {:.6} after {} iterations ({} evaluations, {} samples)",
        outcome.result.cost,
        outcome.result.iterations,
        outcome.result.evaluations,
        states.len()
    );
    Ok(())
}

fn print_confusion(m: &Metrics) {
    println!(
        "accuracy {:.1}% ({}/{}), F1 {:.3}",
        100.0 * m.accuracy,
        m.correct,
        m.total,
        m.f1
    );
    println!("{:>10} {:>12} {:>12}", "", "predicted 1", "predicted 0");
    for (label, row) in ["actual 1", "actual 0"].iter().zip(&m.confusion.percent) {
        println!("{label:>10} {:>11.1}% {:>11.1}%", row[0], row[1]);
    }
}

fn eval_model(a: &EvalArgs, seed: u64) -> Result<()> {
    let text = fs::read_to_string(&a.model)
        .with_context(|| format!("reading model {}", a.model.display()))?;
    let model: QnnModel = serde_json::from_str(&text)
        .with_context(|| format!("parsing model {}", a.model.display()))?;
    model.validate().context("checking the model")?;
    if model.n != DIGIT_QUBITS {
        return Err(stabenc::Error::DimensionMismatch {
            expected: DIGIT_QUBITS,
            actual: model.n,
        })
        .context("model does not match 64-pixel digit images");
    }
    let (_, test_set) = load_split(&a.data, seed)?;
    let states = test_set
        .states(loader(a.data.loader))
        .context("preparing test states")?;
    let mut metrics = evaluate(&model, &states).context("evaluating")?;
    metrics.seed = Some(seed);
    write_json(&a.out, &metrics)?;
    print_confusion(&metrics);
    if let Some(path) = &a.pca {
        let predicted: Vec<u8> = predict_all(&model, &states)?
            .iter()
            .map(|p| p.label)
            .collect();
        let embedding =
            pca_embed(&test_set, 2, &predicted).context("computing the PCA embedding")?;
        ensure_parent(path)?;
        embedding
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
