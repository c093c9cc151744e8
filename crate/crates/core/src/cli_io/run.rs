use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use super::config::{
    load_config, read_config_value, ExperimentConfig, ExperimentKind, ModelSource, CONFIG_KEYS,
};
use super::format::{fmt_f64, to_json};
use crate::caps::Caps;
use crate::channels::ChannelLayer;
use crate::classical;
use crate::cluster::{derivative_norm_certificate, pinned_series_check, CertificateReport, PinnedReport};
use crate::error::{Error, Result};
use crate::experiments::{
    analytic_markov_length, beta_c, chain_size_for_distance, cluster_gibbs_equivalence, decay_curve, fit_curve,
    theorem3_bound, Beta, BetaFit, ChannelKindSpec, ChannelSpec, DecayCurve, DecaySpec, Engine, EquivalenceReport,
};
use crate::model::{build_dual_graph, verify_commuting, zoo, LocalHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// A certificate or equivalence check failed its bound.
    BoundViolated,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::BoundViolated => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    /// Worker threads; available parallelism when absent.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { overrides: Vec::new(), threads: None, output_dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize)]
struct Stage {
    stage: &'static str,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    artifact: &'static str,
    version: &'static str,
    resolved_config: &'a ExperimentConfig,
    caps: Caps,
    threads: usize,
    stages: Vec<Stage>,
    outputs: Vec<String>,
}

/// Rendered output files, relative to the output directory.
struct Artifacts {
    files: Vec<(String, String)>,
    status: RunStatus,
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let cfg = load_config(config_path, &opts.overrides)?;
    let load_s = t0.elapsed().as_secs_f64();
    let threads = opts.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let t1 = Instant::now();
    let artifacts = pool.install(|| execute(&cfg))?;
    let compute_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let stem = cfg.output_stem().to_string();
    let mut outputs = Vec::new();
    for (name, body) in &artifacts.files {
        outputs.push(write_file(&opts.output_dir, name, body)?);
    }
    let write_s = t2.elapsed().as_secs_f64();
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        resolved_config: &cfg,
        caps: *Caps::get(),
        threads,
        stages: vec![
            Stage { stage: "load", seconds: load_s },
            Stage { stage: "compute", seconds: compute_s },
            Stage { stage: "write", seconds: write_s },
        ],
        outputs: artifacts.files.iter().map(|f| f.0.clone()).collect(),
    };
    let manifest = write_file(&opts.output_dir, &format!("{stem}_manifest.json"), &to_json(&manifest)?)?;
    Ok(RunOutcome { status: artifacts.status, outputs, manifest })
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, body)?;
    Ok(path)
}

fn execute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    match cfg.experiment {
        ExperimentKind::Decay | ExperimentKind::LowTemperature => run_decay(cfg),
        ExperimentKind::Certificates => run_certificates(cfg),
        ExperimentKind::ClusterEquivalence => run_equivalence(cfg),
        ExperimentKind::Theorem3 => run_theorem3(cfg),
    }
}

fn require_betas(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.beta.is_empty() {
        return Err(Error::Config(format!("{} needs a nonempty \"beta\" list", cfg.experiment.name())));
    }
    Ok(())
}

fn decay_spec(cfg: &ExperimentConfig) -> Result<DecaySpec> {
    require_betas(cfg)?;
    let (family, max_n) = match cfg.model_source()? {
        ModelSource::Builtin(f, n) => (f, n),
        ModelSource::File(_) => return Err(Error::Config("decay curves sweep a builtin chain family, not a model file".into())),
    };
    let spec = DecaySpec {
        family,
        engine: cfg.engine(),
        channel: cfg.channel.clone().unwrap_or_else(|| ChannelSpec::simple(ChannelKindSpec::Identity)),
        betas: cfg.beta.clone(),
        distances: cfg.distances.clone(),
        boundary_width: cfg.boundary_width.unwrap_or(1),
    };
    if max_n > 0 {
        for &d in &spec.distances {
            let n = chain_size_for_distance(family, spec.boundary_width, d)?;
            if n > max_n {
                return Err(Error::Config(format!("distance {d} needs {n} sites but the model id allows {max_n}")));
            }
        }
    }
    Ok(spec)
}

pub fn curve_csv(curve: &DecayCurve) -> String {
    let mut out = String::from("beta,distance,cmi_bits\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", fmt_f64(p.beta.value()), p.distance, fmt_f64(p.cmi_bits)));
    }
    out
}

#[derive(Serialize)]
struct FitEntry {
    #[serde(flatten)]
    fit: BetaFit,
    /// `1/ln(β_c/β)`, defined below the threshold only.
    analytic_xi: Option<f64>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    model: &'a str,
    engine: Engine,
    channel: &'a ChannelSpec,
    boundary_width: usize,
    fit_floor: f64,
    dual_degree: usize,
    beta_c: f64,
    fits: Vec<FitEntry>,
}

fn run_decay(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let spec = decay_spec(cfg)?;
    let curve = decay_curve(&spec)?;
    let floor = cfg.fit_floor.unwrap_or(crate::experiments::FIT_FLOOR);
    let largest = curve.points.iter().map(|p| p.n_sites).max().unwrap_or(2);
    let dual_degree = build_dual_graph(&spec.family.build(largest)?).degree();
    let fits = fit_curve(&curve, floor)
        .into_iter()
        .map(|fit| FitEntry { analytic_xi: analytic_markov_length(dual_degree, fit.beta.value()), fit })
        .collect();
    let report = FitReport {
        model: &curve.model,
        engine: curve.engine,
        channel: &curve.channel,
        boundary_width: curve.boundary_width,
        fit_floor: floor,
        dual_degree,
        beta_c: beta_c(dual_degree),
        fits,
    };
    let stem = cfg.output_stem();
    Ok(Artifacts {
        files: vec![(format!("{stem}.csv"), curve_csv(&curve)), (format!("{stem}_fit.json"), to_json(&report)?)],
        status: RunStatus::Ok,
    })
}

fn certificate_layer(cfg: &ExperimentConfig, h: &LocalHamiltonian) -> Result<ChannelLayer> {
    let all: Vec<usize> = (0..h.n_sites()).collect();
    let sites = cfg.channel_sites.as_deref().unwrap_or(&all);
    match &cfg.channel {
        Some(c) => c.layer(h.n_sites(), h.q(), sites),
        None => Ok(ChannelLayer::identity(h.n_sites(), h.q())),
    }
}

#[derive(Serialize)]
struct PinnedCertificate {
    beta: Beta,
    reports: Vec<PinnedReport>,
    failures: usize,
}

#[derive(Serialize)]
#[serde(untagged)]
enum CertificateRuns {
    Quantum(Vec<CertificateReport>),
    Pinned(Vec<PinnedCertificate>),
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    model: &'a str,
    engine: Engine,
    max_weight: usize,
    violations: usize,
    runs: CertificateRuns,
}

fn run_certificates(cfg: &ExperimentConfig) -> Result<Artifacts> {
    require_betas(cfg)?;
    let h = cfg.load_model()?;
    let layer = certificate_layer(cfg, &h)?;
    let max_weight = cfg.max_weight.unwrap_or(4);
    crate::caps::check("certificate weight", max_weight, Caps::get().certificate_weight)?;
    let finite = |b: Beta| -> Result<f64> {
        if b.is_infinite() {
            Err(Error::Config("certificates need finite beta".into()))
        } else {
            Ok(b.value())
        }
    };
    let (runs, violations) = match cfg.engine() {
        Engine::Classical => {
            let y = layer.region().to_vec();
            let mut runs = Vec::new();
            for &b in &cfg.beta {
                let beta = finite(b)?;
                let reports = classical::all_outcomes(y.len(), h.q())
                    .iter()
                    .map(|outcome| pinned_series_check(&h, beta, &layer, outcome, max_weight))
                    .collect::<Result<Vec<_>>>()?;
                let failures = reports.iter().filter(|r| !r.pass).count();
                runs.push(PinnedCertificate { beta: b, reports, failures });
            }
            let v = runs.iter().map(|r| r.failures).sum();
            (CertificateRuns::Pinned(runs), v)
        }
        Engine::Dense | Engine::Pauli => {
            let runs = cfg
                .beta
                .iter()
                .map(|&b| derivative_norm_certificate(&h, finite(b)?, &layer, max_weight))
                .collect::<Result<Vec<_>>>()?;
            let v = runs.iter().map(|r| r.violations).sum();
            (CertificateRuns::Quantum(runs), v)
        }
    };
    let file = CertificateFile {
        model: cfg.model.as_deref().unwrap_or_default(),
        engine: cfg.engine(),
        max_weight,
        violations,
        runs,
    };
    Ok(Artifacts {
        files: vec![(format!("{}.json", cfg.output_stem()), to_json(&file)?)],
        status: if violations == 0 { RunStatus::Ok } else { RunStatus::BoundViolated },
    })
}

fn run_equivalence(cfg: &ExperimentConfig) -> Result<Artifacts> {
    require_betas(cfg)?;
    let n = match cfg.model_source()? {
        ModelSource::Builtin(zoo::Family::ClusterChain, n) if n > 0 => n,
        _ => return Err(Error::Config("cluster_equivalence needs a model id \"cluster_chain_n<N>\"".into())),
    };
    let reports: Vec<EquivalenceReport> =
        cfg.beta.iter().map(|&b| cluster_gibbs_equivalence(n, b, cfg.engine())).collect::<Result<_>>()?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(Artifacts {
        files: vec![(format!("{}.json", cfg.output_stem()), to_json(&reports)?)],
        status: if pass { RunStatus::Ok } else { RunStatus::BoundViolated },
    })
}

#[derive(Serialize)]
struct BoundRow {
    q: f64,
    bound_bits: f64,
}

#[derive(Serialize)]
struct BoundReport {
    label: &'static str,
    k: u32,
    rows: Vec<BoundRow>,
}

fn run_theorem3(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let k = cfg.k.unwrap_or(1);
    if cfg.error_rates.is_empty() {
        return Err(Error::Config("theorem3 needs a nonempty \"error_rates\" list".into()));
    }
    let rows = cfg
        .error_rates
        .iter()
        .map(|&q| Ok(BoundRow { q, bound_bits: theorem3_bound(k, q)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("q,bound_bits\n");
    for r in &rows {
        csv.push_str(&format!("{},{}\n", fmt_f64(r.q), fmt_f64(r.bound_bits)));
    }
    let report = BoundReport { label: "proof-constant bound", k, rows };
    let stem = cfg.output_stem();
    Ok(Artifacts {
        files: vec![(format!("{stem}.csv"), csv), (format!("{stem}.json"), to_json(&report)?)],
        status: RunStatus::Ok,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

const CHANNEL_KEYS: &[&str] = &["kind", "p", "matrix", "kraus"];

fn unknown_keys(v: &Value, findings: &mut Vec<String>) -> Value {
    let mut cleaned = v.clone();
    let Some(obj) = cleaned.as_object_mut() else {
        findings.push("config must be a JSON object".into());
        return cleaned;
    };
    obj.retain(|k, _| {
        let known = CONFIG_KEYS.contains(&k.as_str());
        if !known {
            findings.push(format!("unknown key {k:?}"));
        }
        known
    });
    if let Some(ch) = obj.get_mut("channel").and_then(Value::as_object_mut) {
        ch.retain(|k, _| {
            let known = CHANNEL_KEYS.contains(&k.as_str());
            if !known {
                findings.push(format!("unknown key \"channel.{k}\""));
            }
            known
        });
    }
    cleaned
}

fn engine_findings(engine: Engine, h: &LocalHamiltonian, label: &str, findings: &mut Vec<String>) {
    let caps = Caps::get();
    let states = (h.q() as f64).powi(h.n_sites() as i32);
    match engine {
        Engine::Classical => {
            if !h.is_diagonal() {
                findings.push(format!("{label}: engine classical needs diagonal terms"));
            }
            if states > caps.classical_states as f64 {
                findings.push(format!("{label}: {states} states exceed cap classical_states = {}", caps.classical_states));
            }
        }
        Engine::Dense => {
            if states > caps.dense_dim as f64 {
                findings.push(format!("{label}: dimension {states} exceeds cap dense_dim = {}", caps.dense_dim));
            }
        }
        Engine::Pauli => {
            if !verify_commuting(h) {
                findings.push(format!("{label}: engine pauli needs a commuting Hamiltonian"));
            }
            if !h.is_pauli() {
                findings.push(format!("{label}: engine pauli needs Pauli terms"));
            }
            if h.terms().len() > caps.pauli_terms {
                findings.push(format!("{label}: {} terms exceed cap pauli_terms = {}", h.terms().len(), caps.pauli_terms));
            }
        }
    }
}

/// Schema and semantic checks without running the experiment.
pub fn validate(config_path: &Path, overrides: &[String]) -> ValidationReport {
    let mut findings = Vec::new();
    let raw = match read_config_value(config_path, overrides) {
        Ok(v) => v,
        Err(e) => return ValidationReport { findings: vec![e.to_string()] },
    };
    let cleaned = unknown_keys(&raw, &mut findings);
    let cfg = match serde_json::from_value::<ExperimentConfig>(cleaned) {
        Ok(c) => c,
        Err(e) => {
            findings.push(e.to_string());
            return ValidationReport { findings };
        }
    };
    let cfg = match cfg.resolve(config_path.parent().unwrap_or(Path::new("."))) {
        Ok(c) => c,
        Err(e) => {
            findings.push(e.to_string());
            return ValidationReport { findings };
        }
    };
    semantic_findings(&cfg, &mut findings);
    ValidationReport { findings }
}

fn semantic_findings(cfg: &ExperimentConfig, findings: &mut Vec<String>) {
    let engine = cfg.engine();
    let needs_beta = !matches!(cfg.experiment, ExperimentKind::Theorem3);
    if needs_beta && cfg.beta.is_empty() {
        findings.push(format!("{} needs a nonempty \"beta\" list", cfg.experiment.name()));
    }
    match cfg.experiment {
        ExperimentKind::Decay | ExperimentKind::LowTemperature => match decay_spec(cfg) {
            Err(e) => findings.push(e.to_string()),
            Ok(spec) => {
                if spec.distances.is_empty() || spec.distances.windows(2).any(|w| w[0] >= w[1]) {
                    findings.push("distances must be nonempty and strictly increasing".into());
                    return;
                }
                let sizes: Result<Vec<usize>> =
                    spec.distances.iter().map(|&d| chain_size_for_distance(spec.family, spec.boundary_width, d)).collect();
                match sizes.map(|s| s.into_iter().max()) {
                    Ok(Some(n)) => match spec.family.build(n) {
                        Ok(h) => {
                            if let Err(e) = spec.channel.build(0, h.q()) {
                                findings.push(format!("channel: {e}"));
                            }
                            engine_findings(engine, &h, &zoo::Family::id(spec.family, n), findings);
                        }
                        Err(e) => findings.push(e.to_string()),
                    },
                    Err(e) => findings.push(e.to_string()),
                    Ok(None) => {}
                }
            }
        },
        ExperimentKind::Certificates => {
            match cfg.load_model() {
                Ok(h) => {
                    if let Err(e) = certificate_layer(cfg, &h) {
                        findings.push(format!("channel: {e}"));
                    }
                    if engine == Engine::Pauli && !verify_commuting(&h) {
                        findings.push("engine pauli needs a commuting Hamiltonian".into());
                    }
                    if engine == Engine::Classical && !h.is_diagonal() {
                        findings.push("engine classical needs diagonal terms".into());
                    }
                }
                Err(e) => findings.push(e.to_string()),
            }
            let w = cfg.max_weight.unwrap_or(4);
            if w > Caps::get().certificate_weight {
                findings.push(format!("max_weight = {w} exceeds cap certificate_weight = {}", Caps::get().certificate_weight));
            }
        }
        ExperimentKind::ClusterEquivalence => match cfg.model_source() {
            Ok(ModelSource::Builtin(zoo::Family::ClusterChain, n)) if n > 0 => {
                if engine == Engine::Classical {
                    findings.push("cluster_equivalence needs engine dense or pauli".into());
                } else if let Ok(h) = zoo::cluster_chain(n) {
                    engine_findings(engine, &h, &zoo::Family::ClusterChain.id(n), findings);
                }
            }
            Ok(_) => findings.push("cluster_equivalence needs a model id \"cluster_chain_n<N>\"".into()),
            Err(e) => findings.push(e.to_string()),
        },
        ExperimentKind::Theorem3 => {
            if cfg.error_rates.is_empty() {
                findings.push("theorem3 needs a nonempty \"error_rates\" list".into());
            }
            for &q in &cfg.error_rates {
                if let Err(e) = theorem3_bound(cfg.k.unwrap_or(1), q) {
                    findings.push(e.to_string());
                }
            }
        }
    }
    if cfg.output_stem().is_empty() {
        findings.push("output must not be empty".into());
    }
}
