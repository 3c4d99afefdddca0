//! Runs configured experiments and writes their artifacts.
//!
//! Each run gets its own directory `<out>/<algo>[_p<p>|_budget<b>]/` holding
//! `trace.csv`, `report.csv` and `manifest.txt`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::algorithm::{RepetitionPolicy, StepConfig};
use crate::analysis::{
    reference_solution, report, ConvergenceReport, ReferenceSolution, DEFAULT_MAX_ITERS,
};
use crate::config::{ExperimentConfig, InitSpec, Mode, ProblemSpec};
use crate::data::{logistic_problem, read_libsvm};
use crate::error::{check_dim, Error, Result};
use crate::problem::{CompositeProblem, Regularizer, SmoothKind};
use crate::runtime::{run_cluster, ClusterConfig, StopRule};
use crate::simulator::{epoch_sequence, simulate, Algorithm, Init, SimConfig, Trace};
use crate::synth::{logistic_synthetic, quadratic_sum};

pub const TRACE_HEADER: [&str; 9] = [
    "k",
    "sim_time",
    "worker",
    "p",
    "epoch_index",
    "d_max",
    "suboptimality",
    "distance_sq",
    "residual_norm",
];

pub const BOUND_HEADER: [&str; 3] = ["bound_thm32", "bound_cor33", "bound_thm36"];

pub fn build_problem(cfg: &ExperimentConfig) -> Result<CompositeProblem> {
    match &cfg.problem {
        ProblemSpec::Quadratic(q) => quadratic_sum(q, cfg.problem_seed),
        ProblemSpec::Logistic(l) => logistic_synthetic(l, cfg.problem_seed),
        ProblemSpec::Libsvm {
            dataset,
            feature_cap,
            lambda1,
            lambda2,
        } => {
            let data = read_libsvm(dataset, *feature_cap)?;
            logistic_problem(&data, cfg.workers, *lambda1, *lambda2)
        }
    }
}

pub fn initial_point(init: &InitSpec, dim: usize) -> Result<Vec<f64>> {
    match init {
        InitSpec::Fill(v) => Ok(vec![*v; dim]),
        InitSpec::Vector(x) => {
            check_dim(dim, x.len())?;
            Ok(x.clone())
        }
    }
}

/// SHA-256 over the problem data in a fixed byte layout.
pub fn problem_digest(p: &CompositeProblem) -> String {
    let mut h = Sha256::new();
    let f = |h: &mut Sha256, v: f64| h.update(v.to_le_bytes());
    let u = |h: &mut Sha256, v: usize| h.update((v as u64).to_le_bytes());
    match p.reg() {
        Regularizer::Zero => h.update(b"zero"),
        Regularizer::L1 { lambda1 } => {
            h.update(b"l1");
            f(&mut h, lambda1);
        }
    }
    for t in p.terms() {
        u(&mut h, t.dim());
        f(&mut h, t.mu());
        f(&mut h, t.lipschitz());
        match t.kind() {
            SmoothKind::Quadratic { hessian, center } => {
                h.update(b"quadratic");
                hessian.iter().for_each(|v| f(&mut h, *v));
                center.iter().for_each(|v| f(&mut h, *v));
            }
            SmoothKind::Logistic {
                design,
                labels,
                lambda2,
            } => {
                h.update(b"logistic");
                f(&mut h, *lambda2);
                for i in 0..design.n_rows() {
                    let (idx, val) = design.row(i);
                    u(&mut h, idx.len());
                    idx.iter().for_each(|j| u(&mut h, *j));
                    val.iter().for_each(|v| f(&mut h, *v));
                }
                labels.iter().for_each(|v| f(&mut h, *v));
            }
        }
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub label: String,
    pub dir: PathBuf,
    pub problem_sha256: String,
    pub iterations: usize,
}

fn run_label(alg: Algorithm, policy: &RepetitionPolicy) -> String {
    match (alg, policy) {
        (Algorithm::DaveRpg, RepetitionPolicy::Fixed(p)) => format!("{}_p{p}", alg.name()),
        (Algorithm::DaveRpg, RepetitionPolicy::Budgeted { budget }) => {
            format!("{}_budget{budget}", alg.name())
        }
        _ => alg.name().to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_csvs(dir: &Path, trace: &Trace, rep: Option<&ConvergenceReport>) -> Result<()> {
    let mut tw = csv::Writer::from_path(dir.join("trace.csv"))?;
    tw.write_record(TRACE_HEADER)?;
    match rep {
        Some(rep) => {
            let mut rw = csv::Writer::from_path(dir.join("report.csv"))?;
            rw.write_record(TRACE_HEADER.iter().chain(BOUND_HEADER.iter()))?;
            for r in &rep.rows {
                let base = [
                    r.k.to_string(),
                    r.time.to_string(),
                    r.worker.map_or_else(String::new, |w| w.to_string()),
                    r.reps.to_string(),
                    r.epoch.to_string(),
                    r.d_max.to_string(),
                    r.suboptimality.to_string(),
                    r.distance_sq.to_string(),
                    r.residual.to_string(),
                ];
                tw.write_record(&base)?;
                let e = rep.epoch_row(r.k);
                let bounds = [opt(e.thm32), opt(e.cor33), opt(e.thm36)];
                rw.write_record(base.iter().chain(bounds.iter()))?;
            }
            rw.flush()?;
        }
        None => {
            // no snapshots: iteration bookkeeping only
            let delays = trace.delays()?;
            let epochs = epoch_sequence(&delays);
            let mut d = vec![0usize; trace.workers];
            for (t, r) in trace.records.iter().enumerate() {
                d.iter_mut().for_each(|v| *v += 1);
                d[r.worker] = 0;
                tw.write_record([
                    r.k.to_string(),
                    r.time.to_string(),
                    r.worker.to_string(),
                    r.reps.to_string(),
                    epochs.epoch_of(t).to_string(),
                    d.iter().max().copied().unwrap_or(0).to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    tw.flush()?;
    Ok(())
}

struct ManifestInputs<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a CompositeProblem,
    digest: &'a str,
    reference: &'a ReferenceSolution,
    trace: &'a Trace,
    output: &'a [f64],
    complete: bool,
    error: Option<&'a str>,
}

fn manifest_text(m: &ManifestInputs<'_>) -> Result<String> {
    let mut s = m.cfg.to_text();
    let mut kv = |k: &str, v: String| {
        s.push_str(&format!("result.{k} = {v}\n"));
    };
    kv(
        "status",
        if m.complete { "complete" } else { "partial" }.into(),
    );
    if let Some(e) = m.error {
        kv("error", e.replace('\n', " "));
    }
    kv("problem_sha256", m.digest.to_string());
    kv("workers", m.problem.workers().to_string());
    kv("dim", m.problem.dim().to_string());
    kv("iterations", m.trace.len().to_string());
    kv(
        "end_time",
        m.trace.records.last().map_or(0.0, |r| r.time).to_string(),
    );
    let delays = m.trace.delays()?;
    kv("max_delay", delays.max_delay().to_string());
    kv("max_average_delay", delays.max_average_delay().to_string());
    kv(
        "max_gradient_staleness",
        delays.max_gradient_staleness().to_string(),
    );
    if let Some(d) = m.trace.piag_delay {
        kv("piag_delay", d.to_string());
    }
    kv("gamma_bar", m.trace.steps.gamma_bar().to_string());
    let epochs = epoch_sequence(&delays);
    kv("epochs_started", epochs.len().to_string());
    kv(
        "epoch_boundaries",
        epochs
            .boundaries
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    let nnz = m.reference.x_star.iter().filter(|v| **v != 0.0).count();
    kv("f_star", m.reference.f_star.to_string());
    kv("x_star_nonzeros", nnz.to_string());
    kv(
        "x_star_density",
        (nnz as f64 / m.problem.dim() as f64).to_string(),
    );
    kv(
        "final_distance_sq",
        crate::linalg::dist_sq(m.output, &m.reference.x_star).to_string(),
    );
    kv(
        "final_suboptimality",
        (m.problem.evaluate(m.output)? - m.reference.f_star).to_string(),
    );
    kv(
        "final_residual",
        m.problem.residual_norm(m.output)?.to_string(),
    );
    Ok(s)
}

/// Runs every configured algorithm and repetition setting.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunArtifacts>> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    check_dim(cfg.workers, problem.workers())?;
    let x0 = initial_point(&cfg.init, problem.dim())?;
    let init = Init::uniform(x0, problem.workers());
    let steps = StepConfig::default_for(&problem)?;
    let reference = reference_solution(&problem, &steps, cfg.reference_tol, DEFAULT_MAX_ITERS)?;
    let digest = problem_digest(&problem);

    let mut runs = Vec::new();
    for &alg in &cfg.algorithms {
        let policies = if alg == Algorithm::DaveRpg {
            cfg.policies()
        } else {
            vec![RepetitionPolicy::Fixed(1)]
        };
        for policy in policies {
            let label = run_label(alg, &policy);
            let mut run_cfg = cfg.clone();
            run_cfg.algorithms = vec![alg];
            if alg == Algorithm::DaveRpg {
                run_cfg.reps = match &policy {
                    RepetitionPolicy::Fixed(p) => crate::config::Reps::Fixed(vec![*p]),
                    RepetitionPolicy::Budgeted { budget } => crate::config::Reps::Budget(*budget),
                    RepetitionPolicy::PerWorker(_) => unreachable!("not produced by config"),
                };
            }
            let (trace, output, failure) = match cfg.mode {
                Mode::Simulate => {
                    let sim_cfg = SimConfig {
                        algorithm: alg,
                        steps: steps.clone(),
                        reps: policy,
                        model: cfg.delay_model.clone(),
                        seed: cfg.seed,
                        budget: cfg.budget,
                        piag_delay: None,
                    };
                    let out = simulate(&problem, &sim_cfg, &init)?;
                    (out.trace, out.output, None)
                }
                Mode::Run => {
                    let stop = StopRule {
                        max_iters: cfg.budget.max_iters,
                        residual: cfg.stop_residual,
                        wall_clock: cfg.budget.max_time.map(Duration::from_secs_f64),
                    };
                    let mut cc = ClusterConfig::new(&problem, policy, stop)?;
                    cc.init = init.clone();
                    cc.unit_delay = Duration::from_secs_f64(cfg.unit_delay_ms / 1000.0);
                    cc.slowdown = (0..problem.workers())
                        .map(|i| cfg.delay_model.slowdown(i))
                        .collect();
                    match run_cluster(&problem, &cc) {
                        Ok(out) => (out.trace, out.output, None),
                        Err(f) => match f.partial {
                            Some(t) => {
                                let out =
                                    problem.reg().prox(&t.final_master, t.steps.gamma_bar())?;
                                (*t, out, Some(f.source))
                            }
                            None => return Err(f.source),
                        },
                    }
                }
            };
            let dir = cfg.out.join(&label);
            fs::create_dir_all(&dir)?;
            let rep = match report(&problem, &trace, &reference) {
                Ok(r) => Some(r),
                Err(Error::MissingSnapshots) => None,
                Err(e) => return Err(e),
            };
            write_csvs(&dir, &trace, rep.as_ref())?;
            let message = failure.as_ref().map(ToString::to_string);
            let manifest = manifest_text(&ManifestInputs {
                cfg: &run_cfg,
                problem: &problem,
                digest: &digest,
                reference: &reference,
                trace: &trace,
                output: &output,
                complete: failure.is_none(),
                error: message.as_deref(),
            })?;
            fs::write(dir.join("manifest.txt"), manifest)?;
            if let Some(e) = failure {
                return Err(e);
            }
            runs.push(RunArtifacts {
                label,
                dir,
                problem_sha256: digest.clone(),
                iterations: trace.len(),
            });
        }
    }
    Ok(runs)
}
