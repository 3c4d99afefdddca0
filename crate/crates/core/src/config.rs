//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys under `result.`
//! are run outputs written into manifests and are skipped on load, so a
//! manifest can be fed back as a config.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::algorithm::RepetitionPolicy;
use crate::error::{Error, Result};
use crate::simulator::{Algorithm, Budget, DelayModel};
use crate::synth::{LogisticParams, QuadraticParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Run,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reps {
    Fixed(Vec<usize>),
    Budget(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Quadratic(QuadraticParams),
    Logistic(LogisticParams),
    Libsvm {
        dataset: PathBuf,
        feature_cap: Option<usize>,
        lambda1: f64,
        lambda2: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Fill(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algorithms: Vec<Algorithm>,
    pub workers: usize,
    pub reps: Reps,
    pub delay_model: DelayModel,
    pub problem: ProblemSpec,
    pub seed: u64,
    pub problem_seed: u64,
    pub budget: Budget,
    pub stop_residual: Option<f64>,
    pub unit_delay_ms: f64,
    pub init: InitSpec,
    pub reference_tol: f64,
    pub out: PathBuf,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(format!("{key}: cannot parse {v:?}")))
}

fn nonneg(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(cfg_err(format!("{key} must be nonnegative, got {v}")))
    }
}

pub fn parse_delay_model(s: &str) -> Result<DelayModel> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let f = |i: usize| -> Result<f64> {
        parts
            .get(i)
            .ok_or_else(|| cfg_err(format!("delay-model {s:?} is missing a parameter")))
            .and_then(|v| num("delay-model", v))
    };
    let model = match parts[0] {
        "constant" if parts.len() == 2 => DelayModel::Constant { duration: f(1)? },
        "uniform" if parts.len() == 3 => DelayModel::Uniform {
            min: f(1)?,
            max: f(2)?,
        },
        "exponential" if parts.len() == 2 => DelayModel::Exponential { mean: f(1)? },
        "slow" if parts.len() >= 3 => {
            let worker = num("delay-model", parts[1])?;
            let base = if parts.len() > 3 {
                parse_delay_model(&parts[3..].join(":"))?
            } else {
                DelayModel::Constant { duration: 1.0 }
            };
            DelayModel::slow_worker(base, worker, f(2)?)
        }
        _ => return Err(cfg_err(format!("unknown delay model {s:?}"))),
    };
    Ok(model)
}

pub fn format_delay_model(m: &DelayModel) -> String {
    match m {
        DelayModel::Constant { duration } => format!("constant:{duration}"),
        DelayModel::Uniform { min, max } => format!("uniform:{min}:{max}"),
        DelayModel::Exponential { mean } => format!("exponential:{mean}"),
        DelayModel::SlowWorker {
            base,
            worker,
            factor,
        } => {
            format!("slow:{worker}:{factor}:{}", format_delay_model(base))
        }
    }
}

fn parse_reps(v: &str) -> Result<Reps> {
    if let Some(b) = v.trim().strip_prefix("budget:") {
        let b: f64 = num("reps", b)?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(cfg_err("reps budget must be positive"));
        }
        return Ok(Reps::Budget(b));
    }
    let ps = v
        .split(',')
        .map(|p| num::<usize>("reps", p))
        .collect::<Result<Vec<_>>>()?;
    if ps.contains(&0) {
        return Err(cfg_err("reps must be at least 1"));
    }
    Ok(Reps::Fixed(ps))
}

fn parse_init(v: &str) -> Result<InitSpec> {
    let v = v.trim();
    if v == "zero" {
        return Ok(InitSpec::Fill(0.0));
    }
    if let Some(f) = v.strip_prefix("fill:") {
        return Ok(InitSpec::Fill(num("init", f)?));
    }
    Ok(InitSpec::Vector(
        v.split(',')
            .map(|x| num("init", x))
            .collect::<Result<_>>()?,
    ))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            algorithms: vec![Algorithm::DaveRpg],
            workers: 5,
            reps: Reps::Fixed(vec![1]),
            delay_model: DelayModel::Constant { duration: 1.0 },
            problem: ProblemSpec::Quadratic(QuadraticParams::default()),
            seed: 0,
            problem_seed: 0,
            budget: Budget::iters(1000),
            stop_residual: None,
            unit_delay_ms: 0.0,
            init: InitSpec::Fill(0.0),
            reference_tol: crate::analysis::DEFAULT_TOL,
            out: PathBuf::from("out"),
        }
    }
}

/// Raw key/value pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse {
            line: n + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let k = k.trim();
        if k.starts_with("result.") {
            continue;
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Applies pairs in order; later keys win. `problem` and `problem-seed`
    /// are resolved first so that problem parameters land on the right kind.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen_problem_seed = false;
        for (k, v) in pairs.iter().filter(|(k, _)| k == "problem") {
            cfg.set(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "problem") {
            seen_problem_seed |= k == "problem-seed";
            cfg.set(k, v)?;
        }
        if !seen_problem_seed {
            cfg.problem_seed = cfg.seed;
        }
        cfg.sync_workers();
        cfg.validate()?;
        Ok(cfg)
    }

    fn sync_workers(&mut self) {
        match &mut self.problem {
            ProblemSpec::Quadratic(q) => q.workers = self.workers,
            ProblemSpec::Logistic(l) => l.workers = self.workers,
            ProblemSpec::Libsvm { .. } => {}
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "mode" => {
                self.mode = match v {
                    "simulate" => Mode::Simulate,
                    "run" => Mode::Run,
                    _ => return Err(cfg_err(format!("mode must be simulate or run, got {v:?}"))),
                }
            }
            "algo" => {
                self.algorithms = v
                    .split(',')
                    .map(|a| Algorithm::parse(a.trim()))
                    .collect::<Result<_>>()?
            }
            "workers" => self.workers = num(key, v)?,
            "reps" => self.reps = parse_reps(v)?,
            "delay-model" => self.delay_model = parse_delay_model(v)?,
            "seed" => self.seed = num(key, v)?,
            "problem-seed" => self.problem_seed = num(key, v)?,
            "budget-iters" => {
                self.budget.max_iters = if v == "none" {
                    None
                } else {
                    Some(num(key, v)?)
                }
            }
            "budget-time" => {
                self.budget.max_time = if v == "none" {
                    None
                } else {
                    Some(nonneg(key, v)?)
                }
            }
            "stop-residual" => {
                self.stop_residual = if v == "none" {
                    None
                } else {
                    Some(nonneg(key, v)?)
                }
            }
            "unit-delay-ms" => self.unit_delay_ms = nonneg(key, v)?,
            "init" => self.init = parse_init(v)?,
            "reference-tol" => self.reference_tol = nonneg(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "problem" => {
                self.problem = match v {
                    "quadratic" => ProblemSpec::Quadratic(QuadraticParams::default()),
                    "logistic" => ProblemSpec::Logistic(LogisticParams::default()),
                    "libsvm" => ProblemSpec::Libsvm {
                        dataset: PathBuf::new(),
                        feature_cap: None,
                        lambda1: 0.0,
                        lambda2: 0.0,
                    },
                    _ => return Err(cfg_err(format!("unknown problem {v:?}"))),
                }
            }
            _ => self.set_problem_key(key, v)?,
        }
        Ok(())
    }

    fn set_problem_key(&mut self, key: &str, v: &str) -> Result<()> {
        let unknown = || cfg_err(format!("key {key:?} does not apply to this problem"));
        match &mut self.problem {
            ProblemSpec::Quadratic(q) => match key {
                "dim" => q.dim = num(key, v)?,
                "mu" => q.mu = nonneg(key, v)?,
                "lipschitz" => q.lipschitz = nonneg(key, v)?,
                "center-spread" => q.center_spread = nonneg(key, v)?,
                "identity" => q.identity = num(key, v)?,
                "lambda1" => q.lambda1 = nonneg(key, v)?,
                _ => return Err(unknown()),
            },
            ProblemSpec::Logistic(l) => match key {
                "examples" => l.examples = num(key, v)?,
                "features" => l.features = num(key, v)?,
                "density" => l.density = nonneg(key, v)?,
                "support" => l.support = nonneg(key, v)?,
                "label-noise" => l.label_noise = nonneg(key, v)?,
                "lambda1" => l.lambda1 = nonneg(key, v)?,
                "lambda2" => l.lambda2 = nonneg(key, v)?,
                _ => return Err(unknown()),
            },
            ProblemSpec::Libsvm {
                dataset,
                feature_cap,
                lambda1,
                lambda2,
            } => match key {
                "dataset" => *dataset = PathBuf::from(v),
                "feature-cap" => {
                    *feature_cap = if v == "none" {
                        None
                    } else {
                        Some(num(key, v)?)
                    }
                }
                "lambda1" => *lambda1 = nonneg(key, v)?,
                "lambda2" => *lambda2 = nonneg(key, v)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }

    /// Checks cross-field constraints, including that a dataset file exists.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(cfg_err("workers must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(cfg_err("algo must name at least one algorithm"));
        }
        self.delay_model.validate(self.workers)?;
        match self.mode {
            Mode::Simulate => self.budget.validate()?,
            Mode::Run => {
                if self.budget.max_iters.is_none()
                    && self.budget.max_time.is_none()
                    && self.stop_residual.is_none()
                {
                    return Err(cfg_err(
                        "run mode needs budget-iters, budget-time or stop-residual",
                    ));
                }
                if self.algorithms.iter().any(|a| *a != Algorithm::DaveRpg) {
                    return Err(cfg_err("run mode supports dave-rpg only"));
                }
            }
        }
        if let ProblemSpec::Libsvm { dataset, .. } = &self.problem {
            if dataset.as_os_str().is_empty() {
                return Err(cfg_err("problem = libsvm needs a dataset path"));
            }
            if !dataset.is_file() {
                return Err(cfg_err(format!(
                    "dataset {} does not exist",
                    dataset.display()
                )));
            }
        }
        Ok(())
    }

    /// Repetition policies to sweep.
    pub fn policies(&self) -> Vec<RepetitionPolicy> {
        match &self.reps {
            Reps::Fixed(ps) => ps.iter().map(|&p| RepetitionPolicy::Fixed(p)).collect(),
            Reps::Budget(b) => vec![RepetitionPolicy::Budgeted { budget: *b }],
        }
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(
            "mode",
            match self.mode {
                Mode::Simulate => "simulate",
                Mode::Run => "run",
            }
            .into(),
        );
        kv(
            "algo",
            self.algorithms
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("workers", self.workers.to_string());
        kv(
            "reps",
            match &self.reps {
                Reps::Fixed(ps) => join(ps),
                Reps::Budget(b) => format!("budget:{b}"),
            },
        );
        kv("delay-model", format_delay_model(&self.delay_model));
        kv("seed", self.seed.to_string());
        kv("problem-seed", self.problem_seed.to_string());
        kv(
            "budget-iters",
            self.budget
                .max_iters
                .map_or("none".into(), |n| n.to_string()),
        );
        kv(
            "budget-time",
            self.budget
                .max_time
                .map_or("none".into(), |t| t.to_string()),
        );
        kv(
            "stop-residual",
            self.stop_residual.map_or("none".into(), |t| t.to_string()),
        );
        kv("unit-delay-ms", self.unit_delay_ms.to_string());
        kv(
            "init",
            match &self.init {
                InitSpec::Fill(v) => format!("fill:{v}"),
                InitSpec::Vector(x) => join(x),
            },
        );
        kv("reference-tol", self.reference_tol.to_string());
        kv("out", self.out.display().to_string());
        match &self.problem {
            ProblemSpec::Quadratic(q) => {
                kv("problem", "quadratic".into());
                kv("dim", q.dim.to_string());
                kv("mu", q.mu.to_string());
                kv("lipschitz", q.lipschitz.to_string());
                kv("center-spread", q.center_spread.to_string());
                kv("identity", q.identity.to_string());
                kv("lambda1", q.lambda1.to_string());
            }
            ProblemSpec::Logistic(l) => {
                kv("problem", "logistic".into());
                kv("examples", l.examples.to_string());
                kv("features", l.features.to_string());
                kv("density", l.density.to_string());
                kv("support", l.support.to_string());
                kv("label-noise", l.label_noise.to_string());
                kv("lambda1", l.lambda1.to_string());
                kv("lambda2", l.lambda2.to_string());
            }
            ProblemSpec::Libsvm {
                dataset,
                feature_cap,
                lambda1,
                lambda2,
            } => {
                kv("problem", "libsvm".into());
                kv("dataset", dataset.display().to_string());
                kv(
                    "feature-cap",
                    feature_cap.map_or("none".into(), |c| c.to_string()),
                );
                kv("lambda1", lambda1.to_string());
                kv("lambda2", lambda2.to_string());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# comment
mode = simulate
algo = dave-rpg, piag
workers = 5
reps = 1,4,7,10
delay-model = slow:4:10:uniform:0.5:1.5
problem = quadratic
dim = 2
seed = 3
budget-iters = 500
init = -20,-20
out = /tmp/x
";
        let c = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(c.algorithms, vec![Algorithm::DaveRpg, Algorithm::Piag]);
        assert_eq!(c.reps, Reps::Fixed(vec![1, 4, 7, 10]));
        assert_eq!(c.problem_seed, 3);
        assert_eq!(
            c.delay_model,
            DelayModel::slow_worker(DelayModel::Uniform { min: 0.5, max: 1.5 }, 4, 10.0)
        );
        assert_eq!(c.init, InitSpec::Vector(vec![-20.0, -20.0]));
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn result_keys_are_skipped() {
        let c = ExperimentConfig::from_text("workers = 3\nresult.max_delay = 7\n").unwrap();
        assert_eq!(c.workers, 3);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "workers = 0",
            "algo = sgd",
            "reps = 0",
            "reps = budget:-1",
            "delay-model = gamma:1",
            "delay-model = slow:9:10",
            "lambda1 = -1",
            "problem = libsvm\ndataset = /nonexistent/file.svm",
            "problem = libsvm",
            "problem = quadratic\nexamples = 4",
            "mode = run\nalgo = piag",
            "budget-iters = none",
            "just a line",
        ] {
            assert!(ExperimentConfig::from_text(text).is_err(), "{text}");
        }
    }

    #[test]
    fn delay_model_round_trip() {
        for s in [
            "constant:1",
            "uniform:0.5:2",
            "exponential:3",
            "slow:1:10:exponential:2",
        ] {
            let m = parse_delay_model(s).unwrap();
            assert_eq!(parse_delay_model(&format_delay_model(&m)).unwrap(), m);
        }
    }
}
