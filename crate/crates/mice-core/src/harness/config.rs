//! Declarative experiment configuration: a flat `section.key = value` text
//! format with `#` comments. Unknown keys are rejected at load time and all
//! numeric fields are validated against the estimator bounds.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::HarnessError;
use crate::data::LabelPolicy;
use crate::estimator::{ClippingMode, MiceConfig};
use crate::optim::TableMethod;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic { kappa: f64 },
    ShiftedQuadratic { sigma: f64 },
    Rosenbrock { sigma: f64 },
    Logistic {
        dataset: PathBuf,
        lambda: f64,
        labels: LabelPolicy,
        subsample: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    /// `1 / (L (1 + k / 50))`, the decreasing schedule used for plain SGD.
    Decreasing,
    /// `step / sqrt(k + 1)`.
    InverseSqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    SgdMice { step: Option<f64> },
    AdamMice { step: f64 },
    IdealizedSgdMice { eps: f64, step: Option<f64> },
    VanillaSgd {
        schedule: ScheduleKind,
        step: Option<f64>,
        batch: u64,
    },
    SgdA { step: Option<f64> },
    Adam {
        schedule: ScheduleKind,
        step: f64,
        batch: u64,
    },
    Table { method: TableMethod, step: Option<f64> },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::SgdMice { .. } => "sgd-mice",
            MethodSpec::AdamMice { .. } => "adam-mice",
            MethodSpec::IdealizedSgdMice { .. } => "idealized-sgd-mice",
            MethodSpec::VanillaSgd { .. } => "sgd",
            MethodSpec::SgdA { .. } => "sgd-a",
            MethodSpec::Adam { .. } => "adam",
            MethodSpec::Table { method, .. } => match method {
                TableMethod::Sag => "sag",
                TableMethod::Saga => "saga",
                TableMethod::Sarah => "sarah",
                TableMethod::Svrg => "svrg",
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopSpec {
    pub max_iters: Option<u64>,
    pub max_grad_evals: Option<u64>,
    pub grad_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: MethodSpec,
    pub mice: MiceConfig,
    pub replicates: u32,
    pub seed: u64,
    pub xi0: Option<Vec<f64>>,
    pub stop: StopSpec,
    pub record_every: u64,
    pub out_dir: Option<PathBuf>,
    pub timings: bool,
    pub svg: bool,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(HarnessError::Config(format!(
            "bad boolean '{other}' for {key}"
        ))),
    }
}

/// Parse the flat dotted-key format into raw pairs, rejecting duplicates.
fn raw_pairs(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut out = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected key = value", line_no + 1))
        })?;
        let key = key.trim().to_string();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut pairs = raw_pairs(text)?;
    let mut take = |key: &str| pairs.remove(key);

    let problem_name = take("problem.name")
        .ok_or_else(|| HarnessError::Config("missing problem.name".into()))?;
    let problem = match problem_name.as_str() {
        "quadratic" => ProblemSpec::Quadratic {
            kappa: take("problem.kappa")
                .map(|v| parse_num("problem.kappa", &v))
                .transpose()?
                .unwrap_or(100.0),
        },
        "shifted-quadratic" => ProblemSpec::ShiftedQuadratic {
            sigma: take("problem.sigma")
                .map(|v| parse_num("problem.sigma", &v))
                .transpose()?
                .unwrap_or(0.1),
        },
        "rosenbrock" => ProblemSpec::Rosenbrock {
            sigma: take("problem.sigma")
                .map(|v| parse_num("problem.sigma", &v))
                .transpose()?
                .unwrap_or(0.1),
        },
        "logistic" => {
            let dataset = take("problem.dataset")
                .ok_or_else(|| HarnessError::Config("logistic requires problem.dataset".into()))?;
            let labels = match take("problem.labels").as_deref() {
                None | Some("strict") => LabelPolicy::Strict,
                Some("zero-one") => LabelPolicy::ZeroOne,
                Some("one-two") => LabelPolicy::OneTwo,
                Some(other) => {
                    return Err(HarnessError::Config(format!(
                        "unknown label policy '{other}'"
                    )))
                }
            };
            ProblemSpec::Logistic {
                dataset: PathBuf::from(dataset),
                lambda: take("problem.lambda")
                    .map(|v| parse_num("problem.lambda", &v))
                    .transpose()?
                    .unwrap_or(1e-4),
                labels,
                subsample: take("problem.subsample")
                    .map(|v| parse_num("problem.subsample", &v))
                    .transpose()?,
            }
        }
        other => {
            return Err(HarnessError::Config(format!("unknown problem '{other}'")));
        }
    };

    let mut mice = MiceConfig::default();
    if let Some(v) = take("method.eps").or_else(|| take("mice.eps")) {
        mice.eps = parse_num("mice.eps", &v)?;
    }
    macro_rules! mice_field {
        ($key:expr, $field:ident) => {
            if let Some(v) = take($key) {
                mice.$field = parse_num($key, &v)?;
            }
        };
    }
    mice_field!("mice.delta-drop", delta_drop);
    mice_field!("mice.delta-rest", delta_rest);
    mice_field!("mice.delta-re", delta_re);
    mice_field!("mice.n-part", n_part);
    mice_field!("mice.p-re", p_re);
    mice_field!("mice.min-resample", min_resample);
    mice_field!("mice.m-min", m_min);
    mice_field!("mice.m-min-restart", m_min_restart);
    mice_field!("mice.max-hierarchy", max_hierarchy_size);
    mice_field!("mice.max-layer-samples", max_layer_samples);
    mice_field!("mice.cost-ratio-samp", cost_ratio_samp);
    mice_field!("mice.cost-aggr", cost_aggr);
    mice_field!("mice.norm-floor", norm_floor);
    if let Some(v) = take("mice.clipping") {
        mice.clipping = match v.as_str() {
            "none" => ClippingMode::None,
            "a" => ClippingMode::A,
            "b" => ClippingMode::B,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown clipping mode '{other}'"
                )))
            }
        };
    }
    mice.validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let schedule = match take("method.schedule").as_deref() {
        None => None,
        Some("constant") => Some(ScheduleKind::Constant),
        Some("decreasing") => Some(ScheduleKind::Decreasing),
        Some("inv-sqrt") => Some(ScheduleKind::InverseSqrt),
        Some(other) => {
            return Err(HarnessError::Config(format!(
                "unknown schedule '{other}'"
            )))
        }
    };
    let step: Option<f64> = take("method.step")
        .map(|v| parse_num("method.step", &v))
        .transpose()?;
    let batch: Option<u64> = take("method.batch")
        .map(|v| parse_num("method.batch", &v))
        .transpose()?;

    let method_name = take("method.name")
        .ok_or_else(|| HarnessError::Config("missing method.name".into()))?;
    let method = match method_name.as_str() {
        "sgd-mice" => MethodSpec::SgdMice { step },
        "adam-mice" => MethodSpec::AdamMice {
            step: step.unwrap_or(0.2),
        },
        "idealized-sgd-mice" => MethodSpec::IdealizedSgdMice {
            eps: mice.eps,
            step,
        },
        "sgd" => MethodSpec::VanillaSgd {
            schedule: schedule.unwrap_or(ScheduleKind::Decreasing),
            step,
            batch: batch.unwrap_or(1),
        },
        "sgd-a" => MethodSpec::SgdA { step },
        "adam" => MethodSpec::Adam {
            schedule: schedule.unwrap_or(ScheduleKind::InverseSqrt),
            step: step.unwrap_or(0.02),
            batch: batch.unwrap_or(100),
        },
        "sag" => MethodSpec::Table {
            method: TableMethod::Sag,
            step,
        },
        "saga" => MethodSpec::Table {
            method: TableMethod::Saga,
            step,
        },
        "sarah" => MethodSpec::Table {
            method: TableMethod::Sarah,
            step,
        },
        "svrg" => MethodSpec::Table {
            method: TableMethod::Svrg,
            step,
        },
        other => return Err(HarnessError::Config(format!("unknown method '{other}'"))),
    };

    let replicates: u32 = take("run.replicates")
        .map(|v| parse_num("run.replicates", &v))
        .transpose()?
        .unwrap_or(1);
    if replicates == 0 {
        return Err(HarnessError::Config(
            "run.replicates must be at least 1".into(),
        ));
    }
    let xi0 = match take("run.xi0") {
        None => None,
        Some(v) => {
            let parts: Result<Vec<f64>, _> = v
                .split(',')
                .map(|p| parse_num::<f64>("run.xi0", p))
                .collect();
            Some(parts?)
        }
    };
    let stop = StopSpec {
        max_iters: take("run.max-iters")
            .map(|v| parse_num("run.max-iters", &v))
            .transpose()?,
        max_grad_evals: take("run.max-grad-evals")
            .map(|v| parse_num("run.max-grad-evals", &v))
            .transpose()?,
        grad_tol: take("run.grad-tol")
            .map(|v| parse_num("run.grad-tol", &v))
            .transpose()?,
    };
    if stop.max_iters.is_none() && stop.max_grad_evals.is_none() && stop.grad_tol.is_none() {
        return Err(HarnessError::Config(
            "at least one stopping rule (run.max-iters, run.max-grad-evals, run.grad-tol) is required"
                .into(),
        ));
    }

    let config = ExperimentConfig {
        problem,
        method,
        mice,
        replicates,
        seed: take("run.seed")
            .map(|v| parse_num("run.seed", &v))
            .transpose()?
            .unwrap_or(0),
        xi0,
        stop,
        record_every: take("method.record-every")
            .map(|v| parse_num("method.record-every", &v))
            .transpose()?
            .unwrap_or(1),
        out_dir: take("output.dir").map(PathBuf::from),
        timings: take("output.timings")
            .map(|v| parse_bool("output.timings", &v))
            .transpose()?
            .unwrap_or(false),
        svg: take("output.svg")
            .map(|v| parse_bool("output.svg", &v))
            .transpose()?
            .unwrap_or(false),
    };

    if let Some(key) = pairs.keys().next() {
        return Err(HarnessError::Config(format!("unknown key '{key}'")));
    }
    if config.record_every == 0 {
        return Err(HarnessError::Config(
            "method.record-every must be at least 1".into(),
        ));
    }
    Ok(config)
}
