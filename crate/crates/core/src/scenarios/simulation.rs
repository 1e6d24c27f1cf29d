//! Simulation and batch-scaling settings read from a scenario section.
//!
//! ```text
//! [scenario.delay]
//! model = queue              # queue | storage
//! lambda_per_hour = 3
//! mu_per_hour = 2
//! batch = geometric:500      # det:n | poisson:n | geometric:n[,alpha] | binomial:n,p
//! staffing_ratio = 2         # ⌈cn⌉ servers; or servers = <count> | infinite
//! discipline = delay         # delay | blocking
//! horizon_hours = 10
//! reps = 10000
//! seed = 7
//! ```

use super::config::{ConfigError, ConfigFile, Entry, Section};
use super::{invalid, number, number_list, parse_mark, positive_number};
use crate::marks::{BatchDistribution, MarkDistribution, ServiceDistribution};
use crate::simkit::{
    ArrivalProcess, Dependence, DependenceMode, Discipline, QueueSpec, ScalingLimit, ScalingStudy,
    Servers, SimOptions, StorageSpec, StorageVariant, DEFAULT_WARMUP_FRACTION,
};

const SIMULATE_KEYS: [&str; 21] = [
    "label",
    "model",
    "lambda_per_hour",
    "mu_per_hour",
    "mean_service_minutes",
    "service",
    "batch",
    "mark",
    "servers",
    "staffing_ratio",
    "discipline",
    "storage",
    "initial_jobs",
    "initial_level",
    "dependence",
    "horizon_hours",
    "reps",
    "seed",
    "cdf_grid",
    "warmup_fraction",
    "scale_by_batch",
];

const CONVERGE_KEYS: [&str; 12] = [
    "label",
    "lambda_per_hour",
    "mu_per_hour",
    "mean_service_minutes",
    "staffing_ratio",
    "batch",
    "limit",
    "n_list",
    "horizon_hours",
    "reps",
    "seed",
    "warmup_fraction",
];

#[derive(Debug, Clone)]
pub enum SimulationModel {
    Queue(QueueSpec),
    Storage(StorageSpec),
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub name: String,
    pub label: String,
    pub model: SimulationModel,
    pub options: SimOptions,
    /// Points at which the terminal CDF is reported; empty picks a grid from the sample.
    pub cdf_grid: Vec<f64>,
    /// Divide queue terminals by the batch index.
    pub scale_by_batch: bool,
}

/// Looks keys up in one section, then in `[system]`.
struct Lookup<'a> {
    system: &'a Section,
    section: &'a Section,
}

impl<'a> Lookup<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.section.get(key).or_else(|| self.system.get(key))
    }

    fn require(&self, key: &str) -> Result<&'a Entry, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing {
            section: format!("scenario.{}", self.section.name),
            key: key.into(),
        })
    }

    fn conflict(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Conflict {
            section: format!("scenario.{}", self.section.name),
            message: message.into(),
        }
    }

    fn check(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for sec in [self.system, self.section] {
            if let Some(e) = sec
                .entries
                .iter()
                .find(|e| !allowed.contains(&e.key.as_str()))
            {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    section: sec.name.clone(),
                    key: e.key.clone(),
                });
            }
        }
        Ok(())
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<u64>()
                    .map_err(|_| invalid(e, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn label(&self) -> String {
        self.section
            .get("label")
            .map_or_else(|| self.section.name.clone(), |e| e.value.clone())
    }

    fn mu(&self) -> Result<f64, ConfigError> {
        for sec in [self.section, self.system] {
            match (sec.get("mu_per_hour"), sec.get("mean_service_minutes")) {
                (Some(_), Some(_)) => {
                    return Err(self.conflict("mu_per_hour and mean_service_minutes are exclusive"))
                }
                (Some(mu), None) => return positive_number(mu),
                (None, Some(m)) => return Ok(60.0 / positive_number(m)?),
                (None, None) => {}
            }
        }
        Err(ConfigError::Missing {
            section: format!("scenario.{}", self.section.name),
            key: "mu_per_hour".into(),
        })
    }

    fn options(&self) -> Result<SimOptions, ConfigError> {
        let horizon = positive_number(self.require("horizon_hours")?)?;
        let reps = self.integer("reps")?.unwrap_or(1000);
        if reps == 0 {
            return Err(invalid(self.require("reps")?, "must be at least 1"));
        }
        let seed = self.integer("seed")?.unwrap_or(0);
        let mut opts = SimOptions::new(horizon, reps as usize, seed);
        if let Some(e) = self.get("warmup_fraction") {
            let w = number(e)?;
            if !(0.0..1.0).contains(&w) {
                return Err(invalid(e, "must lie in [0, 1)"));
            }
            opts = opts.with_warmup(w);
        } else {
            opts = opts.with_warmup(DEFAULT_WARMUP_FRACTION);
        }
        Ok(opts)
    }
}

/// The section named `name`, or the only one when `name` is `None`.
pub fn select_section<'a>(
    file: &'a ConfigFile,
    name: Option<&str>,
) -> Result<&'a Section, ConfigError> {
    match name {
        Some(n) => {
            file.scenarios
                .iter()
                .find(|s| s.name == n)
                .ok_or_else(|| ConfigError::Missing {
                    section: "config".into(),
                    key: format!("scenario.{n}"),
                })
        }
        None => match file.scenarios.as_slice() {
            [] => Err(ConfigError::NoScenarios),
            [one] => Ok(one),
            _ => Err(ConfigError::Conflict {
                section: "config".into(),
                message: "several scenarios; choose one by name".into(),
            }),
        },
    }
}

/// `det:n`, `poisson:n`, `geometric:n[,alpha]`, `binomial:n,p`.
pub fn parse_batch(s: &str) -> Result<BatchDistribution, String> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| "expected `<kind>:<n>[,<parameter>]`".to_string())?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let n: u64 = parts[0]
        .parse()
        .map_err(|_| format!("batch index `{}` is not a positive integer", parts[0]))?;
    let param = |i: usize| -> Result<Option<f64>, String> {
        parts
            .get(i)
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| format!("`{p}` is not a number"))
            })
            .transpose()
    };
    let (batch, arity) = match kind.trim() {
        "det" => (BatchDistribution::deterministic(n), 1),
        "poisson" => (BatchDistribution::poisson(n), 1),
        "geometric" => (BatchDistribution::geometric(n, param(1)?.unwrap_or(1.0)), 2),
        "binomial" => {
            let p = param(1)?.ok_or("binomial needs `n,p`")?;
            (BatchDistribution::binomial(n, p), 2)
        }
        other => return Err(format!("unknown batch kind `{other}`")),
    };
    if parts.len() > arity {
        return Err("too many parameters".into());
    }
    batch.map_err(|e| e.to_string())
}

/// `exp`, `det`, or `lognormal:<squared coefficient of variation>`, all with mean `1/μ`.
fn parse_service(entry: Option<&Entry>, mu: f64) -> Result<ServiceDistribution, ConfigError> {
    let Some(e) = entry else {
        return Ok(ServiceDistribution::exponential(mu).expect("positive rate"));
    };
    let made = match e.value.split_once(':') {
        None if e.value == "exp" => ServiceDistribution::exponential(mu),
        None if e.value == "det" => ServiceDistribution::deterministic(1.0 / mu),
        Some(("lognormal", scv)) => {
            let scv: f64 = scv
                .trim()
                .parse()
                .map_err(|_| invalid(e, "lognormal:<scv> expected"))?;
            ServiceDistribution::lognormal(1.0 / mu, scv / (mu * mu))
        }
        _ => return Err(invalid(e, "expected exp, det or lognormal:<scv>")),
    };
    made.map_err(|err| invalid(e, err.to_string()))
}

fn parse_dependence(entry: Option<&Entry>) -> Result<Dependence, ConfigError> {
    let Some(e) = entry else {
        return Ok(Dependence::independent());
    };
    if e.value == "independent" {
        return Ok(Dependence::independent());
    }
    let (mode, rho) = e
        .value
        .split_once(':')
        .ok_or_else(|| invalid(e, "expected independent or <mode>:<rho>"))?;
    let mode = DependenceMode::parse(mode.trim()).ok_or_else(|| {
        invalid(
            e,
            "mode must be copy_first, copy_previous or average_previous",
        )
    })?;
    let rho: f64 = rho
        .trim()
        .parse()
        .map_err(|_| invalid(e, "rho is not a number"))?;
    Dependence::new(mode, rho).map_err(|err| invalid(e, err.to_string()))
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(e, "expected true or false")),
    }
}

pub fn simulation_from_config(
    file: &ConfigFile,
    name: Option<&str>,
) -> Result<SimulationConfig, ConfigError> {
    let section = select_section(file, name)?;
    let r = Lookup {
        system: &file.system,
        section,
    };
    r.check(&SIMULATE_KEYS)?;
    let lambda_entry = r.require("lambda_per_hour")?;
    let lambda = number(lambda_entry)?;
    if lambda < 0.0 {
        return Err(invalid(lambda_entry, "must be non-negative"));
    }
    let mu = r.mu()?;
    let service = parse_service(r.get("service"), mu)?;
    let options = r.options()?;
    let cdf_grid = r
        .get("cdf_grid")
        .map(number_list)
        .transpose()?
        .unwrap_or_default();
    let model_entry = r.require("model")?;
    let (model, scale_by_batch) = match model_entry.value.as_str() {
        "queue" => {
            for key in ["mark", "storage", "initial_level"] {
                if let Some(e) = r.get(key) {
                    return Err(invalid(e, "only used by model = storage"));
                }
            }
            let be = r.require("batch")?;
            let batch = parse_batch(&be.value).map_err(|why| invalid(be, why))?;
            let servers = match (r.get("servers"), r.get("staffing_ratio")) {
                (Some(_), Some(_)) => {
                    return Err(r.conflict("servers and staffing_ratio are exclusive"))
                }
                (Some(e), None) if e.value == "infinite" => Servers::Infinite,
                (Some(e), None) => match e.value.parse::<u64>() {
                    Ok(k) if k > 0 => Servers::Finite(k),
                    _ => return Err(invalid(e, "expected a positive count or `infinite`")),
                },
                (None, Some(e)) => {
                    let c = positive_number(e)?;
                    Servers::Finite((c * batch.index() as f64).ceil().max(1.0) as u64)
                }
                (None, None) => return Err(r.conflict("set servers or staffing_ratio")),
            };
            let discipline = match r.get("discipline") {
                None => Discipline::DelayFcfs,
                Some(e) => match e.value.as_str() {
                    "delay" => Discipline::DelayFcfs,
                    "blocking" => Discipline::PartialBlocking,
                    _ => return Err(invalid(e, "expected delay or blocking")),
                },
            };
            if servers == Servers::Infinite && discipline == Discipline::PartialBlocking {
                return Err(r.conflict("blocking needs a finite server count"));
            }
            let spec = QueueSpec::new(
                ArrivalProcess::Poisson { rate: lambda },
                batch,
                service,
                servers,
                discipline,
            )
            .with_initial_jobs(r.integer("initial_jobs")?.unwrap_or(0))
            .with_dependence(parse_dependence(r.get("dependence"))?);
            let scale = r
                .get("scale_by_batch")
                .map(parse_bool)
                .transpose()?
                .unwrap_or(false);
            (SimulationModel::Queue(spec), scale)
        }
        "storage" => {
            for key in [
                "batch",
                "servers",
                "discipline",
                "initial_jobs",
                "dependence",
                "scale_by_batch",
            ] {
                if let Some(e) = r.get(key) {
                    return Err(invalid(e, "only used by model = queue"));
                }
            }
            let mark = match r.get("mark") {
                Some(e) => parse_mark(&e.value).map_err(|why| invalid(e, why))?,
                None => MarkDistribution::Deterministic { value: 1.0 },
            };
            let ratio = r.get("staffing_ratio").map(positive_number).transpose()?;
            let variant = match (r.get("storage").map(|e| (e, e.value.as_str())), ratio) {
                (None, None) | (Some((_, "shot_noise")), None) => StorageVariant::ShotNoise,
                (Some((_, "threshold")), Some(c)) | (None, Some(c)) => StorageVariant::Threshold(c),
                (Some((_, "finite")), Some(c)) => StorageVariant::Finite(c),
                (Some((_, "shot_noise")), Some(_)) => {
                    return Err(r.conflict("shot_noise storage takes no staffing_ratio"))
                }
                (Some((_, "threshold" | "finite")), None) => {
                    return Err(ConfigError::Missing {
                        section: format!("scenario.{}", section.name),
                        key: "staffing_ratio".into(),
                    })
                }
                (Some((e, _)), _) => {
                    return Err(invalid(e, "expected shot_noise, threshold or finite"))
                }
            };
            if variant != StorageVariant::ShotNoise && service.exponential_rate().is_none() {
                return Err(r.conflict("bounded storage needs exponential service"));
            }
            let level = match r.get("initial_level") {
                Some(e) => {
                    let v = number(e)?;
                    if v < 0.0 {
                        return Err(invalid(e, "must be non-negative"));
                    }
                    v
                }
                None => 0.0,
            };
            let spec = StorageSpec::new(lambda, mark, service, variant).with_initial_level(level);
            (SimulationModel::Storage(spec), false)
        }
        _ => return Err(invalid(model_entry, "expected queue or storage")),
    };
    Ok(SimulationConfig {
        name: section.name.clone(),
        label: r.label(),
        model,
        options,
        cdf_grid,
        scale_by_batch,
    })
}

/// Batch-scaling study settings. `batch` names the family; its index is
/// replaced by each entry of `n_list`.
pub fn convergence_from_config(
    file: &ConfigFile,
    name: Option<&str>,
) -> Result<(String, ScalingStudy), ConfigError> {
    let section = select_section(file, name)?;
    let r = Lookup {
        system: &file.system,
        section,
    };
    r.check(&CONVERGE_KEYS)?;
    let lambda = positive_number(r.require("lambda_per_hour")?)?;
    let mu = r.mu()?;
    let limit = match r.get("limit") {
        None => ScalingLimit::Threshold,
        Some(e) => ScalingLimit::parse(&e.value)
            .ok_or_else(|| invalid(e, "expected shot_noise, threshold or finite"))?,
    };
    let c = match (limit, r.get("staffing_ratio")) {
        (ScalingLimit::ShotNoise, None) => 0.0,
        (ScalingLimit::ShotNoise, Some(_)) => {
            return Err(r.conflict("shot_noise limit takes no staffing_ratio"))
        }
        (_, Some(e)) => positive_number(e)?,
        (_, None) => r.require("staffing_ratio").map(|_| 0.0)?,
    };
    let be = r.require("batch")?;
    let batch = parse_batch(&be.value).map_err(|why| invalid(be, why))?;
    let ne = r.require("n_list")?;
    let n_list = number_list(ne)?
        .into_iter()
        .map(|x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as u64)
            } else {
                Err(invalid(ne, "batch indices must be positive integers"))
            }
        })
        .collect::<Result<Vec<u64>, _>>()?;
    for &n in &n_list {
        batch.rescaled(n).map_err(|e| invalid(ne, e.to_string()))?;
    }
    let study = ScalingStudy {
        lambda,
        mu,
        c,
        batch,
        limit,
        n_list,
        options: r.options()?,
    };
    Ok((r.label(), study))
}
