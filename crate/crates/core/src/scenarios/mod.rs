//! Real-world demand inputs mapped to staffing ratios.
//!
//! Miles driven become a disengagement rate `λ = miles / miles_per_disengagement`
//! per hour; every row, hour or fleet point is an independent static solve.
//! Rates are per hour, so `μ = 60 / mean_service_minutes`.

mod config;
mod data;
mod output;
mod simulation;

use rayon::prelude::*;
use thiserror::Error;

use crate::marks::{LaplaceMethod, MarkDistribution};
use crate::staffing::{solve_ratio, staff_count, Criterion, StaffingError};
use crate::stationary::{MarkovSystem, StationaryError};

pub use config::{parse_config, ConfigError, ConfigFile, Entry, Section, OVERRIDE_LINE};
pub use data::{
    bundled_metros, parse_metros, synthetic_hourly_miles, Metro, DEFAULT_DAYS_PER_YEAR,
    GM_CRUISE_MILES_PER_DISENGAGEMENT, METROS_CSV, PEAK_HOUR_FRACTION, PM_SHIFT_FRACTION,
    PM_SHIFT_HOURS, SYNTHETIC_HOURLY_WEIGHTS, TAXI_MILES_PER_VEHICLE_YEAR,
    WAYMO_MILES_PER_DISENGAGEMENT,
};
pub use output::{
    curve_table, exceedance_table, profile_table, rows_table, staff_table, verify_table, Manifest,
    Table, VERIFY_TOL,
};
pub use simulation::{
    convergence_from_config, parse_batch, select_section, simulation_from_config, SimulationConfig,
    SimulationModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("`{name}` must be positive and finite, got {value}")]
    InvalidInput { name: &'static str, value: f64 },
    #[error("scenario `{scenario}` cannot be used here: {reason}")]
    WrongMode {
        scenario: String,
        reason: &'static str,
    },
    #[error("{label}: {source}")]
    Solve {
        label: String,
        #[source]
        source: StaffingError,
    },
    #[error("{label} at c = {c}: {source}")]
    Evaluate {
        label: String,
        c: f64,
        #[source]
        source: StationaryError,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("verification failed at row {row}, column `{column}`: stored {stored}, recomputed {recomputed}")]
    Verify {
        row: usize,
        column: String,
        stored: f64,
        recomputed: f64,
    },
}

impl ScenarioError {
    pub(crate) fn csv(e: csv::Error) -> Self {
        Self::Data(e.to_string())
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ScenarioError::InvalidInput { name, value })
    }
}

/// Disengagements per period from miles driven in that period.
pub fn arrival_rate_from_miles(
    miles_in_period: f64,
    miles_per_disengagement: f64,
) -> Result<f64, ScenarioError> {
    Ok(positive("miles", miles_in_period)?
        / positive("miles_per_disengagement", miles_per_disengagement)?)
}

/// Peak-hour miles from annual miles (in millions) under a day-count convention.
pub fn peak_hour_miles(
    annual_miles_millions: f64,
    days_per_year: f64,
    peak_hour_fraction: f64,
) -> f64 {
    annual_miles_millions * 1e6 / days_per_year * peak_hour_fraction
}

/// How demand enters a scenario; exactly one mode per scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Demand {
    Rate {
        lambda_per_hour: f64,
    },
    AnnualMiles {
        annual_miles_millions: f64,
        days_per_year: f64,
        peak_hour_fraction: f64,
    },
    HourlyMiles {
        miles: Vec<f64>,
    },
    Fleet {
        fleet_sizes: Vec<f64>,
        miles_per_vehicle_per_year: f64,
        days_per_year: f64,
        shift_fraction: f64,
        shift_hours: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub label: String,
    pub demand: Demand,
    /// Required by every miles-based mode.
    pub miles_per_disengagement: Option<f64>,
    pub mu_per_hour: f64,
    pub mark: MarkDistribution,
    pub epsilon: f64,
    pub criterion: Criterion,
    pub n_list: Vec<u64>,
}

const MODE_KEYS: [&str; 4] = [
    "lambda_per_hour",
    "annual_miles_millions",
    "hourly_miles",
    "fleet_sizes_vehicles",
];

const KNOWN_KEYS: [&str; 17] = [
    "label",
    "lambda_per_hour",
    "annual_miles_millions",
    "hourly_miles",
    "fleet_sizes_vehicles",
    "miles_per_disengagement",
    "mu_per_hour",
    "mean_service_minutes",
    "mark",
    "epsilon",
    "criterion",
    "n_list",
    "peak_hour_fraction",
    "days_per_year",
    "miles_per_vehicle_per_year",
    "shift_fraction",
    "shift_hours",
];

fn invalid(entry: &Entry, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        line: entry.line,
        key: entry.key.clone(),
        value: entry.value.clone(),
        reason: reason.into(),
    }
}

fn number(entry: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = entry
        .value
        .parse()
        .map_err(|_| invalid(entry, "not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(entry, "not finite"))
    }
}

fn positive_number(entry: &Entry) -> Result<f64, ConfigError> {
    let v = number(entry)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(entry, "must be positive"))
    }
}

fn number_list(entry: &Entry) -> Result<Vec<f64>, ConfigError> {
    let v = entry
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| invalid(entry, "expected comma-separated numbers"))?;
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(entry, "values must be non-negative and finite"));
    }
    Ok(v)
}

/// `det:v`, `exp:rate`, `gamma:shape,rate`, `lognormal:mean,var[,closed]`.
pub fn parse_mark(s: &str) -> Result<MarkDistribution, String> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| "expected `<kind>:<parameters>`".to_string())?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let nums = |count: usize| -> Result<Vec<f64>, String> {
        if parts.len() < count {
            return Err(format!("`{kind}` needs {count} parameter(s)"));
        }
        parts[..count]
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| format!("`{p}` is not a number"))
            })
            .collect()
    };
    let extra = |count: usize| parts.len() > count;
    let mark = match kind.trim() {
        "det" if !extra(1) => MarkDistribution::deterministic(nums(1)?[0]),
        "exp" if !extra(1) => MarkDistribution::exponential(nums(1)?[0]),
        "gamma" if !extra(2) => {
            let v = nums(2)?;
            MarkDistribution::gamma(v[0], v[1])
        }
        "lognormal" => {
            let v = nums(2)?;
            let method = match parts.get(2) {
                None => LaplaceMethod::Quadrature,
                Some(&"closed") => LaplaceMethod::ClosedApprox,
                Some(&"quadrature") => LaplaceMethod::Quadrature,
                Some(other) => return Err(format!("unknown log-normal method `{other}`")),
            };
            if extra(3) {
                return Err("too many parameters".into());
            }
            MarkDistribution::lognormal(v[0], v[1]).map(|m| m.with_laplace_method(method))
        }
        "det" | "exp" | "gamma" => return Err("too many parameters".into()),
        other => return Err(format!("unknown mark kind `{other}`")),
    };
    mark.map_err(|e| e.to_string())
}

/// Inverse of [`parse_mark`].
pub fn format_mark(mark: &MarkDistribution) -> String {
    match *mark {
        MarkDistribution::Deterministic { value } => format!("det:{value}"),
        MarkDistribution::Exponential { rate } => format!("exp:{rate}"),
        MarkDistribution::Gamma { shape, rate } => format!("gamma:{shape},{rate}"),
        MarkDistribution::LogNormal { params, method } => {
            let suffix = match method {
                LaplaceMethod::Quadrature => "",
                LaplaceMethod::ClosedApprox => ",closed",
            };
            format!("lognormal:{},{}{suffix}", params.mean, params.variance)
        }
    }
}

/// A scenario section resolved against the `[system]` defaults.
struct Resolver<'a> {
    system: &'a Section,
    section: &'a Section,
}

impl<'a> Resolver<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.section.get(key).or_else(|| self.system.get(key))
    }

    fn require(&self, key: &str) -> Result<&'a Entry, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing {
            section: format!("scenario.{}", self.section.name),
            key: key.into(),
        })
    }

    fn positive_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(key).map_or(Ok(default), positive_number)
    }

    fn conflict(&self, message: String) -> ConfigError {
        ConfigError::Conflict {
            section: format!("scenario.{}", self.section.name),
            message,
        }
    }
}

fn check_keys(section: &Section) -> Result<(), ConfigError> {
    for e in &section.entries {
        if !KNOWN_KEYS.contains(&e.key.as_str()) {
            return Err(ConfigError::UnknownKey {
                line: e.line,
                section: section.name.clone(),
                key: e.key.clone(),
            });
        }
    }
    Ok(())
}

impl Scenario {
    pub fn from_sections(system: &Section, section: &Section) -> Result<Self, ConfigError> {
        let r = Resolver { system, section };
        let modes: Vec<&str> = MODE_KEYS
            .into_iter()
            .filter(|k| r.get(k).is_some())
            .collect();
        let mode = match modes.as_slice() {
            [one] => *one,
            [] => {
                return Err(r.conflict(format!("set one of {}", MODE_KEYS.join(", "))));
            }
            many => {
                return Err(r.conflict(format!("demand keys {} are exclusive", many.join(", "))))
            }
        };
        let days = r.positive_or("days_per_year", DEFAULT_DAYS_PER_YEAR)?;
        let demand = match mode {
            "lambda_per_hour" => Demand::Rate {
                lambda_per_hour: number(r.require(mode)?).and_then(|v| {
                    if v >= 0.0 {
                        Ok(v)
                    } else {
                        Err(invalid(r.require(mode)?, "must be non-negative"))
                    }
                })?,
            },
            "annual_miles_millions" => Demand::AnnualMiles {
                annual_miles_millions: positive_number(r.require(mode)?)?,
                days_per_year: days,
                peak_hour_fraction: r.positive_or("peak_hour_fraction", PEAK_HOUR_FRACTION)?,
            },
            "hourly_miles" => {
                let entry = r.require(mode)?;
                let miles = match entry.value.strip_prefix("synthetic:") {
                    Some(daily) => {
                        let daily: f64 = daily
                            .trim()
                            .parse()
                            .map_err(|_| invalid(entry, "synthetic:<daily miles> expected"))?;
                        synthetic_hourly_miles(daily).to_vec()
                    }
                    None => number_list(entry)?,
                };
                if miles.len() != 24 {
                    return Err(invalid(
                        entry,
                        format!("expected 24 hourly values, got {}", miles.len()),
                    ));
                }
                Demand::HourlyMiles { miles }
            }
            _ => Demand::Fleet {
                fleet_sizes: number_list(r.require(mode)?)?,
                miles_per_vehicle_per_year: r
                    .positive_or("miles_per_vehicle_per_year", TAXI_MILES_PER_VEHICLE_YEAR)?,
                days_per_year: days,
                shift_fraction: r.positive_or("shift_fraction", PM_SHIFT_FRACTION)?,
                shift_hours: r.positive_or("shift_hours", PM_SHIFT_HOURS)?,
            },
        };
        let miles_per_disengagement = match demand {
            Demand::Rate { .. } => r
                .get("miles_per_disengagement")
                .map(positive_number)
                .transpose()?,
            _ => Some(positive_number(r.require("miles_per_disengagement")?)?),
        };
        // The most specific section that sets either service key decides.
        let mut mu_per_hour = None;
        for sec in [section, system] {
            match (sec.get("mu_per_hour"), sec.get("mean_service_minutes")) {
                (Some(_), Some(_)) => {
                    return Err(
                        r.conflict("mu_per_hour and mean_service_minutes are exclusive".into())
                    )
                }
                (Some(mu), None) => mu_per_hour = Some(positive_number(mu)?),
                (None, Some(m)) => mu_per_hour = Some(60.0 / positive_number(m)?),
                (None, None) => continue,
            }
            break;
        }
        let mu_per_hour = mu_per_hour.ok_or_else(|| ConfigError::Missing {
            section: format!("scenario.{}", section.name),
            key: "mu_per_hour".into(),
        })?;
        let mark = match r.get("mark") {
            Some(e) => parse_mark(&e.value).map_err(|why| invalid(e, why))?,
            None => MarkDistribution::Deterministic { value: 1.0 },
        };
        let eps_entry = r.require("epsilon")?;
        let epsilon = number(eps_entry)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(eps_entry, "must lie in (0, 1)"));
        }
        let criterion = match r.get("criterion") {
            Some(e) => Criterion::parse(&e.value)
                .ok_or_else(|| invalid(e, "expected p0, p1 or blocking"))?,
            None => Criterion::P0,
        };
        let n_list = match r.get("n_list") {
            Some(e) => number_list(e)?
                .into_iter()
                .map(|x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as u64)
                    } else {
                        Err(invalid(e, "batch indices must be positive integers"))
                    }
                })
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        let label = r
            .section
            .get("label")
            .map_or_else(|| section.name.clone(), |e| e.value.clone());
        Ok(Self {
            name: section.name.clone(),
            label,
            demand,
            miles_per_disengagement,
            mu_per_hour,
            mark,
            epsilon,
            criterion,
            n_list,
        })
    }

    /// Arrival rate per hour for the single-rate modes.
    pub fn lambda_per_hour(&self) -> Result<f64, ScenarioError> {
        match self.demand {
            Demand::Rate { lambda_per_hour } => Ok(lambda_per_hour),
            Demand::AnnualMiles {
                annual_miles_millions,
                days_per_year,
                peak_hour_fraction,
            } => self.rate_from_miles(peak_hour_miles(
                annual_miles_millions,
                days_per_year,
                peak_hour_fraction,
            )),
            _ => Err(self.wrong_mode("needs a single rate or annual miles")),
        }
    }

    fn rate_from_miles(&self, miles: f64) -> Result<f64, ScenarioError> {
        if miles == 0.0 {
            return Ok(0.0);
        }
        let mpd = self
            .miles_per_disengagement
            .ok_or_else(|| self.wrong_mode("needs miles_per_disengagement"))?;
        arrival_rate_from_miles(miles, mpd)
    }

    fn wrong_mode(&self, reason: &'static str) -> ScenarioError {
        ScenarioError::WrongMode {
            scenario: self.name.clone(),
            reason,
        }
    }

    /// Same scenario with a different day-count convention.
    pub fn with_days_per_year(&self, days: f64) -> Self {
        let mut s = self.clone();
        match &mut s.demand {
            Demand::AnnualMiles { days_per_year, .. } | Demand::Fleet { days_per_year, .. } => {
                *days_per_year = days
            }
            _ => {}
        }
        s
    }

    pub fn days_per_year(&self) -> Option<f64> {
        match self.demand {
            Demand::AnnualMiles { days_per_year, .. } | Demand::Fleet { days_per_year, .. } => {
                Some(days_per_year)
            }
            _ => None,
        }
    }

    /// Minimal ratio for `criterion`; zero demand needs no staff.
    pub fn solve(&self, lambda_per_hour: f64, criterion: Criterion) -> Result<f64, ScenarioError> {
        if lambda_per_hour == 0.0 {
            return Ok(0.0);
        }
        solve_ratio(
            lambda_per_hour,
            self.mu_per_hour,
            &self.mark,
            self.epsilon,
            criterion,
        )
        .map(|r| r.c)
        .map_err(|source| ScenarioError::Solve {
            label: self.label.clone(),
            source,
        })
    }

    /// `λE[M]/(cμ)`, zero when `c = 0`.
    pub fn utilization(&self, lambda_per_hour: f64, c: f64) -> f64 {
        utilization(lambda_per_hour, self.mu_per_hour, self.mark.mean(), c)
    }

    fn staff(&self, c: f64) -> Vec<(u64, u64)> {
        self.n_list
            .iter()
            .map(|&n| (n, staff_count(c, n)))
            .collect()
    }
}

pub fn utilization(lambda: f64, mu: f64, mark_mean: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        lambda * mark_mean / (c * mu)
    }
}

/// Keys that displace each other when one is overridden.
const EXCLUSIVE_GROUPS: [&[&str]; 3] = [
    &MODE_KEYS,
    &["mu_per_hour", "mean_service_minutes"],
    &["servers", "staffing_ratio"],
];

/// Applies `key=value` overrides on top of every section. Setting one key of
/// an exclusive group (demand mode, service rate, server count) removes the
/// others.
pub fn apply_overrides(file: &mut ConfigFile, overrides: &[(String, String)]) {
    for (key, value) in overrides {
        let exclusive = EXCLUSIVE_GROUPS
            .iter()
            .find(|g| g.contains(&key.as_str()))
            .map_or(&[][..], |g| *g);
        file.set_override(key, value, exclusive);
    }
}

/// Every `[scenario.<name>]` of `text`, in file order.
pub fn load_scenarios(text: &str) -> Result<Vec<Scenario>, ConfigError> {
    scenarios_from_config(&parse_config(text)?)
}

pub fn scenarios_from_config(file: &ConfigFile) -> Result<Vec<Scenario>, ConfigError> {
    check_keys(&file.system)?;
    if file.scenarios.is_empty() {
        return Err(ConfigError::NoScenarios);
    }
    file.scenarios
        .iter()
        .map(|s| {
            check_keys(s)?;
            Scenario::from_sections(&file.system, s)
        })
        .collect()
}

/// One scenario per metro with the shared settings of `base`.
pub fn metro_scenarios(base: &Scenario, metros: &[Metro]) -> Vec<Scenario> {
    let (days, peak) = match base.demand {
        Demand::AnnualMiles {
            days_per_year,
            peak_hour_fraction,
            ..
        } => (days_per_year, peak_hour_fraction),
        _ => (DEFAULT_DAYS_PER_YEAR, PEAK_HOUR_FRACTION),
    };
    metros
        .iter()
        .map(|m| Scenario {
            name: format!("metro{}", m.rank),
            label: m.name.clone(),
            demand: Demand::AnnualMiles {
                annual_miles_millions: m.annual_miles_millions,
                days_per_year: days,
                peak_hour_fraction: peak,
            },
            ..base.clone()
        })
        .collect()
}

/// Peak-hour table settings: Det(1) marks, one-minute service, `ε = 0.001`.
pub fn default_table_scenario() -> Scenario {
    Scenario {
        name: "table".into(),
        label: "table".into(),
        demand: Demand::AnnualMiles {
            annual_miles_millions: 1.0,
            days_per_year: DEFAULT_DAYS_PER_YEAR,
            peak_hour_fraction: PEAK_HOUR_FRACTION,
        },
        miles_per_disengagement: Some(WAYMO_MILES_PER_DISENGAGEMENT),
        mu_per_hour: 60.0,
        mark: MarkDistribution::Deterministic { value: 1.0 },
        epsilon: 1e-3,
        criterion: Criterion::P0,
        n_list: Vec::new(),
    }
}

/// Fleet-growth settings: log-normal(1, 0.5) marks, one-minute service,
/// PM shift of a 70,000 mi/yr taxi, `ε = 0.001`, `n ∈ {100, 250, 500}`.
pub fn default_fleet_scenario(fleet_sizes: Vec<f64>) -> Scenario {
    Scenario {
        name: "fleet".into(),
        label: "fleet".into(),
        demand: Demand::Fleet {
            fleet_sizes,
            miles_per_vehicle_per_year: TAXI_MILES_PER_VEHICLE_YEAR,
            days_per_year: 365.0,
            shift_fraction: PM_SHIFT_FRACTION,
            shift_hours: PM_SHIFT_HOURS,
        },
        miles_per_disengagement: Some(GM_CRUISE_MILES_PER_DISENGAGEMENT),
        mu_per_hour: 60.0,
        mark: MarkDistribution::lognormal(1.0, 0.5).expect("valid parameters"),
        epsilon: 1e-3,
        criterion: Criterion::P0,
        n_list: vec![100, 250, 500],
    }
}

/// One solve under the scenario's own criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct StaffRow {
    pub label: String,
    pub lambda_per_hour: f64,
    pub criterion: Criterion,
    pub c: f64,
    /// Criterion value at `c`; `None` for zero demand.
    pub achieved: Option<f64>,
    pub epsilon: f64,
    pub utilization: f64,
    pub staff: Vec<(u64, u64)>,
    pub mu_per_hour: f64,
    pub mark_mean: f64,
}

/// Single-rate scenarios solved for their own criterion, in input order.
pub fn run_staff(scenarios: &[Scenario]) -> Result<Vec<StaffRow>, ScenarioError> {
    scenarios
        .par_iter()
        .map(|s| {
            let lambda = s.lambda_per_hour()?;
            let (c, achieved) = if lambda == 0.0 {
                (0.0, None)
            } else {
                let r = solve_ratio(lambda, s.mu_per_hour, &s.mark, s.epsilon, s.criterion)
                    .map_err(|source| ScenarioError::Solve {
                        label: s.label.clone(),
                        source,
                    })?;
                (r.c, Some(r.achieved))
            };
            Ok(StaffRow {
                label: s.label.clone(),
                lambda_per_hour: lambda,
                criterion: s.criterion,
                c,
                achieved,
                epsilon: s.epsilon,
                utilization: s.utilization(lambda, c),
                staff: s.staff(c),
                mu_per_hour: s.mu_per_hour,
                mark_mean: s.mark.mean(),
            })
        })
        .collect()
}

/// Every criterion at one ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedanceRow {
    pub c: f64,
    pub lambda_per_hour: f64,
    pub mu_per_hour: f64,
    pub mark_mean: f64,
    pub p0: f64,
    pub p1: f64,
    pub blocking: f64,
    pub upper_bound: f64,
    pub utilization: f64,
}

/// Exceedance probabilities of a single-rate scenario at each ratio in `cs`.
pub fn exceedance_rows(
    scenario: &Scenario,
    cs: &[f64],
) -> Result<Vec<ExceedanceRow>, ScenarioError> {
    let lambda = positive("lambda_per_hour", scenario.lambda_per_hour()?)?;
    cs.par_iter()
        .map(|&c| {
            let wrap = |source| ScenarioError::Evaluate {
                label: scenario.label.clone(),
                c,
                source,
            };
            let sys =
                MarkovSystem::new(lambda, scenario.mu_per_hour, scenario.mark, c).map_err(wrap)?;
            Ok(ExceedanceRow {
                c,
                lambda_per_hour: lambda,
                mu_per_hour: scenario.mu_per_hour,
                mark_mean: scenario.mark.mean(),
                p0: sys.exceedance_p0().map_err(wrap)?.value,
                p1: sys.exceedance_p1().map_err(wrap)?.value,
                blocking: sys.blocking_exceedance().map_err(wrap)?.value,
                upper_bound: sys.exceedance_upper_bound(),
                utilization: sys.utilization(),
            })
        })
        .collect()
}

/// Ratios under the alternative day-count convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub days_per_year: f64,
    pub lambda_per_hour: f64,
    pub c_p0: f64,
    pub c_p1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub label: String,
    pub lambda_per_hour: f64,
    pub mu_per_hour: f64,
    pub mark_mean: f64,
    pub days_per_year: Option<f64>,
    pub c_p0: f64,
    pub c_p1: f64,
    pub util_p0: f64,
    pub util_p1: f64,
    pub staff_criterion: Criterion,
    /// `(n, ⌈c n⌉)` for the scenario's criterion.
    pub staff: Vec<(u64, u64)>,
    pub sensitivity: Option<Sensitivity>,
}

/// 360 ↔ 365.
fn alternative_days(days: f64) -> f64 {
    if days == 365.0 {
        360.0
    } else {
        365.0
    }
}

fn table_row(s: &Scenario) -> Result<ScenarioRow, ScenarioError> {
    let lambda = s.lambda_per_hour()?;
    let c_p0 = s.solve(lambda, Criterion::P0)?;
    let c_p1 = s.solve(lambda, Criterion::P1)?;
    let c_staff = match s.criterion {
        Criterion::P0 => c_p0,
        Criterion::P1 => c_p1,
        Criterion::Blocking => s.solve(lambda, Criterion::Blocking)?,
    };
    let sensitivity = match s.demand {
        Demand::AnnualMiles { days_per_year, .. } => {
            let alt = s.with_days_per_year(alternative_days(days_per_year));
            let l = alt.lambda_per_hour()?;
            Some(Sensitivity {
                days_per_year: alt.days_per_year().unwrap_or(days_per_year),
                lambda_per_hour: l,
                c_p0: alt.solve(l, Criterion::P0)?,
                c_p1: alt.solve(l, Criterion::P1)?,
            })
        }
        _ => None,
    };
    Ok(ScenarioRow {
        label: s.label.clone(),
        lambda_per_hour: lambda,
        mu_per_hour: s.mu_per_hour,
        mark_mean: s.mark.mean(),
        days_per_year: s.days_per_year(),
        c_p0,
        c_p1,
        util_p0: s.utilization(lambda, c_p0),
        util_p1: s.utilization(lambda, c_p1),
        staff_criterion: s.criterion,
        staff: s.staff(c_staff),
        sensitivity,
    })
}

/// Solves every scenario for both criteria; output order follows input order.
pub fn run_table(scenarios: &[Scenario]) -> Result<Vec<ScenarioRow>, ScenarioError> {
    scenarios.par_iter().map(table_row).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetPoint {
    pub fleet_size: f64,
    pub lambda_per_hour: f64,
    pub c: f64,
    pub utilization: f64,
    pub staff: Vec<(u64, u64)>,
    /// One operator per vehicle.
    pub one_to_one: f64,
}

/// Staffing against fleet size; a fleet of zero needs no staff.
pub fn fleet_growth_curve(
    scenario: &Scenario,
    fleet_sizes: &[f64],
    n_list: &[u64],
) -> Result<Vec<FleetPoint>, ScenarioError> {
    let Demand::Fleet {
        miles_per_vehicle_per_year,
        days_per_year,
        shift_fraction,
        shift_hours,
        ..
    } = scenario.demand
    else {
        return Err(scenario.wrong_mode("needs fleet_sizes_vehicles"));
    };
    if let Some(&bad) = fleet_sizes.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(ScenarioError::InvalidInput {
            name: "fleet size",
            value: bad,
        });
    }
    let mut s = scenario.clone();
    s.n_list = n_list.to_vec();
    fleet_sizes
        .par_iter()
        .map(|&fleet| {
            let hourly_miles =
                fleet * miles_per_vehicle_per_year / days_per_year * shift_fraction / shift_hours;
            let lambda = s.rate_from_miles(hourly_miles)?;
            let c = s.solve(lambda, s.criterion).map_err(|e| match e {
                ScenarioError::Solve { source, .. } => ScenarioError::Solve {
                    label: format!("{} fleet {fleet}", s.label),
                    source,
                },
                other => other,
            })?;
            Ok(FleetPoint {
                fleet_size: fleet,
                lambda_per_hour: lambda,
                c,
                utilization: s.utilization(lambda, c),
                staff: s.staff(c),
                one_to_one: fleet,
            })
        })
        .collect()
}

/// [`fleet_growth_curve`] over the scenario's own fleet sizes and n-list.
pub fn scenario_fleet_curve(scenario: &Scenario) -> Result<Vec<FleetPoint>, ScenarioError> {
    match &scenario.demand {
        Demand::Fleet { fleet_sizes, .. } => {
            fleet_growth_curve(scenario, fleet_sizes, &scenario.n_list)
        }
        _ => Err(scenario.wrong_mode("needs fleet_sizes_vehicles")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourRow {
    pub hour: usize,
    pub miles: f64,
    pub lambda_per_hour: f64,
    pub c: f64,
    pub utilization: f64,
    pub staff: Vec<(u64, u64)>,
}

/// Independent static solve per hour; zero-mile hours get `c = 0`.
pub fn hourly_profile(scenario: &Scenario) -> Result<Vec<HourRow>, ScenarioError> {
    let Demand::HourlyMiles { miles } = &scenario.demand else {
        return Err(scenario.wrong_mode("needs hourly_miles"));
    };
    miles
        .par_iter()
        .enumerate()
        .map(|(hour, &m)| {
            let lambda = scenario.rate_from_miles(m)?;
            let c = scenario
                .solve(lambda, scenario.criterion)
                .map_err(|e| match e {
                    ScenarioError::Solve { source, .. } => ScenarioError::Solve {
                        label: format!("{} hour {hour}", scenario.label),
                        source,
                    },
                    other => other,
                })?;
            Ok(HourRow {
                hour,
                miles: m,
                lambda_per_hour: lambda,
                c,
                utilization: scenario.utilization(lambda, c),
                staff: scenario.staff(c),
            })
        })
        .collect()
}
