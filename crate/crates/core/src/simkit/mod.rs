//! Seeded discrete-event simulation of batch-arrival queues and exact path
//! simulation of their limiting storage processes.
//!
//! Every replication owns two ChaCha8 streams derived from the master seed:
//! one for arrival epochs and batch/mark uniforms, one for service draws.
//! A queue and a storage process simulated with the same seed therefore see
//! the same epochs, and `B(n)` and `M` are coupled through a shared uniform.
//! Replications run in parallel and are collected in index order, so results
//! do not depend on the thread count.

mod arrivals;
mod convergence;
mod dependence;
mod queue;
mod stats;
mod storage;

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::marks::{BatchDistribution, MarkDistribution, MarkError, ServiceDistribution};

pub use convergence::{
    batch_scaling_study, ScalingLimit, ScalingPoint, ScalingReport, ScalingStudy,
};
pub use dependence::{sample_dependent_services, Dependence, DependenceMode};
pub use stats::{empirical_cdf, ks_distance, ks_distance_to_cdf, pairwise_sum};
pub use storage::{
    drain_threshold, finite_admit, storage_arrival_exceedance, storage_time_average_min,
    ArrivalExceedance,
};

/// Default share of the horizon discarded before time averages.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error("parameter `{name}` is invalid: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),
    #[error("sample set is empty")]
    EmptySample,
    #[error(transparent)]
    Mark(#[from] MarkError),
}

pub(crate) fn check_param(name: &'static str, value: f64, ok: bool) -> Result<(), SimError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidParameter { name, value })
    }
}

/// Arrival-epoch law.
#[derive(Clone)]
pub enum ArrivalProcess {
    Poisson {
        rate: f64,
    },
    /// Thinning against `bound ≥ rate(t)`.
    Nonhomogeneous {
        rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        bound: f64,
    },
    /// I.i.d. inter-arrival times; the first epoch is one full draw after 0.
    Renewal {
        interarrival: ServiceDistribution,
    },
}

impl fmt::Debug for ArrivalProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poisson { rate } => f.debug_struct("Poisson").field("rate", rate).finish(),
            Self::Nonhomogeneous { bound, .. } => f
                .debug_struct("Nonhomogeneous")
                .field("bound", bound)
                .finish_non_exhaustive(),
            Self::Renewal { interarrival } => f
                .debug_struct("Renewal")
                .field("interarrival", interarrival)
                .finish(),
        }
    }
}

impl ArrivalProcess {
    /// Long-run epoch rate, when defined.
    pub fn mean_rate(&self) -> Option<f64> {
        match self {
            Self::Poisson { rate } => Some(*rate),
            Self::Nonhomogeneous { .. } => None,
            Self::Renewal { interarrival } => Some(1.0 / interarrival.mean()),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        match self {
            Self::Poisson { rate } => check_param("rate", *rate, *rate >= 0.0),
            Self::Nonhomogeneous { bound, .. } => check_param("bound", *bound, *bound >= 0.0),
            Self::Renewal { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Servers {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    DelayFcfs,
    PartialBlocking,
}

#[derive(Debug, Clone)]
pub struct QueueSpec {
    pub arrivals: ArrivalProcess,
    pub batch: BatchDistribution,
    pub service: ServiceDistribution,
    pub servers: Servers,
    pub discipline: Discipline,
    pub initial_jobs: u64,
    /// Residual-duration law of the initial jobs; `None` uses `service`.
    pub initial_residual: Option<ServiceDistribution>,
    pub dependence: Dependence,
}

impl QueueSpec {
    /// Independent services, empty start.
    pub fn new(
        arrivals: ArrivalProcess,
        batch: BatchDistribution,
        service: ServiceDistribution,
        servers: Servers,
        discipline: Discipline,
    ) -> Self {
        Self {
            arrivals,
            batch,
            service,
            servers,
            discipline,
            initial_jobs: 0,
            initial_residual: None,
            dependence: Dependence::independent(),
        }
    }

    pub fn with_initial_jobs(mut self, jobs: u64) -> Self {
        self.initial_jobs = jobs;
        self
    }

    pub fn with_dependence(mut self, dependence: Dependence) -> Self {
        self.dependence = dependence;
        self
    }

    /// `λE[B] ≥ cnμ`, with the long-run epoch rate. Infinite servers and
    /// blocking are never flagged.
    pub fn is_unstable(&self) -> bool {
        match (self.servers, self.discipline, self.arrivals.mean_rate()) {
            (Servers::Finite(cn), Discipline::DelayFcfs, Some(rate)) => {
                rate * self.batch.mean() * self.service.mean() >= cn as f64
            }
            _ => false,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        self.arrivals.validate()?;
        self.dependence.validate()?;
        if self.servers == Servers::Finite(0) {
            return Err(SimError::InvalidParameter {
                name: "servers",
                value: 0.0,
            });
        }
        if self.servers == Servers::Infinite && self.discipline == Discipline::PartialBlocking {
            return Err(SimError::Unsupported(
                "partial blocking needs a finite server count",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StorageVariant {
    ShotNoise,
    Threshold(f64),
    Finite(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageSpec {
    pub lambda: f64,
    pub mark: MarkDistribution,
    pub service: ServiceDistribution,
    pub variant: StorageVariant,
    pub initial_level: f64,
    /// Tail `Ḡ₀` applied to the initial level; `None` uses `service`.
    pub initial_residual: Option<ServiceDistribution>,
}

impl StorageSpec {
    pub fn new(
        lambda: f64,
        mark: MarkDistribution,
        service: ServiceDistribution,
        variant: StorageVariant,
    ) -> Self {
        Self {
            lambda,
            mark,
            service,
            variant,
            initial_level: 0.0,
            initial_residual: None,
        }
    }

    pub fn with_initial_level(mut self, level: f64) -> Self {
        self.initial_level = level;
        self
    }

    /// Exponential service rate, required by the bounded variants.
    pub(crate) fn validate(&self) -> Result<Option<f64>, SimError> {
        check_param("lambda", self.lambda, self.lambda >= 0.0)?;
        check_param(
            "initial_level",
            self.initial_level,
            self.initial_level >= 0.0,
        )?;
        let mu = self.service.exponential_rate();
        match self.variant {
            StorageVariant::ShotNoise => Ok(mu),
            StorageVariant::Threshold(c) | StorageVariant::Finite(c) => {
                check_param("c", c, c > 0.0)?;
                if let StorageVariant::Finite(c) = self.variant {
                    if self.initial_level > c {
                        return Err(SimError::InvalidParameter {
                            name: "initial_level",
                            value: self.initial_level,
                        });
                    }
                }
                if mu.is_none() {
                    return Err(SimError::Unsupported(
                        "threshold and finite storage need exponential service",
                    ));
                }
                if self.initial_residual.is_some_and(|r| r != self.service) {
                    return Err(SimError::Unsupported(
                        "threshold and finite storage start from a fresh-service level",
                    ));
                }
                Ok(mu)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    pub reps: usize,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub record_paths: bool,
}

impl SimOptions {
    pub fn new(horizon: f64, reps: usize, seed: u64) -> Self {
        Self {
            horizon,
            reps,
            seed,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            record_paths: false,
        }
    }

    pub fn with_paths(mut self) -> Self {
        self.record_paths = true;
        self
    }

    pub fn with_warmup(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidHorizon(self.horizon));
        }
        if self.reps == 0 {
            return Err(SimError::NoReplications);
        }
        check_param(
            "warmup_fraction",
            self.warmup_fraction,
            (0.0..1.0).contains(&self.warmup_fraction),
        )
    }

    pub(crate) fn warmup(&self) -> f64 {
        self.horizon * self.warmup_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Start,
    Arrival,
    Departure,
    Blocked,
    End,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Start => "start",
            Self::Arrival => "arrival",
            Self::Departure => "departure",
            Self::Blocked => "blocked",
            Self::End => "end",
        }
    }
}

/// One path event; `level` is the queue length or storage level just after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub replication: usize,
    pub time: f64,
    pub level: f64,
    pub kind: EventKind,
}

/// Output of one replication.
#[derive(Debug, Clone, Default)]
pub(crate) struct RepOutput {
    pub terminal: f64,
    /// `∫ busy/cn dt` over the post-warm-up window, finite servers only.
    pub busy_integral: Option<f64>,
    pub path: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub seed: u64,
    pub reps: usize,
    pub horizon: f64,
    /// Terminal queue length or storage level, in replication order.
    pub terminal: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Post-warm-up time-average of busy servers over `cn`, averaged over
    /// replications.
    pub busy_fraction: Option<f64>,
    pub unstable: bool,
    pub paths: Vec<PathRecord>,
}

impl SimResult {
    fn assemble(outputs: Vec<RepOutput>, opts: &SimOptions, unstable: bool) -> Self {
        let terminal: Vec<f64> = outputs.iter().map(|o| o.terminal).collect();
        let n = terminal.len() as f64;
        let mean = pairwise_sum(&terminal) / n;
        let dev: Vec<f64> = terminal.iter().map(|x| (x - mean) * (x - mean)).collect();
        let variance = if terminal.len() > 1 {
            pairwise_sum(&dev) / (n - 1.0)
        } else {
            0.0
        };
        let window = opts.horizon - opts.warmup();
        let busy: Option<Vec<f64>> = outputs
            .iter()
            .map(|o| o.busy_integral.map(|b| b / window))
            .collect();
        let busy_fraction = busy.map(|b| pairwise_sum(&b) / n);
        let paths = outputs.into_iter().flat_map(|o| o.path).collect();
        Self {
            seed: opts.seed,
            reps: opts.reps,
            horizon: opts.horizon,
            terminal,
            mean,
            variance,
            busy_fraction,
            unstable,
            paths,
        }
    }

    /// Terminal values divided by `n`.
    pub fn scaled_terminal(&self, n: f64) -> Vec<f64> {
        self.terminal.iter().map(|x| x / n).collect()
    }

    /// Levels, moments and paths divided by `n`.
    pub fn scaled(&self, n: f64) -> Self {
        let mut out = self.clone();
        out.terminal = self.scaled_terminal(n);
        out.mean /= n;
        out.variance /= n * n;
        for p in &mut out.paths {
            p.level /= n;
        }
        out
    }

    pub fn empirical_cdf(&self, grid: &[f64]) -> Result<Vec<f64>, SimError> {
        empirical_cdf(&self.terminal, grid)
    }

    /// `key,value` lines followed by a `x,cdf` block on `grid`.
    pub fn write_summary<W: Write>(&self, w: &mut W, grid: &[f64]) -> io::Result<()> {
        writeln!(w, "key,value")?;
        writeln!(w, "seed,{}", self.seed)?;
        writeln!(w, "reps,{}", self.reps)?;
        writeln!(w, "horizon,{}", self.horizon)?;
        writeln!(w, "mean,{}", self.mean)?;
        writeln!(w, "variance,{}", self.variance)?;
        match self.busy_fraction {
            Some(b) => writeln!(w, "busy_fraction,{b}")?,
            None => writeln!(w, "busy_fraction,")?,
        }
        writeln!(w, "unstable,{}", self.unstable)?;
        if !grid.is_empty() {
            let cdf = self.empirical_cdf(grid).map_err(io::Error::other)?;
            writeln!(w)?;
            writeln!(w, "x,cdf")?;
            for (x, f) in grid.iter().zip(cdf) {
                writeln!(w, "{x},{f}")?;
            }
        }
        Ok(())
    }

    pub fn write_paths<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_paths(&self.paths, w)
    }
}

/// Delimited path dump with columns `replication,time,level,event`.
pub fn write_paths<W: Write>(records: &[PathRecord], w: &mut W) -> io::Result<()> {
    writeln!(w, "replication,time,level,event")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{}",
            r.replication,
            r.time,
            r.level,
            r.kind.name()
        )?;
    }
    Ok(())
}

const ARRIVAL_STREAM: u64 = 0;
const SERVICE_STREAM: u64 = 1;

/// Sub-stream `stream` of replication `rep`.
pub(crate) fn replication_rng(seed: u64, rep: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep as u64) << 1 | stream);
    rng
}

pub(crate) fn run_replications<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

pub fn simulate_queue(spec: &QueueSpec, opts: &SimOptions) -> Result<SimResult, SimError> {
    spec.validate()?;
    opts.validate()?;
    let outputs = run_replications(opts.reps, |rep| {
        let mut arr = replication_rng(opts.seed, rep, ARRIVAL_STREAM);
        let mut svc = replication_rng(opts.seed, rep, SERVICE_STREAM);
        let epochs = arrivals::epochs(&spec.arrivals, opts.horizon, &mut arr);
        queue::run(spec, opts, rep, &epochs, &mut svc)
    });
    Ok(SimResult::assemble(outputs, opts, spec.is_unstable()))
}

pub fn simulate_storage(spec: &StorageSpec, opts: &SimOptions) -> Result<SimResult, SimError> {
    let mu = spec.validate()?;
    opts.validate()?;
    let arrivals = ArrivalProcess::Poisson { rate: spec.lambda };
    let outputs = run_replications(opts.reps, |rep| {
        let mut arr = replication_rng(opts.seed, rep, ARRIVAL_STREAM);
        let epochs = arrivals::epochs(&arrivals, opts.horizon, &mut arr);
        storage::run(spec, mu, opts, rep, &epochs)
    });
    Ok(SimResult::assemble(outputs, opts, false))
}

/// Post-warm-up time-average of busy servers over `cn`.
pub fn busy_fraction(spec: &QueueSpec, opts: &SimOptions) -> Result<f64, SimError> {
    if spec.servers == Servers::Infinite {
        return Err(SimError::Unsupported(
            "busy fraction needs a finite server count",
        ));
    }
    let result = simulate_queue(spec, opts)?;
    Ok(result
        .busy_fraction
        .expect("finite servers record busy time"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm2(seed: u64) -> (QueueSpec, SimOptions) {
        let spec = QueueSpec::new(
            ArrivalProcess::Poisson { rate: 1.0 },
            BatchDistribution::deterministic(1).unwrap(),
            ServiceDistribution::exponential(1.0).unwrap(),
            Servers::Finite(2),
            Discipline::DelayFcfs,
        );
        (spec, SimOptions::new(20_000.0, 4, seed))
    }

    #[test]
    fn erlang_c_all_busy_probability() {
        // M/M/2 at load 1/2: P(Q ≥ 2) = 1/3, read off terminal values.
        let spec = mm2(1).0;
        let opts = SimOptions::new(30.0, 20_000, 7);
        let r = simulate_queue(&spec, &opts).unwrap();
        let p = r.terminal.iter().filter(|&&q| q >= 2.0).count() as f64 / r.reps as f64;
        assert!((p - 1.0 / 3.0).abs() < 0.015, "P(Q>=2) = {p}");
        // Mean busy servers = λ/μ = 1, so busy fraction 1/2.
        let (spec, opts) = mm2(3);
        let b = busy_fraction(&spec, &opts).unwrap();
        assert!((b - 0.5).abs() < 0.01, "busy {b}");
    }

    #[test]
    fn no_arrivals_means_empty_queue() {
        let mut spec = mm2(1).0;
        spec.arrivals = ArrivalProcess::Poisson { rate: 0.0 };
        let r = simulate_queue(&spec, &SimOptions::new(10.0, 50, 1)).unwrap();
        assert!(r.terminal.iter().all(|&q| q == 0.0));
        assert_eq!(
            busy_fraction(&spec, &SimOptions::new(10.0, 5, 1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn saturated_system_is_always_busy() {
        let spec = QueueSpec::new(
            ArrivalProcess::Poisson { rate: 10.0 },
            BatchDistribution::deterministic(5).unwrap(),
            ServiceDistribution::exponential(1.0).unwrap(),
            Servers::Finite(3),
            Discipline::DelayFcfs,
        );
        assert!(spec.is_unstable());
        let r = simulate_queue(&spec, &SimOptions::new(50.0, 3, 2)).unwrap();
        assert!(r.unstable);
        assert!(r.busy_fraction.unwrap() > 0.999);
    }

    #[test]
    fn bad_options_are_rejected() {
        let spec = mm2(1).0;
        assert_eq!(
            simulate_queue(&spec, &SimOptions::new(0.0, 1, 1)),
            Err(SimError::InvalidHorizon(0.0))
        );
        assert_eq!(
            simulate_queue(&spec, &SimOptions::new(1.0, 0, 1)),
            Err(SimError::NoReplications)
        );
        let mut inf = spec.clone();
        inf.servers = Servers::Infinite;
        assert!(matches!(
            busy_fraction(&inf, &SimOptions::new(1.0, 1, 1)),
            Err(SimError::Unsupported(_))
        ));
        inf.discipline = Discipline::PartialBlocking;
        assert!(simulate_queue(&inf, &SimOptions::new(1.0, 1, 1)).is_err());
        let mut zero = spec;
        zero.servers = Servers::Finite(0);
        assert!(simulate_queue(&zero, &SimOptions::new(1.0, 1, 1)).is_err());
    }

    #[test]
    fn same_seed_same_result() {
        let spec = QueueSpec::new(
            ArrivalProcess::Poisson { rate: 3.0 },
            BatchDistribution::geometric(20, 1.0).unwrap(),
            ServiceDistribution::lognormal(0.5, 0.2).unwrap(),
            Servers::Finite(40),
            Discipline::DelayFcfs,
        );
        let opts = SimOptions::new(5.0, 64, 99);
        let a = simulate_queue(&spec, &opts).unwrap();
        let b = simulate_queue(&spec, &opts).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_queue(&spec, &opts).unwrap());
        assert_eq!(a, single);
        let c = simulate_queue(&spec, &SimOptions::new(5.0, 64, 100)).unwrap();
        assert_ne!(a.terminal, c.terminal);
    }

    #[test]
    fn summary_and_paths_export() {
        let (spec, _) = mm2(1);
        let opts = SimOptions::new(2.0, 2, 5).with_paths();
        let r = simulate_queue(&spec, &opts).unwrap();
        let mut buf = Vec::new();
        r.write_summary(&mut buf, &[0.0, 1.0, 2.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("key,value\nseed,5\nreps,2\n"));
        assert!(text.contains("\nx,cdf\n0,"));
        let mut buf = Vec::new();
        r.write_paths(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replication,time,level,event");
        assert_eq!(lines.len(), r.paths.len() + 1);
        assert!(lines[1].ends_with(",start"));
        assert!(r.paths.iter().filter(|p| p.kind == EventKind::End).count() == 2);
    }
}
