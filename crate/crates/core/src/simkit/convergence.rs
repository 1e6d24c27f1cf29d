//! Batch-scaling studies: the terminal law of `Q_t(n)/n` against the storage
//! process it converges to.

use super::{
    ks_distance, simulate_queue, simulate_storage, ArrivalProcess, Discipline, QueueSpec, Servers,
    SimError, SimOptions, StorageSpec, StorageVariant,
};
use crate::marks::{BatchDistribution, ServiceDistribution};

/// Queue discipline together with its storage limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingLimit {
    /// Infinite servers, shot-noise limit.
    ShotNoise,
    /// `⌈cn⌉` FCFS servers, c-threshold limit.
    Threshold,
    /// `⌈cn⌉` servers with partial blocking, finite-storage limit.
    Finite,
}

impl ScalingLimit {
    pub fn name(self) -> &'static str {
        match self {
            Self::ShotNoise => "shot_noise",
            Self::Threshold => "threshold",
            Self::Finite => "finite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shot_noise" | "infinite" => Some(Self::ShotNoise),
            "threshold" | "delay" => Some(Self::Threshold),
            "finite" | "blocking" => Some(Self::Finite),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub lambda: f64,
    pub mu: f64,
    /// Server ratio; unused by [`ScalingLimit::ShotNoise`].
    pub c: f64,
    /// Batch family, rescaled to each `n`.
    pub batch: BatchDistribution,
    pub limit: ScalingLimit,
    pub n_list: Vec<u64>,
    pub options: SimOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub n: u64,
    pub ks: f64,
    pub queue_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub storage_mean: f64,
    /// In the order of `n_list`.
    pub points: Vec<ScalingPoint>,
}

impl ScalingReport {
    pub fn ks_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].ks < w[0].ks)
    }
}

/// Every run shares the seed, so queue and storage see the same epochs and
/// size uniforms.
pub fn batch_scaling_study(study: &ScalingStudy) -> Result<ScalingReport, SimError> {
    if study.n_list.is_empty() {
        return Err(SimError::InvalidParameter {
            name: "n_list",
            value: 0.0,
        });
    }
    let service = ServiceDistribution::exponential(study.mu)?;
    let variant = match study.limit {
        ScalingLimit::ShotNoise => StorageVariant::ShotNoise,
        ScalingLimit::Threshold => StorageVariant::Threshold(study.c),
        ScalingLimit::Finite => StorageVariant::Finite(study.c),
    };
    let storage = StorageSpec::new(study.lambda, study.batch.batch_to_mark(), service, variant);
    let limit_run = simulate_storage(&storage, &study.options)?;
    let mut points = Vec::with_capacity(study.n_list.len());
    for &n in &study.n_list {
        let batch = study.batch.rescaled(n)?;
        let cn = (study.c * n as f64).ceil() as u64;
        let (servers, discipline) = match study.limit {
            ScalingLimit::ShotNoise => (Servers::Infinite, Discipline::DelayFcfs),
            ScalingLimit::Threshold => (Servers::Finite(cn), Discipline::DelayFcfs),
            ScalingLimit::Finite => (Servers::Finite(cn), Discipline::PartialBlocking),
        };
        let spec = QueueSpec::new(
            ArrivalProcess::Poisson { rate: study.lambda },
            batch,
            service,
            servers,
            discipline,
        );
        let run = simulate_queue(&spec, &study.options)?;
        let scaled = run.scaled_terminal(n as f64);
        points.push(ScalingPoint {
            n,
            ks: ks_distance(&scaled, &limit_run.terminal)?,
            queue_mean: run.mean / n as f64,
        });
    }
    Ok(ScalingReport {
        storage_mean: limit_run.mean,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_noise_study_converges() {
        let study = ScalingStudy {
            lambda: 1.0,
            mu: 1.0,
            c: 0.0,
            batch: BatchDistribution::poisson(1).unwrap(),
            limit: ScalingLimit::ShotNoise,
            n_list: vec![2, 200],
            options: SimOptions::new(10.0, 2000, 11),
        };
        let r = batch_scaling_study(&study).unwrap();
        assert!(r.ks_strictly_decreasing(), "{r:?}");
        assert!(r.points[1].ks < 0.05);
        assert!((r.points[1].queue_mean - r.storage_mean).abs() < 0.05);
    }

    #[test]
    fn names_round_trip() {
        for l in [
            ScalingLimit::ShotNoise,
            ScalingLimit::Threshold,
            ScalingLimit::Finite,
        ] {
            assert_eq!(ScalingLimit::parse(l.name()), Some(l));
        }
        assert_eq!(ScalingLimit::parse("blocking"), Some(ScalingLimit::Finite));
        assert!(ScalingLimit::parse("x").is_none());
    }
}
