use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;

use super::arrivals::Epoch;
use super::dependence::fill_services;
use super::{Discipline, EventKind, PathRecord, QueueSpec, RepOutput, Servers, SimOptions};

/// Length of `[a, b] ∩ [lo, hi]`.
fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

pub(crate) fn run<R: Rng + ?Sized>(
    spec: &QueueSpec,
    opts: &SimOptions,
    rep: usize,
    epochs: &[Epoch],
    rng: &mut R,
) -> RepOutput {
    let fresh_residual = spec.initial_residual.is_none_or(|r| r == spec.service);
    match spec.service.exponential_rate() {
        Some(mu) if spec.dependence.is_independent() && fresh_residual => {
            run_markov(spec, mu, opts, rep, epochs, rng)
        }
        _ => run_general(spec, opts, rep, epochs, rng),
    }
}

/// Memoryless service: departures are exponential clocks at rate
/// `μ·min(Q, cn)`, restarted at every arrival.
fn run_markov<R: Rng + ?Sized>(
    spec: &QueueSpec,
    mu: f64,
    opts: &SimOptions,
    rep: usize,
    epochs: &[Epoch],
    rng: &mut R,
) -> RepOutput {
    let cap = match spec.servers {
        Servers::Finite(cn) => cn,
        Servers::Infinite => u64::MAX,
    };
    let (lo, hi) = (opts.warmup(), opts.horizon);
    let mut q = match spec.discipline {
        Discipline::DelayFcfs => spec.initial_jobs,
        Discipline::PartialBlocking => spec.initial_jobs.min(cap),
    };
    let mut t = 0.0;
    let mut busy = 0.0;
    let mut path = Vec::new();
    let record = opts.record_paths;
    let log = |path: &mut Vec<PathRecord>, time, q: u64, kind| {
        if record {
            path.push(PathRecord {
                replication: rep,
                time,
                level: q as f64,
                kind,
            });
        }
    };
    log(&mut path, 0.0, q, EventKind::Start);
    let next_times = epochs
        .iter()
        .map(|e| (e.time, Some(e.u)))
        .chain([(hi, None)]);
    for (next, u) in next_times {
        loop {
            let active = q.min(cap);
            if active == 0 {
                break;
            }
            let gap: f64 = rng.sample(Exp1);
            let d = gap / (mu * active as f64);
            if t + d >= next {
                break;
            }
            busy += overlap(t, t + d, lo, hi) * active as f64;
            t += d;
            q -= 1;
            log(&mut path, t, q, EventKind::Departure);
        }
        busy += overlap(t, next, lo, hi) * q.min(cap) as f64;
        t = next;
        let Some(u) = u else { break };
        let b = spec.batch.quantile(u);
        let kind = match spec.discipline {
            Discipline::DelayFcfs => {
                q += b;
                EventKind::Arrival
            }
            Discipline::PartialBlocking => {
                let admitted = b.min(cap - q);
                q += admitted;
                if admitted < b {
                    EventKind::Blocked
                } else {
                    EventKind::Arrival
                }
            }
        };
        log(&mut path, t, q, kind);
    }
    log(&mut path, hi, q, EventKind::End);
    RepOutput {
        terminal: q as f64,
        busy_integral: match spec.servers {
            Servers::Finite(cn) => Some(busy / cn as f64),
            Servers::Infinite => None,
        },
        path,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// One admitted job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Job {
    pub arrival: f64,
    pub start: f64,
    pub done: f64,
}

/// Admitted jobs in arrival-then-index order, plus arrival events with the
/// blocked count.
pub(crate) struct Schedule {
    pub jobs: Vec<Job>,
    pub arrivals: Vec<(f64, u64, u64)>,
}

pub(crate) fn schedule<R: Rng + ?Sized>(
    spec: &QueueSpec,
    epochs: &[Epoch],
    rng: &mut R,
) -> Schedule {
    let residual = spec.initial_residual.unwrap_or(spec.service);
    let dep = spec.dependence;
    let mut jobs = Vec::new();
    let mut arrivals = Vec::with_capacity(epochs.len());
    let mut durations = Vec::new();
    match (spec.servers, spec.discipline) {
        (Servers::Infinite, _) => {
            for _ in 0..spec.initial_jobs {
                let s = residual.sample(rng);
                jobs.push(Job {
                    arrival: 0.0,
                    start: 0.0,
                    done: s,
                });
            }
            for e in epochs {
                let b = spec.batch.quantile(e.u);
                durations.clear();
                fill_services(
                    dep.mode,
                    dep.rho,
                    b as usize,
                    &spec.service,
                    rng,
                    &mut durations,
                );
                for &s in &durations {
                    jobs.push(Job {
                        arrival: e.time,
                        start: e.time,
                        done: e.time + s,
                    });
                }
                arrivals.push((e.time, b, 0));
            }
        }
        (Servers::Finite(cn), Discipline::DelayFcfs) => {
            // Free times of the cn servers; FCFS start is the earliest one.
            let mut free: BinaryHeap<Reverse<Time>> = (0..cn).map(|_| Reverse(Time(0.0))).collect();
            let mut admit = |arrival: f64, s: f64, jobs: &mut Vec<Job>| {
                let Reverse(Time(f)) = free.pop().expect("cn ≥ 1");
                let start = f.max(arrival);
                let done = start + s;
                free.push(Reverse(Time(done)));
                jobs.push(Job {
                    arrival,
                    start,
                    done,
                });
            };
            for _ in 0..spec.initial_jobs {
                let s = residual.sample(rng);
                admit(0.0, s, &mut jobs);
            }
            for e in epochs {
                let b = spec.batch.quantile(e.u);
                durations.clear();
                fill_services(
                    dep.mode,
                    dep.rho,
                    b as usize,
                    &spec.service,
                    rng,
                    &mut durations,
                );
                for &s in &durations {
                    admit(e.time, s, &mut jobs);
                }
                arrivals.push((e.time, b, 0));
            }
        }
        (Servers::Finite(cn), Discipline::PartialBlocking) => {
            let mut in_system: BinaryHeap<Reverse<Time>> = BinaryHeap::new();
            for _ in 0..spec.initial_jobs.min(cn) {
                let s = residual.sample(rng);
                in_system.push(Reverse(Time(s)));
                jobs.push(Job {
                    arrival: 0.0,
                    start: 0.0,
                    done: s,
                });
            }
            for e in epochs {
                while in_system
                    .peek()
                    .is_some_and(|Reverse(Time(d))| *d <= e.time)
                {
                    in_system.pop();
                }
                let b = spec.batch.quantile(e.u);
                durations.clear();
                fill_services(
                    dep.mode,
                    dep.rho,
                    b as usize,
                    &spec.service,
                    rng,
                    &mut durations,
                );
                let admitted = b.min(cn - in_system.len() as u64);
                for &s in &durations[..admitted as usize] {
                    in_system.push(Reverse(Time(e.time + s)));
                    jobs.push(Job {
                        arrival: e.time,
                        start: e.time,
                        done: e.time + s,
                    });
                }
                arrivals.push((e.time, admitted, b - admitted));
            }
        }
    }
    Schedule { jobs, arrivals }
}

fn run_general<R: Rng + ?Sized>(
    spec: &QueueSpec,
    opts: &SimOptions,
    rep: usize,
    epochs: &[Epoch],
    rng: &mut R,
) -> RepOutput {
    let (lo, hi) = (opts.warmup(), opts.horizon);
    let sched = schedule(spec, epochs, rng);
    let terminal = sched.jobs.iter().filter(|j| j.done > hi).count() as f64;
    let busy_integral = match spec.servers {
        Servers::Finite(cn) => Some(
            sched
                .jobs
                .iter()
                .map(|j| overlap(j.start, j.done, lo, hi))
                .sum::<f64>()
                / cn as f64,
        ),
        Servers::Infinite => None,
    };
    let path = if opts.record_paths {
        general_path(&sched, spec.initial_jobs_admitted(), rep, hi)
    } else {
        Vec::new()
    };
    RepOutput {
        terminal,
        busy_integral,
        path,
    }
}

impl QueueSpec {
    fn initial_jobs_admitted(&self) -> u64 {
        match (self.servers, self.discipline) {
            (Servers::Finite(cn), Discipline::PartialBlocking) => self.initial_jobs.min(cn),
            _ => self.initial_jobs,
        }
    }
}

fn general_path(sched: &Schedule, initial: u64, rep: usize, hi: f64) -> Vec<PathRecord> {
    // (time, delta, kind); departures sort before arrivals at equal times.
    let mut events: Vec<(f64, i64, EventKind)> = Vec::new();
    for &(t, admitted, blocked) in &sched.arrivals {
        let kind = if blocked > 0 {
            EventKind::Blocked
        } else {
            EventKind::Arrival
        };
        events.push((t, admitted as i64, kind));
    }
    for j in &sched.jobs {
        if j.done <= hi {
            events.push((j.done, -1, EventKind::Departure));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut q = initial as i64;
    let mut path = vec![PathRecord {
        replication: rep,
        time: 0.0,
        level: q as f64,
        kind: EventKind::Start,
    }];
    for (time, delta, kind) in events {
        q += delta;
        path.push(PathRecord {
            replication: rep,
            time,
            level: q as f64,
            kind,
        });
    }
    path.push(PathRecord {
        replication: rep,
        time: hi,
        level: q as f64,
        kind: EventKind::End,
    });
    path
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::arrivals::epochs;
    use super::super::{
        replication_rng, simulate_queue, ArrivalProcess, Dependence, DependenceMode, SimOptions,
    };
    use super::*;
    use crate::marks::{BatchDistribution, ServiceDistribution};

    fn spec(servers: Servers, discipline: Discipline, service: ServiceDistribution) -> QueueSpec {
        QueueSpec::new(
            ArrivalProcess::Poisson { rate: 2.0 },
            BatchDistribution::geometric(6, 1.0).unwrap(),
            service,
            servers,
            discipline,
        )
        .with_initial_jobs(9)
    }

    fn lognormal() -> ServiceDistribution {
        ServiceDistribution::lognormal(1.0, 0.8).unwrap()
    }

    fn build(spec: &QueueSpec, seed: u64) -> Schedule {
        let mut arr = ChaCha8Rng::seed_from_u64(seed);
        let mut svc = ChaCha8Rng::seed_from_u64(seed + 1);
        let e = epochs(&spec.arrivals, 40.0, &mut arr);
        schedule(spec, &e, &mut svc)
    }

    #[test]
    fn fcfs_conservation_at_every_event() {
        let cn = 5;
        let s = spec(Servers::Finite(cn), Discipline::DelayFcfs, lognormal())
            .with_dependence(Dependence::new(DependenceMode::CopyPrevious, 0.5).unwrap());
        let sched = build(&s, 11);
        let mut times: Vec<f64> = sched
            .jobs
            .iter()
            .flat_map(|j| [j.arrival, j.start, j.done])
            .collect();
        times.sort_by(f64::total_cmp);
        for &t in &times {
            let present = sched.jobs.iter().filter(|j| j.arrival <= t && j.done > t);
            let (total, serving) = present.fold((0u64, 0u64), |(n, s), j| {
                (n + 1, s + u64::from(j.start <= t))
            });
            let waiting = total - serving;
            assert!(serving <= cn);
            assert!(
                waiting == 0 || serving == cn,
                "t={t}: {serving} serving, {waiting} waiting"
            );
        }
        // Batch members start in index order.
        assert!(sched.jobs.windows(2).all(|w| w[0].start <= w[1].start));
    }

    #[test]
    fn infinite_servers_never_wait() {
        let s = spec(Servers::Infinite, Discipline::DelayFcfs, lognormal());
        let sched = build(&s, 3);
        assert!(sched.jobs.iter().all(|j| j.start == j.arrival));
    }

    #[test]
    fn blocking_caps_the_queue_and_admits_the_free_room() {
        let cn = 7;
        for service in [lognormal(), ServiceDistribution::exponential(1.0).unwrap()] {
            let s = spec(Servers::Finite(cn), Discipline::PartialBlocking, service);
            let sched = build(&s, 5);
            for &(t, admitted, blocked) in &sched.arrivals {
                let before = sched
                    .jobs
                    .iter()
                    .filter(|j| j.arrival < t && j.done > t)
                    .count() as u64;
                assert_eq!(admitted, (admitted + blocked).min(cn - before));
            }
            let opts = SimOptions::new(40.0, 3, 8).with_paths();
            let r = simulate_queue(&s, &opts).unwrap();
            assert!(r.paths.iter().all(|p| p.level <= cn as f64));
            assert!(r.paths.iter().any(|p| p.kind == EventKind::Blocked));
        }
    }

    #[test]
    fn general_engine_agrees_with_markov_engine_in_law() {
        let exp = ServiceDistribution::exponential(1.5).unwrap();
        let s = QueueSpec::new(
            ArrivalProcess::Poisson { rate: 2.0 },
            BatchDistribution::geometric(3, 1.0).unwrap(),
            exp,
            Servers::Finite(4),
            Discipline::DelayFcfs,
        );
        let opts = SimOptions::new(6.0, 6000, 21);
        let stats = |general: bool| {
            let outs: Vec<RepOutput> = (0..opts.reps)
                .map(|rep| {
                    let mut arr = replication_rng(opts.seed, rep, 0);
                    let mut svc = replication_rng(opts.seed, rep, 1);
                    let e = epochs(&s.arrivals, opts.horizon, &mut arr);
                    if general {
                        run_general(&s, &opts, rep, &e, &mut svc)
                    } else {
                        run_markov(&s, 1.5, &opts, rep, &e, &mut svc)
                    }
                })
                .collect();
            let n = outs.len() as f64;
            let mean = outs.iter().map(|o| o.terminal).sum::<f64>() / n;
            let var = outs
                .iter()
                .map(|o| (o.terminal - mean).powi(2))
                .sum::<f64>()
                / n;
            let busy = outs.iter().map(|o| o.busy_integral.unwrap()).sum::<f64>() / n;
            (mean, var, busy / (opts.horizon - opts.warmup()))
        };
        let (ma, va, ba) = stats(false);
        let (mb, vb, bb) = stats(true);
        let se = ((va + vb) / 6000.0).sqrt();
        assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb}");
        assert!((ba - bb).abs() < 0.01, "{ba} vs {bb}");
    }

    #[test]
    fn paths_are_consistent_with_terminal_values() {
        for service in [lognormal(), ServiceDistribution::exponential(1.0).unwrap()] {
            for servers in [Servers::Finite(4), Servers::Infinite] {
                let s = spec(servers, Discipline::DelayFcfs, service);
                let r = simulate_queue(&s, &SimOptions::new(8.0, 4, 2).with_paths()).unwrap();
                for rep in 0..4 {
                    let p: Vec<_> = r.paths.iter().filter(|p| p.replication == rep).collect();
                    assert_eq!(p[0].level, 9.0);
                    assert_eq!(p.last().unwrap().level, r.terminal[rep]);
                    assert!(p.windows(2).all(|w| w[0].time <= w[1].time));
                    assert!(p.iter().all(|x| x.level >= 0.0));
                }
            }
        }
    }
}
