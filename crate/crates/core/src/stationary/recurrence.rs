//! Exact stationary law of the finite-`n` Markovian delay queue.
//!
//! Level crossing gives
//! `μ min(i, s) π_i = λ Σ_{j=1}^{i} P(B ≥ j) π_{i−j}` with `s = ⌈cn⌉` servers.
//! Summing the same balance over all levels above `K ≥ s` yields the exact tail
//! `T_K (1 − λE[B]/(μs)) = λ/(μs) Σ_{l≤K} π_l E[(B − (K−l))⁺]`,
//! which certifies the truncation.

use super::StationaryError;
use crate::marks::BatchDistribution;

/// Default cap on the number of stored states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

const RESCALE_ABOVE: f64 = 1e200;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateDistribution {
    /// `π_0 … π_K`, normalised so that `Σ π_i + tail_mass = 1`.
    pub probs: Vec<f64>,
    /// Mass above the truncation index, computed exactly from the tail identity.
    pub tail_mass: f64,
    pub n: u64,
    pub servers: u64,
    batch: BatchDistribution,
}

impl SteadyStateDistribution {
    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(Q > k)`.
    pub fn prob_above(&self, k: u64) -> f64 {
        let k = k as usize;
        if k >= self.probs.len() {
            return self.tail_mass;
        }
        self.probs[k + 1..].iter().sum::<f64>() + self.tail_mass
    }

    /// `P(Q ≥ k)`.
    pub fn prob_at_least(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.prob_above(k - 1)
        }
    }

    /// `P(Q ≥ cn)`: an arriving batch waits.
    pub fn prob_all_busy(&self) -> f64 {
        self.prob_at_least(self.servers)
    }

    /// `P(Q > cn)`.
    pub fn prob_exceeds(&self) -> f64 {
        self.prob_above(self.servers)
    }

    /// `P(Q + B > cn)` for an independent batch `B`.
    pub fn prob_jump_exceeds(&self) -> f64 {
        let s = self.servers;
        let mut below = 0.0;
        for (l, p) in self.probs.iter().enumerate().take(s as usize + 1) {
            below += p * self.batch.tail_ge(s - l as u64 + 1);
        }
        below + self.prob_exceeds()
    }

    /// `E[Q]` over the stored states, excluding the tail.
    pub fn mean_truncated(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }
}

/// Tail config for [`finite_n_steady_state_with_cap`].
#[derive(Debug, Clone, Copy)]
pub struct RecurrenceConfig {
    pub tail_tol: f64,
    pub state_cap: usize,
}

/// Solve the recurrence for `⌈cn⌉` servers and batch law `batch` at index `n`.
pub fn finite_n_steady_state(
    lambda: f64,
    mu: f64,
    batch: &BatchDistribution,
    c: f64,
    n: u64,
    tail_tol: f64,
) -> Result<SteadyStateDistribution, StationaryError> {
    finite_n_steady_state_with_cap(
        lambda,
        mu,
        batch,
        c,
        n,
        RecurrenceConfig {
            tail_tol,
            state_cap: DEFAULT_STATE_CAP,
        },
    )
}

/// Batch-tail provider with per-family fast convolution.
enum Kernel {
    /// `P(B ≥ j) = 1` for `j ≤ n`: sliding window of width `n`.
    Window(usize),
    /// `P(B ≥ j) = q^{j−1}`.
    Geometric(f64),
    /// Explicit tail truncated where it is negligible.
    Table(Vec<f64>),
}

pub fn finite_n_steady_state_with_cap(
    lambda: f64,
    mu: f64,
    batch: &BatchDistribution,
    c: f64,
    n: u64,
    cfg: RecurrenceConfig,
) -> Result<SteadyStateDistribution, StationaryError> {
    for (name, v) in [("lambda", lambda), ("mu", mu), ("c", c)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(StationaryError::InvalidParameter { name, value: v });
        }
    }
    if !(cfg.tail_tol > 0.0) {
        return Err(StationaryError::InvalidParameter {
            name: "tail_tol",
            value: cfg.tail_tol,
        });
    }
    let batch = if batch.index() == n {
        *batch
    } else {
        batch.rescaled(n)?
    };
    let servers = crate::staffing::staff_count(c, n);
    let sf = servers as f64;
    let a = lambda / (mu * sf);
    let drift = 1.0 - a * batch.mean();
    if drift <= 0.0 {
        return Err(StationaryError::Unstable {
            load: lambda * batch.mean() / (mu * n as f64),
            c,
        });
    }

    let kernel = match batch {
        BatchDistribution::DeterministicSize { n } => Kernel::Window(n as usize),
        BatchDistribution::Geometric { n, alpha } => Kernel::Geometric(1.0 - alpha / n as f64),
        _ => {
            let mut t = Vec::new();
            let mut j = 1u64;
            loop {
                let v = batch.tail_ge(j);
                if v < 1e-20 && j as f64 > batch.mean() {
                    break;
                }
                t.push(v);
                j += 1;
            }
            Kernel::Table(t)
        }
    };
    let excess = match &kernel {
        // E[(B − d)⁺] = Σ_{j>d} P(B ≥ j)
        Kernel::Table(t) => {
            let mut suffix = vec![0.0; t.len()];
            let mut acc = 0.0;
            for d in (0..t.len()).rev() {
                acc += t[d];
                suffix[d] = acc;
            }
            Excess::Table(suffix)
        }
        _ => Excess::Closed(batch),
    };

    let mut pi: Vec<f64> = vec![1.0];
    let mut head_sum = 1.0;
    // Running convolution state for the window and geometric kernels.
    let mut running = 0.0;
    let check_every = (servers as usize / 4).max(16);

    loop {
        let i = pi.len();
        if i > cfg.state_cap {
            return Err(StationaryError::TruncationCap {
                states: cfg.state_cap,
            });
        }
        let conv = match &kernel {
            Kernel::Window(w) => {
                if i.is_multiple_of(*w) {
                    // Periodic exact re-sum bounds drift from the subtractions.
                    running = pi[i.saturating_sub(*w)..i].iter().sum();
                } else {
                    running += pi[i - 1];
                    if i > *w {
                        running -= pi[i - 1 - w];
                    }
                }
                running.max(0.0)
            }
            Kernel::Geometric(q) => {
                running = pi[i - 1] + q * running;
                running
            }
            Kernel::Table(t) => {
                let reach = t.len().min(i);
                (1..=reach).map(|j| t[j - 1] * pi[i - j]).sum()
            }
        };
        let busy = (i as f64).min(sf);
        let v = lambda / (mu * busy) * conv;
        pi.push(v);
        head_sum += v;
        if v > RESCALE_ABOVE {
            let f = 1.0 / RESCALE_ABOVE;
            pi.iter_mut().for_each(|p| *p *= f);
            head_sum *= f;
            running *= f;
        }

        let k = i;
        if k >= servers as usize && (k - servers as usize).is_multiple_of(check_every) {
            let tail = tail_mass(&pi, &excess, a, drift);
            if tail / (head_sum + tail) < cfg.tail_tol {
                let total = head_sum + tail;
                let probs: Vec<f64> = pi.iter().map(|p| p / total).collect();
                return Ok(SteadyStateDistribution {
                    probs,
                    tail_mass: tail / total,
                    n,
                    servers,
                    batch,
                });
            }
        }
    }
}

/// Exact unnormalised `T_K = Σ_{i>K} π_i` for `K = pi.len() − 1 ≥ s`.
fn tail_mass(pi: &[f64], excess: &Excess, a: f64, drift: f64) -> f64 {
    let k = pi.len() - 1;
    let mut acc = 0.0;
    for (l, p) in pi.iter().enumerate().rev() {
        let d = k - l;
        match excess.at(d) {
            Some(e) => acc += p * e,
            None => break,
        }
    }
    a * acc / drift
}

/// `d ↦ E[(B − d)⁺]`, `None` once it vanishes.
enum Excess {
    Closed(BatchDistribution),
    Table(Vec<f64>),
}

impl Excess {
    fn at(&self, d: usize) -> Option<f64> {
        match self {
            Excess::Closed(b) => {
                if b.max_size().is_some_and(|m| d as u64 >= m) {
                    None
                } else {
                    let e = b.expected_excess(d as u64);
                    (e > 0.0).then_some(e)
                }
            }
            Excess::Table(t) => t.get(d).copied(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erlang_c_two_servers() {
        let b = BatchDistribution::deterministic(1).unwrap();
        let d = finite_n_steady_state(1.0, 1.0, &b, 2.0, 1, 1e-14).unwrap();
        assert!((d.prob_all_busy() - 1.0 / 3.0).abs() < 1e-12);
        // Geometric decay above two servers: π_i = π_0 (1/2)^{i−1}.
        assert!((d.probs[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((d.probs[3] - 1.0 / 3.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn light_traffic_concentrates_at_zero() {
        let b = BatchDistribution::deterministic(10).unwrap();
        let d = finite_n_steady_state(1e-6, 1.0, &b, 2.0, 10, 1e-12).unwrap();
        assert!(d.probs[0] > 1.0 - 1e-4);
    }

    #[test]
    fn families_agree_with_generic_table() {
        // A geometric law with p = 1 is degenerate at one, matching DeterministicSize(1).
        let g = BatchDistribution::geometric(1, 1.0).unwrap();
        let det = BatchDistribution::deterministic(1).unwrap();
        let a = finite_n_steady_state(1.3, 1.0, &g, 2.0, 1, 1e-13).unwrap();
        let b = finite_n_steady_state(1.3, 1.0, &det, 2.0, 1, 1e-13).unwrap();
        assert!((a.prob_exceeds() - b.prob_exceeds()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_with_tail_to_one() {
        for batch in [
            BatchDistribution::deterministic(20).unwrap(),
            BatchDistribution::geometric(20, 1.0).unwrap(),
            BatchDistribution::poisson(20).unwrap(),
            BatchDistribution::binomial(40, 0.5).unwrap(),
        ] {
            let d = finite_n_steady_state(3.0, 2.0, &batch, 2.0, 20, 1e-10).unwrap();
            let total: f64 = d.probs.iter().sum::<f64>() + d.tail_mass;
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.tail_mass < 1e-10);
            assert!(d.probs.iter().all(|p| *p >= 0.0));
            assert!(d.prob_jump_exceeds() >= d.prob_exceeds());
            assert!(d.prob_all_busy() >= d.prob_exceeds());
        }
    }

    #[test]
    fn tail_identity_matches_long_run() {
        // Truncating early and using the identity equals the long-run remainder.
        let b = BatchDistribution::poisson(10).unwrap();
        let coarse = finite_n_steady_state(3.0, 2.0, &b, 2.0, 10, 1e-3).unwrap();
        let fine = finite_n_steady_state(3.0, 2.0, &b, 2.0, 10, 1e-15).unwrap();
        let k = coarse.truncation() as u64;
        assert!((coarse.prob_above(k) - fine.prob_above(k)).abs() < 1e-12);
    }

    #[test]
    fn little_law_mean_busy() {
        // E[min(Q, s)] = λE[B]/μ.
        let b = BatchDistribution::geometric(10, 1.0).unwrap();
        let d = finite_n_steady_state(3.0, 2.0, &b, 2.0, 10, 1e-14).unwrap();
        let busy: f64 = d
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64).min(d.servers as f64) * p)
            .sum::<f64>()
            + d.servers as f64 * d.tail_mass;
        assert!((busy - 3.0 * 10.0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cap_is_reported() {
        let b = BatchDistribution::deterministic(100).unwrap();
        let err = finite_n_steady_state_with_cap(
            3.0,
            2.0,
            &b,
            1.51,
            100,
            RecurrenceConfig {
                tail_tol: 1e-12,
                state_cap: 500,
            },
        )
        .unwrap_err();
        assert!(matches!(err, StationaryError::TruncationCap { .. }));
    }
}
