//! Monte-Carlo rollouts of `x_{t+1} = A x_t + B u_t + ξ_{t+1}` under `u = −Kx`.
//!
//! Besides the realized discounted costs, every transition runs the
//! empirical equivalence check: draw `num_samples` fresh disturbances, form
//! `m = α min V(z + ξ) − α mean V(z + ξ) + 2γ` with `z = Ax + Bu`, and count
//! the step as satisfied iff `m > 0`. The expectation is the sample mean over
//! the same draws used for the minimum.
//!
//! Trajectory `i` draws from a ChaCha stream keyed by `(seed, i)`, so reports
//! are bitwise reproducible regardless of thread scheduling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dro::FiniteDistribution;
use crate::error::{Error, Result};
use crate::numerics::GaussianSampler;
use crate::riccati::{LqSystem, QuadraticValue};

pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_SAMPLES: usize = 1000;

/// Disturbance law used for both the transitions and the assumption samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseKind {
    /// Zero-mean Gaussian with the system's `Σ`.
    Gaussian,
    Finite {
        distribution: FiniteDistribution,
    },
}

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    pub system: LqSystem,
    pub gain: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub num_samples: usize,
    pub num_trajectories: usize,
    pub seed: u64,
    pub noise: NoiseKind,
}

impl RolloutConfig {
    pub fn new(system: LqSystem, gain: DMatrix<f64>) -> Self {
        let n = system.state_dim();
        Self {
            system,
            gain,
            x0: DVector::zeros(n),
            horizon: DEFAULT_HORIZON,
            num_samples: DEFAULT_SAMPLES,
            num_trajectories: 1,
            seed: 0,
            noise: NoiseKind::Gaussian,
        }
    }

    fn validate(&self, value: &QuadraticValue) -> Result<()> {
        let n = self.system.state_dim();
        let m = self.system.input_dim();
        if self.gain.shape() != (m, n) {
            return Err(Error::ShapeMismatch(format!(
                "gain is {}x{}, expected {m}x{n}",
                self.gain.nrows(),
                self.gain.ncols()
            )));
        }
        if self.x0.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "x0 has length {}, expected {n}",
                self.x0.len()
            )));
        }
        if value.p.dim() != n {
            return Err(Error::ShapeMismatch(format!(
                "value matrix is {d}x{d}, expected {n}x{n}",
                d = value.p.dim()
            )));
        }
        if let NoiseKind::Finite { distribution } = &self.noise {
            if distribution.dim() != n {
                return Err(Error::ShapeMismatch(format!(
                    "noise atoms have dimension {}, expected {n}",
                    distribution.dim()
                )));
            }
        }
        if self.horizon < 1 || self.num_samples < 2 || self.num_trajectories < 1 {
            return Err(Error::InvalidParameter(format!(
                "need horizon ≥ 1, num_samples ≥ 2, num_trajectories ≥ 1 (got {}, {}, {})",
                self.horizon, self.num_samples, self.num_trajectories
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    /// `Σ_{t=0}^{T} αᵗ (x_tᵀQx_t + u_tᵀRu_t)` per trajectory.
    pub discounted_costs: Vec<f64>,
    /// Satisfied checks per trajectory (out of `horizon`).
    pub satisfied_steps: Vec<usize>,
    pub assumption_fraction: f64,
    pub mean_cost: f64,
    /// Sample standard deviation of the discounted costs.
    pub cost_stddev: f64,
    /// `α^{T+1} / (1 − α)`: multiply by a bound on the stage cost to bound the
    /// truncated tail.
    pub tail_factor: f64,
    pub horizon: usize,
    pub num_samples: usize,
    pub expectation_convention: String,
}

impl RolloutReport {
    pub fn std_error(&self) -> f64 {
        self.cost_stddev / (self.discounted_costs.len() as f64).sqrt()
    }

    /// One row per trajectory: `trajectory,discounted_cost,satisfied_steps,checked_steps`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
        w.write_record(["trajectory", "discounted_cost", "satisfied_steps", "checked_steps"])
            .map_err(io)?;
        for (i, (c, s)) in self.discounted_costs.iter().zip(&self.satisfied_steps).enumerate() {
            w.write_record([
                i.to_string(),
                format!("{c:.16e}"),
                s.to_string(),
                self.horizon.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

enum Disturbance {
    Gaussian(GaussianSampler),
    Finite { atoms: Vec<DVector<f64>>, cdf: Vec<f64> },
}

impl Disturbance {
    fn new(kind: &NoiseKind, sys: &LqSystem) -> Result<Self> {
        Ok(match kind {
            NoiseKind::Gaussian => {
                Disturbance::Gaussian(GaussianSampler::new(DVector::zeros(sys.state_dim()), sys.sigma())?)
            }
            NoiseKind::Finite { distribution } => {
                let mut acc = 0.0;
                let cdf = distribution
                    .weights()
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                Disturbance::Finite {
                    atoms: distribution
                        .atoms()
                        .iter()
                        .map(|a| DVector::from_column_slice(a))
                        .collect(),
                    cdf,
                }
            }
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            Disturbance::Gaussian(s) => s.sample(rng),
            Disturbance::Finite { atoms, cdf } => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[idx].clone()
            }
        }
    }
}

struct Trajectory {
    cost: f64,
    satisfied: usize,
}

fn simulate_one(cfg: &RolloutConfig, value: &QuadraticValue, noise: &Disturbance, index: usize) -> Trajectory {
    let sys = &cfg.system;
    let alpha = sys.alpha();
    let two_gamma = 2.0 * sys.gamma();
    let p = value.p.as_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let mut x = cfg.x0.clone();
    let mut cost = 0.0;
    let mut discount = 1.0;
    let mut satisfied = 0;
    for t in 0..=cfg.horizon {
        let u = -(&cfg.gain * &x);
        cost += discount * sys.stage_cost(&x, &u);
        if t == cfg.horizon {
            break;
        }
        discount *= alpha;
        let z = sys.a() * &x + sys.b() * &u;

        // V(z + ξ) = zᵀPz + 2(Pz)ᵀξ + ξᵀPξ + r
        let pz = p * &z;
        let base = z.dot(&pz) + value.r;
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        for _ in 0..cfg.num_samples {
            let xi = noise.draw(&mut rng);
            let v = base + 2.0 * pz.dot(&xi) + xi.dot(&(p * &xi));
            min = min.min(v);
            sum += v;
        }
        let mean = sum / cfg.num_samples as f64;
        if alpha * min - alpha * mean + two_gamma > 0.0 {
            satisfied += 1;
        }

        x = z + noise.draw(&mut rng);
    }
    Trajectory { cost, satisfied }
}

pub fn rollout(config: &RolloutConfig, value: &QuadraticValue) -> Result<RolloutReport> {
    config.validate(value)?;
    let noise = Disturbance::new(&config.noise, &config.system)?;
    let runs: Vec<Trajectory> = (0..config.num_trajectories)
        .into_par_iter()
        .map(|i| simulate_one(config, value, &noise, i))
        .collect();

    let n = runs.len() as f64;
    let discounted_costs: Vec<f64> = runs.iter().map(|r| r.cost).collect();
    let satisfied_steps: Vec<usize> = runs.iter().map(|r| r.satisfied).collect();
    let mean_cost = discounted_costs.iter().sum::<f64>() / n;
    let cost_stddev = if runs.len() > 1 {
        (discounted_costs.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let total_checks = (config.horizon * runs.len()) as f64;
    let assumption_fraction = satisfied_steps.iter().sum::<usize>() as f64 / total_checks;
    let alpha = config.system.alpha();
    Ok(RolloutReport {
        discounted_costs,
        satisfied_steps,
        assumption_fraction,
        mean_cost,
        cost_stddev,
        tail_factor: alpha.powi(config.horizon as i32 + 1) / (1.0 - alpha),
        horizon: config.horizon,
        num_samples: config.num_samples,
        expectation_convention: "sample_mean".into(),
    })
}

/// Realized reference-play cost against the worst-case value at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub mean_cost: f64,
    pub std_error: f64,
    /// `V(x0)` (or `X(x0)` for a non-optimal gain).
    pub bound: f64,
    /// `mean_cost ≤ bound + 3·std_error`.
    pub within_bound: bool,
}

pub fn empirical_vs_theoretical(
    config: &RolloutConfig,
    value: &QuadraticValue,
) -> Result<(RolloutReport, BoundComparison)> {
    let report = rollout(config, value)?;
    let bound = value.evaluate(&config.x0);
    let std_error = report.std_error();
    let cmp = BoundComparison {
        mean_cost: report.mean_cost,
        std_error,
        bound,
        within_bound: report.mean_cost <= bound + 3.0 * std_error,
    };
    Ok((report, cmp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SymMatrix;
    use crate::riccati::{evaluate_gain, synthesize, IterationOptions};

    fn scalar_system(sigma: f64) -> LqSystem {
        LqSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            SymMatrix::identity(1),
            SymMatrix::identity(1),
            SymMatrix::from_diagonal(&[sigma]),
            0.2,
            1.0,
        )
        .unwrap()
    }

    fn controlled_2d(sigma_scale: f64) -> LqSystem {
        LqSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 0.1]),
            SymMatrix::identity(2),
            SymMatrix::identity(1),
            SymMatrix::from_rows(&[vec![0.1, 0.02], vec![0.02, 0.2]])
                .map(|s| SymMatrix::symmetrize(s.into_matrix() * sigma_scale))
                .unwrap(),
            0.9,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_rollout_is_deterministic_closed_loop() {
        let sys = controlled_2d(0.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys.clone(), sol.gain.clone());
        cfg.x0 = DVector::from_column_slice(&[1.0, -0.5]);
        cfg.horizon = 50;
        cfg.num_samples = 10;
        cfg.num_trajectories = 3;
        let report = rollout(&cfg, &sol.value).unwrap();
        assert_eq!(report.assumption_fraction, 1.0);

        let mut x = cfg.x0.clone();
        let mut expected = 0.0;
        for t in 0..=50 {
            let u = -(&sol.gain * &x);
            expected += 0.9f64.powi(t) * sys.stage_cost(&x, &u);
            x = sys.a() * &x + sys.b() * &u;
        }
        for c in &report.discounted_costs {
            assert!((c - expected).abs() <= 1e-12 * expected);
        }
        assert!(report.cost_stddev <= 1e-12 * expected);
    }

    #[test]
    fn seed_determinism() {
        let sys = controlled_2d(1.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys, sol.gain.clone());
        cfg.horizon = 100;
        cfg.num_samples = 20;
        cfg.num_trajectories = 16;
        cfg.seed = 42;
        let a = rollout(&cfg, &sol.value).unwrap();
        let b = rollout(&cfg, &sol.value).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        let c = rollout(&cfg, &sol.value).unwrap();
        assert_ne!(a.discounted_costs, c.discounted_costs);
    }

    #[test]
    fn finite_noise_rollout() {
        let sys = controlled_2d(1.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys, sol.gain.clone());
        cfg.horizon = 200;
        cfg.num_samples = 50;
        cfg.num_trajectories = 2000;
        cfg.noise = NoiseKind::Finite {
            distribution: FiniteDistribution::uniform(vec![
                vec![0.3, 0.0],
                vec![-0.3, 0.0],
                vec![0.0, 0.45],
                vec![0.0, -0.45],
            ])
            .unwrap(),
        };
        let (report, cmp) = empirical_vs_theoretical(&cfg, &sol.value).unwrap();
        assert!(report.assumption_fraction > 0.99);
        assert!(cmp.within_bound, "{cmp:?}");
    }

    #[test]
    fn uncontrolled_scalar_bound() {
        let sys = scalar_system(1.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys.clone(), DMatrix::zeros(1, 1));
        cfg.horizon = 200;
        cfg.num_samples = 2;
        cfg.num_trajectories = 20_000;
        cfg.seed = 5;
        let (report, cmp) = empirical_vs_theoretical(&cfg, &sol.value).unwrap();
        // reference play: Σ αᵗ t = α / (1 − α)²
        let expected = 0.2 / 0.64;
        assert!(
            (report.mean_cost - expected).abs() <= 4.0 * report.std_error(),
            "{}",
            report.mean_cost
        );
        assert!(cmp.within_bound);
        assert!(cmp.bound > expected);
        let neutral = evaluate_gain(
            &sys.with_gamma(f64::INFINITY).unwrap(),
            &DMatrix::zeros(1, 1),
            IterationOptions::default(),
        )
        .unwrap();
        assert!((neutral.value.r - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_zero_state() {
        let sys = scalar_system(0.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys, DMatrix::zeros(1, 1));
        cfg.horizon = 10;
        cfg.num_samples = 2;
        cfg.num_trajectories = 2;
        let (report, cmp) = empirical_vs_theoretical(&cfg, &sol.value).unwrap();
        assert_eq!(report.mean_cost, 0.0);
        assert_eq!(cmp.bound, 0.0);
        assert!(cmp.within_bound);
        assert_eq!(report.assumption_fraction, 1.0);
    }

    #[test]
    fn shape_errors() {
        let sys = controlled_2d(1.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys.clone(), DMatrix::zeros(2, 2));
        assert!(matches!(rollout(&cfg, &sol.value), Err(Error::ShapeMismatch(_))));
        cfg.gain = sol.gain.clone();
        cfg.x0 = DVector::zeros(3);
        assert!(matches!(rollout(&cfg, &sol.value), Err(Error::ShapeMismatch(_))));
        cfg.x0 = DVector::zeros(2);
        cfg.num_samples = 1;
        assert!(rollout(&cfg, &sol.value).is_err());
    }

    #[test]
    fn csv_rows() {
        let sys = controlled_2d(1.0);
        let sol = synthesize(&sys, IterationOptions::default()).unwrap();
        let mut cfg = RolloutConfig::new(sys, sol.gain.clone());
        cfg.horizon = 5;
        cfg.num_samples = 3;
        cfg.num_trajectories = 4;
        let report = rollout(&cfg, &sol.value).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trajectory,discounted_cost,satisfied_steps,checked_steps");
        assert_eq!(lines.len(), 5);
        let cost: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(cost, report.discounted_costs[0]);
    }
}
