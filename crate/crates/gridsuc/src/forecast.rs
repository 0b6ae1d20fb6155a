//! Wind-power forecast models and reproducible scenario sampling.
//!
//! Two parametric variants share a normal form: the plug-in model takes
//! the window mean with a known per-hour standard deviation, and the
//! posterior-predictive model widens that deviation by `sqrt(1 + 1/m)`
//! to carry the estimation error of a mean learned from `m`
//! observations under a non-informative prior. Two persistence variants
//! cover the intra-day case: the last observation as a point forecast,
//! and the empirical distribution of lagged increments around it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("insufficient history: need {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Ordered per-farm observations. `period` is the number of hours per
/// day; day-ahead fitting draws same-hour samples one period apart,
/// intra-day persistence treats the series as flat (`period` unused).
#[derive(Clone, Debug)]
pub struct WindHistory {
    pub period: usize,
    values: Vec<Vec<f64>>,
}

impl WindHistory {
    pub fn new(period: usize, values: Vec<Vec<f64>>) -> Result<Self, ForecastError> {
        if period == 0 {
            return Err(ForecastError::Invalid("period must be positive".into()));
        }
        if values.is_empty() {
            return Err(ForecastError::Invalid("at least one farm".into()));
        }
        let len = values[0].len();
        for series in &values {
            if series.len() != len {
                return Err(ForecastError::Invalid(
                    "farm series must share one length".into(),
                ));
            }
            if series.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(ForecastError::Invalid(
                    "observations must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(WindHistory { period, values })
    }

    pub fn farms(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, farm: usize) -> &[f64] {
        &self.values[farm]
    }

    /// Mean over the same hour of the last `m` days.
    fn window_mean(&self, farm: usize, m: usize, hour: usize) -> f64 {
        let len = self.len();
        (1..=m)
            .map(|i| self.values[farm][len - i * self.period + hour])
            .sum::<f64>()
            / m as f64
    }
}

/// One sampled trajectory: `[farm][hour]` MW.
pub type Trajectory = Vec<Vec<f64>>;

/// A distribution over wind trajectories for a planning horizon.
#[derive(Clone, Debug, PartialEq)]
pub enum ForecastModel {
    NormalPlugIn {
        mean: Vec<Vec<f64>>,
        sd: Vec<Vec<f64>>,
    },
    NormalPosteriorPredictive {
        mean: Vec<Vec<f64>>,
        /// Already inflated: `phi * sqrt(1 + 1/m)`.
        sd: Vec<Vec<f64>>,
        m: usize,
    },
    PersistencePoint {
        value: Vec<Vec<f64>>,
    },
    PersistenceEmpirical {
        /// `[farm][lead][support values]`, clamped to capacity.
        support: Vec<Vec<Vec<f64>>>,
    },
}

/// Serializable description for reports.
#[derive(Clone, Debug, Serialize)]
pub struct ForecastDescriptor {
    pub variant: &'static str,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub m: usize,
}

impl ForecastModel {
    pub fn horizon(&self) -> usize {
        match self {
            ForecastModel::NormalPlugIn { mean, .. } => mean[0].len(),
            ForecastModel::NormalPosteriorPredictive { mean, .. } => mean[0].len(),
            ForecastModel::PersistencePoint { value } => value[0].len(),
            ForecastModel::PersistenceEmpirical { support } => support[0].len(),
        }
    }

    pub fn farms(&self) -> usize {
        match self {
            ForecastModel::NormalPlugIn { mean, .. } => mean.len(),
            ForecastModel::NormalPosteriorPredictive { mean, .. } => mean.len(),
            ForecastModel::PersistencePoint { value } => value.len(),
            ForecastModel::PersistenceEmpirical { support } => support.len(),
        }
    }

    /// Mean trajectory implied by the model.
    pub fn mean_trajectory(&self) -> Trajectory {
        match self {
            ForecastModel::NormalPlugIn { mean, .. } => mean.clone(),
            ForecastModel::NormalPosteriorPredictive { mean, .. } => mean.clone(),
            ForecastModel::PersistencePoint { value } => value.clone(),
            ForecastModel::PersistenceEmpirical { support } => support
                .iter()
                .map(|farm| {
                    farm.iter()
                        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                        .collect()
                })
                .collect(),
        }
    }

    pub fn descriptor(&self) -> ForecastDescriptor {
        let zeros = |mean: &Vec<Vec<f64>>| {
            mean.iter()
                .map(|row| vec![0.0; row.len()])
                .collect::<Vec<_>>()
        };
        match self {
            ForecastModel::NormalPlugIn { mean, sd } => ForecastDescriptor {
                variant: "normal_plug_in",
                mean: mean.clone(),
                sd: sd.clone(),
                m: 0,
            },
            ForecastModel::NormalPosteriorPredictive { mean, sd, m } => ForecastDescriptor {
                variant: "normal_posterior_predictive",
                mean: mean.clone(),
                sd: sd.clone(),
                m: *m,
            },
            ForecastModel::PersistencePoint { value } => ForecastDescriptor {
                variant: "persistence_point",
                mean: value.clone(),
                sd: zeros(value),
                m: 0,
            },
            ForecastModel::PersistenceEmpirical { support } => {
                let mean = self.mean_trajectory();
                let sd = support
                    .iter()
                    .map(|farm| farm.iter().map(|s| sample_sd(s)).collect())
                    .collect();
                ForecastDescriptor {
                    variant: "persistence_empirical",
                    mean,
                    sd,
                    m: 0,
                }
            }
        }
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len() - 1) as f64;
    var.sqrt()
}

fn check_window(history: &WindHistory, m: usize) -> Result<(), ForecastError> {
    let needed = m * history.period;
    if m == 0 {
        return Err(ForecastError::Invalid("window m must be positive".into()));
    }
    if history.len() < needed {
        return Err(ForecastError::InsufficientHistory {
            needed,
            available: history.len(),
        });
    }
    Ok(())
}

fn window_means(history: &WindHistory, m: usize) -> Vec<Vec<f64>> {
    (0..history.farms())
        .map(|f| {
            (0..history.period)
                .map(|t| history.window_mean(f, m, t))
                .collect()
        })
        .collect()
}

/// Plug-in normal model: window mean with the supplied deviation taken
/// as the truth.
pub fn fit_plug_in(
    history: &WindHistory,
    m: usize,
    phi: &[Vec<f64>],
) -> Result<ForecastModel, ForecastError> {
    check_window(history, m)?;
    check_phi(history, phi)?;
    Ok(ForecastModel::NormalPlugIn {
        mean: window_means(history, m),
        sd: phi.to_vec(),
    })
}

/// Posterior-predictive normal model: same mean, variance widened to
/// `(1 + 1/m) phi^2`.
pub fn fit_posterior_predictive(
    history: &WindHistory,
    m: usize,
    phi: &[Vec<f64>],
) -> Result<ForecastModel, ForecastError> {
    check_window(history, m)?;
    check_phi(history, phi)?;
    let inflation = (1.0 + 1.0 / m as f64).sqrt();
    let sd = phi
        .iter()
        .map(|row| row.iter().map(|p| p * inflation).collect())
        .collect();
    Ok(ForecastModel::NormalPosteriorPredictive {
        mean: window_means(history, m),
        sd,
        m,
    })
}

fn check_phi(history: &WindHistory, phi: &[Vec<f64>]) -> Result<(), ForecastError> {
    if phi.len() != history.farms() || phi.iter().any(|row| row.len() != history.period) {
        return Err(ForecastError::Invalid(
            "phi must be shaped [farms][period]".into(),
        ));
    }
    if phi.iter().flatten().any(|p| *p < 0.0) {
        return Err(ForecastError::Invalid("phi must be nonnegative".into()));
    }
    Ok(())
}

/// Point persistence: every lead repeats the latest observation.
pub fn fit_persistence_point(
    history: &WindHistory,
    horizon: usize,
) -> Result<ForecastModel, ForecastError> {
    if history.is_empty() {
        return Err(ForecastError::InsufficientHistory {
            needed: 1,
            available: 0,
        });
    }
    let value = (0..history.farms())
        .map(|f| vec![*history.series(f).last().unwrap(); horizon])
        .collect();
    Ok(ForecastModel::PersistencePoint { value })
}

/// Support multiset of the empirical persistence predictive for lead
/// `i` at time index `now`: `{ x[now] - x[now-j] + x[now-j-i] }` over
/// the lags that fit in the lookback `window`.
pub fn persistence_support(
    series: &[f64],
    lead: usize,
    now: usize,
    window: usize,
) -> Result<Vec<f64>, ForecastError> {
    if now >= series.len() || lead == 0 {
        return Err(ForecastError::Invalid(format!(
            "lead {lead} at index {now} outside the series"
        )));
    }
    let usable = window.min(now + 1);
    if usable < lead + 2 && now < lead + 1 {
        return Err(ForecastError::InsufficientHistory {
            needed: lead + 2,
            available: usable,
        });
    }
    // j ranges over 0..=now-lead-1, clipped to the lookback window.
    let j_formula = now.checked_sub(lead + 1);
    let j_window = usable.checked_sub(lead + 1);
    let j_max = match (j_formula, j_window) {
        (Some(a), Some(b)) => a.min(b),
        _ => {
            return Err(ForecastError::InsufficientHistory {
                needed: lead + 2,
                available: usable,
            })
        }
    };
    let mut support = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        support.push(series[now] - series[now - j] + series[now - j - lead]);
    }
    Ok(support)
}

/// Empirical persistence model over all leads of a horizon, clamped to
/// each farm's capacity.
pub fn fit_persistence_empirical(
    history: &WindHistory,
    horizon: usize,
    window: usize,
    caps: &[f64],
) -> Result<ForecastModel, ForecastError> {
    if caps.len() != history.farms() {
        return Err(ForecastError::Invalid(
            "one capacity per farm required".into(),
        ));
    }
    let now = history
        .len()
        .checked_sub(1)
        .ok_or(ForecastError::InsufficientHistory {
            needed: 1,
            available: 0,
        })?;
    let mut support = Vec::with_capacity(history.farms());
    for (f, &cap) in caps.iter().enumerate() {
        let series = history.series(f);
        let mut per_lead = Vec::with_capacity(horizon);
        for lead in 1..=horizon {
            let mut s = persistence_support(series, lead, now, window)?;
            for v in &mut s {
                *v = v.clamp(0.0, cap);
            }
            per_lead.push(s);
        }
        support.push(per_lead);
    }
    Ok(ForecastModel::PersistenceEmpirical { support })
}

/// A set of sampled trajectories, reproducible from its seed.
#[derive(Clone, Debug)]
pub struct ScenarioSet {
    pub scenarios: Vec<Trajectory>,
    pub seed: u64,
    pub source: ForecastDescriptor,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Draw `count` i.i.d. trajectories. Hours are sampled independently
/// and every value is clamped to `[0, caps[farm]]`. The draw order is
/// fixed (scenario, farm, hour), so identical arguments give identical
/// output.
pub fn sample_scenarios(
    model: &ForecastModel,
    count: usize,
    horizon: usize,
    seed: u64,
    caps: &[f64],
) -> Result<ScenarioSet, ForecastError> {
    if count == 0 {
        return Err(ForecastError::Invalid("scenario count must be >= 1".into()));
    }
    let farms = model.farms();
    if caps.len() != farms {
        return Err(ForecastError::Invalid(
            "one capacity per farm required".into(),
        ));
    }
    if model.horizon() < horizon {
        return Err(ForecastError::Invalid(format!(
            "model horizon {} shorter than requested {horizon}",
            model.horizon()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenarios = Vec::with_capacity(count);
    for _ in 0..count {
        let mut traj = vec![vec![0.0; horizon]; farms];
        for f in 0..farms {
            for t in 0..horizon {
                let raw = match model {
                    ForecastModel::NormalPlugIn { mean, sd }
                    | ForecastModel::NormalPosteriorPredictive { mean, sd, .. } => {
                        if sd[f][t] > 0.0 {
                            let normal = Normal::new(mean[f][t], sd[f][t])
                                .map_err(|e| ForecastError::Invalid(e.to_string()))?;
                            normal.sample(&mut rng)
                        } else {
                            mean[f][t]
                        }
                    }
                    ForecastModel::PersistencePoint { value } => value[f][t],
                    ForecastModel::PersistenceEmpirical { support } => {
                        let s = &support[f][t];
                        s[rng.gen_range(0..s.len())]
                    }
                };
                traj[f][t] = raw.clamp(0.0, caps[f]);
            }
        }
        scenarios.push(traj);
    }
    Ok(ScenarioSet {
        scenarios,
        seed,
        source: model.descriptor(),
    })
}
