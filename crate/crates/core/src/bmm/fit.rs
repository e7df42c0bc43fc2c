use rand::Rng;
use rand_distr::StandardNormal;

use super::em::{e_step_with_ll, eq3_value, m_step, PiUpdate};
use super::{clamp_prob, BmmParams};
use crate::data::{column_counts, BitMatrix, RealMatrix};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Column centroid plus Gaussian noise scaled by each column's spread.
    Centroid,
    /// Independent uniform draws in `[0.25, 0.75]`.
    Random,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(InitMode::Centroid),
            "random" => Ok(InitMode::Random),
            other => Err(Error::Config(format!("unknown init mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    /// Relative log-likelihood change below which EM stops.
    pub eps: f64,
    pub n_max: usize,
    /// Number of warm-up initializations.
    pub n_init: usize,
    /// EM steps run on each warm-up before picking the best.
    pub n_iter: usize,
    pub pi_trainable: bool,
    pub init_mode: InitMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k: 1,
            eps: 1e-3,
            n_max: 10,
            n_init: 5,
            n_iter: 3,
            pi_trainable: true,
            init_mode: InitMode::Centroid,
        }
    }
}

impl EmConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("EM config: {what}")));
        if self.k == 0 {
            return bad("k must be >= 1");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be > 0");
        }
        if self.n_max == 0 || self.n_init == 0 || self.n_iter == 0 {
            return bad("n_max, n_init and n_iter must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Marginal log-likelihood at the chosen initialization and after every
    /// EM step that followed it.
    pub ll_trace: Vec<f64>,
    /// Expected complete-data log-likelihood at the same points.
    pub eq3_trace: Vec<f64>,
    /// EM steps taken from the chosen initialization (warm-up included).
    pub iterations: usize,
    pub converged: bool,
    pub chosen_init: usize,
    /// Components that had to be re-initialized after losing all mass.
    pub reinitialized: Vec<usize>,
}

/// Draws initial parameters with uniform mixing weights.
pub fn init_params(z: &BitMatrix, config: &EmConfig, rng: &mut SeededRng) -> Result<BmmParams> {
    config.validate()?;
    if z.n_rows() == 0 {
        return Err(Error::EmptyInput(
            "cannot initialize a mixture from no samples",
        ));
    }
    let k = config.k;
    let stats = ColumnStats::new(z);
    let mut mu = RealMatrix::zeros(k, z.n_cols());
    for c in 0..k {
        stats.draw_prototype(config.init_mode, rng, mu.row_mut(c));
    }
    Ok(BmmParams::new_unchecked(mu, vec![1.0 / k as f64; k]))
}

struct ColumnStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl ColumnStats {
    fn new(z: &BitMatrix) -> Self {
        let n = z.n_rows() as f64;
        let mean: Vec<f64> = column_counts(z).into_iter().map(|c| c as f64 / n).collect();
        // population standard deviation of a 0/1 column
        let std = mean
            .iter()
            .map(|&m| (m * (1.0 - m)).max(0.0).sqrt())
            .collect();
        Self { mean, std }
    }

    fn draw_prototype(&self, mode: InitMode, rng: &mut SeededRng, out: &mut [f64]) {
        match mode {
            InitMode::Centroid => {
                for ((o, &m), &s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
                    let noise: f64 = rng.sample(StandardNormal);
                    *o = clamp_prob(m + s * noise);
                }
            }
            InitMode::Random => {
                for o in out.iter_mut() {
                    *o = rng.random_range(0.25..=0.75);
                }
            }
        }
    }
}

struct EmState<'a> {
    z: &'a BitMatrix,
    config: &'a EmConfig,
    stats: &'a ColumnStats,
    params: BmmParams,
    gamma: RealMatrix,
    ll_trace: Vec<f64>,
    eq3_trace: Vec<f64>,
    steps: usize,
}

impl<'a> EmState<'a> {
    fn start(
        z: &'a BitMatrix,
        config: &'a EmConfig,
        stats: &'a ColumnStats,
        params: BmmParams,
    ) -> Result<Self> {
        let (gamma, ll) = e_step_with_ll(z, &params)?;
        let eq3 = eq3_value(z, &params, &gamma)?;
        Ok(Self {
            z,
            config,
            stats,
            params,
            gamma,
            ll_trace: vec![ll],
            eq3_trace: vec![eq3],
            steps: 0,
        })
    }

    fn ll(&self) -> f64 {
        *self.ll_trace.last().expect("trace starts non-empty")
    }

    /// One M-step followed by the E-step for the new parameters.
    fn step(&mut self, rng: &mut SeededRng, reinitialized: &mut Vec<usize>) -> Result<()> {
        let fixed_pi = self.params.pi().to_vec();
        let pi_update = if self.config.pi_trainable {
            PiUpdate::Trainable
        } else {
            PiUpdate::Fixed(&fixed_pi)
        };
        let next = match m_step(self.z, &self.gamma, pi_update) {
            Ok(p) => p,
            Err(Error::DegenerateComponent { component }) => {
                if reinitialized.contains(&component) {
                    return Err(Error::DegenerateComponent { component });
                }
                reinitialized.push(component);
                self.reinit_component(component, rng)
            }
            Err(e) => return Err(e),
        };
        let (gamma, ll) = e_step_with_ll(self.z, &next)?;
        self.eq3_trace.push(eq3_value(self.z, &next, &gamma)?);
        self.ll_trace.push(ll);
        self.params = next;
        self.gamma = gamma;
        self.steps += 1;
        Ok(())
    }

    fn reinit_component(&self, component: usize, rng: &mut SeededRng) -> BmmParams {
        let mut mu = self.params.mu().clone();
        self.stats
            .draw_prototype(self.config.init_mode, rng, mu.row_mut(component));
        let k = self.params.k();
        let pi = if self.config.pi_trainable {
            // give the fresh component a uniform share and renormalize
            let mut pi = self.params.pi().to_vec();
            pi[component] = 1.0 / k as f64;
            let s: f64 = pi.iter().sum();
            pi.iter().map(|p| p / s).collect()
        } else {
            self.params.pi().to_vec()
        };
        BmmParams::new_unchecked(mu, pi)
    }
}

/// Fits a mixture with warm-up restarts followed by EM to convergence.
///
/// `n_init` initializations each run `n_iter` EM steps; the one with the
/// highest marginal log-likelihood then continues for at most `n_max` further
/// steps, stopping once `|l_s - l_{s-1}| / |l_s| < eps`.
pub fn fit(
    z: &BitMatrix,
    config: &EmConfig,
    rng: &mut SeededRng,
) -> Result<(BmmParams, FitReport)> {
    config.validate()?;
    if z.n_rows() < config.k {
        return Err(Error::DegenerateInput {
            samples: z.n_rows(),
            components: config.k,
        });
    }
    let stats = ColumnStats::new(z);
    let mut reinitialized = Vec::new();
    let mut best: Option<(usize, EmState<'_>)> = None;
    for w in 0..config.n_init {
        let init = init_params(z, config, rng)?;
        let mut state = EmState::start(z, config, &stats, init)?;
        for _ in 0..config.n_iter {
            state.step(rng, &mut reinitialized)?;
        }
        if best.as_ref().is_none_or(|(_, b)| state.ll() > b.ll()) {
            best = Some((w, state));
        }
    }
    let (chosen_init, mut state) = best.expect("n_init >= 1");

    let mut converged = false;
    for _ in 0..config.n_max {
        let prev = state.ll();
        state.step(rng, &mut reinitialized)?;
        let cur = state.ll();
        let change = (cur - prev).abs();
        let relative = if change == 0.0 {
            0.0
        } else {
            change / cur.abs()
        };
        if relative < config.eps {
            converged = true;
            break;
        }
    }

    let report = FitReport {
        ll_trace: state.ll_trace,
        eq3_trace: state.eq3_trace,
        iterations: state.steps,
        converged,
        chosen_init,
        reinitialized,
    };
    Ok((state.params, report))
}
