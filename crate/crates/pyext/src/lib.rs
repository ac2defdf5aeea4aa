//! Python bindings for the NOMA resource-allocation crate.
//!
//! Exposes the environment, the closed-form power allocator, exhaustive
//! search, and the policy network plus a one-call trainer. Everything stays
//! deterministic under explicit seeds, matching the Rust side bit for bit.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use nomarl::env::{self, EnvConfig, EpisodeState, NetworkInstance};
use nomarl::jra;
use nomarl::oracle;
use nomarl::policy::{Architecture, PolicyError, PolicyParameters, SelectMode};
use nomarl::trainer::{self, TrainConfig};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn policy_err(e: PolicyError) -> PyErr {
    match e {
        PolicyError::Io(msg) => PyIOError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Scenario parameters: user count, bandwidth, noise, rate floor, power.
#[pyclass(name = "EnvConfig", module = "nomarl_py", skip_from_py_object)]
#[derive(Clone)]
struct PyEnvConfig {
    inner: EnvConfig,
}

#[pymethods]
impl PyEnvConfig {
    #[new]
    #[pyo3(signature = (n_users=6, b_tot_hz=5e6, n0_dbm_hz=-170.0, alpha=2.0,
                        d_min_m=50.0, d_max_m=300.0, r_min_bps_hz=2.0, p_t_w=12.0,
                        n_features=3))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_users: usize,
        b_tot_hz: f64,
        n0_dbm_hz: f64,
        alpha: f64,
        d_min_m: f64,
        d_max_m: f64,
        r_min_bps_hz: f64,
        p_t_w: f64,
        n_features: usize,
    ) -> PyResult<Self> {
        let mut inner = EnvConfig::for_users(n_users);
        inner.b_tot_hz = b_tot_hz;
        inner.n0_dbm_hz = n0_dbm_hz;
        inner.alpha = alpha;
        inner.d_min_m = d_min_m;
        inner.d_max_m = d_max_m;
        inner.r_min_bps_hz = r_min_bps_hz;
        inner.p_t_w = p_t_w;
        inner.n_features = n_features;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users
    }

    #[getter]
    fn n_channels(&self) -> usize {
        self.inner.n_channels
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features
    }

    #[getter]
    fn b_c_hz(&self) -> f64 {
        self.inner.b_c_hz()
    }

    #[getter]
    fn noise_w(&self) -> f64 {
        self.inner.noise_w()
    }

    #[getter]
    fn p_t_w(&self) -> f64 {
        self.inner.p_t_w
    }

    #[getter]
    fn r_min_bps_hz(&self) -> f64 {
        self.inner.r_min_bps_hz
    }

    fn __repr__(&self) -> String {
        format!(
            "EnvConfig(n_users={}, n_channels={}, p_t_w={}, r_min_bps_hz={})",
            self.inner.n_users, self.inner.n_channels, self.inner.p_t_w, self.inner.r_min_bps_hz
        )
    }
}

/// One drawn network: per-user distances, fading, and per-channel CNRs.
#[pyclass(name = "NetworkInstance", module = "nomarl_py", frozen)]
struct PyNetworkInstance {
    inner: Arc<NetworkInstance>,
}

#[pymethods]
impl PyNetworkInstance {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users
    }

    #[getter]
    fn n_channels(&self) -> usize {
        self.inner.n_channels
    }

    #[getter]
    fn b_c_hz(&self) -> f64 {
        self.inner.b_c_hz
    }

    fn distances(&self) -> Vec<f64> {
        self.inner.distances_m.clone()
    }

    fn cnr(&self, user: usize, channel: usize) -> PyResult<f64> {
        if user >= self.inner.n_users || channel >= self.inner.n_channels {
            return Err(PyIndexError::new_err(format!(
                "user {} channel {} out of range {}x{}",
                user, channel, self.inner.n_users, self.inner.n_channels
            )));
        }
        Ok(self.inner.cnr_at(user, channel))
    }

    fn fading(&self, user: usize, channel: usize) -> PyResult<f64> {
        if user >= self.inner.n_users || channel >= self.inner.n_channels {
            return Err(PyIndexError::new_err(format!(
                "user {} channel {} out of range {}x{}",
                user, channel, self.inner.n_users, self.inner.n_channels
            )));
        }
        Ok(self.inner.fading_at(user, channel))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkInstance(seed={}, n_users={}, n_channels={})",
            self.inner.seed, self.inner.n_users, self.inner.n_channels
        )
    }
}

/// Draws a network instance deterministically from a seed.
#[pyfunction]
fn generate_instance(config: &PyEnvConfig, seed: u64) -> PyNetworkInstance {
    PyNetworkInstance {
        inner: Arc::new(env::generate_instance(&config.inner, seed)),
    }
}

/// Step-by-step assignment episode over one instance.
#[pyclass(name = "Episode", module = "nomarl_py")]
struct PyEpisode {
    state: EpisodeState,
}

#[pymethods]
impl PyEpisode {
    #[new]
    fn new(instance: &PyNetworkInstance) -> Self {
        Self {
            state: EpisodeState::reset(Arc::clone(&instance.inner)),
        }
    }

    #[getter]
    fn step(&self) -> usize {
        self.state.step
    }

    fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }

    fn legal_mask(&self) -> Vec<bool> {
        self.state.legal_mask()
    }

    fn apply(&mut self, user: usize, channel: usize) -> PyResult<()> {
        let action = env::Action { user, channel };
        self.state = self.state.apply_action(action).map_err(value_err)?;
        Ok(())
    }

    fn features(&self, n_features: usize) -> PyResult<Vec<f64>> {
        if n_features == 0 || n_features > env::N_FEATURE_KINDS {
            return Err(PyValueError::new_err(format!(
                "n_features must be 1..={}, got {}",
                env::N_FEATURE_KINDS,
                n_features
            )));
        }
        Ok(self.state.build_state(n_features).values)
    }

    fn assignment(&self) -> Option<Vec<usize>> {
        self.state.assignment()
    }
}

/// Policy network over flattened state features, one logit per
/// user-channel cell.
#[pyclass(name = "Policy", module = "nomarl_py")]
struct PyPolicy {
    params: PolicyParameters,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    #[pyo3(signature = (n_users, n_channels, n_features, hidden_sizes, seed))]
    fn init(
        n_users: usize,
        n_channels: usize,
        n_features: usize,
        hidden_sizes: Vec<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let arch = Architecture::fully_connected(n_users, n_channels, n_features, hidden_sizes);
        arch.validate().map_err(policy_err)?;
        Ok(Self {
            params: PolicyParameters::init(arch, seed),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            params: PolicyParameters::load(&path).map_err(policy_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.params.save(&path).map_err(policy_err)
    }

    fn param_count(&self) -> usize {
        self.params.param_count()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.params.arch.n_users
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.params.arch.n_features
    }

    /// Action probabilities for the episode's current state.
    fn action_probs(&self, episode: &PyEpisode) -> PyResult<Vec<f64>> {
        let state = episode.state.build_state(self.params.arch.n_features);
        let mask = episode.state.legal_mask();
        nomarl::policy::forward(&self.params, &state, &mask).map_err(policy_err)
    }

    /// Greedy assignment, one channel index per user.
    fn greedy_assignment(&self, instance: &PyNetworkInstance) -> PyResult<Vec<usize>> {
        let roll = nomarl::policy::rollout(&self.params, &instance.inner, SelectMode::Greedy, 0)
            .map_err(policy_err)?;
        Ok(trainer::assignment_from_actions(
            instance.inner.n_users,
            &roll.actions,
        ))
    }

    /// Sampled assignment and its log probability under this policy.
    fn sample_assignment(
        &self,
        instance: &PyNetworkInstance,
        seed: u64,
    ) -> PyResult<(Vec<usize>, f64)> {
        let roll = nomarl::policy::rollout(&self.params, &instance.inner, SelectMode::Sample, seed)
            .map_err(policy_err)?;
        Ok((
            trainer::assignment_from_actions(instance.inner.n_users, &roll.actions),
            roll.log_prob,
        ))
    }
}

/// Sum rate of an assignment under the closed-form power allocation.
///
/// Raises ValueError when the assignment cannot meet the rate floor within
/// the power budget.
#[pyfunction]
fn evaluate_assignment(
    instance: &PyNetworkInstance,
    assignment: Vec<usize>,
    config: &PyEnvConfig,
) -> PyResult<f64> {
    jra::evaluate_assignment(&instance.inner, &assignment, &config.inner)
        .map(|alloc| alloc.sum_rate)
        .map_err(value_err)
}

/// Closed-form power allocation for explicit channel pairs.
///
/// Each pair is (gamma1, gamma2, a1, a2) where gamma is a carrier-to-noise
/// ratio and a = 2 ** r_min. Returns (budgets, p1, p2, sum_rate_bps).
#[pyfunction]
fn allocate_pairs(
    pairs: Vec<(f64, f64, f64, f64)>,
    p_t_w: f64,
    b_c_hz: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let built = pairs
        .iter()
        .enumerate()
        .map(|(i, &(g1, g2, a1, a2))| jra::ChannelPair::new(2 * i, g1, a1, 2 * i + 1, g2, a2))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let alloc = jra::allocate(&built, p_t_w, b_c_hz).map_err(value_err)?;
    Ok((alloc.budgets, alloc.p1, alloc.p2, alloc.sum_rate))
}

/// Number of ways to place users on channels two at a time.
#[pyfunction]
fn assignment_count(n_users: usize) -> PyResult<u128> {
    oracle::assignment_count(n_users).map_err(value_err)
}

/// Exhaustive search over assignments.
///
/// Returns (r_max, r_min, best, worst, n_evaluated, n_infeasible).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn oracle_search(
    instance: &PyNetworkInstance,
    config: &PyEnvConfig,
) -> PyResult<(f64, f64, Vec<usize>, Vec<usize>, u64, u64)> {
    let result = oracle::search(&instance.inner, &config.inner).map_err(value_err)?;
    Ok((
        result.r_max,
        result.r_min,
        result.best_assignment,
        result.worst_assignment,
        result.n_evaluated,
        result.n_infeasible,
    ))
}

/// Trains a policy and returns (policy, converged, episodes_run).
#[pyfunction]
#[pyo3(signature = (config, hidden_sizes=vec![128, 128], learning_rate=0.0005,
                    batch_size=40, replay_capacity=10_000, replay_enabled=true,
                    max_episodes=20_000, val_every=200, val_seeds=None,
                    val_threshold=0.05, loss_threshold=0.01, seed=1))]
#[allow(clippy::too_many_arguments)]
fn train_policy(
    config: &PyEnvConfig,
    hidden_sizes: Vec<usize>,
    learning_rate: f64,
    batch_size: usize,
    replay_capacity: usize,
    replay_enabled: bool,
    max_episodes: usize,
    val_every: usize,
    val_seeds: Option<Vec<u64>>,
    val_threshold: f64,
    loss_threshold: f64,
    seed: u64,
) -> PyResult<(PyPolicy, bool, usize)> {
    let arch = Architecture::fully_connected(
        config.inner.n_users,
        config.inner.n_channels,
        config.inner.n_features,
        hidden_sizes,
    );
    let train_config = TrainConfig {
        learning_rate,
        batch_size,
        replay_capacity,
        replay_enabled,
        max_episodes,
        val_every,
        val_seeds,
        val_threshold,
        loss_threshold,
        ..TrainConfig::default()
    };
    let outcome =
        trainer::train(&config.inner, &arch, &train_config, seed).map_err(value_err)?;
    Ok((
        PyPolicy {
            params: outcome.params,
        },
        outcome.metrics.converged,
        outcome.metrics.episodes_run,
    ))
}

#[pymodule]
fn nomarl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnvConfig>()?;
    m.add_class::<PyNetworkInstance>()?;
    m.add_class::<PyEpisode>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(assignment_count, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_search, m)?)?;
    m.add_function(wrap_pyfunction!(train_policy, m)?)?;
    Ok(())
}
