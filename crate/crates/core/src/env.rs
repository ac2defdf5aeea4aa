//! Downlink network model and assignment episode.
//!
//! A network instance fixes the channel-to-noise ratios for N users on K
//! subchannels (two users share each subchannel). An episode assigns users to
//! subchannels one action at a time; power allocation for a finished
//! assignment lives in [`crate::jra`].

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A config field failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

/// Static network parameters shared by every instance of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Number of users, must be even and at least 2.
    pub n_users: usize,
    /// Number of subchannels, always `n_users / 2`.
    pub n_channels: usize,
    /// Total bandwidth in Hz, split evenly across subchannels.
    pub b_tot_hz: f64,
    /// Noise power spectral density in dBm/Hz.
    pub n0_dbm_hz: f64,
    /// Path loss exponent applied to the distance.
    pub alpha: f64,
    /// Minimum user distance in meters.
    pub d_min_m: f64,
    /// Maximum user distance in meters.
    pub d_max_m: f64,
    /// Per-user minimum spectral efficiency in bit/s/Hz.
    pub r_min_bps_hz: f64,
    /// Total transmit power budget in watts.
    pub p_t_w: f64,
    /// Features per (user, channel) cell in the state tensor, 1 to 3.
    pub n_features: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_users: 6,
            n_channels: 3,
            b_tot_hz: 5e6,
            n0_dbm_hz: -170.0,
            alpha: 2.0,
            d_min_m: 50.0,
            d_max_m: 300.0,
            r_min_bps_hz: 2.0,
            p_t_w: 12.0,
            n_features: 3,
        }
    }
}

impl EnvConfig {
    /// Default config resized to `n_users` (and `n_users / 2` subchannels).
    pub fn for_users(n_users: usize) -> Self {
        EnvConfig {
            n_users,
            n_channels: n_users / 2,
            ..EnvConfig::default()
        }
    }

    /// Per-subchannel bandwidth in Hz.
    pub fn b_c_hz(&self) -> f64 {
        self.b_tot_hz / self.n_channels as f64
    }

    /// Noise power per subchannel in watts.
    pub fn noise_w(&self) -> f64 {
        // dBm/Hz to W/Hz, then times the subchannel bandwidth.
        10f64.powf((self.n0_dbm_hz - 30.0) / 10.0) * self.b_c_hz()
    }

    /// Checks every field range plus the user/channel coupling.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field, reason: String| Err(ConfigError { field, reason });
        if self.n_users < 2 || self.n_users % 2 != 0 {
            return fail("n_users", format!("{} is not an even count >= 2", self.n_users));
        }
        if self.n_channels * 2 != self.n_users {
            return fail(
                "n_channels",
                format!("{} must equal n_users / 2 = {}", self.n_channels, self.n_users / 2),
            );
        }
        if !(self.b_tot_hz > 0.0) {
            return fail("b_tot_hz", format!("{} must be positive", self.b_tot_hz));
        }
        if !self.n0_dbm_hz.is_finite() {
            return fail("n0_dbm_hz", format!("{} must be finite", self.n0_dbm_hz));
        }
        if !(self.alpha > 0.0) {
            return fail("alpha", format!("{} must be positive", self.alpha));
        }
        if !(self.d_min_m > 0.0 && self.d_max_m >= self.d_min_m) {
            return fail(
                "d_min_m",
                format!("need 0 < d_min_m <= d_max_m, got [{}, {}]", self.d_min_m, self.d_max_m),
            );
        }
        if !(self.r_min_bps_hz > 0.0) {
            return fail("r_min_bps_hz", format!("{} must be positive", self.r_min_bps_hz));
        }
        if !(self.p_t_w > 0.0) {
            return fail("p_t_w", format!("{} must be positive", self.p_t_w));
        }
        if self.n_features == 0 || self.n_features > N_FEATURE_KINDS {
            return fail(
                "features",
                format!("{} is outside 1..={}", self.n_features, N_FEATURE_KINDS),
            );
        }
        Ok(())
    }
}

/// How many feature kinds [`EpisodeState::build_state`] knows how to emit.
pub const N_FEATURE_KINDS: usize = 3;

/// Channel-to-noise ratio for one link.
///
/// `gain` is the fading amplitude, so the channel power gain is
/// `gain^2 * distance^(-2 alpha)` and the CNR divides that by the
/// subchannel noise power.
pub fn cnr(gain: f64, distance_m: f64, alpha: f64, noise_w: f64) -> f64 {
    gain * gain * distance_m.powf(-2.0 * alpha) / noise_w
}

/// One random draw of user positions and fading, with precomputed CNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    /// Seed this instance was generated from.
    pub seed: u64,
    pub n_users: usize,
    pub n_channels: usize,
    /// Subchannel bandwidth in Hz, carried along for rate computations.
    pub b_c_hz: f64,
    /// Cell radius the distances were drawn under, used to normalize the
    /// distance feature.
    pub d_max_m: f64,
    /// Distance per user in meters.
    pub distances_m: Vec<f64>,
    /// Fading amplitude per (user, channel), row-major by user.
    pub fading: Vec<f64>,
    /// CNR per (user, channel) in 1/W, row-major by user.
    pub cnr: Vec<f64>,
}

impl NetworkInstance {
    /// CNR of `user` on `channel`.
    pub fn cnr_at(&self, user: usize, channel: usize) -> f64 {
        self.cnr[user * self.n_channels + channel]
    }

    /// Fading amplitude of `user` on `channel`.
    pub fn fading_at(&self, user: usize, channel: usize) -> f64 {
        self.fading[user * self.n_channels + channel]
    }

    /// Dumps the instance as CSV with one row per (user, channel) link.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,user,channel,distance_m,fading,cnr\n");
        for user in 0..self.n_users {
            for channel in 0..self.n_channels {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    self.seed,
                    user,
                    channel,
                    self.distances_m[user],
                    self.fading_at(user, channel),
                    self.cnr_at(user, channel)
                )
                .expect("string write");
            }
        }
        out
    }
}

/// Draws an instance from `seed`.
///
/// Draw order is fixed and part of the reproducibility contract: one uniform
/// per user for the distance (users 0..N-1), then one uniform per (user,
/// channel) pair for fading, row-major by user. Distances are uniform on
/// `[d_min, d_max]`; fading amplitudes are Rayleigh with unit mean square,
/// drawn as `sqrt(-ln u)` with `u` uniform on (0, 1).
pub fn generate_instance(config: &EnvConfig, seed: u64) -> NetworkInstance {
    debug_assert!(config.validate().is_ok());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_users;
    let k = config.n_channels;
    let noise = config.noise_w();

    let distances_m: Vec<f64> = (0..n)
        .map(|_| config.d_min_m + (config.d_max_m - config.d_min_m) * rng.random::<f64>())
        .collect();

    let mut fading = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        // random::<f64>() is uniform on [0, 1); skip exact zeros so the log
        // stays finite.
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        fading.push((-u.ln()).sqrt());
    }

    let cnr_values: Vec<f64> = (0..n * k)
        .map(|i| cnr(fading[i], distances_m[i / k], config.alpha, noise))
        .collect();

    NetworkInstance {
        seed,
        n_users: n,
        n_channels: k,
        b_c_hz: config.b_c_hz(),
        d_max_m: config.d_max_m,
        distances_m,
        fading,
        cnr: cnr_values,
    }
}

/// Assign `user` to `channel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub user: usize,
    pub channel: usize,
}

impl Action {
    /// Position of this action in a flattened N x K grid.
    pub fn flat(&self, n_channels: usize) -> usize {
        self.user * n_channels + self.channel
    }
}

/// An action that violates the current mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllegalAction {
    pub action: Action,
    pub reason: String,
}

impl std::fmt::Display for IllegalAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "illegal action (user {}, channel {}): {}",
            self.action.user, self.action.channel, self.reason
        )
    }
}

impl std::error::Error for IllegalAction {}

/// Flattened N x K x F feature tensor fed to the policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor {
    pub n_users: usize,
    pub n_channels: usize,
    pub n_features: usize,
    /// Row-major by (user, channel, feature).
    pub values: Vec<f64>,
}

/// Partial assignment progress inside one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub instance: Arc<NetworkInstance>,
    /// Channel per user, `None` while unassigned.
    pub assigned: Vec<Option<usize>>,
    /// Users currently on each channel, 0..=2.
    pub occupancy: Vec<u8>,
    /// Actions taken so far.
    pub step: usize,
}

impl EpisodeState {
    /// Fresh episode with no assignments.
    pub fn reset(instance: Arc<NetworkInstance>) -> Self {
        let n = instance.n_users;
        let k = instance.n_channels;
        EpisodeState {
            instance,
            assigned: vec![None; n],
            occupancy: vec![0; k],
            step: 0,
        }
    }

    /// True once every user holds a channel.
    pub fn is_terminal(&self) -> bool {
        self.step == self.instance.n_users
    }

    /// Flattened N x K grid of still-legal actions.
    ///
    /// `(user, channel)` is legal when the user is unassigned and the channel
    /// holds fewer than two users.
    pub fn legal_mask(&self) -> Vec<bool> {
        let k = self.instance.n_channels;
        let mut mask = vec![false; self.instance.n_users * k];
        for (user, slot) in self.assigned.iter().enumerate() {
            if slot.is_some() {
                continue;
            }
            for (channel, &count) in self.occupancy.iter().enumerate() {
                if count < 2 {
                    mask[user * k + channel] = true;
                }
            }
        }
        mask
    }

    /// Applies a legal action, returning the successor state.
    pub fn apply_action(&self, action: Action) -> Result<EpisodeState, IllegalAction> {
        if action.user >= self.instance.n_users || action.channel >= self.instance.n_channels {
            return Err(IllegalAction {
                action,
                reason: "index out of range".into(),
            });
        }
        if self.assigned[action.user].is_some() {
            return Err(IllegalAction {
                action,
                reason: "user already assigned".into(),
            });
        }
        if self.occupancy[action.channel] >= 2 {
            return Err(IllegalAction {
                action,
                reason: "channel already full".into(),
            });
        }
        let mut next = self.clone();
        next.assigned[action.user] = Some(action.channel);
        next.occupancy[action.channel] += 1;
        next.step += 1;
        Ok(next)
    }

    /// Builds the policy input tensor with the first `n_features` features.
    ///
    /// Feature order per (user, channel) cell: `log10(cnr) / 10`, then
    /// `distance / d_max`, then `occupancy / 2`.
    pub fn build_state(&self, n_features: usize) -> StateTensor {
        let d_max_m = self.instance.d_max_m;
        assert!(
            n_features >= 1 && n_features <= N_FEATURE_KINDS,
            "n_features {} outside 1..={}",
            n_features,
            N_FEATURE_KINDS
        );
        let n = self.instance.n_users;
        let k = self.instance.n_channels;
        let mut values = Vec::with_capacity(n * k * n_features);
        for user in 0..n {
            for channel in 0..k {
                let feats = [
                    self.instance.cnr_at(user, channel).log10() / 10.0,
                    self.instance.distances_m[user] / d_max_m,
                    f64::from(self.occupancy[channel]) / 2.0,
                ];
                values.extend_from_slice(&feats[..n_features]);
            }
        }
        StateTensor {
            n_users: n,
            n_channels: k,
            n_features,
            values,
        }
    }

    /// Full per-user channel vector once the episode is terminal.
    pub fn assignment(&self) -> Option<Vec<usize>> {
        self.assigned.iter().copied().collect()
    }

    /// Rate in bit/s the acting user would get under the final allocation.
    ///
    /// `p_first` and `p_second` are the power levels on the action's channel
    /// for its first and second occupant. The first user on a channel is
    /// decoded last and sees no intra-channel interference; the second sees
    /// the first occupant's power as interference.
    pub fn step_reward(&self, action: Action, p_first: f64, p_second: f64) -> f64 {
        let g = self.instance.cnr_at(action.user, action.channel);
        let b_c = self.instance.b_c_hz;
        if self.occupancy[action.channel] == 0 {
            b_c * (1.0 + p_first * g).log2()
        } else {
            b_c * (1.0 + p_second * g / (1.0 + p_first * g)).log2()
        }
    }
}
