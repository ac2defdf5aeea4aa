//! Assignment policy network.
//!
//! A fully connected net maps the flattened state tensor to one logit per
//! (user, channel) action. Illegal actions are masked out of the softmax, so
//! their probability is exactly zero. Forward, sampling and the analytic
//! log-probability gradient are all hand-rolled in f64, which keeps runs
//! bit-reproducible.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, EpisodeState, NetworkInstance, StateTensor};

/// Supported network families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    FullyConnected,
}

impl ArchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArchKind::FullyConnected => "fully_connected",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "fully_connected" => Ok(ArchKind::FullyConnected),
            other => Err(format!(
                "unsupported architecture {:?}, available: fully_connected",
                other
            )),
        }
    }
}

/// Network shape: problem dimensions plus hidden layer widths.
///
/// Hidden layers use ReLU; the output layer is linear and feeds the masked
/// softmax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub kind: ArchKind,
    pub n_users: usize,
    pub n_channels: usize,
    pub n_features: usize,
    pub hidden_sizes: Vec<usize>,
}

impl Architecture {
    pub fn fully_connected(
        n_users: usize,
        n_channels: usize,
        n_features: usize,
        hidden_sizes: Vec<usize>,
    ) -> Self {
        Architecture {
            kind: ArchKind::FullyConnected,
            n_users,
            n_channels,
            n_features,
            hidden_sizes,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.n_users * self.n_channels * self.n_features
    }

    pub fn output_dim(&self) -> usize {
        self.n_users * self.n_channels
    }

    /// (in, out) shape of every weight matrix in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 1);
        let mut prev = self.input_dim();
        for &h in &self.hidden_sizes {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim()));
        dims
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.n_users == 0 || self.n_channels == 0 || self.n_features == 0 {
            return Err(PolicyError::ShapeMismatch(format!(
                "degenerate dimensions {}x{}x{}",
                self.n_users, self.n_channels, self.n_features
            )));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(PolicyError::ShapeMismatch(format!(
                "hidden sizes {:?} must be non-empty and positive",
                self.hidden_sizes
            )));
        }
        Ok(())
    }
}

/// One dense layer, weights row-major with one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn apply(&self, input: &[f64], output: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        output.clear();
        for row in 0..self.out_dim {
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            let mut acc = self.biases[row];
            for (wi, xi) in w.iter().zip(input) {
                acc += wi * xi;
            }
            output.push(acc);
        }
    }
}

/// All weights of a policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
}

/// Error type for policy evaluation and model files.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyError {
    /// No legal action remained under the mask.
    DegenerateMask,
    /// A replayed action was illegal in its state.
    IllegalTrajectory { step: usize, action: Action, reason: String },
    /// Input tensor or mask does not match the architecture.
    ShapeMismatch(String),
    /// Filesystem failure while reading or writing a model.
    Io(String),
    /// The model file is corrupt or from a different shape.
    BadModelFile(String),
}

impl std::fmt::Display for PolicyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyError::DegenerateMask => write!(f, "mask leaves no legal action"),
            PolicyError::IllegalTrajectory { step, action, reason } => write!(
                f,
                "illegal trajectory at step {} (user {}, channel {}): {}",
                step, action.user, action.channel, reason
            ),
            PolicyError::ShapeMismatch(msg) => write!(f, "shape mismatch: {}", msg),
            PolicyError::Io(msg) => write!(f, "model file io: {}", msg),
            PolicyError::BadModelFile(msg) => write!(f, "bad model file: {}", msg),
        }
    }
}

impl std::error::Error for PolicyError {}

impl PolicyParameters {
    /// Xavier-uniform initialization from a seed.
    ///
    /// Weights are drawn layer by layer in row-major order from
    /// `[-limit, limit)` with `limit = sqrt(6 / (fan_in + fan_out))`; biases
    /// start at zero. The draw order is fixed so a seed pins the network.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        arch.validate().expect("valid architecture");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(in_dim, out_dim)| {
                let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| (2.0 * rng.random::<f64>() - 1.0) * limit)
                    .collect();
                Layer { in_dim, out_dim, weights, biases: vec![0.0; out_dim] }
            })
            .collect();
        PolicyParameters { arch, layers }
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Serializes to the model file format: a text header
    /// `arch,<kind>,<N>,<K>,<F>,<h0>x<h1>...` followed by every weight and
    /// bias as little-endian f64, layer by layer, weights before biases.
    pub fn serialize(&self) -> Vec<u8> {
        let mut header = String::from("arch,");
        let hidden = self
            .arch
            .hidden_sizes
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join("x");
        write!(
            header,
            "{},{},{},{},{}\n",
            self.arch.kind.as_str(),
            self.arch.n_users,
            self.arch.n_channels,
            self.arch.n_features,
            hidden
        )
        .expect("string write");
        let mut bytes = header.into_bytes();
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.biases) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, PolicyError> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PolicyError::BadModelFile("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| PolicyError::BadModelFile("header is not utf-8".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 6 || fields[0] != "arch" {
            return Err(PolicyError::BadModelFile(format!("unrecognized header {:?}", header)));
        }
        let kind = ArchKind::parse(fields[1]).map_err(PolicyError::BadModelFile)?;
        let parse_dim = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| PolicyError::BadModelFile(format!("bad {}: {:?}", what, s)))
        };
        let n_users = parse_dim(fields[2], "user count")?;
        let n_channels = parse_dim(fields[3], "channel count")?;
        let n_features = parse_dim(fields[4], "feature count")?;
        let hidden_sizes = fields[5]
            .split('x')
            .map(|s| parse_dim(s, "hidden size"))
            .collect::<Result<Vec<_>, _>>()?;
        let arch = Architecture {
            kind,
            n_users,
            n_channels,
            n_features,
            hidden_sizes,
        };
        arch.validate()?;

        let blob = &bytes[newline + 1..];
        let expected: usize = arch
            .layer_dims()
            .iter()
            .map(|(i, o)| i * o + o)
            .sum();
        if blob.len() != expected * 8 {
            return Err(PolicyError::BadModelFile(format!(
                "weight blob holds {} bytes, shape needs {}",
                blob.len(),
                expected * 8
            )));
        }
        let mut values = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(in_dim, out_dim)| {
                let weights = values.by_ref().take(in_dim * out_dim).collect();
                let biases = values.by_ref().take(out_dim).collect();
                Layer { in_dim, out_dim, weights, biases }
            })
            .collect();
        Ok(PolicyParameters { arch, layers })
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, self.serialize())
            .map_err(|e| PolicyError::Io(format!("{}: {}", path.display(), e)))
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let bytes = std::fs::read(path)
            .map_err(|e| PolicyError::Io(format!("{}: {}", path.display(), e)))?;
        Self::deserialize(&bytes)
    }
}

/// Gradient buffer shaped exactly like a parameter set.
pub fn zeros_like(params: &PolicyParameters) -> Vec<Layer> {
    params
        .layers
        .iter()
        .map(|l| Layer::zeros(l.in_dim, l.out_dim))
        .collect()
}

/// Softmax over the unmasked entries; masked entries come out exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, PolicyError> {
    debug_assert_eq!(logits.len(), mask.len());
    let mut max = f64::NEG_INFINITY;
    for (l, &m) in logits.iter().zip(mask) {
        if m && *l > max {
            max = *l;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(PolicyError::DegenerateMask);
    }
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    for i in 0..logits.len() {
        if mask[i] {
            let e = (logits[i] - max).exp();
            probs[i] = e;
            total += e;
        }
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(probs)
}

/// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
    /// Input of each layer: the state vector, then each hidden activation.
    layer_inputs: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn forward_trace(
    params: &PolicyParameters,
    input: &[f64],
    mask: &[bool],
) -> Result<ForwardTrace, PolicyError> {
    if input.len() != params.arch.input_dim() {
        return Err(PolicyError::ShapeMismatch(format!(
            "input length {} but the network takes {}",
            input.len(),
            params.arch.input_dim()
        )));
    }
    if mask.len() != params.arch.output_dim() {
        return Err(PolicyError::ShapeMismatch(format!(
            "mask length {} but the network emits {}",
            mask.len(),
            params.arch.output_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    layer_inputs.push(input.to_vec());
    let mut current = Vec::new();
    for (idx, layer) in params.layers.iter().enumerate() {
        layer.apply(layer_inputs.last().expect("seeded above"), &mut current);
        if idx + 1 < n_layers {
            for v in current.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            layer_inputs.push(current.clone());
        }
    }
    let probs = masked_softmax(&current, mask)?;
    Ok(ForwardTrace { layer_inputs, probs })
}

/// Action distribution for a state, masked entries exactly zero.
pub fn forward(
    params: &PolicyParameters,
    state: &StateTensor,
    mask: &[bool],
) -> Result<Vec<f64>, PolicyError> {
    if (state.n_users, state.n_channels, state.n_features)
        != (params.arch.n_users, params.arch.n_channels, params.arch.n_features)
    {
        return Err(PolicyError::ShapeMismatch(format!(
            "state {}x{}x{} but the network is {}x{}x{}",
            state.n_users,
            state.n_channels,
            state.n_features,
            params.arch.n_users,
            params.arch.n_channels,
            params.arch.n_features
        )));
    }
    Ok(forward_trace(params, &state.values, mask)?.probs)
}

/// Accumulates `scale * d(logits)` backward through the net into `grad`.
fn backprop_logits(
    params: &PolicyParameters,
    trace: &ForwardTrace,
    dlogits: Vec<f64>,
    grad: &mut [Layer],
) {
    let mut delta = dlogits;
    for idx in (0..params.layers.len()).rev() {
        let layer = &params.layers[idx];
        let input = &trace.layer_inputs[idx];
        let g = &mut grad[idx];
        for row in 0..layer.out_dim {
            let d = delta[row];
            if d != 0.0 {
                let w_row = &mut g.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (wg, xi) in w_row.iter_mut().zip(input) {
                    *wg += d * xi;
                }
                g.biases[row] += d;
            }
        }
        if idx == 0 {
            break;
        }
        // Pull the delta through the weights, then gate on the ReLU: a
        // hidden activation of zero means the unit was off.
        let mut prev = vec![0.0; layer.in_dim];
        for row in 0..layer.out_dim {
            let d = delta[row];
            if d != 0.0 {
                let w_row = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (p, wi) in prev.iter_mut().zip(w_row) {
                    *p += d * wi;
                }
            }
        }
        for (p, &h) in prev.iter_mut().zip(input) {
            if h == 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
}

/// How an action is drawn from the distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Draw from the masked softmax.
    Sample,
    /// Highest probability, ties to the lowest flat index.
    Greedy,
}

/// One complete assignment episode produced by a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub actions: Vec<Action>,
    /// Log probability of the whole action sequence under the policy.
    pub log_prob: f64,
}

fn check_instance(params: &PolicyParameters, instance: &NetworkInstance) -> Result<(), PolicyError> {
    if instance.n_users != params.arch.n_users || instance.n_channels != params.arch.n_channels {
        return Err(PolicyError::ShapeMismatch(format!(
            "instance {}x{} but the network is {}x{}",
            instance.n_users, instance.n_channels, params.arch.n_users, params.arch.n_channels
        )));
    }
    Ok(())
}

/// Runs one episode, assigning every user to a channel.
///
/// `seed` drives action sampling and is ignored in greedy mode.
pub fn rollout(
    params: &PolicyParameters,
    instance: &Arc<NetworkInstance>,
    mode: SelectMode,
    seed: u64,
) -> Result<Rollout, PolicyError> {
    check_instance(params, instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EpisodeState::reset(instance.clone());
    let mut actions = Vec::with_capacity(instance.n_users);
    let mut log_prob = 0.0;
    while !state.is_terminal() {
        let tensor = state.build_state(params.arch.n_features);
        let mask = state.legal_mask();
        let probs = forward(params, &tensor, &mask)?;
        let flat = match mode {
            SelectMode::Greedy => argmax(&probs),
            SelectMode::Sample => sample_index(&probs, rng.random::<f64>()),
        };
        let action = Action {
            user: flat / instance.n_channels,
            channel: flat % instance.n_channels,
        };
        log_prob += probs[flat].ln();
        state = state.apply_action(action).map_err(|e| PolicyError::IllegalTrajectory {
            step: actions.len(),
            action,
            reason: e.reason,
        })?;
        actions.push(action);
    }
    Ok(Rollout { actions, log_prob })
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (i, &p) in probs.iter().enumerate() {
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}

/// Inverse-CDF draw over the probability vector.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if u < cumulative {
                return i;
            }
        }
    }
    // Rounding can leave the total a hair under 1; fall back to the last
    // action with mass.
    last_positive
}

/// Log probability of a stored action sequence under `params`.
///
/// Replays the episode, so the masks are identical to the ones the sequence
/// was generated under.
pub fn log_prob(
    params: &PolicyParameters,
    actions: &[Action],
    instance: &Arc<NetworkInstance>,
) -> Result<f64, PolicyError> {
    check_instance(params, instance)?;
    let mut state = EpisodeState::reset(instance.clone());
    let mut total = 0.0;
    for (step, &action) in actions.iter().enumerate() {
        let tensor = state.build_state(params.arch.n_features);
        let mask = state.legal_mask();
        let probs = forward(params, &tensor, &mask)?;
        total += probs[action.flat(instance.n_channels)].ln();
        state = state.apply_action(action).map_err(|e| PolicyError::IllegalTrajectory {
            step,
            action,
            reason: e.reason,
        })?;
    }
    if !state.is_terminal() {
        return Err(PolicyError::IllegalTrajectory {
            step: actions.len(),
            action: Action { user: 0, channel: 0 },
            reason: format!("sequence ends after {} steps, episode needs {}", actions.len(), instance.n_users),
        });
    }
    Ok(total)
}

/// One trajectory of a weighted log-probability gradient batch.
pub struct GradSample<'a> {
    pub actions: &'a [Action],
    pub instance: &'a Arc<NetworkInstance>,
    /// Multiplier on this trajectory's log-probability gradient.
    pub weight: f64,
}

/// Batch gradient plus the recomputed per-trajectory log probabilities.
pub struct WeightedGrad {
    /// Mean over the batch of `weight * grad(log prob)`, parameter-shaped.
    pub grad: Vec<Layer>,
    pub log_probs: Vec<f64>,
}

/// Gradient of `mean_i(weight_i * log prob(actions_i))` at `params`.
///
/// Log probabilities are recomputed under the current parameters, not the
/// ones the trajectories were sampled with.
pub fn grad_weighted_log_prob(
    params: &PolicyParameters,
    samples: &[GradSample<'_>],
) -> Result<WeightedGrad, PolicyError> {
    assert!(!samples.is_empty(), "empty gradient batch");
    let mut grad = zeros_like(params);
    let mut log_probs = Vec::with_capacity(samples.len());
    let scale = 1.0 / samples.len() as f64;
    for sample in samples {
        check_instance(params, sample.instance)?;
        let mut state = EpisodeState::reset(sample.instance.clone());
        let mut lp = 0.0;
        for (step, &action) in sample.actions.iter().enumerate() {
            let tensor = state.build_state(params.arch.n_features);
            let mask = state.legal_mask();
            let trace = forward_trace(params, &tensor.values, &mask)?;
            let flat = action.flat(state.instance.n_channels);
            lp += trace.probs[flat].ln();
            if sample.weight != 0.0 {
                // d(log p)/d(logit_i) is onehot(action) - p, scaled by the
                // trajectory weight and the batch mean.
                let mut dlogits: Vec<f64> =
                    trace.probs.iter().map(|p| -p * sample.weight * scale).collect();
                dlogits[flat] += sample.weight * scale;
                backprop_logits(params, &trace, dlogits, &mut grad);
            }
            state = state.apply_action(action).map_err(|e| PolicyError::IllegalTrajectory {
                step,
                action,
                reason: e.reason,
            })?;
        }
        log_probs.push(lp);
    }
    Ok(WeightedGrad { grad, log_probs })
}

/// A finished episode kept for replay training.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Seed that regenerates the episode's network instance.
    pub instance_seed: u64,
    pub actions: Vec<Action>,
    /// Sum rate achieved by these actions in bit/s.
    pub return_online: f64,
    /// Sum rate of the baseline policy's greedy rollout on the same instance.
    pub return_baseline: f64,
}

impl Trajectory {
    /// Reward advantage of the online rollout over the baseline.
    pub fn advantage(&self) -> f64 {
        self.return_online - self.return_baseline
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_instance, EnvConfig};

    fn small_arch() -> Architecture {
        Architecture::fully_connected(4, 2, 2, vec![5])
    }

    fn instance_for(arch: &Architecture, seed: u64) -> Arc<NetworkInstance> {
        let mut cfg = EnvConfig::for_users(arch.n_users);
        cfg.n_features = arch.n_features;
        Arc::new(generate_instance(&cfg, seed))
    }

    #[test]
    fn param_count_matches_hand_count() {
        let arch = Architecture::fully_connected(6, 3, 3, vec![64]);
        let params = PolicyParameters::init(arch, 0);
        // 54 inputs, one hidden layer of 64, 18 outputs.
        assert_eq!(params.param_count(), 54 * 64 + 64 + 64 * 18 + 18);
        assert_eq!(params.param_count(), 4690);
    }

    #[test]
    fn init_is_seeded_xavier_with_zero_biases() {
        let a = PolicyParameters::init(small_arch(), 7);
        let b = PolicyParameters::init(small_arch(), 7);
        let c = PolicyParameters::init(small_arch(), 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for layer in &a.layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= limit));
            assert!(layer.weights.iter().any(|w| *w != 0.0));
            assert!(layer.biases.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let logits = [1.0, 2.0, 3.0, -1.0];
        let mask = [true, false, true, true];
        let p = masked_softmax(&logits, &mask).unwrap();
        assert_eq!(p[1], 0.0);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(p[2] > p[0] && p[0] > p[3]);

        assert!(matches!(
            masked_softmax(&logits, &[false; 4]),
            Err(PolicyError::DegenerateMask)
        ));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let logits = [0.3, -0.7, 800.0, 2.0];
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.456).collect();
        let mask = [true, true, true, false];
        let a = masked_softmax(&logits, &mask).unwrap();
        let b = masked_softmax(&shifted, &mask).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // Extreme logits stay finite.
        assert!(a.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn forward_checks_shapes() {
        let params = PolicyParameters::init(small_arch(), 1);
        let inst = instance_for(&params.arch, 1);
        let state = EpisodeState::reset(inst);
        let tensor = state.build_state(2);
        let mask = state.legal_mask();
        let probs = forward(&params, &tensor, &mask).unwrap();
        assert_eq!(probs.len(), 8);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let bad = state.build_state(1);
        assert!(matches!(
            forward(&params, &bad, &mask),
            Err(PolicyError::ShapeMismatch(_))
        ));
        assert!(matches!(
            forward(&params, &tensor, &mask[..7]),
            Err(PolicyError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rollout_is_deterministic_and_legal() {
        let params = PolicyParameters::init(small_arch(), 3);
        let inst = instance_for(&params.arch, 5);
        let a = rollout(&params, &inst, SelectMode::Sample, 11).unwrap();
        let b = rollout(&params, &inst, SelectMode::Sample, 11).unwrap();
        assert_eq!(a, b);
        let c = rollout(&params, &inst, SelectMode::Sample, 12).unwrap();
        // Different sampling seeds usually pick different actions; at the
        // very least the rollout is still a valid full assignment.
        assert_eq!(a.actions.len(), 4);
        assert_eq!(c.actions.len(), 4);

        let mut state = EpisodeState::reset(inst.clone());
        for action in &a.actions {
            state = state.apply_action(*action).unwrap();
        }
        assert!(state.is_terminal());
    }

    #[test]
    fn greedy_rollout_never_needs_the_seed() {
        let params = PolicyParameters::init(small_arch(), 3);
        let inst = instance_for(&params.arch, 6);
        let a = rollout(&params, &inst, SelectMode::Greedy, 1).unwrap();
        let b = rollout(&params, &inst, SelectMode::Greedy, 999).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_prob_matches_rollout_exactly() {
        let params = PolicyParameters::init(small_arch(), 9);
        let inst = instance_for(&params.arch, 10);
        for seed in 0..20u64 {
            let r = rollout(&params, &inst, SelectMode::Sample, seed).unwrap();
            let lp = log_prob(&params, &r.actions, &inst).unwrap();
            assert!((lp - r.log_prob).abs() <= 1e-12);
        }
    }

    #[test]
    fn greedy_is_the_most_likely_trajectory_stepwise() {
        let params = PolicyParameters::init(small_arch(), 21);
        let inst = instance_for(&params.arch, 22);
        let greedy = rollout(&params, &inst, SelectMode::Greedy, 0).unwrap();
        for seed in 0..50u64 {
            let sampled = rollout(&params, &inst, SelectMode::Sample, seed).unwrap();
            assert!(greedy.log_prob >= sampled.log_prob - 1e-12);
        }
    }

    #[test]
    fn log_prob_rejects_illegal_sequences() {
        let params = PolicyParameters::init(small_arch(), 2);
        let inst = instance_for(&params.arch, 2);
        let twice = [
            Action { user: 0, channel: 0 },
            Action { user: 0, channel: 1 },
        ];
        match log_prob(&params, &twice, &inst) {
            Err(PolicyError::IllegalTrajectory { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected IllegalTrajectory, got {:?}", other),
        }
        let short = [Action { user: 0, channel: 0 }];
        assert!(matches!(
            log_prob(&params, &short, &inst),
            Err(PolicyError::IllegalTrajectory { .. })
        ));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let params = PolicyParameters::init(small_arch(), 31);
        let inst = instance_for(&params.arch, 32);
        let r = rollout(&params, &inst, SelectMode::Sample, 33).unwrap();
        let weight = 2.5;
        let analytic = grad_weighted_log_prob(
            &params,
            &[GradSample { actions: &r.actions, instance: &inst, weight }],
        )
        .unwrap();
        assert!((analytic.log_probs[0] - r.log_prob).abs() <= 1e-12);

        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for layer_idx in 0..params.layers.len() {
            let coords = params.layers[layer_idx].weights.len() + params.layers[layer_idx].biases.len();
            for coord in 0..coords {
                let read = |p: &PolicyParameters, i: usize| {
                    let l = &p.layers[layer_idx];
                    if i < l.weights.len() { l.weights[i] } else { l.biases[i - l.weights.len()] }
                };
                let write = |p: &mut PolicyParameters, i: usize, v: f64| {
                    let l = &mut p.layers[layer_idx];
                    if i < l.weights.len() { l.weights[i] = v } else { let n = l.weights.len(); l.biases[i - n] = v }
                };
                let base = read(&params, coord);
                let mut plus = params.clone();
                write(&mut plus, coord, base + eps);
                let mut minus = params.clone();
                write(&mut minus, coord, base - eps);
                let numeric = weight
                    * (log_prob(&plus, &r.actions, &inst).unwrap()
                        - log_prob(&minus, &r.actions, &inst).unwrap())
                    / (2.0 * eps);
                let g = read(
                    &PolicyParameters { arch: params.arch.clone(), layers: analytic.grad.clone() },
                    coord,
                );
                if g.abs() > 1e-8 || numeric.abs() > 1e-8 {
                    let rel = (numeric - g).abs() / numeric.abs().max(g.abs()).max(1e-8);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {}", worst);
    }

    #[test]
    fn zero_weight_gives_zero_gradient() {
        let params = PolicyParameters::init(small_arch(), 41);
        let inst = instance_for(&params.arch, 42);
        let r = rollout(&params, &inst, SelectMode::Sample, 43).unwrap();
        let out = grad_weighted_log_prob(
            &params,
            &[GradSample { actions: &r.actions, instance: &inst, weight: 0.0 }],
        )
        .unwrap();
        for layer in &out.grad {
            assert!(layer.weights.iter().all(|v| *v == 0.0));
            assert!(layer.biases.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn model_file_round_trips_bit_exactly() {
        let arch = Architecture::fully_connected(6, 3, 3, vec![16, 8]);
        let params = PolicyParameters::init(arch, 77);
        let bytes = params.serialize();
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes[..header_end]).unwrap(),
            "arch,fully_connected,6,3,3,16x8"
        );
        let back = PolicyParameters::deserialize(&bytes).unwrap();
        assert_eq!(params, back);

        let dir = std::env::temp_dir().join("nomarl_model_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        params.save(&path).unwrap();
        let loaded = PolicyParameters::load(&path).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn model_file_rejects_corruption() {
        let params = PolicyParameters::init(small_arch(), 1);
        let bytes = params.serialize();
        assert!(matches!(
            PolicyParameters::deserialize(&bytes[..bytes.len() - 4]),
            Err(PolicyError::BadModelFile(_))
        ));
        let mut wrong_kind = bytes.clone();
        wrong_kind.splice(5..20, b"convolutional,4".iter().copied());
        assert!(PolicyParameters::deserialize(&wrong_kind).is_err());
        assert!(matches!(
            PolicyParameters::deserialize(b"no header here"),
            Err(PolicyError::BadModelFile(_))
        ));
    }
}
