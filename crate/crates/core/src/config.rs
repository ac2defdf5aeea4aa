//! Run configuration and the flat key=value config file.

use std::path::{Path, PathBuf};

use crate::env::EnvConfig;
use crate::policy::{ArchKind, Architecture};
use crate::trainer::TrainConfig;

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub arch: Architecture,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        RunConfig {
            arch: Architecture::fully_connected(
                env.n_users,
                env.n_channels,
                env.n_features,
                vec![128, 128],
            ),
            env,
            train: TrainConfig::default(),
            master_seed: 1,
            output_dir: PathBuf::from("nomarl_out"),
        }
    }
}

impl RunConfig {
    /// Re-derives the network shape after env or width changes.
    pub fn rebuild_arch(&mut self) {
        self.arch = Architecture::fully_connected(
            self.env.n_users,
            self.env.n_channels,
            self.env.n_features,
            self.arch.hidden_sizes.clone(),
        );
    }

    /// Full validation with config-file key names in the errors.
    pub fn validate(&self) -> Result<(), ConfigFileError> {
        self.env.validate().map_err(|e| ConfigFileError::Validation {
            key: if e.field == "n_channels" { "n_users".into() } else { e.field.into() },
            msg: e.reason,
        })?;
        // The closed-form power split needs at least 1 bit/s/Hz per user,
        // otherwise the stronger user can end up with more power than the
        // weaker one and the decode order breaks.
        if self.env.r_min_bps_hz < 1.0 {
            return Err(ConfigFileError::Validation {
                key: "r_min_bps_hz".into(),
                msg: format!("{} is below 1 bit/s/Hz", self.env.r_min_bps_hz),
            });
        }
        let t = &self.train;
        if !(t.learning_rate > 0.0) {
            return Err(ConfigFileError::Validation {
                key: "lr".into(),
                msg: format!("{} must be positive", t.learning_rate),
            });
        }
        for (key, value) in [
            ("batch_size", t.batch_size),
            ("replay_capacity", t.replay_capacity),
            ("val_every", t.val_every),
        ] {
            if value == 0 {
                return Err(ConfigFileError::Validation {
                    key: key.into(),
                    msg: "must be positive".into(),
                });
            }
        }
        if !(t.val_threshold >= 0.0) {
            return Err(ConfigFileError::Validation {
                key: "val_threshold".into(),
                msg: format!("{} must be non-negative", t.val_threshold),
            });
        }
        if !(t.loss_threshold >= 0.0) {
            return Err(ConfigFileError::Validation {
                key: "loss_threshold".into(),
                msg: format!("{} must be non-negative", t.loss_threshold),
            });
        }
        if self.arch.hidden_sizes.is_empty() || self.arch.hidden_sizes.contains(&0) {
            return Err(ConfigFileError::Validation {
                key: "hidden_sizes".into(),
                msg: format!("{:?} must be non-empty positive widths", self.arch.hidden_sizes),
            });
        }
        Ok(())
    }
}

/// Config file problems, with location or key context.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigFileError {
    Io(String),
    Parse { line: usize, msg: String },
    Validation { key: String, msg: String },
}

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigFileError::Io(msg) => write!(f, "config io: {}", msg),
            ConfigFileError::Parse { line, msg } => write!(f, "config line {}: {}", line, msg),
            ConfigFileError::Validation { key, msg } => write!(f, "config key {}: {}", key, msg),
        }
    }
}

impl std::error::Error for ConfigFileError {}

/// Parses a config file on top of the defaults.
///
/// Format: one `key = value` per line, `#` starts a comment, blank lines are
/// skipped. Unknown keys are rejected rather than ignored, so typos cannot
/// silently fall back to defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigFileError::Io(format!("{}: {}", path.display(), e)))?;
    let mut config = RunConfig::default();
    apply_config_text(&mut config, &text)?;
    config.rebuild_arch();
    config.validate()?;
    Ok(config)
}

fn apply_config_text(config: &mut RunConfig, text: &str) -> Result<(), ConfigFileError> {
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigFileError::Parse {
            line: line_no,
            msg: format!("expected key=value, got {:?}", line),
        })?;
        apply_key(config, key.trim(), value.trim(), line_no)?;
    }
    Ok(())
}

fn apply_key(
    config: &mut RunConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigFileError> {
    let parse_err = |msg: String| ConfigFileError::Parse { line, msg };
    let as_f64 = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| parse_err(format!("{} is not a number", v)))
    };
    let as_usize = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| parse_err(format!("{} is not a non-negative integer", v)))
    };
    match key {
        "n_users" => {
            let n = as_usize(value)?;
            config.env.n_users = n;
            config.env.n_channels = n / 2;
            if n % 2 != 0 || n < 2 {
                return Err(ConfigFileError::Validation {
                    key: "n_users".into(),
                    msg: format!("{} is not an even count >= 2", n),
                });
            }
        }
        "b_tot_hz" => config.env.b_tot_hz = as_f64(value)?,
        "n0_dbm_hz" => config.env.n0_dbm_hz = as_f64(value)?,
        "alpha" => config.env.alpha = as_f64(value)?,
        "d_min_m" => config.env.d_min_m = as_f64(value)?,
        "d_max_m" => config.env.d_max_m = as_f64(value)?,
        "r_min_bps_hz" => config.env.r_min_bps_hz = as_f64(value)?,
        "p_t_w" => config.env.p_t_w = as_f64(value)?,
        "lr" => config.train.learning_rate = as_f64(value)?,
        "batch_size" => config.train.batch_size = as_usize(value)?,
        "replay_capacity" => config.train.replay_capacity = as_usize(value)?,
        "features" => config.env.n_features = as_usize(value)?,
        "arch" => {
            ArchKind::parse(value).map_err(|msg| ConfigFileError::Validation {
                key: "arch".into(),
                msg,
            })?;
        }
        "hidden_sizes" => {
            let sizes = value
                .split(',')
                .map(|s| as_usize(s.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            config.arch.hidden_sizes = sizes;
        }
        "val_every" => config.train.val_every = as_usize(value)?,
        "val_seeds" => {
            config.train.val_seeds = if value == "none" {
                Some(Vec::new())
            } else {
                Some(
                    value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<u64>()
                                .map_err(|_| parse_err(format!("{} is not a seed", s)))
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                )
            };
        }
        "val_threshold" => config.train.val_threshold = as_f64(value)?,
        "loss_threshold" => config.train.loss_threshold = as_f64(value)?,
        "max_episodes" => config.train.max_episodes = as_usize(value)?,
        "seed" => {
            config.master_seed = value
                .parse::<u64>()
                .map_err(|_| parse_err(format!("{} is not a seed", value)))?;
        }
        other => {
            return Err(ConfigFileError::Validation {
                key: other.to_string(),
                msg: "unknown key".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn load_str(text: &str) -> Result<RunConfig, ConfigFileError> {
        let dir = std::env::temp_dir().join("nomarl_config_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("cfg_{:x}.txt", {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            text.hash(&mut h);
            h.finish()
        }));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        load_config(&path)
    }

    #[test]
    fn empty_file_gives_the_default_run() {
        let cfg = load_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.env.n_users, 6);
        assert_eq!(cfg.env.p_t_w, 12.0);
        assert_eq!(cfg.env.n_features, 3);
        assert_eq!(cfg.train.learning_rate, 5e-4);
        assert_eq!(cfg.train.batch_size, 40);
        assert_eq!(cfg.arch.hidden_sizes, vec![128, 128]);
        assert_eq!(cfg.master_seed, 1);
    }

    #[test]
    fn keys_comments_and_spacing_parse() {
        let cfg = load_str(
            "# experiment\nn_users = 4\nlr=0.001\n\nhidden_sizes = 64, 32\np_t_w=8 # watts\nval_seeds=5,6,7\nseed=99\nfeatures=2\n",
        )
        .unwrap();
        assert_eq!(cfg.env.n_users, 4);
        assert_eq!(cfg.env.n_channels, 2);
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.arch.hidden_sizes, vec![64, 32]);
        assert_eq!(cfg.env.p_t_w, 8.0);
        assert_eq!(cfg.train.val_seeds, Some(vec![5, 6, 7]));
        assert_eq!(cfg.master_seed, 99);
        assert_eq!(cfg.env.n_features, 2);
        assert_eq!(cfg.arch.n_features, 2);
        assert_eq!(cfg.arch.n_users, 4);
    }

    #[test]
    fn odd_user_count_names_the_key() {
        match load_str("n_users=5\n") {
            Err(ConfigFileError::Validation { key, .. }) => assert_eq!(key, "n_users"),
            other => panic!("expected ValidationError, got {:?}", other),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        match load_str("n_userz=6\n") {
            Err(ConfigFileError::Validation { key, .. }) => assert_eq!(key, "n_userz"),
            other => panic!("expected ValidationError, got {:?}", other),
        }
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        match load_str("n_users=6\njust words\n") {
            Err(ConfigFileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ParseError, got {:?}", other),
        }
        match load_str("lr=fast\n") {
            Err(ConfigFileError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected ParseError, got {:?}", other),
        }
    }

    #[test]
    fn unsupported_architectures_are_named() {
        match load_str("arch=cnn\n") {
            Err(ConfigFileError::Validation { key, msg }) => {
                assert_eq!(key, "arch");
                assert!(msg.contains("fully_connected"));
            }
            other => panic!("expected ValidationError, got {:?}", other),
        }
    }

    #[test]
    fn sub_one_bit_rate_targets_are_rejected() {
        match load_str("r_min_bps_hz=0.5\n") {
            Err(ConfigFileError::Validation { key, .. }) => assert_eq!(key, "r_min_bps_hz"),
            other => panic!("expected ValidationError, got {:?}", other),
        }
    }

    #[test]
    fn val_seeds_none_disables_validation() {
        let cfg = load_str("val_seeds=none\n").unwrap();
        assert_eq!(cfg.train.val_seeds, Some(vec![]));
        // Absent key leaves the derived default in place.
        assert_eq!(load_str("").unwrap().train.val_seeds, None);
    }

    #[test]
    fn missing_file_reports_io() {
        assert!(matches!(
            load_config(Path::new("/definitely/not/here.cfg")),
            Err(ConfigFileError::Io(_))
        ));
    }
}
