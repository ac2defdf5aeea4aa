//! Power allocation for a fixed channel assignment.
//!
//! With two users per subchannel and superposition coding, the sum rate of a
//! subchannel under minimum-rate constraints has a closed-form optimal power
//! split: the weaker user is pinned at its minimum rate and every extra watt
//! goes to the stronger user. Budgets across subchannels then follow a
//! waterfilling rule with a single Lagrange multiplier found by bisection.

use std::fmt::Write as _;

use crate::env::{EnvConfig, NetworkInstance};

/// Failure modes of the allocator.
#[derive(Debug, Clone, PartialEq)]
pub enum JraError {
    /// A pair's CNRs or rate factors are out of range.
    InvalidPair(String),
    /// The sum of minimum budgets exceeds the power budget.
    Infeasible { required_w: f64, p_t_w: f64 },
    /// A per-channel budget cannot cover both minimum rates.
    BudgetTooSmall { q_w: f64, min_w: f64 },
    /// Bisection failed to hit the power target, should not happen for
    /// feasible inputs.
    NoConvergence { residual_w: f64 },
    /// The assignment is not a pairing of all users onto channels.
    MalformedAssignment(String),
}

impl std::fmt::Display for JraError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JraError::InvalidPair(msg) => write!(f, "invalid channel pair: {}", msg),
            JraError::Infeasible { required_w, p_t_w } => write!(
                f,
                "infeasible: minimum budgets need {} W but only {} W available",
                required_w, p_t_w
            ),
            JraError::BudgetTooSmall { q_w, min_w } => {
                write!(f, "budget {} W below channel minimum {} W", q_w, min_w)
            }
            JraError::NoConvergence { residual_w } => {
                write!(f, "bisection left a power residual of {} W", residual_w)
            }
            JraError::MalformedAssignment(msg) => write!(f, "malformed assignment: {}", msg),
        }
    }
}

impl std::error::Error for JraError {}

/// The two users sharing one subchannel, ordered by CNR.
///
/// `a1` and `a2` are the minimum-rate factors `2^r_min` of the stronger and
/// weaker user. They must be at least 2 (one bit/s/Hz per user); below that
/// the closed-form split can hand the stronger user more power than the
/// weaker one, which breaks the decode order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPair {
    pub user1: usize,
    pub user2: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ChannelPair {
    /// Builds a pair from two users, ordering them by CNR.
    ///
    /// The higher-CNR user becomes user 1; CNR ties go to the lower index.
    pub fn new(
        user_a: usize,
        gamma_a: f64,
        a_a: f64,
        user_b: usize,
        gamma_b: f64,
        a_b: f64,
    ) -> Result<Self, JraError> {
        for (user, gamma, a) in [(user_a, gamma_a, a_a), (user_b, gamma_b, a_b)] {
            if !(gamma > 0.0) || !gamma.is_finite() {
                return Err(JraError::InvalidPair(format!(
                    "user {} has CNR {}, need a finite positive value",
                    user, gamma
                )));
            }
            if !(a >= 2.0) || !a.is_finite() {
                return Err(JraError::InvalidPair(format!(
                    "user {} has rate factor {}, need at least 2 (1 bit/s/Hz)",
                    user, a
                )));
            }
        }
        if user_a == user_b {
            return Err(JraError::InvalidPair(format!("user {} paired with itself", user_a)));
        }
        let first_is_stronger =
            gamma_a > gamma_b || (gamma_a == gamma_b && user_a < user_b);
        if first_is_stronger {
            Ok(ChannelPair {
                user1: user_a,
                user2: user_b,
                gamma1: gamma_a,
                gamma2: gamma_b,
                a1: a_a,
                a2: a_b,
            })
        } else {
            Ok(ChannelPair {
                user1: user_b,
                user2: user_a,
                gamma1: gamma_b,
                gamma2: gamma_a,
                a1: a_b,
                a2: a_a,
            })
        }
    }

    /// Smallest budget under which both users can meet their minimum rates.
    pub fn min_budget(&self) -> f64 {
        self.a2 * (self.a1 - 1.0) / self.gamma1 + (self.a2 - 1.0) / self.gamma2
    }

    /// Rate-optimal split of budget `q` into (stronger, weaker) powers.
    ///
    /// The split keeps the weaker user exactly at its minimum rate for every
    /// feasible `q`; all slack goes to the stronger user.
    pub fn split_budget(&self, q: f64) -> Result<(f64, f64), JraError> {
        let min = self.min_budget();
        if q < min * (1.0 - 1e-12) {
            return Err(JraError::BudgetTooSmall { q_w: q, min_w: min });
        }
        let p1 = (self.gamma2 * q - self.a2 + 1.0) / (self.a2 * self.gamma2);
        let p2 = q - p1;
        debug_assert!(p1 >= -1e-12 && p2 >= p1 - 1e-12);
        Ok((p1, p2))
    }

    /// Achieved rates in bit/s for a given power split.
    ///
    /// The stronger user cancels the weaker user's signal before decoding;
    /// the weaker user treats the stronger user's power as interference.
    pub fn rates(&self, p1: f64, p2: f64, b_c_hz: f64) -> (f64, f64) {
        (
            rate_general(self.gamma1, p1, &[], b_c_hz),
            rate_general(self.gamma2, p2, &[p1], b_c_hz),
        )
    }

    /// Waterfilling offset of this channel: budget is `b_c / lambda` minus
    /// this, clamped from below at [`ChannelPair::min_budget`].
    fn level_offset(&self) -> f64 {
        self.a2 / self.gamma1 - (self.a2 - 1.0) / self.gamma2
    }
}

/// Shannon rate in bit/s with interference from later-decoded signals.
///
/// `interferers` lists the powers whose signals the user cannot cancel.
pub fn rate_general(cnr: f64, own_power: f64, interferers: &[f64], b_c_hz: f64) -> f64 {
    let interference: f64 = interferers.iter().sum();
    b_c_hz * (1.0 + own_power * cnr / (1.0 + interference * cnr)).log2()
}

/// Budgets and multiplier produced by [`solve_budgets`].
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSolution {
    /// Power budget per channel in watts.
    pub budgets: Vec<f64>,
    /// Waterfilling multiplier at convergence.
    pub lambda: f64,
}

/// Full allocation for an assignment: budgets, per-user powers and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// The pairs the allocation was computed for, one per channel.
    pub pairs: Vec<ChannelPair>,
    /// Power budget per channel in watts.
    pub budgets: Vec<f64>,
    /// Power of the stronger user per channel.
    pub p1: Vec<f64>,
    /// Power of the weaker user per channel.
    pub p2: Vec<f64>,
    /// Waterfilling multiplier at convergence.
    pub lambda: f64,
    /// (stronger, weaker) rates per channel in bit/s.
    pub rates: Vec<(f64, f64)>,
    /// Network sum rate in bit/s.
    pub sum_rate: f64,
}

impl PowerAllocation {
    /// CSV dump with one row per channel plus a `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,q_w,p1_w,p2_w,r1_bps,r2_bps,pair_rate_bps\n");
        let mut q_total = 0.0;
        let mut p1_total = 0.0;
        let mut p2_total = 0.0;
        let mut r1_total = 0.0;
        let mut r2_total = 0.0;
        for k in 0..self.pairs.len() {
            let (r1, r2) = self.rates[k];
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                k,
                self.budgets[k],
                self.p1[k],
                self.p2[k],
                r1,
                r2,
                r1 + r2
            )
            .expect("string write");
            q_total += self.budgets[k];
            p1_total += self.p1[k];
            p2_total += self.p2[k];
            r1_total += r1;
            r2_total += r2;
        }
        writeln!(
            out,
            "total,{},{},{},{},{},{}",
            q_total,
            p1_total,
            p2_total,
            r1_total,
            r2_total,
            self.sum_rate
        )
        .expect("string write");
        out
    }
}

/// Per-channel budgets for a fixed multiplier, clamped at the minimums.
pub fn budgets_for_lambda(pairs: &[ChannelPair], lambda: f64, b_c_hz: f64) -> Vec<f64> {
    pairs
        .iter()
        .map(|pair| (b_c_hz / lambda - pair.level_offset()).max(pair.min_budget()))
        .collect()
}

const BISECT_MAX_ITERS: usize = 200;

/// Finds the multiplier whose budgets spend exactly `p_t` watts.
///
/// Bisection runs on the monotone map from lambda to total spend, stopping
/// when the residual is within `1e-9 * p_t`. The initial bracket is
/// guaranteed: the low end overshoots the budget by construction and the
/// high end is doubled until everything is clamped at the minimums.
pub fn solve_budgets(
    pairs: &[ChannelPair],
    p_t: f64,
    b_c_hz: f64,
) -> Result<BudgetSolution, JraError> {
    assert!(!pairs.is_empty(), "need at least one channel");
    assert!(p_t > 0.0 && b_c_hz > 0.0);

    let required: f64 = pairs.iter().map(|p| p.min_budget()).sum();
    if required > p_t {
        return Err(JraError::Infeasible { required_w: required, p_t_w: p_t });
    }

    let total_for = |lambda: f64| -> f64 {
        budgets_for_lambda(pairs, lambda, b_c_hz).iter().sum()
    };

    let offset_slack: f64 = pairs.iter().map(|p| p.level_offset().max(0.0)).sum();
    let lam_low = b_c_hz / (p_t + offset_slack);
    debug_assert!(total_for(lam_low) >= p_t);

    let mut lam_high = lam_low;
    let mut expansions = 0;
    while total_for(lam_high) > p_t {
        lam_high *= 2.0;
        expansions += 1;
        if expansions > BISECT_MAX_ITERS {
            return Err(JraError::NoConvergence { residual_w: total_for(lam_high) - p_t });
        }
    }

    let tol = 1e-9 * p_t;
    let mut lo = lam_low;
    let mut hi = lam_high;
    let mut lambda = lam_low;
    let mut residual = total_for(lambda) - p_t;
    for _ in 0..BISECT_MAX_ITERS {
        if residual.abs() <= tol {
            return Ok(finish_budgets(pairs, lambda, p_t, b_c_hz));
        }
        lambda = 0.5 * (lo + hi);
        residual = total_for(lambda) - p_t;
        if residual > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    if residual.abs() <= tol {
        return Ok(finish_budgets(pairs, lambda, p_t, b_c_hz));
    }
    Err(JraError::NoConvergence { residual_w: residual })
}

/// Folds the bisection leftover into the roomiest unclamped channel so the
/// budgets sum to the target exactly. The shift is at most the bisection
/// tolerance, far under the water-level precision anyone reads back.
fn finish_budgets(pairs: &[ChannelPair], lambda: f64, p_t: f64, b_c_hz: f64) -> BudgetSolution {
    let mut budgets = budgets_for_lambda(pairs, lambda, b_c_hz);
    let spent: f64 = budgets.iter().sum();
    let leftover = p_t - spent;
    let roomiest = (0..pairs.len())
        .filter(|&k| budgets[k] > pairs[k].min_budget())
        .max_by(|&a, &b| {
            let room_a = budgets[a] - pairs[a].min_budget();
            let room_b = budgets[b] - pairs[b].min_budget();
            room_a.total_cmp(&room_b)
        });
    if let Some(k) = roomiest {
        if budgets[k] + leftover >= pairs[k].min_budget() {
            budgets[k] += leftover;
        }
    }
    BudgetSolution { budgets, lambda }
}

/// Optimal allocation for explicit pairs under a total power budget.
pub fn allocate(pairs: &[ChannelPair], p_t: f64, b_c_hz: f64) -> Result<PowerAllocation, JraError> {
    let solution = solve_budgets(pairs, p_t, b_c_hz)?;
    let mut p1 = Vec::with_capacity(pairs.len());
    let mut p2 = Vec::with_capacity(pairs.len());
    let mut rates = Vec::with_capacity(pairs.len());
    let mut sum_rate = 0.0;
    for (pair, &q) in pairs.iter().zip(&solution.budgets) {
        let (a, b) = pair.split_budget(q)?;
        let (r1, r2) = pair.rates(a, b, b_c_hz);
        p1.push(a);
        p2.push(b);
        rates.push((r1, r2));
        sum_rate += r1 + r2;
    }
    Ok(PowerAllocation {
        pairs: pairs.to_vec(),
        budgets: solution.budgets,
        p1,
        p2,
        lambda: solution.lambda,
        rates,
        sum_rate,
    })
}

/// Builds pairs from a per-user channel assignment and allocates power.
///
/// `assignment[user]` is the channel index; every channel must hold exactly
/// two users. All users share the config's minimum spectral efficiency.
pub fn evaluate_assignment(
    instance: &NetworkInstance,
    assignment: &[usize],
    config: &EnvConfig,
) -> Result<PowerAllocation, JraError> {
    let pairs = pairs_from_assignment(instance, assignment, config.r_min_bps_hz)?;
    allocate(&pairs, config.p_t_w, instance.b_c_hz)
}

/// Validates an assignment and groups users into per-channel pairs.
pub fn pairs_from_assignment(
    instance: &NetworkInstance,
    assignment: &[usize],
    r_min_bps_hz: f64,
) -> Result<Vec<ChannelPair>, JraError> {
    let n = instance.n_users;
    let k = instance.n_channels;
    if assignment.len() != n {
        return Err(JraError::MalformedAssignment(format!(
            "{} entries for {} users",
            assignment.len(),
            n
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (user, &channel) in assignment.iter().enumerate() {
        if channel >= k {
            return Err(JraError::MalformedAssignment(format!(
                "user {} on channel {} but only {} channels exist",
                user, channel, k
            )));
        }
        members[channel].push(user);
    }
    let a = (2f64).powf(r_min_bps_hz);
    let mut pairs = Vec::with_capacity(k);
    for (channel, users) in members.iter().enumerate() {
        if users.len() != 2 {
            return Err(JraError::MalformedAssignment(format!(
                "channel {} holds {} users instead of 2",
                channel,
                users.len()
            )));
        }
        pairs.push(ChannelPair::new(
            users[0],
            instance.cnr_at(users[0], channel),
            a,
            users[1],
            instance.cnr_at(users[1], channel),
            a,
        )?);
    }
    Ok(pairs)
}
