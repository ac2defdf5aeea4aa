//! Exhaustive search over channel assignments.
//!
//! Enumerates every way to place N users onto N/2 labeled channels with two
//! users each, runs the power allocator on each, and records the best and
//! worst achievable sum rates. Used as ground truth when grading a learned
//! assignment policy.

use crate::env::{EnvConfig, NetworkInstance};
use crate::jra::{self, JraError};

/// Default limit on how many assignments a search may evaluate.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

/// Failure modes of the exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// The assignment space is larger than the evaluation cap.
    BudgetExceeded { count: u128, cap: u64 },
    /// No assignment could satisfy the minimum rates under the power budget.
    AllInfeasible,
    /// The assignment count does not fit in a u128.
    Overflow,
    /// The allocator failed for a reason other than infeasibility.
    Solver(JraError),
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::BudgetExceeded { count, cap } => {
                write!(f, "{} assignments exceed the search cap of {}", count, cap)
            }
            OracleError::AllInfeasible => write!(f, "every assignment is infeasible"),
            OracleError::Overflow => write!(f, "assignment count overflows"),
            OracleError::Solver(e) => write!(f, "allocator failed: {}", e),
        }
    }
}

impl std::error::Error for OracleError {}

/// Number of ways to pair `n_users` onto `n_users / 2` labeled channels.
///
/// Channel by channel, the count is the product of `C(m, 2)` over
/// `m = n, n-2, ..., 2`.
pub fn assignment_count(n_users: usize) -> Result<u128, OracleError> {
    assert!(n_users >= 2 && n_users % 2 == 0, "need an even user count");
    let mut count: u128 = 1;
    let mut m = n_users as u128;
    while m >= 2 {
        count = count
            .checked_mul(m * (m - 1) / 2)
            .ok_or(OracleError::Overflow)?;
        m -= 2;
    }
    Ok(count)
}

struct Level {
    /// Users still unassigned when this channel was reached, ascending.
    avail: Vec<usize>,
    /// Chosen pair is `(avail[i], avail[j])` with `i < j`.
    i: usize,
    j: usize,
}

impl Level {
    fn fresh(avail: Vec<usize>) -> Self {
        Level { avail, i: 0, j: 1 }
    }

    /// Users left over after removing the chosen pair.
    fn remaining(&self) -> Vec<usize> {
        self.avail
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != self.i && *idx != self.j)
            .map(|(_, &u)| u)
            .collect()
    }

    /// Steps to the next pair choice, false once all pairs are used up.
    fn advance(&mut self) -> bool {
        self.j += 1;
        if self.j < self.avail.len() {
            return true;
        }
        self.i += 1;
        self.j = self.i + 1;
        self.j < self.avail.len()
    }
}

/// Streams every assignment as a per-user channel vector.
///
/// Works like an odometer over per-channel pair choices, so memory stays at
/// O(N^2) no matter how large the assignment space is.
pub struct AssignmentIter {
    n_users: usize,
    n_channels: usize,
    levels: Vec<Level>,
    primed: bool,
    exhausted: bool,
}

/// Iterator over all assignments of `n_users` users (must be even, >= 2).
pub fn enumerate_assignments(n_users: usize) -> AssignmentIter {
    assert!(n_users >= 2 && n_users % 2 == 0, "need an even user count");
    AssignmentIter {
        n_users,
        n_channels: n_users / 2,
        levels: Vec::new(),
        primed: false,
        exhausted: false,
    }
}

impl AssignmentIter {
    fn fill_levels(&mut self) {
        while self.levels.len() < self.n_channels {
            let avail = match self.levels.last() {
                Some(level) => level.remaining(),
                None => (0..self.n_users).collect(),
            };
            self.levels.push(Level::fresh(avail));
        }
    }

    fn current(&self) -> Vec<usize> {
        let mut assignment = vec![0; self.n_users];
        for (channel, level) in self.levels.iter().enumerate() {
            assignment[level.avail[level.i]] = channel;
            assignment[level.avail[level.j]] = channel;
        }
        assignment
    }
}

impl Iterator for AssignmentIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.exhausted {
            return None;
        }
        if !self.primed {
            self.primed = true;
            self.fill_levels();
            return Some(self.current());
        }
        let mut depth = self.levels.len();
        loop {
            if depth == 0 {
                self.exhausted = true;
                return None;
            }
            depth -= 1;
            if self.levels[depth].advance() {
                break;
            }
        }
        self.levels.truncate(depth + 1);
        self.fill_levels();
        Some(self.current())
    }
}

/// Best and worst assignments found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Highest feasible sum rate in bit/s.
    pub r_max: f64,
    /// Lowest feasible sum rate in bit/s.
    pub r_min: f64,
    pub best_assignment: Vec<usize>,
    pub worst_assignment: Vec<usize>,
    /// Assignments whose allocation succeeded.
    pub n_evaluated: u64,
    /// Assignments rejected as infeasible.
    pub n_infeasible: u64,
}

/// Exhaustive search with the default evaluation cap.
pub fn search(instance: &NetworkInstance, config: &EnvConfig) -> Result<SearchResult, OracleError> {
    search_with_cap(instance, config, DEFAULT_SEARCH_CAP)
}

/// Exhaustive search, refusing to start if the space exceeds `cap`.
///
/// Rate ties are broken toward the lexicographically smallest assignment,
/// for both the best and the worst slot, so results are reproducible.
pub fn search_with_cap(
    instance: &NetworkInstance,
    config: &EnvConfig,
    cap: u64,
) -> Result<SearchResult, OracleError> {
    let count = assignment_count(instance.n_users)?;
    if count > cap as u128 {
        return Err(OracleError::BudgetExceeded { count, cap });
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut worst: Option<(f64, Vec<usize>)> = None;
    let mut n_evaluated = 0u64;
    let mut n_infeasible = 0u64;

    for assignment in enumerate_assignments(instance.n_users) {
        match jra::evaluate_assignment(instance, &assignment, config) {
            Ok(alloc) => {
                n_evaluated += 1;
                let rate = alloc.sum_rate;
                let better = match &best {
                    None => true,
                    Some((r, a)) => rate > *r || (rate == *r && assignment < *a),
                };
                if better {
                    best = Some((rate, assignment.clone()));
                }
                let worse = match &worst {
                    None => true,
                    Some((r, a)) => rate < *r || (rate == *r && assignment < *a),
                };
                if worse {
                    worst = Some((rate, assignment));
                }
            }
            Err(JraError::Infeasible { .. }) => n_infeasible += 1,
            Err(other) => return Err(OracleError::Solver(other)),
        }
    }

    match (best, worst) {
        (Some((r_max, best_assignment)), Some((r_min, worst_assignment))) => Ok(SearchResult {
            r_max,
            r_min,
            best_assignment,
            worst_assignment,
            n_evaluated,
            n_infeasible,
        }),
        _ => Err(OracleError::AllInfeasible),
    }
}
