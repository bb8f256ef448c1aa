use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    grid_half_width, make_solution, Axis, ConstraintSet, ObjectiveSpec, OptimError, Solution,
    SolutionSet, SolveOptions,
};
use crate::math;
use crate::sim::ObservationRound;

/// Objective values within this of the best are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Work done by a grid search.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GridStats {
    /// Partial assignments visited, over all passes.
    pub nodes: u64,
    /// Complete assignments reached in the final pass.
    pub leaves: u64,
    /// Bound relaxation passes.
    pub passes: usize,
    /// Values each unknown can take.
    pub values_per_coordinate: usize,
    pub unknowns: usize,
}

impl GridStats {
    /// log10 of the size of the unpruned grid product.
    pub fn log10_product(&self) -> f64 {
        self.unknowns as f64 * libm::log10(self.values_per_coordinate as f64)
    }
}

/// Which objective terms become fully known once unknown `i` is assigned.
#[derive(Clone, Copy)]
enum Ready {
    Distance(usize),
    Heading(usize),
}

struct Search<'a> {
    spec: &'a ObjectiveSpec,
    constraints: &'a ConstraintSet,
    grid: f64,
    k_min: i64,
    k_max: i64,
    by_last_constraint: Vec<Vec<usize>>,
    by_last_term: Vec<Vec<Ready>>,
    constant: f64,
    budget: u64,
    nodes: u64,
    leaves: u64,
    limit: f64,
    best: f64,
    found: Vec<(f64, Vec<f64>)>,
    vals: Vec<f64>,
}

impl Search<'_> {
    fn term(&self, r: Ready, v: &[f64]) -> f64 {
        match r {
            Ready::Distance(k) => {
                let e = self.spec.distance_residual(v, &self.spec.distance_terms[k]);
                self.spec.w_distance * e * e
            }
            Ready::Heading(k) => self
                .spec
                .heading_residual(v, &self.spec.heading_terms[k])
                .map_or(0.0, |e| self.spec.w_heading * e * e),
        }
    }

    fn cutoff(&self) -> f64 {
        self.limit.min(self.best + TIE_TOLERANCE)
    }

    /// Grid index range for unknown `i` allowed by the constraints that
    /// it completes, widened by one so rounding never drops a value; the
    /// exact check happens per value.
    fn range(&self, i: usize) -> (i64, i64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &ci in &self.by_last_constraint[i] {
            let c = &self.constraints.constraints[ci];
            let mut own = 0.0;
            let mut rest = 0.0;
            for &(j, coef) in &c.terms {
                if j == i {
                    own += coef;
                } else {
                    rest += coef * self.vals[j];
                }
            }
            let room = c.bound + self.constraints.tau - rest;
            if own > 0.0 {
                hi = hi.min(room / own);
            } else if own < 0.0 {
                lo = lo.max(room / own);
            }
        }
        let k_lo = if lo.is_finite() {
            (math::floor(lo / self.grid) as i64 - 1).max(self.k_min)
        } else {
            self.k_min
        };
        let k_hi = if hi.is_finite() {
            (math::floor(hi / self.grid) as i64 + 1).min(self.k_max)
        } else {
            self.k_max
        };
        (k_lo, k_hi)
    }

    fn feasible(&self, i: usize) -> bool {
        self.by_last_constraint[i].iter().all(|&ci| {
            let c = &self.constraints.constraints[ci];
            c.lhs(&self.vals) - c.bound <= self.constraints.tau
        })
    }

    fn descend(&mut self, i: usize, partial: f64) -> Result<(), OptimError> {
        let (k_lo, k_hi) = self.range(i);
        for k in k_lo..=k_hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(OptimError::BudgetExceeded {
                    budget: self.budget,
                });
            }
            self.vals[i] = k as f64 * self.grid;
            if !self.feasible(i) {
                continue;
            }
            let mut value = partial;
            for &r in &self.by_last_term[i] {
                value += self.term(r, &self.vals);
            }
            if value > self.cutoff() {
                continue;
            }
            if i + 1 == self.vals.len() {
                self.leaves += 1;
                if value < self.best {
                    self.best = value;
                    let keep = self.best + TIE_TOLERANCE;
                    self.found.retain(|(f, _)| *f <= keep);
                }
                self.found.push((value, self.vals.clone()));
            } else {
                self.descend(i + 1, value)?;
            }
        }
        Ok(())
    }
}

/// Exact global minimization over the coordinate grid.
///
/// Every unknown takes values `k·grid` in `[-radius, radius)`. Unknowns are
/// assigned in layout order; a constraint is enforced (within `tau`) as
/// soon as its last unknown is assigned, and since every objective term is
/// non-negative, the sum of fully assigned terms bounds the objective of
/// every completion. The search runs with a bound that starts at the
/// acceptance level and grows a hundredfold per pass until some complete
/// assignment fits under it; all assignments within [`TIE_TOLERANCE`] of
/// the best are returned.
pub(crate) fn search(
    constraints: &ConstraintSet,
    spec: &ObjectiveSpec,
    opts: &SolveOptions,
    rounds: &[ObservationRound],
) -> Result<(SolutionSet, GridStats), OptimError> {
    opts.validate()?;
    let layout = &spec.layout;
    let n = layout.len();
    let half = grid_half_width(opts.radius, opts.grid);
    let mut by_last_constraint = vec![Vec::new(); n];
    for (ci, c) in constraints.constraints.iter().enumerate() {
        by_last_constraint[c.last_index()].push(ci);
    }
    let mut by_last_term: Vec<Vec<Ready>> = vec![Vec::new(); n];
    let mut constant_terms = Vec::new();
    let last_of = |coords: &[(usize, usize)]| {
        coords
            .iter()
            .flat_map(|&(h, m)| [layout.index(h, m, Axis::X), layout.index(h, m, Axis::Y)])
            .flatten()
            .max()
    };
    for (k, t) in spec.distance_terms.iter().enumerate() {
        match last_of(&[(t.step, t.a), (t.step, t.b)]) {
            Some(i) => by_last_term[i].push(Ready::Distance(k)),
            None => constant_terms.push(Ready::Distance(k)),
        }
    }
    for (k, t) in spec.heading_terms.iter().enumerate() {
        match last_of(&[(t.step, t.member), (t.step + 1, t.member)]) {
            Some(i) => by_last_term[i].push(Ready::Heading(k)),
            None => constant_terms.push(Ready::Heading(k)),
        }
    }
    let mut s = Search {
        spec,
        constraints,
        grid: opts.grid,
        k_min: -half,
        k_max: half - 1,
        by_last_constraint,
        by_last_term,
        constant: 0.0,
        budget: opts.node_budget,
        nodes: 0,
        leaves: 0,
        limit: opts.accept_rms * opts.accept_rms * spec.term_count().max(1) as f64,
        best: f64::INFINITY,
        found: Vec::new(),
        vals: vec![0.0; n],
    };
    s.constant = constant_terms.iter().map(|&r| s.term(r, &[])).sum();
    let mut passes = 0;
    loop {
        passes += 1;
        s.best = f64::INFINITY;
        s.found.clear();
        s.leaves = 0;
        if n == 0 {
            if s.constant <= s.limit {
                s.found.push((s.constant, Vec::new()));
            }
        } else {
            s.descend(0, s.constant)?;
        }
        if !s.found.is_empty() || s.limit == f64::INFINITY {
            break;
        }
        s.limit = if s.limit > 1e12 {
            f64::INFINITY
        } else {
            s.limit * 100.0
        };
    }
    let stats = GridStats {
        nodes: s.nodes,
        leaves: s.leaves,
        passes,
        values_per_coordinate: (2 * half) as usize,
        unknowns: n,
    };
    if s.found.is_empty() {
        return Err(OptimError::NoSolutionFound { starts: 0 });
    }
    let solutions: Vec<Solution> = s
        .found
        .into_iter()
        .map(|(_, v)| make_solution(spec, constraints, v))
        .collect();
    Ok((SolutionSet::assemble(spec, rounds, solutions, opts), stats))
}

/// Pruned exhaustive search on the `opts.grid` lattice; see the module
/// documentation of [`super`] for the variable order.
pub fn solve_discrete_bruteforce(
    constraints: &ConstraintSet,
    spec: &ObjectiveSpec,
    opts: &SolveOptions,
    rounds: &[ObservationRound],
) -> Result<(SolutionSet, GridStats), OptimError> {
    search(constraints, spec, opts, rounds)
}
