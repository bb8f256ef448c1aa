use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    approx_near_pair, build_constraints, grid, make_solution, max_gap, planar_distance, Axis,
    ConstraintSet, ObjectiveSpec, OptimError, Solution, SolutionSet, SolveMode, SolveOptions,
};
use crate::geom::Position2;
use crate::math;
use crate::sim::{ObservationRound, STATIONARY_THRESHOLD};

const PENALTY_SCHEDULE: [f64; 4] = [1.0, 1e2, 1e4, 1e6];

/// One row of the stacked residual vector with its sparse gradient.
struct Row {
    value: f64,
    grad: [(usize, f64); 4],
    len: usize,
}

impl Row {
    fn new(value: f64) -> Self {
        Self {
            value,
            grad: [(0, 0.0); 4],
            len: 0,
        }
    }

    fn add(&mut self, index: Option<usize>, g: f64) {
        if let Some(i) = index {
            self.grad[self.len] = (i, g);
            self.len += 1;
        }
    }
}

struct Penalized<'a> {
    spec: &'a ObjectiveSpec,
    constraints: &'a ConstraintSet,
    mu: f64,
}

impl Penalized<'_> {
    fn rows(&self, v: &[f64], out: &mut Vec<Row>) {
        out.clear();
        let layout = &self.spec.layout;
        let wd = math::sqrt(self.spec.w_distance);
        let wa = math::sqrt(self.spec.w_heading);
        for t in &self.spec.distance_terms {
            let pa = layout.position(v, t.step, t.a);
            let pb = layout.position(v, t.step, t.b);
            let d = pa - pb;
            let n = d.norm();
            let mut row = Row::new(wd * (n - t.measured));
            if n > 0.0 {
                let (gx, gy) = (wd * d.x / n, wd * d.y / n);
                row.add(layout.index(t.step, t.a, Axis::X), gx);
                row.add(layout.index(t.step, t.a, Axis::Y), gy);
                row.add(layout.index(t.step, t.b, Axis::X), -gx);
                row.add(layout.index(t.step, t.b, Axis::Y), -gy);
            }
            out.push(row);
        }
        for t in &self.spec.heading_terms {
            let p0 = layout.position(v, t.step, t.member);
            let p1 = layout.position(v, t.step + 1, t.member);
            let d = p1 - p0;
            let n2 = d.x * d.x + d.y * d.y;
            if math::sqrt(n2) < STATIONARY_THRESHOLD {
                continue;
            }
            let r = self.spec.heading_residual(v, t).unwrap_or(0.0);
            let mut row = Row::new(wa * r);
            let (gx, gy) = (-wa * d.y / n2, wa * d.x / n2);
            row.add(layout.index(t.step + 1, t.member, Axis::X), gx);
            row.add(layout.index(t.step + 1, t.member, Axis::Y), gy);
            row.add(layout.index(t.step, t.member, Axis::X), -gx);
            row.add(layout.index(t.step, t.member, Axis::Y), -gy);
            out.push(row);
        }
        let sm = math::sqrt(self.mu);
        for c in &self.constraints.constraints {
            let excess = c.lhs(v) - c.bound - self.constraints.tau;
            if excess > 0.0 {
                let mut row = Row::new(sm * excess);
                for &(i, coef) in c.terms.iter().take(4) {
                    row.add(Some(i), sm * coef);
                }
                out.push(row);
            }
        }
    }

    fn cost(&self, v: &[f64], scratch: &mut Vec<Row>) -> f64 {
        self.rows(v, scratch);
        scratch.iter().map(|r| r.value * r.value).sum()
    }
}

/// Levenberg-Marquardt on the penalized least-squares problem.
fn levenberg_marquardt(model: &Penalized<'_>, mut v: Vec<f64>, max_iter: usize) -> Vec<f64> {
    let n = v.len();
    if n == 0 {
        return v;
    }
    let mut rows = Vec::new();
    let mut scratch = Vec::new();
    let mut cost = model.cost(&v, &mut rows);
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        model.rows(&v, &mut rows);
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut jtr = DVector::<f64>::zeros(n);
        for r in &rows {
            for a in 0..r.len {
                let (i, gi) = r.grad[a];
                jtr[i] += gi * r.value;
                for b in 0..r.len {
                    let (j, gj) = r.grad[b];
                    jtj[(i, j)] += gi * gj;
                }
            }
        }
        if jtr.amax() < 1e-15 {
            break;
        }
        let mut accepted = false;
        while lambda < 1e14 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-9);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = model.cost(&trial, &mut scratch);
            if trial_cost < cost {
                let gain = cost - trial_cost;
                let step_norm = step.amax();
                v = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = gain > 1e-18 * (1.0 + cost) || step_norm > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    v
}

/// Start built along the measured headings.
///
/// First-step members are placed on their origin circles at a rotation
/// `theta`, later ones by circle intersection with the origin and the
/// first member on a random side, so the first round's distances hold.
/// Each later step moves every member along its measured heading, with
/// lengths fitted to that step's distances by a small damped least-squares
/// solve in the step lengths.
fn heading_start(
    spec: &ObjectiveSpec,
    rounds: &[ObservationRound],
    opts: &SolveOptions,
    theta: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Position2>> {
    let layout = &spec.layout;
    let ids = layout.members();
    let first = &rounds[0];
    let mut row: Vec<Position2> = Vec::with_capacity(ids.len());
    for (m, &id) in ids.iter().enumerate() {
        let p = if let Some(pin) = pinned(layout, 0, m) {
            pin
        } else if m == 0 {
            Position2::ORIGIN
        } else {
            let r0 = planar_distance(first, ids[0], id);
            let r1 = planar_distance(first, ids[1], id);
            let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            match (m, r0, r1) {
                (1, Some(r), _) => Position2::new(r * math::cos(theta), r * math::sin(theta)),
                (_, Some(a), Some(b)) => intersect(row[0], a, row[1], b, side)
                    .unwrap_or_else(|| on_circle(row[0], a, rng)),
                (_, Some(a), None) => on_circle(row[0], a, rng),
                _ => on_circle(row[0], opts.radius * math::sqrt(rng.gen::<f64>()), rng),
            }
        };
        row.push(p);
    }
    let mut table = alloc::vec![row];
    while table.len() < layout.steps() {
        extend_table(spec, rounds, opts, &mut table, rng);
    }
    table
}

/// Appends the next step to `table`, moving every member along its
/// measured heading by lengths fitted to that step's distances.
fn extend_table(
    spec: &ObjectiveSpec,
    rounds: &[ObservationRound],
    opts: &SolveOptions,
    table: &mut Vec<Vec<Position2>>,
    rng: &mut ChaCha8Rng,
) {
    let layout = &spec.layout;
    let ids = layout.members();
    let h = table.len();
    let span = rounds[h].timestamp.seconds() - rounds[h - 1].timestamp.seconds();
    let reach = opts.v_max * span;
    let prev = table[h - 1].clone();
    let units: Vec<Position2> = ids
        .iter()
        .map(|&id| rounds[h - 1].report(id).heading.unit())
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 0..STEP_TRIES {
        let init: Vec<f64> = (0..ids.len())
            .map(|_| {
                if attempt == 0 {
                    0.5 * reach
                } else {
                    reach * rng.gen::<f64>()
                }
            })
            .collect();
        let (cost, s) = fit_step(&prev, &units, &rounds[h], ids, init, reach);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, s));
        }
    }
    let s = best.map(|b| b.1).unwrap_or_default();
    let row = (0..ids.len())
        .map(|m| pinned(layout, h, m).unwrap_or(prev[m] + units[m] * s[m]))
        .collect();
    table.push(row);
}

const STEP_TRIES: usize = 3;

fn pinned(layout: &super::VariableLayout, step: usize, member: usize) -> Option<Position2> {
    match (
        layout.index(step, member, Axis::X),
        layout.index(step, member, Axis::Y),
    ) {
        (None, None) => Some(layout.position(&[], step, member)),
        _ => None,
    }
}

fn on_circle(c: Position2, r: f64, rng: &mut ChaCha8Rng) -> Position2 {
    let a = rng.gen_range(-PI..PI);
    c + Position2::new(r * math::cos(a), r * math::sin(a))
}

/// Intersection of two circles; `side` picks one of the two points.
fn intersect(c0: Position2, r0: f64, c1: Position2, r1: f64, side: f64) -> Option<Position2> {
    let d = c1 - c0;
    let l = d.norm();
    if l == 0.0 {
        return None;
    }
    let a = (r0 * r0 - r1 * r1 + l * l) / (2.0 * l);
    let h2 = r0 * r0 - a * a;
    let h = math::sqrt(h2.max(0.0));
    let u = d * (1.0 / l);
    let n = Position2::new(-u.y, u.x);
    Some(c0 + u * a + n * (side * h))
}

/// Step lengths along `units` from `prev` that best reproduce the round's
/// planar distances, kept within `[0, reach]`.
fn fit_step(
    prev: &[Position2],
    units: &[Position2],
    round: &ObservationRound,
    ids: &[crate::geom::RobotId],
    mut s: Vec<f64>,
    reach: f64,
) -> (f64, Vec<f64>) {
    let m = ids.len();
    let mut pairs = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            if let Some(d) = planar_distance(round, ids[a], ids[b]) {
                pairs.push((a, b, d));
            }
        }
    }
    let eval = |s: &[f64]| -> f64 {
        pairs
            .iter()
            .map(|&(a, b, d)| {
                let e = (prev[a] + units[a] * s[a]).distance(prev[b] + units[b] * s[b]) - d;
                e * e
            })
            .sum()
    };
    let mut cost = eval(&s);
    let mut lambda = 1e-3;
    for _ in 0..STEP_ITERS {
        let mut jtj = DMatrix::<f64>::zeros(m, m);
        let mut jtr = DVector::<f64>::zeros(m);
        for &(a, b, d) in &pairs {
            let diff = (prev[a] + units[a] * s[a]) - (prev[b] + units[b] * s[b]);
            let n = diff.norm();
            if n == 0.0 {
                continue;
            }
            let r = n - d;
            let ga = (diff.x * units[a].x + diff.y * units[a].y) / n;
            let gb = -(diff.x * units[b].x + diff.y * units[b].y) / n;
            jtr[a] += ga * r;
            jtr[b] += gb * r;
            jtj[(a, a)] += ga * ga;
            jtj[(b, b)] += gb * gb;
            jtj[(a, b)] += ga * gb;
            jtj[(b, a)] += ga * gb;
        }
        let mut improved = false;
        while lambda < 1e10 {
            let mut damped = jtj.clone();
            for i in 0..m {
                damped[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let trial: Vec<f64> = s
                .iter()
                .zip(step.iter())
                .map(|(x, dx)| (x + dx).clamp(0.0, reach))
                .collect();
            let c = eval(&trial);
            if c < cost {
                improved = cost - c > 1e-24;
                s = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (cost, s)
}

const STEP_ITERS: usize = 50;

/// Refines `v` under the increasing penalty weights.
fn polish(
    spec: &ObjectiveSpec,
    constraints: &ConstraintSet,
    mut v: Vec<f64>,
    max_iter: usize,
) -> Vec<f64> {
    for mu in PENALTY_SCHEDULE {
        let model = Penalized {
            spec,
            constraints,
            mu,
        };
        v = levenberg_marquardt(&model, v, max_iter);
    }
    v
}

/// Whether a refined point counts as a solution of the problem.
fn accepted(
    spec: &ObjectiveSpec,
    constraints: &ConstraintSet,
    opts: &SolveOptions,
    v: &[f64],
) -> Option<Solution> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let threshold = opts.accept_rms * opts.accept_rms * spec.term_count().max(1) as f64;
    let violation_cap = constraints.tau * constraints.len().max(1) as f64;
    let s = make_solution(spec, constraints, v.to_vec());
    (s.objective <= threshold && s.violation <= violation_cap).then_some(s)
}

/// Heading-consistent starts grown one step at a time.
///
/// Solutions accepted on the first `k` rounds are extended by one step and
/// refined on the first `k + 1`; fresh starts top the pool up to `count`.
/// Returned tables cover every step of `spec`.
fn continuation_starts(
    spec: &ObjectiveSpec,
    opts: &SolveOptions,
    rounds: &[ObservationRound],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Vec<Position2>>> {
    let ids = spec.layout.members().to_vec();
    let spread = 0.25 * opts.rho;
    let mut pool: Vec<Vec<Vec<Position2>>> = Vec::new();
    for k in 0..spec.layout.steps() {
        let prefix = &rounds[..=k];
        let cs = build_constraints(prefix, &ids, opts);
        let sp = ObjectiveSpec::new(prefix, &cs.layout, opts);
        let mut candidates: Vec<Vec<Vec<Position2>>> = core::mem::take(&mut pool);
        for t in candidates.iter_mut() {
            extend_table(&sp, prefix, opts, t, rng);
        }
        let fresh = count.saturating_sub(candidates.len());
        for j in 0..fresh {
            let slot = 2.0 * PI / fresh as f64;
            let theta = -PI + slot * (j as f64 + rng.gen::<f64>());
            candidates.push(heading_start(&sp, prefix, opts, theta, rng));
        }
        let last = k + 1 == spec.layout.steps();
        for t in candidates {
            let v = polish(&sp, &cs, sp.layout.flatten(&t), opts.max_iter);
            let table = sp.layout.positions(&v);
            let keep = accepted(&sp, &cs, opts, &v).is_some()
                && pool.iter().all(|p| max_gap(p, &table) > spread);
            if keep || (last && v.iter().all(|x| x.is_finite()) && pool.len() < count) {
                pool.push(table);
            }
            if pool.len() >= count {
                break;
            }
        }
        // Walk along the solution family: jittered copies of accepted
        // tables fall back onto it at new points.
        let mut attempts = 0;
        while pool.len() < count && !pool.is_empty() && attempts < 2 * count {
            attempts += 1;
            let base = &pool[rng.gen_range(0..pool.len())];
            let scale = opts.rho * rng.gen::<f64>();
            let mut v = sp.layout.flatten(base);
            for x in v.iter_mut() {
                *x += scale * rng.gen_range(-1.0..1.0);
            }
            let v = polish(&sp, &cs, v, opts.max_iter);
            let table = sp.layout.positions(&v);
            if accepted(&sp, &cs, opts, &v).is_some()
                && pool.iter().all(|p| max_gap(p, &table) > spread)
            {
                pool.push(table);
            }
        }
    }
    pool
}

/// Multi-start penalized least squares.
///
/// Starts come from the coarse grid search (hybrid mode), the close-pair
/// anchor when one exists, and heading-consistent samples grown one round
/// at a time. Every start is refined under an increasing penalty weight;
/// minima whose objective is at most `accept_rms²` per residual term and
/// whose total violation is at most `tau` per constraint are clustered
/// with radius `rho`.
pub fn solve_continuous(
    constraints: &ConstraintSet,
    spec: &ObjectiveSpec,
    opts: &SolveOptions,
    rounds: &[ObservationRound],
) -> Result<SolutionSet, OptimError> {
    opts.validate()?;
    if rounds.is_empty() || spec.layout.members().is_empty() {
        return Err(OptimError::EmptyProblem);
    }
    let layout = &spec.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = Vec::new();

    if opts.mode == SolveMode::Hybrid {
        let coarse = SolveOptions {
            grid: opts.coarse_grid,
            node_budget: (opts.node_budget / 4).max(1),
            ..opts.clone()
        };
        if let Ok((set, _)) = grid::search(constraints, spec, &coarse, rounds) {
            starts.extend(
                set.solutions
                    .into_iter()
                    .take(opts.multistart / 2)
                    .map(|s| s.vars),
            );
        }
    }
    if let Ok(anchor) = approx_near_pair(rounds, layout.members(), opts) {
        let theta = rng.gen_range(-PI..PI);
        let mut table = heading_start(spec, rounds, opts, theta, &mut rng);
        if let Some(m) = layout.member_index(anchor.robot) {
            let shift = anchor.pin.position - table[0][m];
            for row in table.iter_mut() {
                row[m] = row[m] + shift;
            }
        }
        starts.push(layout.flatten(&table));
    }
    let remaining = opts.multistart.saturating_sub(starts.len()).max(1);
    starts.extend(
        continuation_starts(spec, opts, rounds, remaining, &mut rng)
            .iter()
            .map(|t| layout.flatten(t)),
    );

    let mut found: Vec<Solution> = Vec::new();
    for start in starts {
        let v = polish(spec, constraints, start, opts.max_iter);
        if let Some(s) = accepted(spec, constraints, opts, &v) {
            found.push(s);
        }
    }
    if found.is_empty() {
        return Err(OptimError::NoSolutionFound {
            starts: opts.multistart,
        });
    }
    Ok(SolutionSet::assemble(spec, rounds, found, opts))
}
