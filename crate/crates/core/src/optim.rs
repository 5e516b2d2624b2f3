//! Smooth constrained minimization over real vectors.
//!
//! The feasible set is an intersection of balls and spheres on disjoint
//! coordinate blocks (handled by projection) with inequality constraints
//! `g_i(x) ≥ 0` (affine half-spaces given densely, or arbitrary smooth
//! functions supplied by the [`Problem`]). Inequalities are handled with an
//! augmented Lagrangian: each round runs projected gradient descent with
//! Barzilai–Borwein steps and Armijo backtracking on the merit function, then
//! updates the multipliers and, if the violation stalls, the penalty weight.
//!
//! Inequalities are tightened by a small margin so the returned point is
//! strictly feasible. If rounding still leaves a violation, the solution is
//! blended toward a strictly feasible anchor (the start, or the best feasible
//! iterate seen) until every constraint holds exactly.

use crate::{Error, Result};

/// Objective with optional smooth inequality constraints `g_i(x) ≥ 0`.
pub trait Problem {
    fn dim(&self) -> usize;

    /// Returns `f(x)` and writes `∇f(x)` into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }

    fn num_inequalities(&self) -> usize {
        0
    }

    /// Writes `g_i(x)` for every problem-defined inequality.
    fn inequalities(&self, _x: &[f64], _out: &mut [f64]) {}

    /// Accumulates `Σ_i mult_i ∇g_i(x)` into `out`.
    fn inequality_vjp(&self, _x: &[f64], _mult: &[f64], _out: &mut [f64]) {}
}

/// Unconstrained objective given by a closure returning value and gradient.
pub struct FnProblem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnProblem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnProblem { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> Problem for FnProblem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

/// `‖x[start..start+len]‖² ≤ bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub start: usize,
    pub len: usize,
    pub bound: f64,
}

/// `‖x[start..start+len]‖ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub start: usize,
    pub len: usize,
}

/// `coeffs · x + offset ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub balls: Vec<Ball>,
    pub spheres: Vec<Sphere>,
    pub halfspaces: Vec<HalfSpace>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ball(mut self, start: usize, len: usize, bound: f64) -> Self {
        self.balls.push(Ball { start, len, bound });
        self
    }

    pub fn sphere(mut self, start: usize, len: usize) -> Self {
        self.spheres.push(Sphere { start, len });
        self
    }

    pub fn halfspace(mut self, coeffs: Vec<f64>, offset: f64) -> Self {
        self.halfspaces.push(HalfSpace { coeffs, offset });
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let mut owner = vec![false; dim];
        let blocks = self
            .balls
            .iter()
            .map(|b| (b.start, b.len))
            .chain(self.spheres.iter().map(|s| (s.start, s.len)));
        for (start, len) in blocks {
            if start + len > dim || len == 0 {
                return Err(Error::Dimension(format!("block {start}..{} outside dimension {dim}", start + len)));
            }
            for taken in &mut owner[start..start + len] {
                if *taken {
                    return Err(Error::InvalidParameter("projection blocks overlap".into()));
                }
                *taken = true;
            }
        }
        if let Some(b) = self.balls.iter().find(|b| !(b.bound >= 0.0)) {
            return Err(Error::InvalidParameter(format!("ball bound {} is negative", b.bound)));
        }
        if let Some(h) = self.halfspaces.iter().find(|h| h.coeffs.len() != dim) {
            return Err(Error::Dimension(format!("half-space has {} coefficients for dimension {dim}", h.coeffs.len())));
        }
        Ok(())
    }

    /// Euclidean projection onto the balls, renormalization onto the spheres.
    pub fn project(&self, x: &mut [f64]) {
        for b in &self.balls {
            let block = &mut x[b.start..b.start + b.len];
            let n2: f64 = block.iter().map(|v| v * v).sum();
            if n2 > b.bound {
                let s = (b.bound / n2).sqrt();
                block.iter_mut().for_each(|v| *v *= s);
            }
        }
        for s in &self.spheres {
            let block = &mut x[s.start..s.start + s.len];
            let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                block.iter_mut().for_each(|v| *v /= n);
            } else {
                block.iter_mut().for_each(|v| *v = 0.0);
                block[0] = 1.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Projected-gradient tolerance (∞-norm of the unit-step projected gradient).
    pub g_tol: f64,
    /// Relative merit decrease below which an inner solve is declared stalled.
    pub f_tol: f64,
    /// Allowed violation of the tightened inequalities.
    pub c_tol: f64,
    /// Inequalities are enforced as `g_i(x) ≥ margin`.
    pub margin: f64,
    pub max_inner: usize,
    pub max_rounds: usize,
    pub rho0: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            g_tol: 1e-8,
            f_tol: 1e-12,
            c_tol: 1e-8,
            margin: 1e-7,
            max_inner: 5000,
            max_rounds: 30,
            rho0: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Merit value after every accepted step; nonincreasing inside a round.
    pub objective_trace: Vec<f64>,
    /// Index into `objective_trace` where each augmented-Lagrangian round starts.
    pub round_starts: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `max(0, -g_i(x*))` over the untightened inequalities.
    pub max_constraint_violation: f64,
    /// Final objective `f(x*)`.
    pub objective: f64,
}

/// Constraint evaluation: dense half-spaces first, then the problem's own.
struct Inequalities<'a, P: ?Sized> {
    problem: &'a P,
    halfspaces: Vec<HalfSpace>,
}

impl<'a, P: Problem + ?Sized> Inequalities<'a, P> {
    fn new(problem: &'a P, cs: &ConstraintSet) -> Self {
        // Unit coefficient norm keeps the margin and tolerances meaningful.
        let halfspaces = cs
            .halfspaces
            .iter()
            .filter_map(|h| {
                let n = h.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
                (n > 0.0).then(|| HalfSpace { coeffs: h.coeffs.iter().map(|v| v / n).collect(), offset: h.offset / n })
            })
            .collect();
        Inequalities { problem, halfspaces }
    }

    fn len(&self) -> usize {
        self.halfspaces.len() + self.problem.num_inequalities()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let nh = self.halfspaces.len();
        for (o, h) in out[..nh].iter_mut().zip(&self.halfspaces) {
            *o = dot(&h.coeffs, x) + h.offset;
        }
        self.problem.inequalities(x, &mut out[nh..]);
    }

    fn vjp(&self, x: &[f64], mult: &[f64], out: &mut [f64]) {
        let nh = self.halfspaces.len();
        for (m, h) in mult[..nh].iter().zip(&self.halfspaces) {
            if *m != 0.0 {
                axpy(*m, &h.coeffs, out);
            }
        }
        if self.problem.num_inequalities() > 0 {
            self.problem.inequality_vjp(x, &mult[nh..], out);
        }
    }

    fn min_value(&self, x: &[f64], buf: &mut [f64]) -> f64 {
        self.eval(x, buf);
        buf.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Augmented-Lagrangian merit `f(x) + Σ_i ((max(0, λ_i − ρ g̃_i))² − λ_i²)/(2ρ)`.
struct Merit<'a, P: ?Sized> {
    ineq: &'a Inequalities<'a, P>,
    lambda: &'a [f64],
    rho: f64,
    margin: f64,
}

impl<P: Problem + ?Sized> Merit<'_, P> {
    fn value_grad(&self, x: &[f64], grad: &mut [f64], gbuf: &mut [f64], mult: &mut [f64]) -> f64 {
        let mut v = self.ineq.problem.value_grad(x, grad);
        if gbuf.is_empty() {
            return v;
        }
        self.ineq.eval(x, gbuf);
        for i in 0..gbuf.len() {
            let t = (self.lambda[i] - self.rho * (gbuf[i] - self.margin)).max(0.0);
            v += (t * t - self.lambda[i] * self.lambda[i]) / (2.0 * self.rho);
            mult[i] = -t;
        }
        self.ineq.vjp(x, mult, grad);
        v
    }
}

/// Minimizes `problem` from `x0` subject to `cs` and the problem's own inequalities.
///
/// Returns the best point found with a report; `converged` is false when an
/// iteration budget ran out before the tolerances were met.
pub fn minimize<P: Problem + ?Sized>(
    problem: &P,
    x0: &[f64],
    cs: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("start has {} entries for dimension {n}", x0.len())));
    }
    cs.validate(n)?;
    let ineq = Inequalities::new(problem, cs);
    let m = ineq.len();

    let mut x = x0.to_vec();
    cs.project(&mut x);
    let mut gbuf = vec![0.0; m];
    let mut mult = vec![0.0; m];
    let mut lambda = vec![0.0; m];
    let mut rho = opts.rho0;

    let start_value = problem.value(&x);
    if !start_value.is_finite() {
        return Err(Error::NonFinite);
    }
    // Anchor for the final feasibility repair.
    let mut anchor: Option<(Vec<f64>, f64)> =
        (m == 0 || ineq.min_value(&x, &mut gbuf) > 0.0).then(|| (x.clone(), start_value));

    let mut report = SolveReport {
        objective_trace: Vec::new(),
        round_starts: Vec::new(),
        iterations: 0,
        converged: false,
        max_constraint_violation: 0.0,
        objective: start_value,
    };
    let mut prev_violation = f64::INFINITY;
    let mut step = 1.0;
    let rounds = if m == 0 { 1 } else { opts.max_rounds.max(1) };

    for _ in 0..rounds {
        report.round_starts.push(report.objective_trace.len());
        let merit = Merit { ineq: &ineq, lambda: &lambda, rho, margin: opts.margin };
        let (inner_ok, iters) = projected_descent(&merit, &mut x, cs, opts, &mut step, &mut report.objective_trace, &mut gbuf, &mut mult)?;
        report.iterations += iters;

        if m == 0 {
            report.converged = inner_ok;
            break;
        }
        ineq.eval(&x, &mut gbuf);
        let violation = gbuf.iter().map(|g| (opts.margin - g).max(0.0)).fold(0.0, f64::max);
        let mut complementarity: f64 = 0.0;
        for i in 0..m {
            lambda[i] = (lambda[i] - rho * (gbuf[i] - opts.margin)).max(0.0);
            complementarity = complementarity.max((gbuf[i] - opts.margin).min(lambda[i]).abs());
        }
        if gbuf.iter().all(|&g| g > 0.0) {
            let f = problem.value(&x);
            if anchor.as_ref().is_none_or(|(_, best)| f <= *best) {
                anchor = Some((x.clone(), f));
            }
        }
        log::trace!("round: violation {violation:.3e}, complementarity {complementarity:.3e}, rho {rho:.1e}");
        if violation <= opts.c_tol && complementarity <= opts.c_tol.sqrt() {
            report.converged = inner_ok;
            break;
        }
        if violation > 0.25 * prev_violation {
            rho = (rho * 10.0).min(1e12);
        }
        prev_violation = violation;
    }

    if m > 0 && ineq.min_value(&x, &mut gbuf) < 0.0 {
        if let Some((a, _)) = &anchor {
            x = repair(&ineq, cs, &x, a, &mut gbuf);
        }
    }
    if m > 0 {
        ineq.eval(&x, &mut gbuf);
        report.max_constraint_violation = gbuf.iter().map(|g| (-g).max(0.0)).fold(0.0, f64::max);
    }
    report.objective = problem.value(&x);
    if !report.objective.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((x, report))
}

/// Moves `x` toward the strictly feasible `anchor` just far enough to satisfy every inequality.
fn repair<P: Problem + ?Sized>(ineq: &Inequalities<P>, cs: &ConstraintSet, x: &[f64], anchor: &[f64], buf: &mut [f64]) -> Vec<f64> {
    let mut t = 1e-9;
    while t < 1.0 {
        let mut y: Vec<f64> = x.iter().zip(anchor).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        cs.project(&mut y);
        if ineq.min_value(&y, buf) >= 0.0 {
            return y;
        }
        t *= 2.0;
    }
    anchor.to_vec()
}

/// Projected gradient descent on the merit with BB steps and Armijo backtracking.
#[allow(clippy::too_many_arguments)]
fn projected_descent<P: Problem + ?Sized>(
    merit: &Merit<P>,
    x: &mut Vec<f64>,
    cs: &ConstraintSet,
    opts: &SolverOptions,
    step: &mut f64,
    trace: &mut Vec<f64>,
    gbuf: &mut [f64],
    mult: &mut [f64],
) -> Result<(bool, usize)> {
    const SUFFICIENT: f64 = 1e-4;
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = merit.value_grad(x, &mut grad, gbuf, mult);
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    trace.push(value);
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    for iter in 0..opts.max_inner {
        // Stationarity: unit-step projected gradient.
        for i in 0..n {
            trial[i] = x[i] - grad[i];
        }
        cs.project(&mut trial);
        let pg = x.iter().zip(&trial).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if pg <= opts.g_tol {
            return Ok((true, iter));
        }

        let mut t = *step;
        let mut accepted = None;
        for _ in 0..80 {
            for i in 0..n {
                trial[i] = x[i] - t * grad[i];
            }
            cs.project(&mut trial);
            let d2: f64 = x.iter().zip(&trial).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 == 0.0 {
                break;
            }
            let v = merit.value_grad(&trial, &mut trial_grad, gbuf, mult);
            if v.is_finite() && v <= value - SUFFICIENT / t * d2 {
                accepted = Some(v);
                break;
            }
            t *= 0.5;
        }
        let Some(new_value) = accepted else {
            // No descent possible at machine precision.
            return Ok((true, iter));
        };

        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            sy += s * (trial_grad[i] - grad[i]);
            ss += s * s;
        }
        *step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (t * 2.0).min(1e12) };

        let decrease = value - new_value;
        std::mem::swap(x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        value = new_value;
        trace.push(value);
        if decrease <= opts.f_tol * value.abs().max(1.0) {
            return Ok((true, iter + 1));
        }
    }
    Ok((false, opts.max_inner))
}
