//! Derivative-free minimization of black-box objectives.
//!
//! Three methods share one budget/trace harness:
//! - [`minimize_nelder_mead`]: simplex reflection, expansion, contraction and shrink.
//! - [`minimize_pattern_search`]: compass poll with step halving.
//! - [`minimize_quadratic_tr`]: trust region on a quadratic interpolation model
//!   whose spare degrees of freedom minimize the change of the model Hessian.
//!   Without bounds it runs unconstrained; with bounds every trial point stays
//!   inside the box.
//!
//! Objectives are plain `FnMut(&[f64]) -> f64`. Non-finite values are treated as
//! `+inf` and never become the incumbent.

mod nelder_mead;
mod pattern;
mod quadratic;
mod trsbox;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nelder_mead::minimize_nelder_mead;
pub use pattern::minimize_pattern_search;
pub use quadratic::minimize_quadratic_tr;

pub const DEFAULT_XTOL_ABS: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    /// Stop once the simplex diameter, poll step or trust-region radius falls below this.
    pub xtol_abs: f64,
    pub max_evals: usize,
    /// Wall-clock limit, seconds.
    pub max_time: Option<f64>,
    /// Per-coordinate `(lo, hi)`.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Interpolation points for the quadratic model; `2n + 1` when unset.
    pub m_points: Option<usize>,
    /// Initial simplex edge scale, poll step or trust-region radius.
    /// Each method has its own default when unset.
    pub initial_step: Option<f64>,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            xtol_abs: DEFAULT_XTOL_ABS,
            max_evals: 1000,
            max_time: None,
            bounds: None,
            m_points: None,
            initial_step: None,
        }
    }
}

impl OptOptions {
    pub fn with_max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_xtol(mut self, xtol: f64) -> Self {
        self.xtol_abs = xtol;
        self
    }

    pub fn with_initial_step(mut self, step: f64) -> Self {
        self.initial_step = Some(step);
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Optimizer("problem dimension must be at least 1".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::Optimizer("evaluation budget is zero".into()));
        }
        if !(self.xtol_abs > 0.0) {
            return Err(Error::Optimizer("xtol_abs must be positive".into()));
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::Optimizer("initial step must be positive".into()));
            }
        }
        if let Some(b) = &self.bounds {
            if b.len() != n {
                return Err(Error::Optimizer(format!(
                    "{} bounds for a {}-dimensional problem",
                    b.len(),
                    n
                )));
            }
            if b.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(Error::Optimizer("every bound needs lo <= hi".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    XTol,
    MaxEvals,
    MaxTime,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::XTol => "xtol",
            Termination::MaxEvals => "max_evals",
            Termination::MaxTime => "max_time",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub neval: usize,
    /// Seconds.
    pub elapsed: f64,
    pub termination: Termination,
    /// `(evaluation number, incumbent value after it)` for every evaluation.
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    NelderMead,
    PatternSearch,
    /// Quadratic trust region inside the bounds.
    Bobyqa,
    /// Quadratic trust region without bounds.
    Newuoa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Bobyqa,
        Algorithm::Newuoa,
        Algorithm::NelderMead,
        Algorithm::PatternSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NelderMead => "NELDER-MEAD",
            Algorithm::PatternSearch => "PATTERN-SEARCH",
            Algorithm::Bobyqa => "BOBYQA",
            Algorithm::Newuoa => "NEWUOA",
        }
    }

    /// Runs the algorithm. `Newuoa` ignores `opts.bounds`.
    pub fn minimize<F>(self, f: F, x0: &[f64], opts: &OptOptions) -> Result<OptResult>
    where
        F: FnMut(&[f64]) -> f64,
    {
        match self {
            Algorithm::NelderMead => minimize_nelder_mead(f, x0, opts),
            Algorithm::PatternSearch => minimize_pattern_search(f, x0, opts),
            Algorithm::Bobyqa => minimize_quadratic_tr(f, x0, opts),
            Algorithm::Newuoa => {
                let opts = OptOptions {
                    bounds: None,
                    ..opts.clone()
                };
                minimize_quadratic_tr(f, x0, &opts)
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nelder-mead" | "nm" => Ok(Algorithm::NelderMead),
            "pattern-search" | "pattern" | "ps" => Ok(Algorithm::PatternSearch),
            "bobyqa" | "quadratic-tr" => Ok(Algorithm::Bobyqa),
            "newuoa" => Ok(Algorithm::Newuoa),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Budget exhausted before an evaluation could run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Stop(pub Termination);

/// Counts evaluations, enforces the budget and tracks the incumbent.
pub(crate) struct Evaluator<F> {
    f: F,
    max_evals: usize,
    max_time: Option<Duration>,
    started: Instant,
    bounds: Option<Vec<(f64, f64)>>,
    neval: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trace: Vec<(usize, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<F> {
    pub(crate) fn new(f: F, opts: &OptOptions) -> Self {
        Evaluator {
            f,
            max_evals: opts.max_evals,
            max_time: opts.max_time.map(Duration::from_secs_f64),
            started: Instant::now(),
            bounds: opts.bounds.clone(),
            neval: 0,
            best_x: Vec::new(),
            best_f: f64::INFINITY,
            trace: Vec::new(),
        }
    }

    pub(crate) fn eval(&mut self, x: &[f64]) -> Result<f64, Stop> {
        if self.neval >= self.max_evals {
            return Err(Stop(Termination::MaxEvals));
        }
        if let Some(limit) = self.max_time {
            if self.started.elapsed() >= limit {
                return Err(Stop(Termination::MaxTime));
            }
        }
        if let Some(b) = &self.bounds {
            debug_assert!(
                x.iter().zip(b).all(|(v, (lo, hi))| lo <= v && v <= hi),
                "point outside bounds: {x:?}"
            );
        }
        let mut fx = (self.f)(x);
        if !fx.is_finite() {
            fx = f64::INFINITY;
        }
        self.neval += 1;
        if self.best_x.is_empty() || fx < self.best_f {
            self.best_f = fx;
            self.best_x = x.to_vec();
        }
        self.trace.push((self.neval, self.best_f));
        Ok(fx)
    }

    pub(crate) fn finish(self, termination: Termination) -> OptResult {
        OptResult {
            x_best: self.best_x,
            f_best: self.best_f,
            neval: self.neval,
            elapsed: self.started.elapsed().as_secs_f64(),
            termination,
            trace: self.trace,
        }
    }
}

pub(crate) fn clip(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

pub(crate) fn in_bounds(x: &[f64], bounds: Option<&[(f64, f64)]>) -> bool {
    bounds.is_none_or(|b| x.iter().zip(b).all(|(v, (lo, hi))| lo <= v && v <= hi))
}

/// Evaluates the (clipped) start point; an error when its value is not finite.
pub(crate) fn evaluate_start<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<F>,
    x0: &[f64],
    bounds: Option<&[(f64, f64)]>,
) -> Result<(Vec<f64>, f64)> {
    let mut x = x0.to_vec();
    clip(&mut x, bounds);
    let fx = ev.eval(&x).map_err(|_| Error::Optimizer("no budget for the start point".into()))?;
    if !fx.is_finite() {
        return Err(Error::Optimizer(format!("objective is not finite at the start point {x:?}")));
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_budget_and_trace() {
        let opts = OptOptions::default().with_max_evals(3);
        let mut ev = Evaluator::new(|x: &[f64]| x[0], &opts);
        assert_eq!(ev.eval(&[2.0]), Ok(2.0));
        assert_eq!(ev.eval(&[f64::NAN]), Ok(f64::INFINITY));
        assert_eq!(ev.eval(&[1.0]), Ok(1.0));
        assert_eq!(ev.eval(&[0.0]), Err(Stop(Termination::MaxEvals)));
        let r = ev.finish(Termination::MaxEvals);
        assert_eq!(r.neval, 3);
        assert_eq!(r.trace, vec![(1, 2.0), (2, 2.0), (3, 1.0)]);
        assert_eq!(r.x_best, vec![1.0]);
    }

    #[test]
    fn options_validation() {
        assert!(OptOptions::default().with_max_evals(0).validate(2).is_err());
        assert!(OptOptions::default().validate(0).is_err());
        assert!(OptOptions::default().with_bounds(vec![(1.0, 0.0)]).validate(1).is_err());
        assert!(OptOptions::default().with_bounds(vec![(0.0, 1.0)]).validate(2).is_err());
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("cobyla".parse::<Algorithm>().is_err());
    }
}
