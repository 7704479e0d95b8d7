use super::{evaluate_start, in_bounds, Evaluator, OptOptions, OptResult, Stop, Termination};
use crate::error::Result;

const START_STEP: f64 = 0.25;

/// Compass search: poll `x ± step e_i` in coordinate order, move to the first
/// improving point, halve the step after a full poll without improvement.
/// Poll points outside the bounds are skipped, not clipped.
pub fn minimize_pattern_search<F>(f: F, x0: &[f64], opts: &OptOptions) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate(x0.len())?;
    let bounds = opts.bounds.as_deref();
    let mut ev = Evaluator::new(f, opts);
    let (x, fx) = evaluate_start(&mut ev, x0, bounds)?;
    let step = opts.initial_step.unwrap_or(START_STEP);

    let termination = match poll_loop(&mut ev, x, fx, step, opts) {
        Ok(t) | Err(Stop(t)) => t,
    };
    Ok(ev.finish(termination))
}

fn poll_loop<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<F>,
    mut x: Vec<f64>,
    mut fx: f64,
    mut step: f64,
    opts: &OptOptions,
) -> Result<Termination, Stop> {
    let bounds = opts.bounds.as_deref();
    loop {
        if step < opts.xtol_abs {
            return Ok(Termination::XTol);
        }
        let mut moved = false;
        'poll: for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * step;
                if !in_bounds(&y, bounds) {
                    continue;
                }
                let fy = ev.eval(&y)?;
                if fy < fx {
                    x = y;
                    fx = fy;
                    moved = true;
                    break 'poll;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
}
