use super::{clip, evaluate_start, Evaluator, OptOptions, OptResult, Stop, Termination};
use crate::error::Result;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Relative edge of the initial simplex: `h_i = 0.05 max(|x0_i|, 1)`.
const SIMPLEX_SCALE: f64 = 0.05;

/// Nelder-Mead simplex search.
///
/// Starts from `x0` and `x0 + h_i e_i`. With bounds, every trial point is
/// clipped into the box before evaluation. Stops when the simplex diameter
/// (largest infinity-norm distance from the best vertex) drops below
/// `xtol_abs` or the budget runs out.
pub fn minimize_nelder_mead<F>(f: F, x0: &[f64], opts: &OptOptions) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    opts.validate(n)?;
    let bounds = opts.bounds.as_deref();
    let mut ev = Evaluator::new(f, opts);
    let (start, f0) = evaluate_start(&mut ev, x0, bounds)?;
    let scale = opts.initial_step.unwrap_or(SIMPLEX_SCALE);

    let termination = match run(&mut ev, start, f0, scale, opts) {
        Ok(t) | Err(Stop(t)) => t,
    };
    Ok(ev.finish(termination))
}

fn run<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<F>,
    start: Vec<f64>,
    f0: f64,
    scale: f64,
    opts: &OptOptions,
) -> Result<Termination, Stop> {
    let n = start.len();
    let bounds = opts.bounds.as_deref();
    let point = |mut x: Vec<f64>| {
        clip(&mut x, bounds);
        x
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let h = scale * start[i].abs().max(1.0);
        let mut x = start.clone();
        x[i] += h;
        clip(&mut x, bounds);
        if x[i] == start[i] {
            x[i] = start[i] - h;
            clip(&mut x, bounds);
        }
        let fx = ev.eval(&x)?;
        simplex.push((x, fx));
    }

    loop {
        // stable sort: equal values keep their lower index first
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.xtol_abs {
            return Ok(Termination::XTol);
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
            from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
        };

        let (worst, f_worst) = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;

        let xr = point(along(&centroid, &worst, -REFLECT));
        let fr = ev.eval(&xr)?;

        if fr < f_best {
            let xe = point(along(&centroid, &xr, EXPAND));
            let fe = ev.eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }

        let (xc, fc) = if fr < f_worst {
            let xc = point(along(&centroid, &xr, CONTRACT));
            let fc = ev.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = point(along(&centroid, &worst, CONTRACT));
            let fc = ev.eval(&xc)?;
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }

        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = point(along(&anchor, &vertex.0, SHRINK));
            let fx = ev.eval(&x)?;
            *vertex = (x, fx);
        }
    }
}
