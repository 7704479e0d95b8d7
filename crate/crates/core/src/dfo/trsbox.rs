//! Truncated conjugate gradient for the box-constrained trust-region subproblem
//!
//!   minimize  g.s + s.H.s / 2   subject to  |s| <= delta,  lo <= s <= hi.
//!
//! Variables that hit a bound are fixed there and the conjugate gradient
//! restarts on the remaining free variables; iteration stops on the
//! trust-region boundary or when the reduced gradient vanishes.

use nalgebra::{DMatrix, DVector};

/// Step bounds relative to the trust-region center.
pub(crate) struct StepBox<'a> {
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

fn boundary_step(s: &DVector<f64>, d: &DVector<f64>, delta: f64) -> f64 {
    // positive root of |s + t d|^2 = delta^2
    let dd = d.dot(d);
    if dd == 0.0 {
        return f64::INFINITY;
    }
    let sd = s.dot(d);
    let ss = s.dot(s);
    let disc = (sd * sd + dd * (delta * delta - ss)).max(0.0);
    (-sd + disc.sqrt()) / dd
}

pub(crate) fn solve(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64, bx: Option<StepBox<'_>>) -> DVector<f64> {
    let n = g.len();
    let mut s = DVector::<f64>::zeros(n);
    let mut grad = g.clone();
    let mut free = vec![true; n];
    let gnorm0 = g.norm();

    if let Some(b) = &bx {
        for i in 0..n {
            if (b.lo[i] >= 0.0 && g[i] > 0.0) || (b.hi[i] <= 0.0 && g[i] < 0.0) {
                free[i] = false;
            }
        }
    }

    let mask = |v: &DVector<f64>, free: &[bool]| -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }))
    };

    for _restart in 0..=n {
        let mut r = -mask(&grad, &free);
        let mut rr = r.dot(&r);
        if rr.sqrt() <= 1e-14 * gnorm0.max(1e-300) || !free.iter().any(|&f| f) {
            // zero reduced gradient: follow negative curvature along a free axis, if any
            if let Some(i) = (0..n).find(|&i| free[i] && h[(i, i)] < 0.0) {
                let mut d = DVector::zeros(n);
                d[i] = 1.0;
                let t_tr = boundary_step(&s, &d, delta);
                let t = match &bx {
                    Some(b) => t_tr.min(b.hi[i] - s[i]),
                    None => t_tr,
                };
                if t > 0.0 && t.is_finite() {
                    s[i] += t;
                }
            }
            return s;
        }
        let mut d = r.clone();
        let mut hit_bound = false;
        for _ in 0..n {
            let hd = h * &d;
            let dhd = d.dot(&hd);
            let t_tr = boundary_step(&s, &d, delta);
            let mut t_box = f64::INFINITY;
            let mut box_index = None;
            if let Some(b) = &bx {
                for i in 0..n {
                    if !free[i] || d[i] == 0.0 {
                        continue;
                    }
                    let limit = if d[i] > 0.0 { b.hi[i] } else { b.lo[i] };
                    let t = ((limit - s[i]) / d[i]).max(0.0);
                    if t < t_box {
                        t_box = t;
                        box_index = Some(i);
                    }
                }
            }
            let t_cg = if dhd > 0.0 { rr / dhd } else { f64::INFINITY };
            let t = t_cg.min(t_tr).min(t_box);
            if !t.is_finite() {
                return s;
            }
            s.axpy(t, &d, 1.0);
            grad.axpy(t, &hd, 1.0);

            if t == t_box && t < t_cg.min(t_tr) {
                let i = box_index.expect("box step has an index");
                if let Some(b) = &bx {
                    s[i] = if d[i] > 0.0 { b.hi[i] } else { b.lo[i] };
                }
                free[i] = false;
                hit_bound = true;
                break;
            }
            if t == t_tr && t <= t_cg {
                return s;
            }
            let r_new = -mask(&grad, &free);
            let rr_new = r_new.dot(&r_new);
            if rr_new.sqrt() <= 1e-12 * gnorm0.max(1e-300) {
                return s;
            }
            let beta = rr_new / rr;
            d = &r_new + beta * &d;
            r = r_new;
            rr = rr_new;
        }
        if !hit_bound {
            return s;
        }
    }
    s
}
