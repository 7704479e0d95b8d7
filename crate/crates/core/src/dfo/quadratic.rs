//! Quadratic-interpolation trust-region method.
//!
//! The model `q(x_opt + s) = f_opt + g.s + s.H.s / 2` interpolates `f` at `m`
//! points (`n + 2 <= m <= (n + 1)(n + 2) / 2`). When `m` is below the number
//! of quadratic coefficients, the remaining freedom is fixed by minimizing
//! `|H - H_prev|_F`, which amounts to solving the KKT system
//!
//! ```text
//! [ A   X^T ] [ lambda ]   [ f - q_prev ]
//! [ X   0   ] [ c, g   ] = [ 0          ],   A_ij = (s_i . s_j)^2 / 2,  X = [1; s_j]
//! ```
//!
//! and setting `H = H_prev + sum_j lambda_j s_j s_j^T`. The same factorized
//! system gives the Lagrange functions used to pick which point a new
//! iterate replaces, and to build geometry-improving points.
//!
//! Two radii are kept: the resolution `rho`, which only decreases, and the
//! trust-region radius `delta >= rho`. The method stops when `rho` has been
//! driven below `xtol_abs`.

use nalgebra::{DMatrix, DVector, LU};

use super::trsbox::{self, StepBox};
use super::{evaluate_start, Evaluator, OptOptions, OptResult, Stop, Termination};
use crate::error::{Error, Result};

const SHRINK_BELOW: f64 = 0.1;
const GROW_ABOVE: f64 = 0.7;
/// Pivot ratio below which the interpolation system is treated as singular.
const MIN_PIVOT_RATIO: f64 = 1e-13;
/// Candidates evaluated per geometry step before the midpoint fallback.
const GEOMETRY_TRIES: usize = 2;

pub fn minimize_quadratic_tr<F>(f: F, x0: &[f64], opts: &OptOptions) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    opts.validate(n)?;
    let m = opts.m_points.unwrap_or(2 * n + 1);
    let m_max = (n + 1) * (n + 2) / 2;
    if m < n + 2 || m > m_max {
        return Err(Error::Optimizer(format!(
            "interpolation points must lie in [{}, {}], got {m}",
            n + 2,
            m_max
        )));
    }
    let bounds = opts.bounds.clone();
    let mut rho = opts
        .initial_step
        .unwrap_or_else(|| 0.1 * x0.iter().fold(1.0f64, |a, v| a.max(v.abs())));
    if let Some(b) = &bounds {
        let min_width = b.iter().map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min);
        if !(min_width > 0.0) {
            return Err(Error::Optimizer(
                "the quadratic model needs every bound interval to have positive width".into(),
            ));
        }
        rho = rho.min(0.5 * min_width);
    }

    let mut ev = Evaluator::new(f, opts);
    let (start, f0) = evaluate_start(&mut ev, x0, bounds.as_deref())?;
    let mut tr = TrustRegion {
        n,
        m,
        bounds,
        xtol: opts.xtol_abs,
        pts: vec![start],
        fvals: vec![f0],
        h_prev: DMatrix::zeros(n, n),
        rho,
        delta: rho,
    };
    let termination = match tr.run(&mut ev) {
        Ok(t) | Err(Stop(t)) => t,
    };
    Ok(ev.finish(termination))
}

struct Model {
    center: usize,
    /// Distance scale the interpolation system was built in.
    scale: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

struct TrustRegion {
    n: usize,
    m: usize,
    bounds: Option<Vec<(f64, f64)>>,
    xtol: f64,
    pts: Vec<Vec<f64>>,
    fvals: Vec<f64>,
    h_prev: DMatrix<f64>,
    rho: f64,
    delta: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

enum Outcome {
    Continue,
    Done,
}

impl TrustRegion {
    fn clip(&self, x: &mut [f64]) {
        super::clip(x, self.bounds.as_deref());
    }

    fn feasible(&self, x: &[f64]) -> bool {
        super::in_bounds(x, self.bounds.as_deref())
    }

    fn best_index(&self) -> usize {
        let mut k = 0;
        for (j, &f) in self.fvals.iter().enumerate() {
            if f < self.fvals[k] {
                k = j;
            }
        }
        k
    }

    fn is_duplicate(&self, x: &[f64]) -> bool {
        let tiny = 1e-10 * self.rho.max(self.xtol);
        self.pts.iter().any(|p| dist(p, x) <= tiny)
    }

    /// Evaluates `base + t d` for t = 1, -1, 1/2, -1/2, ... until a finite,
    /// feasible, new point turns up.
    fn probe<F: FnMut(&[f64]) -> f64>(
        &mut self,
        ev: &mut Evaluator<F>,
        base: &[f64],
        d: &[f64],
    ) -> Result<Option<(Vec<f64>, f64)>, Stop> {
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut scale = 1.0;
        while scale * dn >= self.xtol {
            for sign in [1.0, -1.0] {
                let y: Vec<f64> = base.iter().zip(d).map(|(b, v)| b + sign * scale * v).collect();
                if !self.feasible(&y) || self.is_duplicate(&y) {
                    continue;
                }
                let fy = ev.eval(&y)?;
                if fy.is_finite() {
                    return Ok(Some((y, fy)));
                }
            }
            scale *= 0.5;
        }
        Ok(None)
    }

    /// Coordinate steps `x0 + a_i e_i`, second steps `x0 + b_i e_i`, then
    /// pairwise steps toward the better side of each coordinate.
    fn initial_points<F: FnMut(&[f64]) -> f64>(&mut self, ev: &mut Evaluator<F>) -> Result<bool, Stop> {
        let n = self.n;
        let x0 = self.pts[0].clone();
        let rho = self.rho;
        let mut first = vec![rho; n];
        let mut second = vec![-rho; n];
        if let Some(b) = &self.bounds {
            for i in 0..n {
                let (lo, hi) = b[i];
                if x0[i] - lo < rho {
                    first[i] = rho;
                    second[i] = (2.0 * rho).min(hi - x0[i]);
                } else if hi - x0[i] < rho {
                    first[i] = -rho;
                    second[i] = -(2.0 * rho).min(x0[i] - lo);
                }
            }
        }

        let mut chosen_step = first.clone();
        let mut side_value = vec![f64::INFINITY; n];
        let plan: Vec<(usize, f64)> = (0..n)
            .map(|i| (i, first[i]))
            .chain((0..n).map(|i| (i, second[i])))
            .take(self.m - 1)
            .collect();
        for (i, step) in plan {
            let mut d = vec![0.0; n];
            d[i] = step;
            match self.probe(ev, &x0, &d)? {
                Some((y, fy)) => {
                    if fy < side_value[i] {
                        side_value[i] = fy;
                        chosen_step[i] = y[i] - x0[i];
                    }
                    self.pts.push(y);
                    self.fvals.push(fy);
                }
                None => return Ok(false),
            }
        }

        'pairs: for p in 0..n {
            for q in p + 1..n {
                if self.pts.len() >= self.m {
                    break 'pairs;
                }
                let mut d = vec![0.0; n];
                d[p] = chosen_step[p];
                d[q] = chosen_step[q];
                match self.probe(ev, &x0, &d)? {
                    Some((y, fy)) => {
                        self.pts.push(y);
                        self.fvals.push(fy);
                    }
                    None => return Ok(false),
                }
            }
        }
        Ok(self.pts.len() == self.m)
    }

    fn system_row(&self, u: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
        let n = self.n;
        let m = self.m;
        let mut w = DVector::zeros(m + n + 1);
        for (j, uj) in u.iter().enumerate() {
            let dot: f64 = uj.iter().zip(x).map(|(a, b)| a * b).sum();
            w[j] = 0.5 * dot * dot;
        }
        w[m] = 1.0;
        for i in 0..n {
            w[m + 1 + i] = x[i];
        }
        w
    }

    fn scaled_offsets(&self, center: usize, scale: f64) -> Vec<Vec<f64>> {
        let xc = &self.pts[center];
        self.pts
            .iter()
            .map(|p| p.iter().zip(xc).map(|(a, b)| (a - b) / scale).collect())
            .collect()
    }

    fn build_model(&self, center: usize) -> Option<Model> {
        let n = self.n;
        let m = self.m;
        let xc = &self.pts[center];
        let scale = self.pts.iter().map(|p| dist(p, xc)).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return None;
        }
        let u = self.scaled_offsets(center, scale);

        let dim = m + n + 1;
        let mut w = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..m {
            for j in 0..=i {
                let dot: f64 = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).sum();
                let v = 0.5 * dot * dot;
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
            w[(i, m)] = 1.0;
            w[(m, i)] = 1.0;
            for k in 0..n {
                w[(i, m + 1 + k)] = u[i][k];
                w[(m + 1 + k, i)] = u[i][k];
            }
        }

        // the previous Hessian in scaled coordinates
        let h_scaled = &self.h_prev * (scale * scale);
        let f_center = self.fvals[center];
        let mut rhs = DVector::zeros(dim);
        for j in 0..m {
            let uj = DVector::from_column_slice(&u[j]);
            rhs[j] = self.fvals[j] - f_center - 0.5 * uj.dot(&(&h_scaled * &uj));
        }

        let lu = w.clone().lu();
        let diag = lu.u().diagonal().abs();
        let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if !(dmax > 0.0) || dmin / dmax < MIN_PIVOT_RATIO {
            return None;
        }
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let resid = (&w * &sol - &rhs).amax();
        if resid > 1e-8 * (1.0 + rhs.amax()) {
            return None;
        }

        let mut h = h_scaled;
        for j in 0..m {
            let uj = DVector::from_column_slice(&u[j]);
            h += sol[j] * &uj * uj.transpose();
        }
        let g = DVector::from_iterator(n, (0..n).map(|k| sol[m + 1 + k] / scale));
        let h = h / (scale * scale);
        Some(Model {
            center,
            scale,
            g,
            h,
            lu,
        })
    }

    /// Values at `x` of all Lagrange functions of the model's point set.
    fn lagrange_values(&self, model: &Model, x: &[f64]) -> Vec<f64> {
        let xc = &self.pts[model.center];
        let ux: Vec<f64> = x.iter().zip(xc).map(|(a, b)| (a - b) / model.scale).collect();
        let u = self.scaled_offsets(model.center, model.scale);
        let w = self.system_row(&u, &ux);
        match model.lu.solve(&w) {
            Some(sigma) => sigma.iter().take(self.m).copied().collect(),
            None => vec![0.0; self.m],
        }
    }

    fn farthest_from(&self, center: usize, threshold: f64) -> Option<usize> {
        let xc = &self.pts[center];
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in self.pts.iter().enumerate() {
            let d = dist(p, xc);
            if d > threshold && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }

    fn step_box(&self, center: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        self.bounds.as_ref().map(|b| {
            let lo = b.iter().zip(center).map(|((lo, _), c)| (lo - c).min(0.0)).collect();
            let hi = b.iter().zip(center).map(|((_, hi), c)| (hi - c).max(0.0)).collect();
            (lo, hi)
        })
    }

    /// Candidate points at distance `radius` along the axes and toward `toward`.
    fn candidates(&self, center: &[f64], toward: Option<&[f64]>, radius: f64) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut out = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut y = center.to_vec();
                y[i] += sign * radius;
                self.clip(&mut y);
                out.push(y);
            }
        }
        if let Some(t) = toward {
            let d = dist(t, center);
            if d > 0.0 {
                for sign in [1.0, -1.0] {
                    let mut y: Vec<f64> = center
                        .iter()
                        .zip(t)
                        .map(|(c, v)| c + sign * radius * (v - c) / d)
                        .collect();
                    self.clip(&mut y);
                    out.push(y);
                }
            }
        }
        out.retain(|y| !self.is_duplicate(y));
        out
    }

    /// Replaces point `j` by a candidate with large `|l_j|`, falling back to
    /// the midpoint between `x_j` and the center. Returns false when no
    /// candidate produced a finite value.
    fn improve_geometry<F: FnMut(&[f64]) -> f64>(
        &mut self,
        ev: &mut Evaluator<F>,
        model: &Model,
        j: usize,
    ) -> Result<bool, Stop> {
        let center = self.pts[model.center].clone();
        let target = self.pts[j].clone();
        let mut ranked: Vec<(Vec<f64>, f64)> = self
            .candidates(&center, Some(&target), self.delta)
            .into_iter()
            .map(|y| {
                let l = self.lagrange_values(model, &y)[j].abs();
                (y, l)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut tries: Vec<Vec<f64>> = ranked.into_iter().take(GEOMETRY_TRIES).map(|(y, _)| y).collect();
        let mid: Vec<f64> = center.iter().zip(&target).map(|(c, t)| 0.5 * (c + t)).collect();
        if !self.is_duplicate(&mid) {
            tries.push(mid);
        }
        for y in tries {
            let fy = ev.eval(&y)?;
            if fy.is_finite() {
                self.pts[j] = y;
                self.fvals[j] = fy;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Swaps the point farthest from the center for the axis candidate that
    /// keeps the largest clearance from the remaining points.
    fn repair<F: FnMut(&[f64]) -> f64>(&mut self, ev: &mut Evaluator<F>, center: usize) -> Result<(), Stop> {
        let Some(j) = self.farthest_from(center, 0.0) else {
            return Ok(());
        };
        let xc = self.pts[center].clone();
        let radius = self.delta.max(self.rho);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for y in self.candidates(&xc, None, radius) {
            let clearance = self
                .pts
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, p)| dist(p, &y))
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(_, c)| clearance > *c) {
                best = Some((y, clearance));
            }
        }
        if let Some((y, _)) = best {
            let fy = ev.eval(&y)?;
            if fy.is_finite() {
                self.pts[j] = y;
                self.fvals[j] = fy;
                return Ok(());
            }
        }
        self.delta = (0.5 * self.delta).max(self.rho);
        if self.delta <= self.rho {
            self.rho *= 0.5;
            self.delta = self.rho;
        }
        Ok(())
    }

    /// Puts a freshly evaluated point into the set, dropping the point whose
    /// Lagrange function is largest there (weighted by distance).
    fn insert(&mut self, model: &Model, x: Vec<f64>, fx: f64) {
        let old_center = model.center;
        let improved = fx < self.fvals[old_center];
        let lag = self.lagrange_values(model, &x);
        let new_center = if improved { x.clone() } else { self.pts[old_center].clone() };
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.m {
            if !improved && j == old_center {
                continue;
            }
            let d = dist(&self.pts[j], &new_center);
            let weight = (d / self.delta).max(1.0).powi(3);
            let score = lag[j].abs() * weight;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((mut j, score)) = best else { return };
        if score < 1e-10 {
            if !improved {
                return;
            }
            j = self.farthest_from(self.best_index(), 0.0).unwrap_or(j);
        }
        self.pts[j] = x;
        self.fvals[j] = fx;
    }

    fn reduce_rho(&mut self) -> Outcome {
        if self.rho <= self.xtol {
            return Outcome::Done;
        }
        let old = self.rho;
        self.rho = (0.1 * self.rho).max(self.xtol);
        if self.rho == old {
            // xtol above 0.1 rho: one last pass at exactly xtol already happened
            return Outcome::Done;
        }
        self.delta = (0.5 * old).max(self.rho);
        Outcome::Continue
    }

    fn run<F: FnMut(&[f64]) -> f64>(&mut self, ev: &mut Evaluator<F>) -> Result<Termination, Stop> {
        if !self.initial_points(ev)? {
            return Ok(Termination::XTol);
        }
        let mut improve_geometry = false;
        loop {
            if self.rho < self.xtol {
                return Ok(Termination::XTol);
            }
            let k = self.best_index();
            let Some(model) = self.build_model(k) else {
                self.repair(ev, k)?;
                continue;
            };
            self.h_prev = model.h.clone();

            if improve_geometry {
                improve_geometry = false;
                if let Some(j) = self.farthest_from(k, 2.0 * self.delta) {
                    if !self.improve_geometry(ev, &model, j)? {
                        if let Outcome::Done = self.reduce_rho() {
                            return Ok(Termination::XTol);
                        }
                    }
                    continue;
                }
            }

            let xopt = self.pts[k].clone();
            let fopt = self.fvals[k];
            let s = match self.step_box(&xopt) {
                Some((lo, hi)) => trsbox::solve(&model.g, &model.h, self.delta, Some(StepBox { lo: &lo, hi: &hi })),
                None => trsbox::solve(&model.g, &model.h, self.delta, None),
            };
            let snorm = s.norm();

            if snorm < 0.5 * self.rho {
                self.delta = (0.1 * self.delta).max(self.rho);
                if self.delta <= 1.5 * self.rho {
                    self.delta = self.rho;
                }
                if let Some(j) = self.farthest_from(k, 2.0 * self.delta) {
                    if self.improve_geometry(ev, &model, j)? {
                        continue;
                    }
                }
                if let Outcome::Done = self.reduce_rho() {
                    return Ok(Termination::XTol);
                }
                continue;
            }

            let mut x_new: Vec<f64> = xopt.iter().zip(s.iter()).map(|(a, b)| a + b).collect();
            self.clip(&mut x_new);
            if self.is_duplicate(&x_new) {
                self.delta = (0.5 * self.delta).max(self.rho);
                if let Outcome::Done = self.reduce_rho() {
                    return Ok(Termination::XTol);
                }
                continue;
            }
            let f_new = ev.eval(&x_new)?;
            let pred = -(model.g.dot(&s) + 0.5 * s.dot(&(&model.h * &s)));
            let ratio = if f_new.is_finite() && pred > 0.0 {
                (fopt - f_new) / pred
            } else {
                -1.0
            };

            if ratio < SHRINK_BELOW {
                self.delta *= 0.5;
            } else if ratio > GROW_ABOVE {
                self.delta = self.delta.max((2.0 * self.delta).min(2.0 * snorm));
            }
            if self.delta <= 1.5 * self.rho {
                self.delta = self.rho;
            }

            if f_new.is_finite() {
                self.insert(&model, x_new, f_new);
            }

            if ratio < SHRINK_BELOW {
                let k = self.best_index();
                if self.farthest_from(k, 2.0 * self.delta).is_some() {
                    improve_geometry = true;
                } else if self.delta <= self.rho && ratio <= 0.0 {
                    if let Outcome::Done = self.reduce_rho() {
                        return Ok(Termination::XTol);
                    }
                }
            }
        }
    }
}
