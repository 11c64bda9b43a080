//! Variable-order (1-5), variable-step BDF integrator in quasi-constant
//! step-size form (modified divided differences with NDF error constants),
//! Newton iteration with a finite-difference Jacobian that is reused across
//! steps until convergence degrades.

use nalgebra::{DMatrix, DVector};

const MAX_ORDER: usize = 5;
const NEWTON_MAXITER: usize = 4;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdfError {
    StepTooSmall,
    NonFinite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BdfStats {
    pub steps: usize,
    pub rhs_evals: usize,
    pub jac_evals: usize,
    pub lu_decomps: usize,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

/// Cumulative-product matrix used to rescale the difference array.
fn compute_r(order: usize, factor: f64) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(order + 1, order + 1);
    for j in 0..=order {
        m[(0, j)] = 1.0;
    }
    for i in 1..=order {
        for j in 1..=order {
            m[(i, j)] = (i as f64 - 1.0 - factor * j as f64) / i as f64;
        }
    }
    for i in 1..=order {
        for j in 0..=order {
            m[(i, j)] *= m[(i - 1, j)];
        }
    }
    m
}

fn change_d(d: &mut [Vec<f64>], order: usize, factor: f64) {
    let r = compute_r(order, factor);
    let u = compute_r(order, 1.0);
    let ru = r * u;
    let n = d[0].len();
    let mut out = vec![vec![0.0; n]; order + 1];
    for (j, row) in out.iter_mut().enumerate() {
        for (i, di) in d.iter().enumerate().take(order + 1) {
            let c = ru[(i, j)];
            if c != 0.0 {
                for (o, x) in row.iter_mut().zip(di) {
                    *o += c * x;
                }
            }
        }
    }
    for (dst, src) in d.iter_mut().zip(out) {
        *dst = src;
    }
}

pub struct Bdf {
    pub t: f64,
    pub y: Vec<f64>,
    t_bound: f64,
    rtol: f64,
    atol: Vec<f64>,
    max_step: f64,
    newton_tol: f64,
    d: Vec<Vec<f64>>,
    order: usize,
    h_abs: f64,
    n_equal_steps: usize,
    jac: DMatrix<f64>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    gamma: [f64; MAX_ORDER + 1],
    alpha: [f64; MAX_ORDER + 1],
    error_const: [f64; MAX_ORDER + 2],
    f_buf: Vec<f64>,
    pub stats: BdfStats,
}

impl Bdf {
    pub fn new<S: OdeSystem>(
        sys: &mut S,
        t0: f64,
        y0: Vec<f64>,
        t_bound: f64,
        rtol: f64,
        atol: Vec<f64>,
        first_step: Option<f64>,
    ) -> Self {
        let n = y0.len();
        let mut f0 = vec![0.0; n];
        sys.rhs(t0, &y0, &mut f0);
        let mut stats = BdfStats {
            rhs_evals: 1,
            ..Default::default()
        };
        let interval = t_bound - t0;
        let h_abs = match first_step {
            Some(h) => h.min(interval),
            None => {
                let (h, evals) = select_initial_step(sys, t0, &y0, &f0, interval, rtol, &atol);
                stats.rhs_evals += evals;
                h
            }
        };
        let kappa = [0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0];
        let mut gamma = [0.0; MAX_ORDER + 1];
        for i in 1..=MAX_ORDER {
            gamma[i] = gamma[i - 1] + 1.0 / i as f64;
        }
        let mut alpha = [0.0; MAX_ORDER + 1];
        let mut error_const = [0.0; MAX_ORDER + 2];
        for i in 0..=MAX_ORDER {
            alpha[i] = (1.0 - kappa[i]) * gamma[i];
            error_const[i] = kappa[i] * gamma[i] + 1.0 / (i + 1) as f64;
        }
        error_const[MAX_ORDER + 1] = 1.0 / (MAX_ORDER + 2) as f64;

        let mut d = vec![vec![0.0; n]; MAX_ORDER + 3];
        d[0].clone_from(&y0);
        for (di, fi) in d[1].iter_mut().zip(&f0) {
            *di = fi * h_abs;
        }
        let mut solver = Self {
            t: t0,
            y: y0,
            t_bound,
            rtol,
            atol,
            max_step: f64::INFINITY,
            newton_tol: (10.0 * f64::EPSILON / rtol).max(0.03f64.min(rtol.sqrt())),
            d,
            order: 1,
            h_abs,
            n_equal_steps: 0,
            jac: DMatrix::zeros(n, n),
            lu: None,
            gamma,
            alpha,
            error_const,
            f_buf: f0,
            stats,
        };
        let (t, y) = (solver.t, solver.y.clone());
        solver.jac = solver.fd_jacobian(sys, t, &y);
        solver
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_bound
    }

    fn fd_jacobian<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let mut f0 = vec![0.0; n];
        sys.rhs(t, y, &mut f0);
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let mut jac = DMatrix::zeros(n, n);
        let sq = f64::EPSILON.sqrt();
        for j in 0..n {
            let floor = (self.atol[j] / self.rtol).max(1e-8);
            let h = sq * y[j].abs().max(floor);
            yp[j] = y[j] + h;
            let h = yp[j] - y[j];
            sys.rhs(t, &yp, &mut fp);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f0[i]) / h;
            }
            yp[j] = y[j];
        }
        self.stats.rhs_evals += n + 1;
        self.stats.jac_evals += 1;
        jac
    }

    /// Advances one accepted step.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S) -> Result<(), BdfError> {
        let n = self.y.len();
        let t = self.t;
        let min_step = 10.0 * ((t.abs() * f64::EPSILON).max(f64::MIN_POSITIVE));
        let mut h_abs = self.h_abs;
        if h_abs > self.max_step {
            change_d(&mut self.d, self.order, self.max_step / h_abs);
            h_abs = self.max_step;
            self.n_equal_steps = 0;
        } else if h_abs < min_step {
            change_d(&mut self.d, self.order, min_step / h_abs);
            h_abs = min_step;
            self.n_equal_steps = 0;
        }
        let order = self.order;
        let mut current_jac = false;

        let mut y_new = vec![0.0; n];
        let mut d_corr = vec![0.0; n];
        let mut n_iter;
        let mut safety;
        let mut error_norm;
        let mut scale = vec![0.0; n];
        let t_new;
        loop {
            if h_abs < min_step {
                return Err(BdfError::StepTooSmall);
            }
            let mut tn = t + h_abs;
            if tn > self.t_bound {
                tn = self.t_bound;
                change_d(&mut self.d, order, (tn - t).abs() / h_abs);
                self.n_equal_steps = 0;
                self.lu = None;
            }
            let h = tn - t;
            h_abs = h.abs();

            let mut y_predict = vec![0.0; n];
            for di in self.d.iter().take(order + 1) {
                for (p, x) in y_predict.iter_mut().zip(di) {
                    *p += x;
                }
            }
            for i in 0..n {
                scale[i] = self.atol[i] + self.rtol * y_predict[i].abs();
            }
            let mut psi = vec![0.0; n];
            for k in 1..=order {
                let g = self.gamma[k];
                for (p, x) in psi.iter_mut().zip(&self.d[k]) {
                    *p += x * g;
                }
            }
            let a = self.alpha[order];
            psi.iter_mut().for_each(|p| *p /= a);
            let c = h / a;

            let mut converged;
            loop {
                if self.lu.is_none() {
                    let m = DMatrix::identity(n, n) - &self.jac * c;
                    self.lu = Some(m.lu());
                    self.stats.lu_decomps += 1;
                }
                let (ok, iters) =
                    self.newton(sys, tn, &y_predict, c, &psi, &scale, &mut y_new, &mut d_corr);
                converged = ok;
                n_iter = iters;
                if converged || current_jac {
                    break;
                }
                self.jac = self.fd_jacobian(sys, tn, &y_predict);
                self.lu = None;
                current_jac = true;
            }
            if !converged {
                let factor = 0.5;
                h_abs *= factor;
                change_d(&mut self.d, order, factor);
                self.n_equal_steps = 0;
                self.lu = None;
                continue;
            }

            safety = 0.9 * (2 * NEWTON_MAXITER + 1) as f64 / (2 * NEWTON_MAXITER + n_iter) as f64;
            for i in 0..n {
                scale[i] = self.atol[i] + self.rtol * y_new[i].abs();
            }
            let ec = self.error_const[order];
            error_norm = rms((0..n).map(|i| ec * d_corr[i] / scale[i]), n);
            if !error_norm.is_finite() {
                return Err(BdfError::NonFinite);
            }
            if error_norm > 1.0 {
                let factor = MIN_FACTOR.max(safety * error_norm.powf(-1.0 / (order as f64 + 1.0)));
                h_abs *= factor;
                change_d(&mut self.d, order, factor);
                self.n_equal_steps = 0;
            } else {
                t_new = tn;
                break;
            }
        }

        self.stats.steps += 1;
        self.n_equal_steps += 1;
        self.t = t_new;
        self.y.clone_from(&y_new);
        self.h_abs = h_abs;

        // D^{j+1} y_n = D^j y_n - D^j y_{n-1}; d_corr is D^{k+1} y_n.
        for i in 0..n {
            self.d[order + 2][i] = d_corr[i] - self.d[order + 1][i];
            self.d[order + 1][i] = d_corr[i];
        }
        for k in (0..=order).rev() {
            let (lo, hi) = self.d.split_at_mut(k + 1);
            for (a, b) in lo[k].iter_mut().zip(&hi[0]) {
                *a += b;
            }
        }

        if self.n_equal_steps < order + 1 {
            return Ok(());
        }

        let error_m_norm = if order > 1 {
            let ec = self.error_const[order - 1];
            rms((0..n).map(|i| ec * self.d[order][i] / scale[i]), n)
        } else {
            f64::INFINITY
        };
        let error_p_norm = if order < MAX_ORDER {
            let ec = self.error_const[order + 1];
            rms((0..n).map(|i| ec * self.d[order + 2][i] / scale[i]), n)
        } else {
            f64::INFINITY
        };
        let norms = [error_m_norm, error_norm, error_p_norm];
        let mut best = 0;
        let mut best_factor = f64::NEG_INFINITY;
        for (k, e) in norms.iter().enumerate() {
            let f = if *e == 0.0 {
                f64::INFINITY
            } else {
                e.powf(-1.0 / (order + k) as f64)
            };
            if f > best_factor {
                best_factor = f;
                best = k;
            }
        }
        let new_order = order + best - 1;
        self.order = new_order;
        let factor = MAX_FACTOR.min(safety * best_factor);
        self.h_abs *= factor;
        change_d(&mut self.d, new_order, factor);
        self.n_equal_steps = 0;
        self.lu = None;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn newton<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t_new: f64,
        y_predict: &[f64],
        c: f64,
        psi: &[f64],
        scale: &[f64],
        y: &mut [f64],
        d: &mut [f64],
    ) -> (bool, usize) {
        let n = y.len();
        y.copy_from_slice(y_predict);
        d.iter_mut().for_each(|x| *x = 0.0);
        let mut dy_norm_old: Option<f64> = None;
        let lu = self.lu.as_ref().expect("LU factorization present");
        let mut iters = 0;
        for k in 0..NEWTON_MAXITER {
            iters = k + 1;
            sys.rhs(t_new, y, &mut self.f_buf);
            self.stats.rhs_evals += 1;
            if !self.f_buf.iter().all(|v| v.is_finite()) {
                return (false, iters);
            }
            let b = DVector::from_iterator(n, (0..n).map(|i| c * self.f_buf[i] - psi[i] - d[i]));
            let Some(dy) = lu.solve(&b) else {
                return (false, iters);
            };
            let dy_norm = rms((0..n).map(|i| dy[i] / scale[i]), n);
            let rate = dy_norm_old.map(|old| dy_norm / old);
            if let Some(r) = rate {
                if r >= 1.0
                    || r.powi((NEWTON_MAXITER - k) as i32) / (1.0 - r) * dy_norm > self.newton_tol
                {
                    return (false, iters);
                }
            }
            for i in 0..n {
                y[i] += dy[i];
                d[i] += dy[i];
            }
            if dy_norm == 0.0 || rate.is_some_and(|r| r / (1.0 - r) * dy_norm < self.newton_tol) {
                return (true, iters);
            }
            dy_norm_old = Some(dy_norm);
        }
        (false, iters)
    }
}

fn select_initial_step<S: OdeSystem>(
    sys: &mut S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    interval: f64,
    rtol: f64,
    atol: &[f64],
) -> (f64, usize) {
    let n = y0.len();
    if interval <= 0.0 {
        return (0.0, 0);
    }
    let scale: Vec<f64> = (0..n).map(|i| atol[i] + y0[i].abs() * rtol).collect();
    let d0 = rms((0..n).map(|i| y0[i] / scale[i]), n);
    let d1 = rms((0..n).map(|i| f0[i] / scale[i]), n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(interval);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let d2 = rms((0..n).map(|i| (f1[i] - f0[i]) / scale[i]), n) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 2.0)
    };
    ((100.0 * h0).min(h1).min(interval), 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    /// Robertson's stiff chemical kinetics problem.
    struct Robertson;
    impl OdeSystem for Robertson {
        fn dim(&self) -> usize {
            3
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -0.04 * y[0] + 1e4 * y[1] * y[2];
            dy[2] = 3e7 * y[1] * y[1];
            dy[1] = -dy[0] - dy[2];
        }
    }

    fn run<S: OdeSystem>(sys: &mut S, y0: Vec<f64>, t_end: f64, rtol: f64, atol: f64) -> Bdf {
        let n = y0.len();
        let mut b = Bdf::new(sys, 0.0, y0, t_end, rtol, vec![atol; n], None);
        while !b.finished() {
            b.step(sys).unwrap();
        }
        b
    }

    #[test]
    fn exponential_decay() {
        let b = run(&mut Decay(3.0), vec![1.0], 2.0, 1e-8, 1e-12);
        let exact = (-6.0f64).exp();
        assert!((b.y[0] - exact).abs() < 1e-6 * exact.max(1e-3), "{}", b.y[0]);
        assert_eq!(b.t, 2.0);
    }

    #[test]
    fn robertson_reference() {
        // Reference values at t = 40 (Hairer & Wanner).
        let b = run(&mut Robertson, vec![1.0, 0.0, 0.0], 40.0, 1e-8, 1e-12);
        assert!((b.y[0] - 0.715_827_068_692_1).abs() < 1e-6);
        assert!((b.y[1] - 9.185_534_764_557e-6).abs() < 1e-9);
        assert!(((b.y[0] + b.y[1] + b.y[2]) - 1.0).abs() < 1e-12);
        assert!(b.stats.steps < 2000);
    }

    #[test]
    fn rescaling_identity() {
        // Factor 1 leaves the difference array untouched.
        let mut d = vec![vec![1.0, 2.0], vec![0.5, -0.25], vec![0.1, 0.2], vec![0.0, 0.0]];
        let orig = d.clone();
        change_d(&mut d, 2, 1.0);
        for (a, b) in d.iter().zip(&orig) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
