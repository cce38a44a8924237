//! Dense oracle: explicit SR1 matrices, a full symmetric eigensolver and
//! the Cholesky-based Newton solver for the cubic model. Intended for
//! `n` up to a few thousand; every `O(n³)` loop honours the solve deadline
//! so oversized runs abort instead of hanging.

use std::time::Instant;

use crate::error::SolveError;
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::lqn::LqnState;
use crate::subproblem::{
    hard_case_alpha, newton_correction, SolutionCase, SolverOptions, SubproblemSolution, SubproblemSolver,
};

/// Symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn scaled_identity(n: usize, gamma: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = gamma;
        }
        Self { n, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::scaled_identity(n, 0.0);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Recursive SR1 from `γI` over the stored pairs of `state`, applied
    /// unconditionally (the state already vetted them).
    pub fn from_state(state: &LqnState) -> Self {
        let mut b = Self::scaled_identity(state.dim(), state.gamma());
        for (s, y) in state.s_vectors().iter().zip(state.y_vectors()) {
            b.sr1_update(s, y, 0.0);
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// In-place SR1 update; returns whether the pair passed the curvature test.
    pub fn sr1_update(&mut self, s: &[f64], y: &[f64], eps_curv: f64) -> bool {
        let bs = self.matvec(s);
        let r: Vec<f64> = y.iter().zip(&bs).map(|(a, b)| a - b).collect();
        let nr = norm(&r);
        let str_ = dot(s, &r);
        if nr == 0.0 || str_.abs() <= eps_curv * norm(s) * nr {
            return false;
        }
        let n = self.n;
        for i in 0..n {
            let ri = r[i] / str_;
            let row = &mut self.data[i * n..(i + 1) * n];
            axpy(ri, &r, row);
        }
        true
    }

    pub fn model_value(&self, g: &[f64], sigma: f64, s: &[f64], f0: f64) -> f64 {
        let ns = norm(s);
        f0 + dot(s, g) + 0.5 * dot(s, &self.matvec(s)) + sigma / 3.0 * ns * ns * ns
    }
}

/// Returns the SR1 update of `b` (or `b` itself when the pair is skipped).
pub fn dense_sr1_update(b: &DenseMatrix, s: &[f64], y: &[f64], eps_curv: f64) -> DenseMatrix {
    let mut out = b.clone();
    out.sr1_update(s, y, eps_curv);
    out
}

/// Ascending eigenvalues with eigenvectors stored as rows.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    n: usize,
    vectors: Vec<f64>,
}

impl DenseEigen {
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() > d)
}

/// Householder tridiagonalization followed by implicit QL.
pub fn symmetric_eigen(a: &DenseMatrix, deadline: Option<Instant>) -> Result<DenseEigen, SolveError> {
    let n = a.n;
    if n == 0 {
        return Ok(DenseEigen {
            values: Vec::new(),
            n,
            vectors: Vec::new(),
        });
    }
    let mut v = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let at = |i: usize, j: usize| i * n + j;

    // Tridiagonalize, accumulating the transformation in v.
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        if past(deadline) {
            return Err(SolveError::Timeout);
        }
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        if past(deadline) {
            return Err(SolveError::Timeout);
        }
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // Transpose so each eigenvector is a contiguous row during QL.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = v[i * n + j];
        }
    }
    drop(v);

    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        if past(deadline) {
            return Err(SolveError::Timeout);
        }
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > 60 {
                    return Err(SolveError::Domain("QL iteration failed to converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&w[i * n..(i + 1) * n]);
    }
    Ok(DenseEigen { values, n, vectors })
}

/// Lower Cholesky factor of `A + shift·I`, or `None` when not positive definite.
fn cholesky_shifted(a: &DenseMatrix, shift: f64, deadline: Option<Instant>) -> Result<Option<Vec<f64>>, SolveError> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        if j % 64 == 0 && past(deadline) {
            return Err(SolveError::Timeout);
        }
        let lj = j * n;
        let mut djj = a.data[lj + j] + shift - dot(&l[lj..lj + j], &l[lj..lj + j]);
        if !(djj > 0.0) {
            return Ok(None);
        }
        djj = djj.sqrt();
        l[lj + j] = djj;
        for i in j + 1..n {
            let li = i * n;
            let v = a.data[li + j] - dot(&l[li..li + j], &l[lj..lj + j]);
            l[li + j] = v / djj;
        }
    }
    Ok(Some(l))
}

fn forward(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let v = x[i] - dot(&l[i * n..i * n + i], &x[..i]);
        x[i] = v / l[i * n + i];
    }
    x
}

fn backward_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let xi = x[i] / l[i * n + i];
        x[i] = xi;
        for k in 0..i {
            x[k] -= l[i * n + k] * xi;
        }
    }
    x
}

struct EigenView<'a> {
    eig: &'a DenseEigen,
    coeffs: Vec<f64>,
    eps_hard_abs: f64,
    gap: f64,
}

impl EigenView<'_> {
    fn norms(&self, lam: f64) -> Result<(f64, f64), SolveError> {
        let mut s2 = 0.0;
        let mut w2 = 0.0;
        for (c, ev) in self.coeffs.iter().zip(&self.eig.values) {
            let d = ev + lam;
            if d <= self.gap && c.abs() <= self.eps_hard_abs {
                continue;
            }
            if d <= 0.0 {
                return Err(SolveError::Domain("shift left of the spectrum".into()));
            }
            s2 += c * c / (d * d);
            w2 += c * c / (d * d * d);
        }
        Ok((s2, w2))
    }

    fn step(&self, lam: f64) -> Vec<f64> {
        let n = self.eig.n;
        let mut s = vec![0.0; n];
        for (i, (c, ev)) in self.coeffs.iter().zip(&self.eig.values).enumerate() {
            let d = ev + lam;
            if d <= self.gap && c.abs() <= self.eps_hard_abs {
                continue;
            }
            axpy(-c / d, self.eig.vector(i), &mut s);
        }
        s
    }
}

/// Exact minimizer of the cubic model for an explicit `B`.
pub fn dense_solve_subproblem(
    b: &DenseMatrix,
    g: &[f64],
    sigma: f64,
    opts: &SolverOptions,
) -> Result<SubproblemSolution, SolveError> {
    let n = b.n;
    assert_eq!(g.len(), n);
    let eig = symmetric_eigen(b, opts.deadline)?;
    let l1 = eig.values.first().copied().unwrap_or(0.0);
    let g_norm = norm(g);
    let view = EigenView {
        coeffs: (0..n).map(|i| dot(eig.vector(i), g)).collect(),
        eig: &eig,
        eps_hard_abs: opts.eps_hard * g_norm,
        gap: 1e-10 * l1.abs().max(1.0),
    };

    let done = |s: Vec<f64>, lam: f64, case, iters| {
        let gs = dot(g, &s);
        let ss = norm_sq(&s);
        SubproblemSolution {
            model_decrease: -(0.5 * gs - 0.5 * lam * ss + sigma / 3.0 * ss * ss.sqrt()),
            s_star: s,
            lambda_star: lam,
            case,
            newton_iters: iters,
            lambda1: l1,
        }
    };

    if g_norm == 0.0 && l1 >= 0.0 {
        return Ok(done(vec![0.0; n], 0.0, SolutionCase::Interior, 0));
    }

    if l1 < 0.0 {
        let comp: f64 = view
            .coeffs
            .iter()
            .zip(&eig.values)
            .filter(|(_, ev)| **ev - l1 <= view.gap)
            .map(|(c, _)| c * c)
            .sum::<f64>()
            .sqrt();
        if comp <= view.eps_hard_abs {
            let mut s = view.step(-l1);
            let sn = norm(&s);
            let radius = -l1 / sigma;
            if (sn - radius).abs() < opts.nu * radius.max(1.0) {
                return Ok(done(s, -l1, SolutionCase::BoundarySaddle, 0));
            }
            if sn < radius {
                let alpha = hard_case_alpha(sn, l1, sigma)?;
                axpy(alpha, eig.vector(0), &mut s);
                return Ok(done(s, -l1, SolutionCase::HardCase, 0));
            }
        }
    }

    let lower = (-l1).max(0.0);
    let mut offset = opts.eps_shift;
    let mut lam = loop {
        let lam = lower + offset;
        if lam <= lower {
            return Err(SolveError::Domain("no admissible starting shift".into()));
        }
        let (s2, _) = view.norms(lam)?;
        if s2.sqrt() >= lam / sigma {
            break lam;
        }
        offset *= 0.5;
    };

    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    for iter in 0..=opts.max_newton {
        // (B + λI)s = −g and Lw = s through one Cholesky factorization;
        // an indefinite factorization near the pole falls back to the eigenbasis.
        let (s, w2) = match cholesky_shifted(b, lam, opts.deadline)? {
            Some(l) => {
                let z = forward(&l, n, &neg_g);
                let s = backward_transpose(&l, n, &z);
                let w = forward(&l, n, &s);
                (s, norm_sq(&w))
            }
            None => {
                let (_, w2) = view.norms(lam)?;
                (view.step(lam), w2)
            }
        };
        let sn = norm(&s);
        let r = lam / sigma;
        if (sn - r).abs() < opts.nu * r.max(1.0) {
            return Ok(done(s, lam, SolutionCase::Interior, iter));
        }
        if iter == opts.max_newton {
            break;
        }
        let next = lam + newton_correction(sn, w2, lam, sigma);
        if !(next > lower) {
            return Err(SolveError::Domain("Newton iterate left the admissible interval".into()));
        }
        lam = next;
    }
    Err(SolveError::MaxIterations(opts.max_newton))
}

/// Quasi-random search over the ball of radius `radius`, then coordinate
/// descent from the best sample. Meant for `n ≤ 3`.
pub fn brute_force_min(
    b: &DenseMatrix,
    g: &[f64],
    sigma: f64,
    radius: f64,
    samples: usize,
    f0: f64,
) -> (Vec<f64>, f64) {
    const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];
    let n = b.n;
    assert!(n <= PRIMES.len(), "brute force is for tiny problems");
    let model = |s: &[f64]| b.model_value(g, sigma, s, f0);
    let mut best = vec![0.0; n];
    let mut best_m = model(&best);
    let mut point = vec![0.0; n];
    for idx in 1..=samples {
        for (d, p) in point.iter_mut().zip(PRIMES) {
            *d = radius * (2.0 * halton(idx, p) - 1.0);
        }
        if norm(&point) > radius {
            continue;
        }
        let m = model(&point);
        if m < best_m {
            best_m = m;
            best.copy_from_slice(&point);
        }
    }

    let mut h = radius / (samples as f64).powf(1.0 / n.max(1) as f64);
    while h > 1e-13 * radius.max(1.0) {
        let mut improved = false;
        for i in 0..n {
            for dir in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[i] += dir * h;
                let m = model(&trial);
                if m < best_m {
                    best_m = m;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, best_m)
}

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Explicit-matrix solver; materializes `B` from the state's pairs.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseSr1Solver;

impl SubproblemSolver for DenseSr1Solver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(
        &self,
        state: &LqnState,
        g: &[f64],
        sigma: f64,
        opts: &SolverOptions,
    ) -> Result<SubproblemSolution, SolveError> {
        if past(opts.deadline) {
            return Err(SolveError::Timeout);
        }
        let b = DenseMatrix::from_state(state);
        dense_solve_subproblem(&b, g, sigma, opts)
    }
}
