//! Matrix-free Krylov solvers in complex arithmetic: preconditioned MINRES
//! and conjugate residual for hermitian (possibly indefinite) systems, a
//! restarted Arnoldi eigensolver for general operators, and plain power
//! iteration on a resolvent.
//!
//! Preconditioners are positive diagonals `d` approximating `|A|`; the
//! solvers apply `d^{-1}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use rand_chacha::ChaCha8Rng;

use crate::error::KrylovError;
use crate::spectral::{dot, norm, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjointTag {
    Hermitian,
    Skew,
    General,
}

/// Abstract matrix-free operator on `C^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError>;
    fn adjoint_tag(&self) -> AdjointTag {
        AdjointTag::General
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    dim: usize,
    tag: AdjointTag,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[C64]) -> Result<Vec<C64>, KrylovError> + Sync,
{
    pub fn new(dim: usize, tag: AdjointTag, f: F) -> Self {
        FnOperator { dim, tag, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[C64]) -> Result<Vec<C64>, KrylovError> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        (self.f)(x)
    }

    fn adjoint_tag(&self) -> AdjointTag {
        self.tag
    }
}

/// Dense matrix as an operator; mostly for tests and oracles.
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
    pub tag: AdjointTag,
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        let v = DVector::from_column_slice(x);
        Ok((&self.matrix * v).as_slice().to_vec())
    }

    fn adjoint_tag(&self) -> AdjointTag {
        self.tag
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// The residual stopped decreasing before reaching the tolerance
    /// (rank deficiency or loss of definiteness).
    pub stagnated: bool,
    /// Residual estimate after every iteration.
    pub history: Vec<f64>,
}

fn check_system(
    a: &dyn LinearOperator,
    b: &[C64],
    precond: Option<&[f64]>,
    tol: f64,
) -> Result<(), KrylovError> {
    if b.len() != a.dim() {
        return Err(KrylovError::InvalidArgument(format!(
            "right-hand side has length {}, operator dimension is {}",
            b.len(),
            a.dim()
        )));
    }
    if !(tol > 0.0) {
        return Err(KrylovError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(d) = precond {
        if d.len() != a.dim() {
            return Err(KrylovError::InvalidArgument("preconditioner length mismatch".into()));
        }
        if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(KrylovError::NonPositivePreconditioner);
        }
    }
    Ok(())
}

fn precondition(d: Option<&[f64]>, r: &[C64]) -> Vec<C64> {
    match d {
        Some(d) => r.iter().zip(d).map(|(v, s)| v / s).collect(),
        None => r.to_vec(),
    }
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(alpha: f64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Preconditioned MINRES for hermitian `A`. The reported residual is
/// `||r||_{D^{-1}} / ||b||_{D^{-1}}`, which is non-increasing.
pub fn minres(
    a: &dyn LinearOperator,
    b: &[C64],
    precond: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, SolveReport), KrylovError> {
    check_system(a, b, precond, tol)?;
    let n = a.dim();
    let mut x = vec![ZERO; n];
    let mut r1 = b.to_vec();
    let mut y = precondition(precond, &r1);
    let beta1_sq = dot(&r1, &y).re;
    if beta1_sq < 0.0 {
        return Err(KrylovError::NonPositivePreconditioner);
    }
    let beta1 = beta1_sq.sqrt();
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        stagnated: false,
        history: Vec::new(),
    };
    if beta1 == 0.0 {
        return Ok((x, report));
    }

    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![ZERO; n];
    let mut w2 = vec![ZERO; n];
    let mut rel = 1.0;

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let mut v = y.clone();
        scale(s, &mut v);
        y = a.apply(&v)?;
        if itn >= 2 {
            axpy(C64::new(-beta / oldb, 0.0), &r1, &mut y);
        }
        let alfa = dot(&v, &y).re;
        axpy(C64::new(-alfa / beta, 0.0), &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = precondition(precond, &r2);
        oldb = beta;
        let beta_sq = dot(&r2, &y).re;
        if beta_sq < 0.0 {
            return Err(KrylovError::NonPositivePreconditioner);
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(C64::new(phi, 0.0), &w, &mut x);

        rel = phibar / beta1;
        report.history.push(rel);
        report.iterations = itn;
        if rel <= tol || beta <= f64::EPSILON * beta1 {
            report.relative_residual = rel;
            report.converged = rel <= tol;
            report.stagnated = !report.converged;
            return Ok((x, report));
        }
    }
    report.relative_residual = rel;
    report.converged = false;
    Ok((x, report))
}

/// MINRES restarted on the true residual until `||b - Ax|| / ||b|| <= tol`.
/// Each restart tightens the preconditioned-norm tolerance of the
/// correction solve.
pub fn minres_refined(
    a: &dyn LinearOperator,
    b: &[C64],
    precond: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, SolveReport), KrylovError> {
    check_system(a, b, precond, tol)?;
    let bn = norm(b);
    let mut x = vec![ZERO; a.dim()];
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        stagnated: false,
        history: Vec::new(),
    };
    if bn == 0.0 {
        return Ok((x, report));
    }
    let mut factor = 1.0;
    let mut best = f64::INFINITY;
    for round in 0..12 {
        let ax = if round == 0 { vec![ZERO; a.dim()] } else { a.apply(&x)? };
        let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let rn = norm(&r);
        let rel = rn / bn;
        report.history.push(rel);
        report.relative_residual = rel;
        if rel <= tol {
            report.converged = true;
            return Ok((x, report));
        }
        if rel > 0.5 * best || report.iterations >= max_iter {
            if rel >= best {
                report.stagnated = true;
            }
            if round > 1 {
                break;
            }
        }
        best = best.min(rel);
        let inner = (factor * tol * bn / rn).clamp(1e-16, 0.5);
        let (dx, rep) = minres(a, &r, precond, inner, max_iter.saturating_sub(report.iterations).max(1))?;
        report.iterations += rep.iterations;
        axpy(C64::new(1.0, 0.0), &dx, &mut x);
        factor *= 0.1;
    }
    report.converged = report.relative_residual <= tol;
    Ok((x, report))
}

/// Preconditioned conjugate residual for hermitian `A`. The reported
/// residual is the true `||r|| / ||b||`. Loss of definiteness in the
/// preconditioned Krylov space ends the iteration with `stagnated` set.
pub fn conjugate_residual(
    a: &dyn LinearOperator,
    b: &[C64],
    precond: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, SolveReport), KrylovError> {
    check_system(a, b, precond, tol)?;
    let n = a.dim();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        stagnated: false,
        history: Vec::new(),
    };
    if bnorm == 0.0 {
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = precondition(precond, &r);
    let mut az = a.apply(&z)?;
    let mut p = z.clone();
    let mut ap = az.clone();
    let mut num = dot(&z, &az).re;
    let mut rel = 1.0;
    let mut best = (rel, x.clone());
    let mut since_best = 0usize;

    for itn in 1..=max_iter {
        let map = precondition(precond, &ap);
        let den = dot(&ap, &map).re;
        if den <= 0.0 || num.abs() <= f64::EPSILON * den.abs() * 1e-4 {
            report.stagnated = true;
            report.iterations = itn - 1;
            break;
        }
        let alpha = num / den;
        axpy(C64::new(alpha, 0.0), &p, &mut x);
        axpy(C64::new(-alpha, 0.0), &ap, &mut r);
        rel = norm(&r) / bnorm;
        report.history.push(rel);
        report.iterations = itn;
        if rel < best.0 {
            best = (rel, x.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if rel <= tol {
            report.relative_residual = rel;
            report.converged = true;
            return Ok((x, report));
        }
        if since_best > 50 {
            report.stagnated = true;
            break;
        }
        z = precondition(precond, &r);
        az = a.apply(&z)?;
        let num_new = dot(&z, &az).re;
        if num == 0.0 {
            report.stagnated = true;
            break;
        }
        let beta = num_new / num;
        num = num_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
            ap[i] = az[i] + beta * ap[i];
        }
    }
    let (rel_best, x_best) = best;
    report.relative_residual = rel_best.min(rel);
    report.converged = report.relative_residual <= tol;
    let x = if rel_best < rel { x_best } else { x };
    Ok((x, report))
}

/// Eigen decomposition of a small dense complex matrix through its Schur
/// form. Eigenvectors are unit-norm.
pub fn dense_eig(a: &DMatrix<C64>) -> Vec<(C64, DVector<C64>)> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let (q, t) = a.clone().schur().unpack();
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let guard = f64::EPSILON * scale;
    (0..n)
        .map(|i| {
            let lam = t[(i, i)];
            let mut x = DVector::from_element(n, ZERO);
            x[i] = C64::new(1.0, 0.0);
            for j in (0..i).rev() {
                let mut acc = ZERO;
                for l in j + 1..=i {
                    acc += t[(j, l)] * x[l];
                }
                let mut d = t[(j, j)] - lam;
                if d.norm() < guard {
                    d = C64::new(guard, 0.0);
                }
                x[j] = -acc / d;
            }
            let mut v = &q * x;
            let nv = v.norm();
            v /= C64::new(nv, 0.0);
            (lam, v)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: C64,
    /// Unit-norm eigenvector.
    pub vector: Vec<C64>,
    /// Explicit `||Bv - theta v|| / |theta|`.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ArnoldiOptions {
    pub tol: f64,
    pub max_restarts: usize,
    pub v0: Option<Vec<C64>>,
    pub seed: u64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        ArnoldiOptions { tol: 1e-10, max_restarts: 200, v0: None, seed: 0x5eed }
    }
}

/// Default subspace size for `nev` wanted pairs.
pub fn default_ncv(nev: usize, dim: usize) -> usize {
    (4 * nev + 8).min(dim)
}

pub(crate) fn random_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

/// Orthogonalizes `w` against the columns in `basis` (two passes of
/// classical Gram-Schmidt) and returns the projection coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut h = vec![ZERO; basis.len()];
    for _ in 0..2 {
        for (i, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            h[i] += c;
            axpy(-c, v, w);
        }
    }
    h
}

/// Dominant-magnitude eigenpairs of a general operator by restarted
/// Arnoldi with full re-orthogonalization. Restarts keep the wanted Ritz
/// subspace (Krylov-Schur style). Pairs are sorted by decreasing `|theta|`.
pub fn arnoldi_eigs(
    b: &dyn LinearOperator,
    nev: usize,
    ncv: usize,
    opts: &ArnoldiOptions,
) -> Result<Vec<RitzPair>, KrylovError> {
    let n = b.dim();
    if nev == 0 || ncv > n || (nev >= ncv && ncv < n) || nev > ncv {
        return Err(KrylovError::InvalidArgument(format!(
            "need 0 < nev < ncv <= dim (or nev = ncv = dim), got nev={nev}, ncv={ncv}, dim={n}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(KrylovError::InvalidArgument("tolerance must be positive".into()));
    }
    let m = ncv;
    let mut seed = opts.seed;
    let mut start = match &opts.v0 {
        Some(v) if v.len() == n && norm(v) > 0.0 => v.clone(),
        Some(v) if v.len() != n => {
            return Err(KrylovError::InvalidArgument("start vector length mismatch".into()))
        }
        _ => random_vector(n, seed),
    };
    let s = 1.0 / norm(&start);
    scale(s, &mut start);

    let mut basis: Vec<Vec<C64>> = vec![start];
    // h[(i, j)]: projected matrix, rows 0..=m, columns 0..m
    let mut h = DMatrix::<C64>::zeros(m + 1, m);
    let mut k = 0usize;
    let mut last_pairs: Vec<(C64, DVector<C64>, f64)> = Vec::new();
    let mut exhausted = false;

    for _restart in 0..=opts.max_restarts {
        let mut j = k;
        while j < m {
            let mut w = b.apply(&basis[j])?;
            let wn0 = norm(&w);
            let coeffs = orthogonalize(&basis[..=j], &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] += c;
            }
            let wn = norm(&w);
            if wn <= 1e-13 * wn0.max(f64::MIN_POSITIVE) || wn == 0.0 {
                // invariant subspace: continue with a fresh direction
                h[(j + 1, j)] = ZERO;
                if j + 1 == n {
                    exhausted = true;
                    j += 1;
                    break;
                }
                seed = seed.wrapping_add(1);
                let mut fresh = random_vector(n, seed);
                orthogonalize(&basis[..=j], &mut fresh);
                let fs = 1.0 / norm(&fresh);
                scale(fs, &mut fresh);
                basis.truncate(j + 1);
                basis.push(fresh);
            } else {
                h[(j + 1, j)] = C64::new(wn, 0.0);
                scale(1.0 / wn, &mut w);
                basis.truncate(j + 1);
                basis.push(w);
            }
            j += 1;
        }
        let msize = j;
        let hm = h.view((0, 0), (msize, msize)).into_owned();
        let brow: Vec<C64> = (0..msize).map(|c| h[(msize, c)]).collect();
        let mut pairs: Vec<(C64, DVector<C64>, f64)> = dense_eig(&hm)
            .into_iter()
            .map(|(val, vec)| {
                let est: C64 = brow.iter().zip(vec.iter()).map(|(a, b)| a * b).sum();
                let est = if exhausted { 0.0 } else { est.norm() };
                (val, vec, est)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).unwrap_or(std::cmp::Ordering::Equal));

        let done = pairs
            .iter()
            .take(nev)
            .all(|(val, _, est)| *est <= opts.tol * val.norm().max(f64::MIN_POSITIVE) * 0.1);
        last_pairs = pairs.clone();
        if done || exhausted {
            break;
        }

        // keep the wanted Ritz subspace plus a few extra directions
        let keep = (nev + (msize - nev) / 2).min(msize - 1).max(nev);
        let y = DMatrix::from_columns(&pairs.iter().take(keep).map(|p| p.1.clone()).collect::<Vec<_>>());
        let z = orthonormal_columns(&y);
        let kk = z.ncols();
        if kk == 0 {
            break;
        }
        let g = z.adjoint() * &hm * &z;
        let new_row: Vec<C64> = (0..kk)
            .map(|c| (0..msize).map(|r| brow[r] * z[(r, c)]).sum())
            .collect();
        let mut new_basis: Vec<Vec<C64>> = (0..kk)
            .map(|c| {
                let mut v = vec![ZERO; n];
                for r in 0..msize {
                    axpy(z[(r, c)], &basis[r], &mut v);
                }
                v
            })
            .collect();
        new_basis.push(basis[msize].clone());
        basis = new_basis;
        h.fill(ZERO);
        for r in 0..kk {
            for c in 0..kk {
                h[(r, c)] = g[(r, c)];
            }
        }
        for (c, v) in new_row.into_iter().enumerate() {
            h[(kk, c)] = v;
        }
        k = kk;
    }

    let msize = basis.len() - 1;
    let mut out = Vec::with_capacity(nev);
    for (val, y, _) in last_pairs.into_iter().take(nev) {
        let mut v = vec![ZERO; n];
        for r in 0..msize.min(y.len()) {
            axpy(y[r], &basis[r], &mut v);
        }
        let nv = norm(&v);
        scale(1.0 / nv, &mut v);
        let bv = b.apply(&v)?;
        let res: f64 = bv.iter().zip(&v).map(|(a, x)| (a - val * x).norm_sqr()).sum::<f64>().sqrt();
        let residual = res / val.norm().max(f64::MIN_POSITIVE);
        out.push(RitzPair { value: val, vector: v, residual, converged: residual <= opts.tol });
    }
    Ok(out)
}

/// Orthonormal basis of the column span of `y` (modified Gram-Schmidt,
/// twice); nearly dependent columns are dropped.
fn orthonormal_columns(y: &DMatrix<C64>) -> DMatrix<C64> {
    let mut cols: Vec<DVector<C64>> = Vec::new();
    for c in 0..y.ncols() {
        let mut v = y.column(c).into_owned();
        let n0 = v.norm();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-10 * n0 {
            cols.push(v / C64::new(nv, 0.0));
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(y.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

#[derive(Clone, Debug)]
pub struct PowerResult {
    pub theta: C64,
    pub vector: Vec<C64>,
    /// `||Bv - theta v|| / |theta|` for the unit vector `v`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on a resolvent action. The start vector receives a
/// seeded perturbation of relative size `1e-8` so that every eigen
/// direction is present.
pub fn shift_invert_power(
    b: &dyn LinearOperator,
    v0: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<PowerResult, KrylovError> {
    let n = b.dim();
    if v0.len() != n {
        return Err(KrylovError::InvalidArgument("start vector length mismatch".into()));
    }
    let n0 = norm(v0);
    if n0 == 0.0 {
        return Err(KrylovError::InvalidArgument("start vector is zero".into()));
    }
    let noise = random_vector(n, 0xfeed);
    let nn = norm(&noise);
    let mut v: Vec<C64> = v0.iter().zip(&noise).map(|(a, e)| a / n0 + e * (1e-8 / nn)).collect();
    let s = 1.0 / norm(&v);
    scale(s, &mut v);
    let mut result = PowerResult { theta: ZERO, vector: v.clone(), residual: f64::INFINITY, iterations: 0, converged: false };
    for it in 1..=max_iter {
        let bv = b.apply(&v)?;
        let theta = dot(&v, &bv);
        let res: f64 = bv.iter().zip(&v).map(|(a, x)| (a - theta * x).norm_sqr()).sum::<f64>().sqrt();
        let rel = res / theta.norm().max(f64::MIN_POSITIVE);
        result = PowerResult { theta, vector: v.clone(), residual: rel, iterations: it, converged: rel <= tol };
        if rel <= tol {
            return Ok(result);
        }
        let nb = norm(&bv);
        if nb == 0.0 {
            return Ok(result);
        }
        v = bv;
        scale(1.0 / nb, &mut v);
    }
    Ok(result)
}
