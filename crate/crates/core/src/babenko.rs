//! Spectrum of the linearized Babenko operator `S_1` on quasiperiodic
//! perturbations `f(u) = env(u) e^{i mu u}`.
//!
//! On a mapped grid the eigenproblem `S_1 f = xi f` becomes
//! `q_u^{1/2} A q_u^{1/2} h = xi h` with `h = u_q^{1/2} f`, a hermitian
//! problem in the plain coefficient inner product. Eigenpairs nearest a
//! shift come from Arnoldi on the MINRES-applied resolvent of that
//! operator, optionally restricted to one parity class.
//!
//! Envelopes are always taken with respect to the computational variable:
//! on a mapped grid `f = F(q) e^{i mu q}`, which is quasiperiodic in `u`
//! with the same `mu` because `u(q) - q` is periodic.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{KrylovError, SpectrumError};
use crate::krylov::{arnoldi_eigs, minres_refined, AdjointTag, ArnoldiOptions, FnOperator};
use crate::spectral::{check_mu, dot, norm, Grid, QuasiField, Symbols, C64};
use crate::stokes::{BranchState, NewtonOptions, StokesWave, WaveOps};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub xi: f64,
    /// Envelope at the wave's computational nodes, unit norm in the `u`
    /// measure, real and positive at the crest (or just right of it when
    /// the crest value vanishes).
    pub eigenfunction: QuasiField,
    pub mu: f64,
    pub parity: Parity,
    /// `||S_1 f - xi f|| / ||f||`.
    pub residual: f64,
    /// Symmetrized coefficients `h`, unit Euclidean norm.
    pub(crate) h: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchPointKind {
    TurningPoint,
    SecondaryBifurcation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint {
    pub s_star: f64,
    pub mu: f64,
    pub kind: BranchPointKind,
    pub bracket_width: f64,
}

#[derive(Clone, Debug)]
pub struct EigOptions {
    /// Target for `||S_1 f - xi f|| / ||f||`.
    pub tol: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Restrict to one parity class (only meaningful for `mu` in `{0, 1/2}`).
    pub parity: Option<Parity>,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { tol: 1e-10, inner_tol: 1e-12, inner_max_iter: 50_000, parity: None, seed: 0x5eed }
    }
}

/// `q_u^{1/2} A_mu q_u^{1/2}` for one wave and one Floquet band.
pub(crate) struct SymOp<'a> {
    ops: &'a WaveOps,
    sym: Symbols,
    mu: f64,
}

impl<'a> SymOp<'a> {
    pub(crate) fn new(w: &'a StokesWave, mu: f64) -> Self {
        let ops = w.ops();
        SymOp { ops, sym: Symbols::new(&ops.grid, mu), mu }
    }

    fn grid(&self) -> &Grid {
        &self.ops.grid
    }

    fn weight(&self, f: &[C64]) -> Vec<C64> {
        match &self.ops.sqrt_qu_pad {
            Some(w) => self.ops.grid.product(w, f, self.mu),
            None => f.to_vec(),
        }
    }

    pub(crate) fn apply(&self, h: &[C64]) -> Vec<C64> {
        let f = self.weight(h);
        let af = self.ops.apply_a(&self.sym, &f);
        self.weight(&af)
    }

    fn preconditioner(&self, sigma: f64) -> Vec<f64> {
        let c2 = self.ops.c * self.ops.c;
        let band = self.grid().band(self.mu);
        band.kappa
            .iter()
            .zip(&band.active)
            .map(|(&k, &a)| if a { (c2 * k.abs() - self.ops.g - sigma).abs().max(1e-3) } else { 1.0 })
            .collect()
    }

    fn project(&self, parity: Option<Parity>, h: &mut [C64]) {
        if let Some(p) = parity {
            project_parity(self.grid(), self.mu, p, h);
        }
    }
}

fn parity_defined(mu: f64) -> bool {
    mu == 0.0 || mu == 0.5
}

/// Internal coefficients of `f(-u)` for `mu` in `{0, 1/2}`: wavenumber `k`
/// pairs with `-k - 2 mu`, and the node phase contributes `(-1)^{2 mu}`.
fn reflect(grid: &Grid, mu: f64, c: &[C64]) -> Vec<C64> {
    let n = grid.n_modes();
    let shift = (2.0 * mu).round() as i64;
    let sign = if shift == 0 { 1.0 } else { -1.0 };
    let mut out = vec![ZERO; n];
    for (idx, slot) in out.iter_mut().enumerate() {
        if idx == n / 2 && mu == 0.0 {
            continue;
        }
        let k = grid.wavenumber(idx, mu);
        if let Some(j) = grid.slot(-k - shift, mu) {
            *slot = c[j] * sign;
        }
    }
    out
}

fn project_parity(grid: &Grid, mu: f64, parity: Parity, h: &mut [C64]) {
    let s = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
        Parity::None => return,
    };
    let r = reflect(grid, mu, h);
    h.iter_mut().zip(r).for_each(|(a, b)| *a = 0.5 * (*a + s * b));
}

fn classify(grid: &Grid, mu: f64, c: &[C64]) -> Parity {
    if !parity_defined(mu) {
        return Parity::None;
    }
    let r = reflect(grid, mu, c);
    let minus: f64 = c.iter().zip(&r).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let plus: f64 = c.iter().zip(&r).map(|(a, b)| (a + b).norm_sqr()).sum::<f64>().sqrt();
    if minus <= 1e-6 * plus {
        Parity::Even
    } else if plus <= 1e-6 * minus {
        Parity::Odd
    } else {
        Parity::None
    }
}

/// Even, odd or neither under `u -> -u`; `None` unless `mu` is `0` or `1/2`.
pub fn eigenfunction_parity(f: &QuasiField) -> Parity {
    classify(f.grid(), f.mu(), &f.internal_coeffs())
}

fn check_field(w: &StokesWave, f: &QuasiField) -> Result<(), SpectrumError> {
    if f.grid() != w.grid() {
        return Err(crate::error::SpectralError::GridMismatch(f.grid().n_modes(), w.n_modes()).into());
    }
    if f.samples().iter().any(|v| !v.is_finite()) {
        return Err(crate::error::SpectralError::NonFinite.into());
    }
    Ok(())
}

/// `S_{1,mu} f = (c^2 k_mu - g) f - g [y k_mu f + f k y + k_mu(y f)]` on the
/// envelope of `f`; on a mapped grid the result is `q_u A_mu f`.
pub fn apply_s1_mu(w: &StokesWave, f: &QuasiField) -> Result<QuasiField, SpectrumError> {
    check_field(w, f)?;
    let ops = w.ops();
    let sym = Symbols::new(w.grid(), f.mu());
    let af = ops.apply_a(&sym, &f.internal_coeffs());
    let mut out = w.grid().inverse(&af);
    if let Some(m) = w.aux() {
        out.iter_mut().zip(m.q_u()).for_each(|(v, q)| *v *= q);
    }
    Ok(QuasiField::from_samples(w.grid(), f.mu(), out)?)
}

/// `q_u^{1/2} A_mu (q_u^{1/2} h)` with every field sampled in `q`.
pub fn apply_symmetrized(w: &StokesWave, h: &QuasiField) -> Result<QuasiField, SpectrumError> {
    check_field(w, h)?;
    let op = SymOp::new(w, h.mu());
    Ok(QuasiField::from_internal(w.grid(), h.mu(), &op.apply(&h.internal_coeffs())))
}

/// Solves `(P A P - sigma) x = b` on the parity subspace.
fn resolvent_solve(
    op: &SymOp,
    sigma: f64,
    d: &[f64],
    parity: Option<Parity>,
    b: &[C64],
    opts: &EigOptions,
) -> Result<Vec<C64>, KrylovError> {
    let n = b.len();
    let shifted = FnOperator::new(n, AdjointTag::Hermitian, |x: &[C64]| {
        let mut y = op.apply(x);
        y.iter_mut().zip(x).for_each(|(a, b)| *a -= sigma * b);
        op.project(parity, &mut y);
        Ok(y)
    });
    let mut rhs = b.to_vec();
    op.project(parity, &mut rhs);
    let (mut x, rep) = minres_refined(&shifted, &rhs, Some(d), opts.inner_tol, opts.inner_max_iter)?;
    if !rep.converged && rep.relative_residual > 1e-6 {
        return Err(KrylovError::InnerSolve { iterations: rep.iterations, residual: rep.relative_residual });
    }
    op.project(parity, &mut x);
    Ok(x)
}

fn rayleigh(op: &SymOp, h: &[C64]) -> (f64, f64, Vec<C64>) {
    let ah = op.apply(h);
    let hn = norm(h);
    let xi = dot(h, &ah).re / (hn * hn);
    let r: f64 = ah.iter().zip(h).map(|(a, b)| (a - xi * b).norm_sqr()).sum::<f64>().sqrt() / hn;
    (xi, r, ah)
}

/// Unit norm, real positive at the crest (or at the next node when the
/// crest value vanishes).
fn normalize(op: &SymOp, h: &mut [C64]) -> Vec<C64> {
    let s = 1.0 / norm(h);
    h.iter_mut().for_each(|v| *v *= s);
    let f = op.grid().inverse(&op.weight(h));
    let n = f.len();
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let crest = n / 2;
    let anchor = if f[crest].norm() > 1e-6 * peak { f[crest] } else { f[crest + 1] };
    if anchor.norm() > 0.0 {
        let rot = anchor.conj() / anchor.norm();
        h.iter_mut().for_each(|v| *v *= rot);
    }
    op.weight(h)
}

fn make_pair(w: &StokesWave, op: &SymOp, mut h: Vec<C64>, mu: f64) -> EigenPair {
    let f_coeffs = normalize(op, &mut h);
    let (xi, residual, _) = rayleigh(op, &h);
    // unit norm in the u measure: int |f|^2 du = 2 pi sum |h_k|^2
    let scale = 1.0 / (2.0 * PI).sqrt();
    let f: Vec<C64> = f_coeffs.iter().map(|v| v * scale).collect();
    EigenPair {
        xi,
        eigenfunction: QuasiField::from_internal(w.grid(), mu, &f),
        mu,
        parity: classify(w.grid(), mu, &h),
        residual,
        h,
    }
}

/// Rayleigh quotient iteration from a good approximation.
fn polish(op: &SymOp, h: &mut Vec<C64>, parity: Option<Parity>, opts: &EigOptions) -> Result<(), KrylovError> {
    let (mut xi, mut res, _) = rayleigh(op, h);
    for _ in 0..4 {
        if res <= opts.tol {
            break;
        }
        let d = op.preconditioner(xi);
        let x = resolvent_solve(op, xi, &d, parity, h, opts)?;
        let nx = norm(&x);
        if !(nx > 0.0) || !nx.is_finite() {
            break;
        }
        let cand: Vec<C64> = x.iter().map(|v| v / nx).collect();
        let (xi2, res2, _) = rayleigh(op, &cand);
        if res2 >= res {
            break;
        }
        *h = cand;
        xi = xi2;
        res = res2;
    }
    let _ = xi;
    Ok(())
}

/// The `nev` eigenpairs of `S_{1,mu}` nearest `sigma`, ordered by distance.
pub fn eigs_nearest(
    w: &StokesWave,
    sigma: f64,
    mu: f64,
    nev: usize,
    v0: Option<&[C64]>,
    opts: &EigOptions,
) -> Result<Vec<EigenPair>, SpectrumError> {
    check_mu(mu)?;
    if !sigma.is_finite() {
        return Err(SpectrumError::InvalidInput(format!("shift must be finite, got {sigma}")));
    }
    let parity = match opts.parity {
        Some(Parity::None) | None => None,
        Some(p) if parity_defined(mu) => Some(p),
        Some(_) => {
            return Err(SpectrumError::InvalidInput(format!("parity restriction needs mu in {{0, 1/2}}, got {mu}")))
        }
    };
    let op = SymOp::new(w, mu);
    let n = w.n_modes();
    let d = op.preconditioner(sigma);
    let b = FnOperator::new(n, AdjointTag::Hermitian, |x: &[C64]| resolvent_solve(&op, sigma, &d, parity, x, opts));
    let mut start = match v0 {
        Some(v) if v.len() == n && norm(v) > 0.0 => v.to_vec(),
        _ => crate::krylov::random_vector(n, opts.seed),
    };
    if mu == 0.0 {
        start[n / 2] = ZERO;
    }
    op.project(parity, &mut start);
    if norm(&start) == 0.0 {
        start = crate::krylov::random_vector(n, opts.seed ^ 0x9e37);
        if mu == 0.0 {
            start[n / 2] = ZERO;
        }
        op.project(parity, &mut start);
    }
    let dim = if parity.is_some() { n / 2 } else { n };
    let ncv = (2 * nev + 12).min(dim).max(nev + 1).min(n);
    let nev_a = nev.min(ncv);
    let aopts = ArnoldiOptions { tol: 1e-11, max_restarts: 300, v0: Some(start), seed: opts.seed };
    let ritz = if ncv >= n { arnoldi_eigs(&b, nev_a, n, &aopts)? } else { arnoldi_eigs(&b, nev_a, ncv, &aopts)? };
    let mut pairs = Vec::with_capacity(nev);
    for rp in ritz.into_iter().take(nev) {
        let mut h = rp.vector;
        op.project(parity, &mut h);
        if norm(&h) == 0.0 {
            continue;
        }
        polish(&op, &mut h, parity, opts)?;
        pairs.push(make_pair(w, &op, h, mu));
    }
    pairs.sort_by(|a, b| (a.xi - sigma).abs().partial_cmp(&(b.xi - sigma).abs()).unwrap());
    if let Some(bad) = pairs.iter().find(|p| !(p.residual <= 1e-9)) {
        return Err(SpectrumError::NotConverged(bad.residual));
    }
    Ok(pairs)
}

/// The eigenpair of `S_{1,mu}` nearest `sigma`.
pub fn eig_nearest(
    w: &StokesWave,
    sigma: f64,
    mu: f64,
    v0: Option<&QuasiField>,
    opts: &EigOptions,
) -> Result<EigenPair, SpectrumError> {
    let start = match v0 {
        Some(f) => {
            check_field(w, f)?;
            if f.mu() != mu {
                return Err(SpectrumError::InvalidInput("start vector has a different mu".into()));
            }
            Some(to_symmetrized(w, f))
        }
        None => None,
    };
    eigs_nearest(w, sigma, mu, 1, start.as_deref(), opts)?
        .into_iter()
        .next()
        .ok_or(SpectrumError::NotConverged(f64::INFINITY))
}

/// `h = u_q^{1/2} f` in internal coefficients.
fn to_symmetrized(w: &StokesWave, f: &QuasiField) -> Vec<C64> {
    let c = f.internal_coeffs();
    match w.aux() {
        Some(m) => {
            let pn = w.grid().padded_nodes();
            let wt: Vec<f64> = pn.iter().map(|&q| m.u_q_at(q).sqrt()).collect();
            w.grid().product(&wt, &c, f.mu())
        }
        None => c,
    }
}

/// Envelope of `F(q) e^{i mu q}` evaluated at arbitrary `q`.
fn evaluate_quasi(grid: &Grid, mu: f64, c: &[C64], q: f64) -> C64 {
    let n = grid.n_modes();
    let mut acc = ZERO;
    for (idx, &v) in c.iter().enumerate() {
        if v == ZERO {
            continue;
        }
        let k = grid.wavenumber(idx, mu);
        // node phase: internal coefficients carry (-1)^k
        let phase = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        acc += v * phase * C64::from_polar(1.0, k as f64 * q);
    }
    let _ = n;
    acc
}

/// Moves symmetrized coefficients from wave `a` to wave `b`.
fn transfer(a: &StokesWave, b: &StokesWave, mu: f64, h: &[C64]) -> Vec<C64> {
    if a.grid() == b.grid() && a.l() == b.l() {
        return h.to_vec();
    }
    if a.l() == b.l() {
        if let Ok(v) = crate::spectral::resize_coeffs(a.grid(), b.grid(), h, mu) {
            return v;
        }
    }
    // physical f on a's grid, then sampled at b's nodes
    let op_a = SymOp::new(a, mu);
    let f = op_a.weight(h);
    let qb = b.grid().nodes();
    let vals: Vec<C64> = qb
        .iter()
        .map(|&q| {
            let u = b.aux().map_or(q, |m| m.u_at(q));
            let qa = a.aux().map_or(u, |m| m.q_at(u));
            let env = evaluate_quasi(a.grid(), mu, &f, qa) * C64::from_polar(1.0, mu * (qa - q));
            env * b.aux().map_or(1.0, |m| m.u_q_at(q).sqrt())
        })
        .collect();
    let mut out = b.grid().forward(&vals);
    if mu == 0.0 {
        let n = out.len();
        out[n / 2] = ZERO;
    }
    out
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    dot(a, b).norm() / (norm(a) * norm(b))
}

fn track_segment(
    a: &StokesWave,
    prev: &EigenPair,
    slope: f64,
    b: &StokesWave,
    branch: &BranchState,
    opts: &EigOptions,
    depth: usize,
    out: &mut Vec<(f64, EigenPair)>,
) -> Result<(), SpectrumError> {
    let mu = prev.mu;
    let v0 = transfer(a, b, mu, &prev.h);
    let sigma = prev.xi - 0.1 * slope.abs();
    let pair = eigs_nearest(b, sigma, mu, 1, Some(&v0), opts)?.into_iter().next();
    let ov = pair.as_ref().map_or(0.0, |p| overlap(&v0, &p.h));
    if let Some(p) = pair {
        if ov >= 0.5 {
            out.push((b.steepness(), p));
            return Ok(());
        }
    }
    if depth == 0 {
        return Err(SpectrumError::BranchJump(b.steepness(), ov));
    }
    let s_mid = 0.5 * (a.steepness() + b.steepness());
    let mid = branch.wave_at(s_mid, &NewtonOptions::default())?;
    let before = out.len();
    track_segment(a, prev, 0.5 * slope, &mid, branch, opts, depth - 1, out)?;
    let (mid_pair, new_slope) = {
        let last = &out[out.len() - 1].1;
        (last.clone(), if out.len() > before { last.xi - prev.xi } else { slope })
    };
    out.pop();
    track_segment(&mid, &mid_pair, new_slope, b, branch, opts, depth - 1, out)
}

/// Follows the eigenvalue of `seed` over every stored wave of `branch`.
/// Each step starts from the previous eigenvector with a shift biased
/// toward decreasing `xi`; an overlap below `1/2` triggers bisection of the
/// steepness step. Returns `(s, pair)` ordered by `s`.
pub fn track_eigenvalue_branch(
    branch: &BranchState,
    seed: &EigenPair,
    opts: &EigOptions,
) -> Result<Vec<(f64, EigenPair)>, SpectrumError> {
    let first = branch.waves.first().ok_or_else(|| SpectrumError::InvalidInput("empty branch".into()))?;
    if seed.eigenfunction.grid() != first.grid() {
        return Err(SpectrumError::InvalidInput("seed must live on the first wave of the branch".into()));
    }
    let mut opts = opts.clone();
    if opts.parity.is_none() && parity_defined(seed.mu) && seed.parity != Parity::None {
        opts.parity = Some(seed.parity);
    }
    let mut out = vec![(first.steepness(), seed.clone())];
    let mut slope = 0.0;
    for i in 1..branch.waves.len() {
        let prev = out[out.len() - 1].1.clone();
        let before = out.len();
        track_segment(&branch.waves[i - 1], &prev, slope, &branch.waves[i], branch, &opts, 6, &mut out)?;
        if out.len() > before {
            slope = out[out.len() - 1].1.xi - prev.xi;
        }
    }
    Ok(out)
}

/// Locates a zero of the eigenvalue nearest `0` by bisection in steepness.
/// At `mu` in `{0, 1/2}` the search is restricted to even eigenfunctions
/// unless `opts.parity` says otherwise, which excludes the translational
/// null vector `y_u`.
pub fn find_branch_point(
    branch: &BranchState,
    mu: f64,
    bracket: (f64, f64),
    tol_s: f64,
    opts: &EigOptions,
) -> Result<BranchPoint, SpectrumError> {
    check_mu(mu)?;
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol_s > 0.0) {
        return Err(SpectrumError::InvalidInput(format!("bad bracket ({lo}, {hi}) or tolerance {tol_s}")));
    }
    let mut opts = opts.clone();
    if opts.parity.is_none() && parity_defined(mu) {
        opts.parity = Some(Parity::Even);
    }
    let newton = NewtonOptions::default();
    let mut last: Option<(StokesWave, EigenPair)> = None;
    let eval = |s: f64, last: &mut Option<(StokesWave, EigenPair)>| -> Result<f64, SpectrumError> {
        let w = branch.wave_at(s, &newton)?;
        let v0 = last.as_ref().map(|(pw, p)| transfer(pw, &w, mu, &p.h));
        let p = eigs_nearest(&w, 0.0, mu, 1, v0.as_deref(), &opts)?
            .into_iter()
            .next()
            .ok_or(SpectrumError::NotConverged(f64::INFINITY))?;
        let xi = p.xi;
        *last = Some((w, p));
        Ok(xi)
    };
    let mut f_lo = eval(lo, &mut last)?;
    let mut f_hi = eval(hi, &mut last)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(SpectrumError::NoSignChange { lo, hi, xi_lo: f_lo, xi_hi: f_hi });
    }
    while hi - lo > tol_s {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid, &mut last)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // secant estimate inside the final bracket
    let s_star = lo + (hi - lo) * f_lo / (f_lo - f_hi);
    let kind = if mu == 0.0 { BranchPointKind::TurningPoint } else { BranchPointKind::SecondaryBifurcation };
    Ok(BranchPoint { s_star, mu, kind, bracket_width: hi - lo })
}

/// Writes `s,mu,xi,parity,residual` rows with 17 significant digits.
pub fn write_spectrum<W: Write>(out: &mut W, rows: &[(f64, EigenPair)]) -> std::io::Result<()> {
    writeln!(out, "s,mu,xi,parity,residual")?;
    for (s, p) in rows {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{},{:.16e}", s, p.mu, p.xi, p.parity.as_str(), p.residual)?;
    }
    Ok(())
}
