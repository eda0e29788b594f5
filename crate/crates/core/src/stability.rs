//! Linear stability of Stokes waves under quasiperiodic perturbations.
//!
//! With canonical coordinates `w = (dP, dy)` the linearized system reads
//! `A w = lambda J w`, `A = diag(Q^{-1}, S_1)`, `Q = Omega^dag k^{-1} Omega`,
//! `J = [0 1; 1 -2cH]`. Eigenvalues near `i sigma` come from Arnoldi on
//! `(A - i sigma J)^{-1} J`, whose eigenvalues are `1/(lambda - i sigma)`.
//! The resolvent is applied through one hermitian solve with
//! `S_2 = S_1 + 2 i c sigma H + sigma^2 Q`.
//!
//! Time dependence is `e^{lambda t}`; a flat surface has
//! `lambda = i (c (k + mu) +- sqrt(g |k + mu|))`.
//!
//! Operators act on uniform-grid envelopes; waves stored on a mapped grid
//! are re-sampled to a uniform grid of the same size first.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{KrylovError, StabilityError};
use crate::krylov::{arnoldi_eigs, default_ncv, minres_refined, AdjointTag, ArnoldiOptions, FnOperator};
use crate::spectral::{apply_multiplier, check_mu, give_buffer, norm, sign, take_buffer, Grid, QuasiField, Symbols, C64};
use crate::stokes::StokesWave;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Perturbation envelopes `(d phi, d y)` sharing one Floquet parameter.
#[derive(Clone, Debug)]
pub struct PerturbationState {
    pub delta_phi: QuasiField,
    pub delta_y: QuasiField,
    pub mu: f64,
}

impl PerturbationState {
    pub fn new(delta_phi: QuasiField, delta_y: QuasiField) -> Result<Self, StabilityError> {
        if delta_phi.grid() != delta_y.grid() || delta_phi.mu() != delta_y.mu() {
            return Err(StabilityError::InvalidInput("components differ in grid or mu".into()));
        }
        let mu = delta_y.mu();
        Ok(PerturbationState { delta_phi, delta_y, mu })
    }
}

#[derive(Clone, Debug)]
pub struct StabilityEigenPair {
    pub lambda: C64,
    /// Eigenvector in `(d phi, d y)`.
    pub state: PerturbationState,
    /// Canonical momentum `dP = Omega^dag d phi`.
    pub momentum: QuasiField,
    pub mu: f64,
    /// `||lambda^2 Q dy - 2 c lambda H dy - S_1 dy|| / ||dy||`.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct StabilityOptions {
    /// Acceptance bound on the quadratic-eigenproblem residual.
    pub qep_tol: f64,
    pub arnoldi_tol: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { qep_tol: 1e-8, arnoldi_tol: 1e-11, inner_tol: 1e-12, inner_max_iter: 50_000, seed: 0x5eed }
    }
}

/// Padded-grid wave data shared by every Floquet band.
pub struct StabilityContext {
    wave: StokesWave,
    grid: Grid,
    c: f64,
    g: f64,
    xu_pad: Vec<f64>,
    yu_pad: Vec<f64>,
    inv_zu2_pad: Vec<f64>,
    min_zu2: f64,
}

impl StabilityContext {
    pub fn new(w: &StokesWave) -> Result<Self, StabilityError> {
        let wave = if w.aux().is_some() { w.to_uniform()? } else { w.clone() };
        let grid = wave.grid().clone();
        let sym = Symbols::new(&grid, 0.0);
        let y = wave.ops().y.clone();
        let xu = grid.pad_real(&apply_multiplier(&sym.abs, &y));
        let xu_pad: Vec<f64> = xu.iter().map(|v| 1.0 + v).collect();
        let yu_pad = grid.pad_real(&apply_multiplier(&sym.deriv, &y));
        let zu2: Vec<f64> = xu_pad.iter().zip(&yu_pad).map(|(a, b)| a * a + b * b).collect();
        let min_zu2 = zu2.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(StabilityContext {
            c: wave.c(),
            g: wave.g(),
            inv_zu2_pad: zu2.iter().map(|v| 1.0 / v).collect(),
            wave,
            grid,
            xu_pad,
            yu_pad,
            min_zu2,
        })
    }

    pub fn wave(&self) -> &StokesWave {
        &self.wave
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn band(&self, mu: f64) -> Result<BandOps<'_>, StabilityError> {
        check_mu(mu)?;
        Ok(BandOps { ctx: self, sym: Symbols::new(&self.grid, mu), mu })
    }
}

/// Operators of one Floquet band. At `mu = 0`, `k^{-1}` inside `Q` acts
/// as the pseudo-inverse (mean slot annihilated).
pub struct BandOps<'a> {
    ctx: &'a StabilityContext,
    sym: Symbols,
    mu: f64,
}

impl BandOps<'_> {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn lift(
        &self,
        f: &QuasiField,
        op: impl FnOnce(&[C64]) -> Result<Vec<C64>, StabilityError>,
    ) -> Result<QuasiField, StabilityError> {
        check_field(self.ctx, f)?;
        if f.mu() != self.mu {
            return Err(StabilityError::InvalidInput(format!("field mu {} differs from band mu {}", f.mu(), self.mu)));
        }
        let coeffs = f.internal_coeffs();
        let out = op(&coeffs)?;
        let result = field(f, &out);
        give_buffer(coeffs);
        give_buffer(out);
        Ok(result)
    }

    pub fn apply_omega21(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.omega(c)))
    }

    pub fn apply_omega21_dagger(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.omega_dagger(c)))
    }

    pub fn apply_r12_dagger(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| self.r12_dagger(c))
    }

    pub fn apply_q(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.q(c)))
    }

    pub fn apply_s1(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.s1(c)))
    }

    pub fn apply_hilbert(&self, f: &QuasiField) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.hilbert(c)))
    }

    pub fn apply_s2(&self, f: &QuasiField, sigma: f64) -> Result<QuasiField, StabilityError> {
        self.lift(f, |c| Ok(self.s2(sigma, c)))
    }

    fn n(&self) -> usize {
        self.ctx.grid.n_modes()
    }

    pub(crate) fn hilbert(&self, f: &[C64]) -> Vec<C64> {
        apply_multiplier(&self.sym.hilbert, f)
    }

    /// `x_u f + y_u H f`.
    pub(crate) fn omega(&self, f: &[C64]) -> Vec<C64> {
        let grid = &self.ctx.grid;
        let mut pf = grid.pad(f, self.mu);
        let hf = self.hilbert(f);
        let phf = grid.pad(&hf, self.mu);
        give_buffer(hf);
        for j in 0..pf.len() {
            pf[j] = pf[j] * self.ctx.xu_pad[j] + phf[j] * self.ctx.yu_pad[j];
        }
        give_buffer(phf);
        grid.truncate(pf, self.mu)
    }

    /// Band-limited `x_u f` and `y_u f`.
    fn xu_yu_products(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let grid = &self.ctx.grid;
        let mut px = grid.pad(f, self.mu);
        let mut py = take_buffer(px.len());
        for j in 0..px.len() {
            py[j] = px[j] * self.ctx.yu_pad[j];
            px[j] *= self.ctx.xu_pad[j];
        }
        (grid.truncate(px, self.mu), grid.truncate(py, self.mu))
    }

    /// `x_u f - H(y_u f)`.
    pub(crate) fn omega_dagger(&self, f: &[C64]) -> Vec<C64> {
        let (mut a, b) = self.xu_yu_products(f);
        let hb = self.hilbert(&b);
        a.iter_mut().zip(&hb).for_each(|(p, q)| *p -= q);
        give_buffer(b);
        give_buffer(hb);
        a
    }

    /// `(x_u f + H(y_u f)) / |z_u|^2`.
    pub(crate) fn r12_dagger(&self, f: &[C64]) -> Result<Vec<C64>, StabilityError> {
        if self.ctx.min_zu2 < 1e-8 {
            return Err(StabilityError::NearLimiting(self.ctx.min_zu2));
        }
        let (mut num, b) = self.xu_yu_products(f);
        let hb = self.hilbert(&b);
        num.iter_mut().zip(&hb).for_each(|(p, q)| *p += q);
        Ok(self.ctx.grid.product(&self.ctx.inv_zu2_pad, &num, self.mu))
    }

    /// `Omega^dag k^{-1} Omega f`, with the mean annihilated at `mu = 0`.
    pub(crate) fn q(&self, f: &[C64]) -> Vec<C64> {
        let of = self.omega(f);
        let kof = apply_multiplier(&self.sym.inv, &of);
        give_buffer(of);
        let out = self.omega_dagger(&kof);
        give_buffer(kof);
        out
    }

    pub(crate) fn s1(&self, f: &[C64]) -> Vec<C64> {
        self.ctx.wave.ops().apply_a(&self.sym, f)
    }

    pub(crate) fn s2(&self, sigma: f64, f: &[C64]) -> Vec<C64> {
        let mut out = self.s1(f);
        let hf = self.hilbert(f);
        let a = I * (2.0 * self.ctx.c * sigma);
        out.iter_mut().zip(&hf).for_each(|(o, h)| *o += a * h);
        give_buffer(hf);
        if sigma != 0.0 {
            let qf = self.q(f);
            let s2 = sigma * sigma;
            out.iter_mut().zip(&qf).for_each(|(o, q)| *o += s2 * q);
            give_buffer(qf);
        }
        out
    }

    pub(crate) fn j(&self, w1: &[C64], w2: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let hw = self.hilbert(w2);
        let c2 = 2.0 * self.ctx.c;
        (w2.to_vec(), w1.iter().zip(&hw).map(|(a, h)| a - c2 * h).collect())
    }

    /// Flat-surface symbol of `S_2`, floored at `1e-3`.
    fn s2_preconditioner(&self, sigma: f64) -> Vec<f64> {
        let (c, g) = (self.ctx.c, self.ctx.g);
        let band = self.ctx.grid.band(self.mu);
        band.kappa
            .iter()
            .zip(&band.active)
            .map(|(&k, &a)| {
                if !a {
                    return 1.0;
                }
                let d = c * c * k.abs() - g - 2.0 * c * sigma * sign(k) + sigma * sigma / k.abs().max(1e-6);
                d.abs().max(1e-3)
            })
            .collect()
    }

    /// `S_2^{-1} b` by refined MINRES.
    pub(crate) fn solve_s2(&self, sigma: f64, b: &[C64], opts: &StabilityOptions) -> Result<Vec<C64>, KrylovError> {
        let op = FnOperator::new(self.n(), AdjointTag::Hermitian, |x: &[C64]| Ok(self.s2(sigma, x)));
        let d = self.s2_preconditioner(sigma);
        let (x, rep) = minres_refined(&op, b, Some(&d), opts.inner_tol, opts.inner_max_iter)?;
        if !rep.converged && rep.relative_residual > 1e-8 {
            return Err(KrylovError::InnerSolve { iterations: rep.iterations, residual: rep.relative_residual });
        }
        Ok(x)
    }

    /// `(A - i sigma J)^{-1} [f; g] = [Q f; 0] + [i sigma Q; 1] S_2^{-1}(g + i sigma Q f)`.
    pub(crate) fn block_solve(
        &self,
        sigma: f64,
        f: &[C64],
        g: &[C64],
        opts: &StabilityOptions,
    ) -> Result<(Vec<C64>, Vec<C64>), KrylovError> {
        let qf = self.q(f);
        let rhs: Vec<C64> = g.iter().zip(&qf).map(|(a, q)| a + I * sigma * q).collect();
        let b = self.solve_s2(sigma, &rhs, opts)?;
        let qb = self.q(&b);
        let top = qf.iter().zip(&qb).map(|(a, q)| a + I * sigma * q).collect();
        Ok((top, b))
    }

    fn qep_residual(&self, lambda: C64, dy: &[C64]) -> f64 {
        let q = self.q(dy);
        let h = self.hilbert(dy);
        let s = self.s1(dy);
        let c2 = 2.0 * self.ctx.c;
        let r: Vec<C64> = (0..dy.len()).map(|i| lambda * lambda * q[i] - c2 * lambda * h[i] - s[i]).collect();
        norm(&r) / norm(dy)
    }
}

fn check_field(ctx: &StabilityContext, f: &QuasiField) -> Result<(), StabilityError> {
    if f.grid() != &ctx.grid {
        return Err(crate::error::SpectralError::GridMismatch(f.grid().n_modes(), ctx.grid.n_modes()).into());
    }
    if f.samples().iter().any(|v| !v.is_finite()) {
        return Err(crate::error::SpectralError::NonFinite.into());
    }
    Ok(())
}

fn with_band<T>(
    w: &StokesWave,
    f: &QuasiField,
    op: impl FnOnce(&BandOps, &[C64]) -> Result<T, StabilityError>,
) -> Result<T, StabilityError> {
    let ctx = StabilityContext::new(w)?;
    check_field(&ctx, f)?;
    let band = ctx.band(f.mu())?;
    op(&band, &f.internal_coeffs())
}

fn field(f: &QuasiField, c: &[C64]) -> QuasiField {
    QuasiField::from_internal(f.grid(), f.mu(), c)
}

/// `Omega_{21,mu} f = x_u f + y_u H_mu f`.
pub fn apply_omega21_mu(w: &StokesWave, f: &QuasiField) -> Result<QuasiField, StabilityError> {
    with_band(w, f, |b, c| Ok(field(f, &b.omega(c))))
}

/// `Omega_{21,mu}^dag f = x_u f - H_mu(y_u f)`.
pub fn apply_omega21_dagger_mu(w: &StokesWave, f: &QuasiField) -> Result<QuasiField, StabilityError> {
    with_band(w, f, |b, c| Ok(field(f, &b.omega_dagger(c))))
}

/// `R_{12,mu}^dag f = (x_u f + H_mu(y_u f)) / |z_u|^2`.
pub fn apply_r12_dagger_mu(w: &StokesWave, f: &QuasiField) -> Result<QuasiField, StabilityError> {
    with_band(w, f, |b, c| Ok(field(f, &b.r12_dagger(c)?)))
}

/// `Q_mu = Omega^dag k_mu^{-1} Omega`. At `mu = 0` the mean of `Omega f`
/// must vanish (to `1e-10` relative to `||Omega f||`).
pub fn apply_q_mu(w: &StokesWave, f: &QuasiField) -> Result<QuasiField, StabilityError> {
    with_band(w, f, |b, c| {
        if b.mu == 0.0 {
            let of = b.omega(c);
            let mean = of[0].norm();
            if mean > 1e-10 * norm(&of).max(1.0) {
                return Err(StabilityError::ZeroMode(mean));
            }
        }
        Ok(field(f, &b.q(c)))
    })
}

/// `S_{2,mu} = S_{1,mu} + 2 i c sigma H_mu + sigma^2 Q_mu` (zero mode of
/// `k^{-1}` annihilated at `mu = 0`).
pub fn apply_s2_mu(w: &StokesWave, f: &QuasiField, sigma: f64) -> Result<QuasiField, StabilityError> {
    if !sigma.is_finite() {
        return Err(StabilityError::InvalidInput(format!("sigma must be finite, got {sigma}")));
    }
    with_band(w, f, |b, c| Ok(field(f, &b.s2(sigma, c))))
}

/// `J_mu (w_1, w_2) = (w_2, w_1 - 2 c H_mu w_2)`.
pub fn apply_j_mu(w: &StokesWave, state: &PerturbationState) -> Result<PerturbationState, StabilityError> {
    let ctx = StabilityContext::new(w)?;
    check_field(&ctx, &state.delta_phi)?;
    check_field(&ctx, &state.delta_y)?;
    let band = ctx.band(state.mu)?;
    let (a, b) = band.j(&state.delta_phi.internal_coeffs(), &state.delta_y.internal_coeffs());
    PerturbationState::new(field(&state.delta_y, &a), field(&state.delta_y, &b))
}

/// `(R M R^dag - i sigma J)^{-1} (f, g)` in canonical coordinates.
pub fn block_shift_invert(
    w: &StokesWave,
    state: &PerturbationState,
    sigma: f64,
    opts: &StabilityOptions,
) -> Result<PerturbationState, StabilityError> {
    let ctx = StabilityContext::new(w)?;
    check_field(&ctx, &state.delta_phi)?;
    check_field(&ctx, &state.delta_y)?;
    let band = ctx.band(state.mu)?;
    let (a, b) = band.block_solve(sigma, &state.delta_phi.internal_coeffs(), &state.delta_y.internal_coeffs(), opts)?;
    PerturbationState::new(field(&state.delta_y, &a), field(&state.delta_y, &b))
}

/// Shift-invert Arnoldi for the `nev` stability eigenvalues nearest
/// `i sigma`. A stagnating inner solve nudges `sigma` by
/// `d (1 + |sigma|)` with `d = 1e-6, 1e-4, 1e-2` in turn.
pub fn qep_eigs_near(
    ctx: &StabilityContext,
    mu: f64,
    sigma: f64,
    nev: usize,
    opts: &StabilityOptions,
) -> Result<Vec<StabilityEigenPair>, StabilityError> {
    if !sigma.is_finite() {
        return Err(StabilityError::InvalidInput(format!("sigma must be finite, got {sigma}")));
    }
    let band = ctx.band(mu)?;
    let mut sigma = sigma;
    let mut nudge = 1e-6;
    loop {
        match qep_attempt(&band, sigma, nev, opts) {
            Err(StabilityError::Krylov(KrylovError::InnerSolve { .. })) if nudge < 1e-1 => {
                sigma += nudge * (1.0 + sigma.abs());
                nudge *= 100.0;
            }
            other => return other,
        }
    }
}

fn qep_attempt(
    band: &BandOps,
    sigma: f64,
    nev: usize,
    opts: &StabilityOptions,
) -> Result<Vec<StabilityEigenPair>, StabilityError> {
    let n = band.n();
    let dim = 2 * n;
    let inactive = |v: &mut [C64]| {
        if band.mu == 0.0 {
            v[n / 2] = ZERO;
            v[n + n / 2] = ZERO;
        }
    };
    let op = FnOperator::new(dim, AdjointTag::General, |x: &[C64]| {
        let (a, b) = band.j(&x[..n], &x[n..]);
        let (p, q) = band.block_solve(sigma, &a, &b, opts)?;
        let mut out = p;
        out.extend(q);
        Ok(out)
    });
    let mut start = crate::krylov::random_vector(dim, opts.seed);
    inactive(&mut start);
    let nev = nev.min(dim - 1).max(1);
    let ncv = default_ncv(nev, dim);
    let aopts = ArnoldiOptions { tol: opts.arnoldi_tol, max_restarts: 300, v0: Some(start), seed: opts.seed };
    let ritz = arnoldi_eigs(&op, nev, ncv, &aopts)?;
    let grid = &band.ctx.grid;
    let mut out = Vec::with_capacity(ritz.len());
    for rp in ritz {
        if rp.value.norm() == 0.0 {
            continue;
        }
        let lambda = I * sigma + 1.0 / rp.value;
        let dp = &rp.vector[..n];
        let dy = &rp.vector[n..];
        let residual = if norm(dy) > 0.0 { band.qep_residual(lambda, dy) } else { f64::INFINITY };
        let dphi = band.r12_dagger(dp)?;
        let state = PerturbationState {
            delta_phi: QuasiField::from_internal(grid, band.mu, &dphi),
            delta_y: QuasiField::from_internal(grid, band.mu, dy),
            mu: band.mu,
        };
        out.push(StabilityEigenPair {
            lambda,
            state,
            momentum: QuasiField::from_internal(grid, band.mu, dp),
            mu: band.mu,
            residual,
            converged: residual <= opts.qep_tol,
        });
    }
    Ok(out)
}

/// How the imaginary shift is chosen at each Floquet parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum ShiftPolicy {
    /// `sigma = 0`.
    Zero,
    /// `sigma` follows `Im lambda` of the most unstable pair at the previous
    /// `mu`, starting from the given value; the sweep runs sequentially.
    Track(f64),
    /// Every shift in the list, results merged.
    Ladder(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct FloquetSweep {
    pub mu_values: Vec<f64>,
    /// Converged pairs per `mu`, in schedule order.
    pub spectra: Vec<Vec<StabilityEigenPair>>,
    /// `(mu, message)` for failed solves and rejected pairs.
    pub failures: Vec<(f64, String)>,
    /// `(mu*, gamma*)`: largest `Re lambda` over the stored pairs.
    pub max_growth: (f64, f64),
}

/// `n` equispaced values from `a` to `b` inclusive.
pub fn mu_linear(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` log-spaced values from `a` to `b` inclusive (`0 < a < b`).
pub fn mu_log(a: f64, b: f64, n: usize) -> Vec<f64> {
    mu_linear(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Flat-surface frequencies `c (k + mu) +- sqrt(g |k + mu|)` for `|k| <= kmax`.
pub fn dispersion_frequencies(c: f64, g: f64, mu: f64, kmax: i64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in -kmax..=kmax {
        let kappa = k as f64 + mu;
        let r = (g * kappa.abs()).sqrt();
        out.push(c * kappa + r);
        if r > 0.0 {
            out.push(c * kappa - r);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Appends pairs of `new` not already present (to `1e-8` relative).
fn merge(into: &mut Vec<StabilityEigenPair>, new: Vec<StabilityEigenPair>) {
    for p in new {
        let dup = into.iter().any(|q| (q.lambda - p.lambda).norm() <= 1e-8 * (1.0 + p.lambda.norm()));
        if !dup {
            into.push(p);
        }
    }
}

fn solve_at(
    ctx: &StabilityContext,
    mu: f64,
    shifts: &[f64],
    nev: usize,
    opts: &StabilityOptions,
) -> (Vec<StabilityEigenPair>, Vec<(f64, String)>) {
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for &sigma in shifts {
        match qep_eigs_near(ctx, mu, sigma, nev, opts) {
            Ok(ps) => {
                let rejected = ps.iter().filter(|p| !p.converged).count();
                if rejected > 0 {
                    failures.push((mu, format!("sigma = {sigma}: {rejected} unconverged pairs dropped")));
                }
                merge(&mut pairs, ps.into_iter().filter(|p| p.converged).collect());
            }
            Err(e) => failures.push((mu, format!("sigma = {sigma}: {e}"))),
        }
    }
    pairs.sort_by(|a, b| {
        (a.lambda.im, a.lambda.re).partial_cmp(&(b.lambda.im, b.lambda.re)).unwrap_or(std::cmp::Ordering::Equal)
    });
    (pairs, failures)
}

fn most_unstable(pairs: &[StabilityEigenPair]) -> Option<&StabilityEigenPair> {
    pairs.iter().max_by(|a, b| a.lambda.re.partial_cmp(&b.lambda.re).unwrap_or(std::cmp::Ordering::Equal))
}

/// Stability spectra over a schedule of Floquet parameters. Failures are
/// recorded and the sweep continues. Independent `mu` values run in
/// parallel; results are kept in schedule order.
pub fn floquet_sweep(
    w: &StokesWave,
    mu_schedule: &[f64],
    policy: &ShiftPolicy,
    nev: usize,
    opts: &StabilityOptions,
) -> Result<FloquetSweep, StabilityError> {
    for &mu in mu_schedule {
        check_mu(mu)?;
    }
    let ctx = StabilityContext::new(w)?;
    let results: Vec<(Vec<StabilityEigenPair>, Vec<(f64, String)>)> = match policy {
        ShiftPolicy::Zero => mu_schedule.par_iter().map(|&mu| solve_at(&ctx, mu, &[0.0], nev, opts)).collect(),
        ShiftPolicy::Ladder(shifts) => {
            mu_schedule.par_iter().map(|&mu| solve_at(&ctx, mu, shifts, nev, opts)).collect()
        }
        ShiftPolicy::Track(start) => {
            let mut sigma = *start;
            let mut all = Vec::with_capacity(mu_schedule.len());
            for &mu in mu_schedule {
                let r = solve_at(&ctx, mu, &[sigma], nev, opts);
                if let Some(p) = most_unstable(&r.0) {
                    if p.lambda.re > 0.0 {
                        sigma = p.lambda.im;
                    }
                }
                all.push(r);
            }
            all
        }
    };
    let mut sweep = FloquetSweep {
        mu_values: mu_schedule.to_vec(),
        spectra: Vec::with_capacity(results.len()),
        failures: Vec::new(),
        max_growth: (f64::NAN, f64::NEG_INFINITY),
    };
    for (i, (pairs, fails)) in results.into_iter().enumerate() {
        if let Some(p) = most_unstable(&pairs) {
            if p.lambda.re > sweep.max_growth.1 {
                sweep.max_growth = (mu_schedule[i], p.lambda.re);
            }
        }
        sweep.failures.extend(fails);
        sweep.spectra.push(pairs);
    }
    Ok(sweep)
}

/// Writes a header echoing the wave, then `mu,re_lambda,im_lambda,residual,converged`
/// rows with 17 significant digits.
pub fn write_sweep<W: Write>(out: &mut W, w: &StokesWave, sweep: &FloquetSweep) -> std::io::Result<()> {
    writeln!(
        out,
        "# N = {}, c = {:.16e}, s = {:.16e}, g = {:.16e}, L = {:.16e}",
        w.n_modes(),
        w.c(),
        w.steepness(),
        w.g(),
        w.l()
    )?;
    writeln!(out, "mu,re_lambda,im_lambda,residual,converged")?;
    for pairs in &sweep.spectra {
        for p in pairs {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.mu, p.lambda.re, p.lambda.im, p.residual, p.converged
            )?;
        }
    }
    Ok(())
}
