//! Uniform periodic grids, FFT-backed Fourier multipliers and the auxiliary
//! conformal map.
//!
//! Every field on a grid of `N` nodes is represented internally by `N`
//! complex Fourier coefficients in FFT slot order. Slot `j < N/2` carries
//! wavenumber `j`, slot `j > N/2` carries `j - N`. The remaining slot `N/2`
//! depends on the Floquet band: for periodic fields (`mu == 0`) it is the
//! unpaired Nyquist mode and is kept at zero by every operator; for
//! quasiperiodic envelopes (`mu > 0`) it carries wavenumber `-N/2`, so that
//! the shifted wavenumbers `k + mu` fill `(-N/2, N/2)` symmetrically.
//!
//! Quadratic products are evaluated on a grid padded by a factor 3/2, which
//! removes aliasing exactly when both factors are band-limited.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::SpectralError;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Per-thread free list of large work buffers. Reusing them keeps large
/// grids from returning memory to the OS and faulting it back on every
/// transform.
const POOL_SIZE: usize = 12;

thread_local! {
    static POOL: RefCell<Vec<Vec<C64>>> = const { RefCell::new(Vec::new()) };
}

/// Buffer of length `len`, recycled when possible. Contents are
/// unspecified; callers overwrite every entry.
pub(crate) fn take_buffer(len: usize) -> Vec<C64> {
    let reuse = POOL.with(|p| {
        let mut p = p.borrow_mut();
        let i = p.iter().position(|b| b.capacity() >= len)?;
        Some(p.swap_remove(i))
    });
    match reuse {
        Some(mut b) => {
            b.truncate(len);
            b.resize(len, ZERO);
            b
        }
        None => vec![ZERO; len],
    }
}

/// Returns a buffer to the pool.
pub(crate) fn give_buffer(b: Vec<C64>) {
    if b.capacity() == 0 {
        return;
    }
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < POOL_SIZE {
            p.push(b);
        } else if let Some(i) = (0..p.len()).min_by_key(|&i| p[i].capacity()) {
            // keep the largest buffers
            if p[i].capacity() < b.capacity() {
                p[i] = b;
            }
        }
    });
}

fn run_fft(fft: &Arc<dyn Fft<f64>>, buf: &mut [C64]) {
    let mut scratch = take_buffer(fft.get_inplace_scratch_len());
    fft.process_with_scratch(buf, &mut scratch);
    give_buffer(scratch);
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

/// Uniform grid `u_j = -pi + 2 pi j / N` on one period.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n_modes", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

/// Builds the uniform grid with `n_modes` nodes.
pub fn build_grid(n_modes: usize) -> Result<Grid, SpectralError> {
    Grid::new(n_modes)
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 8 || n % 2 != 0 {
            return Err(SpectralError::InvalidModeCount(n));
        }
        let m = 3 * n / 2;
        let mut planner = planner().lock().expect("fft planner poisoned");
        Ok(Grid {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(m),
            inv_pad: planner.plan_fft_inverse(m),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    /// Size of the de-aliasing grid.
    pub fn padded_len(&self) -> usize {
        3 * self.n / 2
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + self.spacing() * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    pub fn padded_nodes(&self) -> Vec<f64> {
        let m = self.padded_len();
        (0..m).map(|j| -PI + 2.0 * PI * j as f64 / m as f64).collect()
    }

    /// Index of the node at `u = 0` (the wave crest).
    pub fn crest_index(&self) -> usize {
        self.n / 2
    }

    /// Integer wavenumber carried by FFT slot `idx` in the band of `mu`.
    pub fn wavenumber(&self, idx: usize, mu: f64) -> i64 {
        let half = self.n / 2;
        if idx < half {
            idx as i64
        } else if idx > half {
            idx as i64 - self.n as i64
        } else if mu > 0.0 {
            -(half as i64)
        } else {
            half as i64
        }
    }

    /// Slot holding integer wavenumber `k`, if it belongs to the band of `mu`.
    pub fn slot(&self, k: i64, mu: f64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        let lo = if mu > 0.0 { -half } else { -half + 1 };
        let hi = half - 1;
        if k < lo || k > hi {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (k + self.n as i64) as usize })
    }

    pub(crate) fn band(&self, mu: f64) -> Band {
        Band::new(self, mu)
    }

    /// Samples to coefficients (scaled by `1/N`).
    pub(crate) fn forward(&self, samples: &[C64]) -> Vec<C64> {
        let mut buf = take_buffer(samples.len());
        buf.copy_from_slice(samples);
        run_fft(&self.fwd, &mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Coefficients to samples.
    pub(crate) fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut buf = coeffs.to_vec();
        run_fft(&self.inv, &mut buf);
        buf
    }

    /// Coefficients to samples on the 3/2-padded grid.
    pub(crate) fn pad(&self, coeffs: &[C64], mu: f64) -> Vec<C64> {
        let (n, m, h) = (self.n, self.padded_len(), self.n / 2);
        let mut buf = take_buffer(m);
        // wavenumbers 0..h-1, then the gap, then -(h-1)..-1 (and -h when mu > 0)
        buf[..h].copy_from_slice(&coeffs[..h]);
        buf[h..m - h].fill(ZERO);
        buf[m - h + 1..].copy_from_slice(&coeffs[h + 1..n]);
        buf[m - h] = if mu == 0.0 { ZERO } else { coeffs[h] };
        run_fft(&self.inv_pad, &mut buf);
        buf
    }

    /// Padded-grid samples to band-limited coefficients; everything outside
    /// the band of `mu` is discarded. The padded buffer is recycled.
    pub(crate) fn truncate(&self, mut padded: Vec<C64>, mu: f64) -> Vec<C64> {
        let (n, m, h) = (self.n, self.padded_len(), self.n / 2);
        run_fft(&self.fwd_pad, &mut padded);
        let s = 1.0 / m as f64;
        let mut out = take_buffer(n);
        out[..h].iter_mut().zip(&padded[..h]).for_each(|(o, v)| *o = v * s);
        out[h + 1..].iter_mut().zip(&padded[m - h + 1..]).for_each(|(o, v)| *o = v * s);
        out[h] = if mu == 0.0 { ZERO } else { padded[m - h] * s };
        give_buffer(padded);
        out
    }
}

/// Evaluates `sum_k a_k cos(k x)` at each point of `xs`. Phasors are
/// advanced by rotation and re-seeded every 32 terms.
pub(crate) fn evaluate_cosine_series(a: &[f64], xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let step = C64::from_polar(1.0, x);
            let mut z = C64::new(1.0, 0.0);
            let mut acc = 0.0;
            for (k, &ak) in a.iter().enumerate() {
                if k % 32 == 0 {
                    z = C64::from_polar(1.0, k as f64 * x);
                }
                acc += ak * z.re;
                z *= step;
            }
            acc
        })
        .collect()
}

/// Shifted wavenumbers `k + mu` of every slot, with the inactive Nyquist
/// slot flagged for `mu == 0`.
#[derive(Clone, Debug)]
pub(crate) struct Band {
    pub kappa: Vec<f64>,
    pub active: Vec<bool>,
}

impl Band {
    fn new(grid: &Grid, mu: f64) -> Self {
        let n = grid.n_modes();
        let kappa = (0..n).map(|i| grid.wavenumber(i, mu) as f64 + mu).collect();
        let active = (0..n).map(|i| !(i == n / 2 && mu == 0.0)).collect();
        Band { kappa, active }
    }

    pub fn multiplier(&self, symbol: impl Fn(f64) -> C64) -> Vec<C64> {
        self.kappa
            .iter()
            .zip(&self.active)
            .map(|(&k, &a)| if a { symbol(k) } else { ZERO })
            .collect()
    }

    pub fn hilbert(&self) -> Vec<C64> {
        self.multiplier(|k| C64::new(0.0, sign(k)))
    }

    pub fn wavenumber_abs(&self) -> Vec<C64> {
        self.multiplier(|k| C64::new(k.abs(), 0.0))
    }

    pub fn wavenumber_inv(&self) -> Vec<C64> {
        self.multiplier(|k| if k == 0.0 { ZERO } else { C64::new(1.0 / k.abs(), 0.0) })
    }

    pub fn derivative(&self) -> Vec<C64> {
        self.multiplier(|k| C64::new(0.0, k))
    }
}

/// Precomputed multipliers of one Floquet band.
#[derive(Clone, Debug)]
pub(crate) struct Symbols {
    pub mu: f64,
    pub abs: Vec<C64>,
    pub hilbert: Vec<C64>,
    pub inv: Vec<C64>,
    pub deriv: Vec<C64>,
}

impl Symbols {
    pub fn new(grid: &Grid, mu: f64) -> Self {
        let band = grid.band(mu);
        Symbols {
            mu,
            abs: band.wavenumber_abs(),
            hilbert: band.hilbert(),
            inv: band.wavenumber_inv(),
            deriv: band.derivative(),
        }
    }
}

impl Grid {
    /// Band-limited projection of `weight * f` with `weight` given on the
    /// padded grid.
    pub(crate) fn product(&self, weight: &[f64], f: &[C64], mu: f64) -> Vec<C64> {
        let mut p = self.pad(f, mu);
        p.iter_mut().zip(weight).for_each(|(v, w)| *v *= w);
        self.truncate(p, mu)
    }

    /// Real padded samples of a real band-limited field.
    pub(crate) fn pad_real(&self, f: &[C64]) -> Vec<f64> {
        self.pad(f, 0.0).into_iter().map(|v| v.re).collect()
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn apply_multiplier(symbol: &[C64], coeffs: &[C64]) -> Vec<C64> {
    let mut out = take_buffer(coeffs.len());
    out.iter_mut().zip(symbol.iter().zip(coeffs)).for_each(|(o, (a, b))| *o = a * b);
    out
}

/// Euclidean inner product `sum conj(a) b`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite_real(values: &[f64]) -> Result<(), SpectralError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SpectralError::NonFinite)
    }
}

fn check_finite_complex(values: &[C64]) -> Result<(), SpectralError> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(SpectralError::NonFinite)
    }
}

pub(crate) fn check_mu(mu: f64) -> Result<(), SpectralError> {
    if (0.0..1.0).contains(&mu) {
        Ok(())
    } else {
        Err(SpectralError::InvalidFloquet(mu))
    }
}

/// Real 2pi-periodic field sampled on a grid.
#[derive(Clone, Debug)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn from_samples(grid: &Grid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n_modes() {
            return Err(SpectralError::LengthMismatch { expected: grid.n_modes(), got: values.len() });
        }
        Ok(PeriodicField { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        PeriodicField { grid: grid.clone(), values: grid.nodes().into_iter().map(f).collect() }
    }

    pub fn zeros(grid: &Grid) -> Self {
        PeriodicField { grid: grid.clone(), values: vec![0.0; grid.n_modes()] }
    }

    /// Builds the field from internal (slot-ordered) coefficients, keeping
    /// the real part of the synthesized samples.
    pub(crate) fn from_internal(grid: &Grid, coeffs: &[C64]) -> Self {
        let values = grid.inverse(coeffs).into_iter().map(|v| v.re).collect();
        PeriodicField { grid: grid.clone(), values }
    }

    pub(crate) fn internal_coeffs(&self) -> Vec<C64> {
        let s: Vec<C64> = self.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.grid.forward(&s)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.values
    }

    /// Fourier coefficient of `e^{iku}`.
    pub fn coefficient(&self, k: i64) -> C64 {
        let n = self.grid.n_modes() as i64;
        let idx = k.rem_euclid(n) as usize;
        let c = self.internal_coeffs()[idx];
        if k.rem_euclid(2) == 0 {
            c
        } else {
            -c
        }
    }

    /// Coefficients of `e^{iku}` for `k = -N/2+1 ..= N/2`.
    pub fn coefficients(&self) -> Vec<C64> {
        let n = self.grid.n_modes() as i64;
        let raw = self.internal_coeffs();
        (-n / 2 + 1..=n / 2)
            .map(|k| {
                let c = raw[k.rem_euclid(n) as usize];
                if k.rem_euclid(2) == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect()
    }

    /// Trapezoid inner product on the period.
    pub fn inner(&self, other: &PeriodicField) -> Result<f64, SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch(self.grid.n_modes(), other.grid.n_modes()));
        }
        Ok(self.grid.spacing() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    /// L2 norm over the period (trapezoid rule).
    pub fn norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Spectral norm `sqrt(2 pi sum |f_k|^2)`; equals [`Self::norm`] by Parseval.
    pub fn coefficient_norm(&self) -> f64 {
        (2.0 * PI).sqrt() * norm(&self.internal_coeffs())
    }

    fn map_spectrum(&self, symbol: Vec<C64>) -> Result<PeriodicField, SpectralError> {
        check_finite_real(&self.values)?;
        let out = apply_multiplier(&symbol, &self.internal_coeffs());
        Ok(PeriodicField::from_internal(&self.grid, &out))
    }

    pub fn derivative(&self) -> Result<PeriodicField, SpectralError> {
        self.map_spectrum(self.grid.band(0.0).derivative())
    }
}

/// Applies the circular Hilbert transform, multiplier `i sign(k)`.
pub fn apply_hilbert(f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    f.map_spectrum(f.grid.band(0.0).hilbert())
}

/// Applies `k = -d/du H`, multiplier `|k|`.
pub fn apply_k(f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    f.map_spectrum(f.grid.band(0.0).wavenumber_abs())
}

/// Quasiperiodic envelope: the physical field is `f(u) = env(u) e^{i mu u}`.
#[derive(Clone, Debug)]
pub struct QuasiField {
    grid: Grid,
    mu: f64,
    values: Vec<C64>,
}

impl QuasiField {
    pub fn from_samples(grid: &Grid, mu: f64, values: Vec<C64>) -> Result<Self, SpectralError> {
        check_mu(mu)?;
        if values.len() != grid.n_modes() {
            return Err(SpectralError::LengthMismatch { expected: grid.n_modes(), got: values.len() });
        }
        Ok(QuasiField { grid: grid.clone(), mu, values })
    }

    pub fn from_fn(grid: &Grid, mu: f64, f: impl Fn(f64) -> C64) -> Result<Self, SpectralError> {
        check_mu(mu)?;
        Ok(QuasiField { grid: grid.clone(), mu, values: grid.nodes().into_iter().map(f).collect() })
    }

    /// Real periodic field viewed as a `mu = 0` envelope.
    pub fn from_periodic(f: &PeriodicField) -> Self {
        QuasiField {
            grid: f.grid.clone(),
            mu: 0.0,
            values: f.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    /// Envelope with a single Fourier mode `e^{iku}`.
    pub fn mode(grid: &Grid, mu: f64, k: i64) -> Result<Self, SpectralError> {
        QuasiField::from_fn(grid, mu, |u| C64::from_polar(1.0, k as f64 * u))
    }

    pub(crate) fn from_internal(grid: &Grid, mu: f64, coeffs: &[C64]) -> Self {
        QuasiField { grid: grid.clone(), mu, values: grid.inverse(coeffs) }
    }

    /// Band-limited internal coefficients (inactive slot cleared).
    pub(crate) fn internal_coeffs(&self) -> Vec<C64> {
        let mut c = self.grid.forward(&self.values);
        if self.mu == 0.0 {
            c[self.grid.n_modes() / 2] = ZERO;
        }
        c
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn samples(&self) -> &[C64] {
        &self.values
    }

    /// Real part of the envelope as a periodic field.
    pub fn real_part(&self) -> PeriodicField {
        PeriodicField { grid: self.grid.clone(), values: self.values.iter().map(|v| v.re).collect() }
    }

    /// Hermitian trapezoid inner product `integral conj(self) other du`.
    pub fn inner(&self, other: &QuasiField) -> Result<C64, SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch(self.grid.n_modes(), other.grid.n_modes()));
        }
        Ok(dot(&self.values, &other.values) * self.grid.spacing())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values) * self.grid.spacing().sqrt()
    }

    fn map_spectrum(&self, symbol: Vec<C64>) -> Result<QuasiField, SpectralError> {
        check_finite_complex(&self.values)?;
        let out = apply_multiplier(&symbol, &self.grid.forward(&self.values));
        Ok(QuasiField::from_internal(&self.grid, self.mu, &out))
    }
}

/// Quasiperiodic Hilbert transform, envelope multiplier `i sign(k + mu)`.
pub fn apply_hilbert_mu(f: &QuasiField) -> Result<QuasiField, SpectralError> {
    f.map_spectrum(f.grid.band(f.mu).hilbert())
}

/// Quasiperiodic wavenumber operator, envelope multiplier `|k + mu|`.
pub fn apply_k_mu(f: &QuasiField) -> Result<QuasiField, SpectralError> {
    f.map_spectrum(f.grid.band(f.mu).wavenumber_abs())
}

/// Inverse wavenumber operator, multiplier `1/|k + mu|`; the mean mode at
/// `mu = 0` is annihilated (pseudo-inverse).
pub fn apply_kinv_mu(f: &QuasiField) -> Result<QuasiField, SpectralError> {
    f.map_spectrum(f.grid.band(f.mu).wavenumber_inv())
}

/// Changes the resolution of a real field. Growing keeps every coefficient
/// and zero-fills the new modes; shrinking is allowed only when the discarded
/// tail carries less than `1e-13` of the spectral energy.
pub fn pad_spectrum(f: &PeriodicField, new_n: usize) -> Result<PeriodicField, SpectralError> {
    let target = Grid::new(new_n)?;
    let coeffs = f.internal_coeffs();
    let resized = resize_coeffs(&f.grid, &target, &coeffs, 0.0)?;
    Ok(PeriodicField::from_internal(&target, &resized))
}

/// Moves slot-ordered coefficients between grids of different size.
pub(crate) fn resize_coeffs(from: &Grid, to: &Grid, coeffs: &[C64], mu: f64) -> Result<Vec<C64>, SpectralError> {
    let n_from = from.n_modes();
    let mut out = vec![ZERO; to.n_modes()];
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let mut lost = 0.0;
    for (idx, &c) in coeffs.iter().enumerate() {
        if idx == n_from / 2 && mu == 0.0 {
            continue;
        }
        let k = from.wavenumber(idx, mu);
        match to.slot(k, mu) {
            Some(j) => out[j] = c,
            None => lost += c.norm_sqr(),
        }
    }
    if total > 0.0 && lost > 1e-13 * total {
        return Err(SpectralError::LossyTruncation(lost / total));
    }
    Ok(out)
}

/// Auxiliary conformal map `tan(u/2) = L tan(q/2)`, concentrating uniform
/// `q` nodes near the crest at `u = 0` as `L -> 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxMap {
    l: f64,
    u_of_q: Vec<f64>,
    u_q: Vec<f64>,
    q_u: Vec<f64>,
}

/// Builds the auxiliary map on the uniform `q` nodes of `grid`.
pub fn build_aux_map(l: f64, grid: &Grid) -> Result<AuxMap, SpectralError> {
    AuxMap::new(l, grid)
}

impl AuxMap {
    pub fn new(l: f64, grid: &Grid) -> Result<Self, SpectralError> {
        if !(l > 0.0 && l <= 1.0) {
            return Err(SpectralError::InvalidMapParameter(l));
        }
        let nodes = grid.nodes();
        Ok(AuxMap {
            l,
            u_of_q: nodes.iter().map(|&q| map_u(l, q)).collect(),
            u_q: nodes.iter().map(|&q| map_u_q(l, q)).collect(),
            q_u: nodes.iter().map(|&q| map_q_u(l, q)).collect(),
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn u_of_q(&self) -> &[f64] {
        &self.u_of_q
    }

    pub fn u_q(&self) -> &[f64] {
        &self.u_q
    }

    pub fn q_u(&self) -> &[f64] {
        &self.q_u
    }

    pub fn is_identity(&self) -> bool {
        self.l == 1.0
    }

    pub fn u_at(&self, q: f64) -> f64 {
        map_u(self.l, q)
    }

    pub fn q_at(&self, u: f64) -> f64 {
        map_q(self.l, u)
    }

    pub fn u_q_at(&self, q: f64) -> f64 {
        map_u_q(self.l, q)
    }

    pub fn q_u_at(&self, q: f64) -> f64 {
        map_q_u(self.l, q)
    }
}

fn wrap(x: f64) -> (f64, f64) {
    // x = r + 2 pi m with r in [-pi, pi]
    let m = ((x + PI) / (2.0 * PI)).floor();
    let mut r = x - 2.0 * PI * m;
    let mut m = m;
    if r > PI {
        r -= 2.0 * PI;
        m += 1.0;
    }
    (r, m)
}

pub(crate) fn map_u(l: f64, q: f64) -> f64 {
    let (r, m) = wrap(q);
    2.0 * (l * (r / 2.0).sin()).atan2((r / 2.0).cos()) + 2.0 * PI * m
}

pub(crate) fn map_q(l: f64, u: f64) -> f64 {
    let (r, m) = wrap(u);
    2.0 * (r / 2.0).sin().atan2(l * (r / 2.0).cos()) + 2.0 * PI * m
}

pub(crate) fn map_u_q(l: f64, q: f64) -> f64 {
    2.0 * l / (1.0 + l * l + (1.0 - l * l) * q.cos())
}

pub(crate) fn map_q_u(l: f64, q: f64) -> f64 {
    (1.0 + l * l + (1.0 - l * l) * q.cos()) / (2.0 * l)
}
