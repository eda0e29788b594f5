//! Periodic Stokes waves in conformal variables.
//!
//! A wave is stored as the cosine series of `y` in the computational
//! variable `q`. Without an auxiliary map `q = u`; with a map of parameter
//! `L`, `tan(u/2) = L tan(q/2)` and every operator is written in `q` using
//! `k_u = q_u k_q`. The Babenko residual in `q` reads
//!
//! `R = c^2 k y - g (u_q y + y k y + k(y^2)/2)`, with `S y = q_u R`,
//!
//! and its Jacobian `A f = (c^2 k - g u_q) f - g (y k f + f k y + k(y f))`
//! is symmetric in the uniform `q` inner product.

mod continuation;
mod io;
mod newton;

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

pub use continuation::{
    continue_branch, AuxTier, BranchState, ContinuationFailure, ContinuationPolicy,
};
pub use io::{read_wave, wave_from_str, wave_to_string, write_wave, WAVE_FORMAT_VERSION};
pub use newton::{solve_newton, Control, NewtonOptions, NewtonReport};

use crate::error::StokesError;
use crate::spectral::{
    apply_multiplier, evaluate_cosine_series, give_buffer, AuxMap, Grid, PeriodicField, Symbols, C64,
};

/// Steepness of the limiting (120 degree) wave.
pub const LIMITING_STEEPNESS: f64 = 0.14106348398;

/// Relative residual below which a wave counts as a solution.
pub const CONVERGED_RESIDUAL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A traveling wave `y(q)` with speed `c` under gravity `g`.
#[derive(Clone)]
pub struct StokesWave {
    grid: Grid,
    aux: Option<AuxMap>,
    y_hat: Vec<f64>,
    c: f64,
    g: f64,
    s: f64,
    ops: OnceLock<Arc<WaveOps>>,
}

impl fmt::Debug for StokesWave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StokesWave")
            .field("n_modes", &self.grid.n_modes())
            .field("l", &self.l())
            .field("c", &self.c)
            .field("g", &self.g)
            .field("steepness", &self.s)
            .finish()
    }
}

impl StokesWave {
    /// Flat surface `y = 0`, `c = sqrt(g)`, on a uniform grid.
    pub fn flat(n_modes: usize, g: f64) -> Result<Self, StokesError> {
        Self::flat_mapped(n_modes, g, 1.0)
    }

    /// Flat surface on the grid of an auxiliary map with parameter `l`.
    pub fn flat_mapped(n_modes: usize, g: f64, l: f64) -> Result<Self, StokesError> {
        let grid = Grid::new(n_modes)?;
        let aux = Some(AuxMap::new(l, &grid)?);
        Self::from_cosine(&grid, aux, vec![0.0; n_modes / 2 + 1], g.sqrt(), g)
    }

    /// Wave from cosine coefficients `y(q) = sum_k a_k cos(kq)`,
    /// `k = 0..=N/2`. The Nyquist coefficient must vanish.
    pub fn from_cosine(
        grid: &Grid,
        aux: Option<AuxMap>,
        y_hat: Vec<f64>,
        c: f64,
        g: f64,
    ) -> Result<Self, StokesError> {
        let n = grid.n_modes();
        if y_hat.len() != n / 2 + 1 {
            return Err(StokesError::Format(format!(
                "expected {} cosine coefficients, got {}",
                n / 2 + 1,
                y_hat.len()
            )));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(StokesError::Format(format!("gravity must be positive, got {g}")));
        }
        if !c.is_finite() || y_hat.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::SpectralError::NonFinite.into());
        }
        if let Some(m) = &aux {
            if m.u_q().len() != n {
                return Err(crate::error::SpectralError::GridMismatch(m.u_q().len(), n).into());
            }
        }
        let aux = aux.filter(|m| !m.is_identity());
        let mut y_hat = y_hat;
        y_hat[n / 2] = 0.0;
        let s = steepness_of(&y_hat);
        Ok(StokesWave { grid: grid.clone(), aux, y_hat, c, g, s, ops: OnceLock::new() })
    }

    pub(crate) fn from_internal(
        grid: &Grid,
        aux: Option<AuxMap>,
        y: &[C64],
        c: f64,
        g: f64,
    ) -> Result<Self, StokesError> {
        Self::from_cosine(grid, aux, internal_to_cosine(y), c, g)
    }

    /// Linear wave `y(u) = a cos u` sampled on the computational grid.
    pub(crate) fn linear_guess(grid: &Grid, aux: Option<&AuxMap>, a: f64, g: f64) -> Result<Self, StokesError> {
        let samples: Vec<f64> = match aux {
            Some(m) => m.u_of_q().iter().map(|&u| a * u.cos()).collect(),
            None => grid.nodes().iter().map(|&u| a * u.cos()).collect(),
        };
        let f = PeriodicField::from_samples(grid, samples)?;
        Self::from_internal(grid, aux.cloned(), &f.internal_coeffs(), g.sqrt(), g)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.grid.n_modes()
    }

    pub fn aux(&self) -> Option<&AuxMap> {
        self.aux.as_ref()
    }

    /// Auxiliary map parameter; 1 for the uniform grid.
    pub fn l(&self) -> f64 {
        self.aux.as_ref().map_or(1.0, AuxMap::l)
    }

    /// Cosine coefficients of `y(q)`, length `N/2 + 1`.
    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn steepness(&self) -> f64 {
        self.s
    }

    pub(crate) fn y_internal(&self) -> Vec<C64> {
        cosine_to_internal(&self.y_hat)
    }

    /// `y` at the computational nodes.
    pub fn y_samples(&self) -> Vec<f64> {
        self.grid.inverse(&self.y_internal()).into_iter().map(|v| v.re).collect()
    }

    /// Physical abscissa `u` of each computational node.
    pub fn u_nodes(&self) -> Vec<f64> {
        match &self.aux {
            Some(m) => m.u_of_q().to_vec(),
            None => self.grid.nodes(),
        }
    }

    pub(crate) fn ops(&self) -> &WaveOps {
        self.ops.get_or_init(|| {
            Arc::new(WaveOps::new(&self.grid, self.aux.as_ref(), self.y_internal(), self.c, self.g))
        })
    }

    /// `||S y|| / ||y||` in the `u` measure (zero for the flat wave).
    pub fn residual_norm(&self) -> f64 {
        self.ops().residual_norm()
    }

    pub fn is_converged(&self) -> bool {
        self.residual_norm() <= CONVERGED_RESIDUAL
    }

    /// Relative size of the top quartile of the cosine spectrum.
    pub fn spectral_tail(&self) -> f64 {
        let n = self.n_modes();
        let total: f64 = self.y_hat.iter().map(|a| a * a).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = self.y_hat[3 * n / 8..].iter().map(|a| a * a).sum();
        (tail / total).sqrt()
    }

    /// Whether the spectrum decays below `1e-12` before the top quartile.
    pub fn is_resolved(&self) -> bool {
        self.spectral_tail() <= 1e-12
    }

    /// Re-represents the wave with `n_modes` modes and map parameter `l`.
    /// Growing `N` at fixed `L` is exact; a change of `L` re-evaluates the
    /// series at the new nodes.
    pub fn resample(&self, n_modes: usize, l: f64) -> Result<StokesWave, StokesError> {
        let grid = Grid::new(n_modes)?;
        if l == self.l() {
            let mut a = vec![0.0; n_modes / 2 + 1];
            let keep = a.len().min(self.y_hat.len());
            a[..keep].copy_from_slice(&self.y_hat[..keep]);
            let aux = AuxMap::new(l, &grid)?;
            return StokesWave::from_cosine(&grid, Some(aux), a, self.c, self.g);
        }
        let aux = AuxMap::new(l, &grid)?;
        let old_q: Vec<f64> = aux
            .u_of_q()
            .iter()
            .map(|&u| match &self.aux {
                Some(m) => m.q_at(u),
                None => u,
            })
            .collect();
        let samples = evaluate_cosine_series(&self.y_hat, &old_q);
        let f = PeriodicField::from_samples(&grid, samples)?;
        StokesWave::from_internal(&grid, Some(aux), &f.internal_coeffs(), self.c, self.g)
    }

    /// The same wave on a uniform grid of the same size.
    pub fn to_uniform(&self) -> Result<StokesWave, StokesError> {
        self.resample(self.n_modes(), 1.0)
    }

    /// `y_u` at the computational nodes, as a periodic field.
    pub fn y_u(&self) -> PeriodicField {
        let ops = self.ops();
        let yq = apply_multiplier(&ops.sym0.deriv, &ops.y);
        let mut f = self.grid.inverse(&yq);
        if let Some(m) = &self.aux {
            f.iter_mut().zip(m.q_u()).for_each(|(v, q)| *v *= q);
        }
        PeriodicField::from_samples(&self.grid, f.into_iter().map(|v| v.re).collect())
            .expect("grid length")
    }
}

/// Steepness from cosine coefficients: `(y(0) - y(pi)) / (2 pi)`.
fn steepness_of(a: &[f64]) -> f64 {
    a.iter().skip(1).step_by(2).sum::<f64>() / PI
}

/// Cosine coefficients to slot-ordered internal coefficients.
pub(crate) fn cosine_to_internal(a: &[f64]) -> Vec<C64> {
    let n = 2 * (a.len() - 1);
    let mut c = vec![ZERO; n];
    c[0] = C64::new(a[0], 0.0);
    for k in 1..n / 2 {
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        let v = C64::new(0.5 * sgn * a[k], 0.0);
        c[k] = v;
        c[n - k] = v;
    }
    c
}

pub(crate) fn internal_to_cosine(c: &[C64]) -> Vec<f64> {
    let n = c.len();
    let mut a = vec![0.0; n / 2 + 1];
    a[0] = c[0].re;
    for k in 1..n / 2 {
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        a[k] = sgn * (c[k].re + c[n - k].re);
    }
    a
}

/// Projects slot-ordered coefficients onto real even functions.
pub(crate) fn project_even(c: &mut [C64]) {
    let n = c.len();
    c[0] = C64::new(c[0].re, 0.0);
    c[n / 2] = ZERO;
    for k in 1..n / 2 {
        let v = 0.5 * (c[k].re + c[n - k].re);
        c[k] = C64::new(v, 0.0);
        c[n - k] = C64::new(v, 0.0);
    }
}

/// Wave-dependent data for fast operator application, sampled on the
/// padded grid.
#[derive(Debug)]
pub(crate) struct WaveOps {
    pub grid: Grid,
    pub c: f64,
    pub g: f64,
    pub y: Vec<C64>,
    pub y_pad: Vec<f64>,
    pub ky_pad: Vec<f64>,
    /// `u_q` on the padded grid; `None` on a uniform grid.
    pub uq_pad: Option<Vec<f64>>,
    pub sqrt_qu_pad: Option<Vec<f64>>,
    pub uq_nodes: Option<Vec<f64>>,
    pub sym0: Symbols,
}

impl WaveOps {
    pub fn new(grid: &Grid, aux: Option<&AuxMap>, y: Vec<C64>, c: f64, g: f64) -> Self {
        let sym0 = Symbols::new(grid, 0.0);
        let y_pad = grid.pad_real(&y);
        let ky_pad = grid.pad_real(&apply_multiplier(&sym0.abs, &y));
        let (uq_pad, sqrt_qu_pad, uq_nodes) = match aux {
            Some(m) => {
                let pn = grid.padded_nodes();
                (
                    Some(pn.iter().map(|&q| m.u_q_at(q)).collect()),
                    Some(pn.iter().map(|&q| m.q_u_at(q).sqrt()).collect()),
                    Some(m.u_q().to_vec()),
                )
            }
            None => (None, None, None),
        };
        WaveOps { grid: grid.clone(), c, g, y, y_pad, ky_pad, uq_pad, sqrt_qu_pad, uq_nodes, sym0 }
    }

    /// Jacobian `A` on the band of `sym`.
    pub fn apply_a(&self, sym: &Symbols, f: &[C64]) -> Vec<C64> {
        let mu = sym.mu;
        let g = self.g;
        let kf = apply_multiplier(&sym.abs, f);
        // pf becomes the first product, pkf the second
        let mut pf = self.grid.pad(f, mu);
        let mut pkf = self.grid.pad(&kf, mu);
        for j in 0..pf.len() {
            let uq = self.uq_pad.as_ref().map_or(1.0, |u| u[j]);
            let (p, pk) = (pf[j], pkf[j]);
            pf[j] = p * (g * (uq + self.ky_pad[j])) + pk * (g * self.y_pad[j]);
            pkf[j] = p * self.y_pad[j];
        }
        let t1 = self.grid.truncate(pf, mu);
        let t2 = self.grid.truncate(pkf, mu);
        let c2 = self.c * self.c;
        let mut out = kf;
        for i in 0..out.len() {
            out[i] = c2 * out[i] - t1[i] - g * sym.abs[i] * t2[i];
        }
        give_buffer(t1);
        give_buffer(t2);
        out
    }

    /// Babenko residual `R` in the computational variable.
    pub fn residual(&self) -> Vec<C64> {
        let g = self.g;
        let mut lin = Vec::with_capacity(self.y_pad.len());
        let mut sq = Vec::with_capacity(self.y_pad.len());
        for j in 0..self.y_pad.len() {
            let y = self.y_pad[j];
            let uq = self.uq_pad.as_ref().map_or(1.0, |u| u[j]);
            lin.push(C64::new(uq * y + y * self.ky_pad[j], 0.0));
            sq.push(C64::new(y * y, 0.0));
        }
        let t1 = self.grid.truncate(lin, 0.0);
        let t2 = self.grid.truncate(sq, 0.0);
        let c2 = self.c * self.c;
        (0..self.y.len())
            .map(|i| self.sym0.abs[i] * (c2 * self.y[i] - 0.5 * g * t2[i]) - g * t1[i])
            .collect()
    }

    /// Derivative of the residual with respect to `c`.
    pub fn c_derivative(&self) -> Vec<C64> {
        apply_multiplier(&self.sym0.abs, &self.y).into_iter().map(|v| v * (2.0 * self.c)).collect()
    }

    /// `||S y|| / ||y||` in the `u` measure.
    pub fn residual_norm(&self) -> f64 {
        let r = self.grid.inverse(&self.residual());
        let y = self.grid.inverse(&self.y);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..r.len() {
            let uq = self.uq_nodes.as_ref().map_or(1.0, |u| u[j]);
            num += r[j].re * r[j].re / uq;
            den += y[j].re * y[j].re * uq;
        }
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }
}

/// Babenko residual `S y = c^2 k y - g [x_u y - H(y y_u)]` at the
/// computational nodes.
pub fn babenko_residual(w: &StokesWave) -> PeriodicField {
    let ops = w.ops();
    let mut r: Vec<f64> = w.grid.inverse(&ops.residual()).into_iter().map(|v| v.re).collect();
    if let Some(m) = &w.aux {
        r.iter_mut().zip(m.q_u()).for_each(|(v, q)| *v *= q);
    }
    PeriodicField::from_samples(&w.grid, r).expect("grid length")
}

/// Linearized Babenko operator `S_1 v = (c^2 k - g) v - g [y k v + v k y + k(y v)]`
/// applied to a field sampled at the wave's computational nodes.
pub fn apply_s1(w: &StokesWave, v: &PeriodicField) -> Result<PeriodicField, StokesError> {
    if v.grid() != &w.grid {
        return Err(crate::error::SpectralError::GridMismatch(v.grid().n_modes(), w.n_modes()).into());
    }
    if v.samples().iter().any(|x| !x.is_finite()) {
        return Err(crate::error::SpectralError::NonFinite.into());
    }
    let ops = w.ops();
    let af = ops.apply_a(&ops.sym0, &v.internal_coeffs());
    let mut out: Vec<f64> = w.grid.inverse(&af).into_iter().map(|x| x.re).collect();
    if let Some(m) = &w.aux {
        out.iter_mut().zip(m.q_u()).for_each(|(x, q)| *x *= q);
    }
    Ok(PeriodicField::from_samples(&w.grid, out)?)
}

/// Crest-to-trough height over wavelength, `(y(0) - y(pi)) / (2 pi)`.
pub fn compute_steepness(w: &StokesWave) -> f64 {
    steepness_of(&w.y_hat)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hamiltonian {
    pub kinetic: f64,
    pub potential: f64,
}

impl Hamiltonian {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// Kinetic `(1/2) int psi k psi du` with `psi = -c H y`, and potential
/// `(g/2) int y^2 x_u du`, by quadrature on the padded grid.
pub fn compute_hamiltonian(w: &StokesWave) -> Hamiltonian {
    let ops = w.ops();
    let m = ops.y_pad.len() as f64;
    let h = 2.0 * PI / m;
    let mut kin = 0.0;
    let mut pot = 0.0;
    for j in 0..ops.y_pad.len() {
        let y = ops.y_pad[j];
        let uq = ops.uq_pad.as_ref().map_or(1.0, |u| u[j]);
        kin += y * ops.ky_pad[j];
        pot += y * y * (uq + ops.ky_pad[j]);
    }
    Hamiltonian { kinetic: 0.5 * w.c * w.c * kin * h, potential: 0.5 * w.g * pot * h }
}

/// Physical surface at the computational nodes.
#[derive(Clone, Debug)]
pub struct Surface {
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `x_u = 1 + k y` (derivative with respect to `u`).
    pub x_u: Vec<f64>,
}

/// `x = u - H y`, `y`, sampled at the computational nodes.
pub fn surface_from_wave(w: &StokesWave) -> Surface {
    let ops = w.ops();
    let hy = w.grid.inverse(&apply_multiplier(&ops.sym0.hilbert, &ops.y));
    let ky = w.grid.inverse(&apply_multiplier(&ops.sym0.abs, &ops.y));
    let u = w.u_nodes();
    let qu: Vec<f64> = match &w.aux {
        Some(m) => m.q_u().to_vec(),
        None => vec![1.0; u.len()],
    };
    Surface {
        x: u.iter().zip(&hy).map(|(a, b)| a - b.re).collect(),
        y: w.y_samples(),
        x_u: ky.iter().zip(&qu).map(|(k, q)| 1.0 + q * k.re).collect(),
        u,
    }
}
