//! Newton solver for the Babenko equation on even waves, bordered by one
//! amplitude-control equation for the speed.

use crate::error::{KrylovError, StokesError};
use crate::krylov::{conjugate_residual, minres_refined, AdjointTag, FnOperator, SolveReport};
use crate::spectral::{norm, C64};

use super::{project_even, StokesWave, WaveOps, CONVERGED_RESIDUAL, LIMITING_STEEPNESS};

/// Amplitude-control equation closing the Newton system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    /// Prescribed steepness `(y(0) - y(pi)) / (2 pi)`.
    Steepness(f64),
    /// Prescribed coefficient of `cos q`.
    FirstCoefficient(f64),
}

impl Control {
    fn weights(&self, n: usize) -> Vec<C64> {
        let mut w = vec![C64::new(0.0, 0.0); n];
        match self {
            Control::Steepness(_) => {
                for k in (1..n / 2).step_by(2) {
                    w[k] = C64::new(-1.0 / std::f64::consts::PI, 0.0);
                    w[n - k] = w[k];
                }
            }
            Control::FirstCoefficient(_) => {
                w[1] = C64::new(-1.0, 0.0);
                w[n - 1] = w[1];
            }
        }
        w
    }

    fn target(&self) -> f64 {
        match *self {
            Control::Steepness(s) | Control::FirstCoefficient(s) => s,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    /// Target relative residual `||S y|| / ||y||`.
    pub tol: f64,
    pub max_steps: usize,
    pub inner_max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_steps: 30, inner_max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct NewtonReport {
    pub steps: usize,
    /// Relative residual before each step and after the last.
    pub residuals: Vec<f64>,
    /// Inner iterations per step (both bordered solves).
    pub inner_iterations: Vec<usize>,
}

fn ell(w: &[C64], y: &[C64]) -> f64 {
    w.iter().zip(y).map(|(a, b)| (a * b).re).sum()
}

fn preconditioner(ops: &WaveOps) -> Vec<f64> {
    let c2 = ops.c * ops.c;
    ops.sym0
        .abs
        .iter()
        .map(|k| if k.re == 0.0 && k.im == 0.0 { ops.g } else { (c2 * k.re - ops.g).abs().max(1e-3) })
        .collect()
}

/// Solves `A x = b` on even fields: conjugate residual first, refined
/// MINRES when CR breaks down short of the tolerance.
fn inner_solve(
    ops: &WaveOps,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, SolveReport), KrylovError> {
    let op = FnOperator::new(b.len(), AdjointTag::Hermitian, |f: &[C64]| {
        let mut r = ops.apply_a(&ops.sym0, f);
        project_even(&mut r);
        Ok(r)
    });
    let d = preconditioner(ops);
    let (x, rep) = conjugate_residual(&op, b, Some(&d), tol, max_iter)?;
    if rep.converged {
        return Ok((x, rep));
    }
    let (x2, rep2) = minres_refined(&op, b, Some(&d), tol, max_iter)?;
    let (x, rep) = if rep2.relative_residual <= rep.relative_residual { (x2, rep2) } else { (x, rep) };
    if rep.relative_residual > 1e-3 {
        return Err(KrylovError::InnerSolve { iterations: rep.iterations, residual: rep.relative_residual });
    }
    Ok((x, rep))
}

/// Newton's method for `S y = 0` with unknowns the even coefficients of `y`
/// and the speed `c`, closed by `control`. The inner forcing term follows
/// the current residual, which gives quadratic convergence.
pub fn solve_newton(
    initial: &StokesWave,
    control: Control,
    opts: &NewtonOptions,
) -> Result<(StokesWave, NewtonReport), StokesError> {
    if let Control::Steepness(s) = control {
        if s < 0.0 {
            return Err(StokesError::NegativeSteepness(s));
        }
        if s >= LIMITING_STEEPNESS {
            return Err(StokesError::BeyondLimitingSteepness(s));
        }
    }
    let grid = initial.grid().clone();
    let aux = initial.aux().cloned();
    let g = initial.g();
    let n = grid.n_modes();
    let weights = control.weights(n);
    let target = control.target();

    let mut y = initial.y_internal();
    let mut c = initial.c();
    let mut report = NewtonReport::default();
    let mut ops = WaveOps::new(&grid, aux.as_ref(), y.clone(), c, g);
    let mut res = ops.residual_norm();
    let ctrl_tol = 1e-14 + 1e-12 * target.abs();

    for step in 0..=opts.max_steps {
        report.residuals.push(res);
        let gap = ell(&weights, &y) - target;
        if res <= opts.tol && gap.abs() <= ctrl_tol {
            break;
        }
        if step == opts.max_steps {
            report.steps = step;
            if res <= CONVERGED_RESIDUAL && gap.abs() <= ctrl_tol {
                break;
            }
            return Err(StokesError::NewtonDiverged { steps: step, residual: res });
        }
        let mut rhs = ops.residual();
        project_even(&mut rhs);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let mut bcol = ops.c_derivative();
        project_even(&mut bcol);

        let eta = (0.1 * res).clamp(1e-13, 1e-3);
        let (z1, rep1) = if norm(&rhs) > 0.0 {
            inner_solve(&ops, &rhs, eta, opts.inner_max_iter)?
        } else {
            (vec![C64::new(0.0, 0.0); n], SolveReport { iterations: 0, relative_residual: 0.0, converged: true, stagnated: false, history: vec![] })
        };
        let (z2, rep2) = inner_solve(&ops, &bcol, eta, opts.inner_max_iter)?;
        report.inner_iterations.push(rep1.iterations + rep2.iterations);

        let l2 = ell(&weights, &z2);
        if l2 == 0.0 || !l2.is_finite() {
            return Err(StokesError::NewtonDiverged { steps: step, residual: res });
        }
        let dc = (ell(&weights, &z1) + gap) / l2;
        let dy: Vec<C64> = z1.iter().zip(&z2).map(|(a, b)| a - dc * b).collect();

        // backtracking on the residual
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let y_try: Vec<C64> = y.iter().zip(&dy).map(|(a, b)| a + t * b).collect();
            let c_try = c + t * dc;
            let ops_try = WaveOps::new(&grid, aux.as_ref(), y_try.clone(), c_try, g);
            let res_try = ops_try.residual_norm();
            if res_try.is_finite() && (res_try < res || res == 0.0 && res_try == 0.0) {
                accepted = Some((y_try, c_try, ops_try, res_try));
                break;
            }
            t *= 0.5;
        }
        report.steps = step + 1;
        match accepted {
            Some((y_new, c_new, ops_new, res_new)) => {
                y = y_new;
                c = c_new;
                ops = ops_new;
                res = res_new;
            }
            None => {
                // no decrease: accept the current iterate at the rounding floor
                let gap_ok = gap.abs() <= ctrl_tol.max(1e-12);
                if res <= CONVERGED_RESIDUAL && gap_ok {
                    break;
                }
                return Err(StokesError::NewtonDiverged { steps: step + 1, residual: res });
            }
        }
    }
    let wave = StokesWave::from_internal(&grid, aux, &y, c, g)?;
    Ok((wave, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_target_returns_immediately() {
        let w = StokesWave::flat(64, 1.0).unwrap();
        let (sol, rep) = solve_newton(&w, Control::FirstCoefficient(0.0), &NewtonOptions::default()).unwrap();
        assert_eq!(rep.steps, 0);
        assert_eq!(sol.c(), 1.0);
        let (sol, rep) = solve_newton(&w, Control::Steepness(0.0), &NewtonOptions::default()).unwrap();
        assert_eq!(rep.steps, 0);
        assert!(sol.y_hat().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn rejects_out_of_range_steepness() {
        let w = StokesWave::flat(64, 1.0).unwrap();
        assert!(matches!(
            solve_newton(&w, Control::Steepness(0.142), &NewtonOptions::default()),
            Err(StokesError::BeyondLimitingSteepness(_))
        ));
        assert!(matches!(
            solve_newton(&w, Control::Steepness(-0.01), &NewtonOptions::default()),
            Err(StokesError::NegativeSteepness(_))
        ));
    }

    #[test]
    fn converges_quadratically_from_linear_guess() {
        let grid = crate::spectral::Grid::new(128).unwrap();
        let s = 0.03;
        let guess = StokesWave::linear_guess(&grid, None, std::f64::consts::PI * s, 1.0).unwrap();
        let (w, rep) = solve_newton(&guess, Control::Steepness(s), &NewtonOptions::default()).unwrap();
        assert!(w.residual_norm() <= 1e-12, "{:?}", rep);
        assert!((w.steepness() - s).abs() < 1e-14);
        let r = &rep.residuals;
        // once the residual is small, each step squares it
        for i in 1..r.len() - 1 {
            if r[i] < 1e-3 && r[i + 1] > 1e-11 {
                assert!(r[i + 1].ln() / r[i].ln() >= 1.7, "{r:?}");
            }
        }
    }

    #[test]
    fn mapped_grid_solution_matches_uniform() {
        let grid = crate::spectral::Grid::new(128).unwrap();
        let s = 0.08;
        let opts = NewtonOptions::default();
        let guess = StokesWave::linear_guess(&grid, None, std::f64::consts::PI * s, 1.0).unwrap();
        let (wu, _) = solve_newton(&guess, Control::Steepness(s), &opts).unwrap();
        let mapped = wu.resample(128, 0.5).unwrap();
        let (wm, _) = solve_newton(&mapped, Control::Steepness(s), &opts).unwrap();
        assert!(wm.residual_norm() <= 1e-11);
        assert!((wm.c() - wu.c()).abs() < 1e-12, "{} {}", wm.c(), wu.c());
    }
}
