//! Natural-parameter continuation of the wave branch in steepness.

use std::fmt;

use crate::error::StokesError;

use super::newton::{solve_newton, Control, NewtonOptions};
use super::{compute_hamiltonian, StokesWave, CONVERGED_RESIDUAL, LIMITING_STEEPNESS};

/// Use map parameter `l` for waves with steepness `>= from_steepness`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxTier {
    pub from_steepness: f64,
    pub l: f64,
}

#[derive(Clone, Debug)]
pub struct ContinuationPolicy {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton: NewtonOptions,
    /// Double `N` while the spectral tail exceeds `1e-12`.
    pub refine: bool,
    pub max_modes: usize,
    /// Sorted by `from_steepness`; empty keeps the start wave's map.
    pub aux_tiers: Vec<AuxTier>,
    /// Steepness values the branch must land on exactly.
    pub stops: Vec<f64>,
}

impl Default for ContinuationPolicy {
    fn default() -> Self {
        ContinuationPolicy {
            initial_step: 0.004,
            min_step: 1e-8,
            max_step: 0.004,
            newton: NewtonOptions::default(),
            refine: true,
            max_modes: 1 << 16,
            aux_tiers: vec![
                AuxTier { from_steepness: 0.0, l: 1.0 },
                AuxTier { from_steepness: 0.13, l: 0.25 },
                AuxTier { from_steepness: 0.138, l: 0.05 },
                AuxTier { from_steepness: 0.1405, l: 0.005 },
            ],
            stops: Vec::new(),
        }
    }
}

impl ContinuationPolicy {
    /// Keeps the start wave's `N` and `L` throughout.
    pub fn fixed_resolution() -> Self {
        ContinuationPolicy { refine: false, aux_tiers: Vec::new(), ..Default::default() }
    }

    fn tier_l(&self, s: f64) -> Option<f64> {
        self.aux_tiers.iter().filter(|t| s >= t.from_steepness).last().map(|t| t.l)
    }
}

/// Converged waves ordered by strictly increasing steepness.
#[derive(Clone, Debug, Default)]
pub struct BranchState {
    pub waves: Vec<StokesWave>,
    /// `(s, c)` for each wave.
    pub speed_curve: Vec<(f64, f64)>,
    /// `(s, kinetic + potential)` for each wave.
    pub hamiltonian_curve: Vec<(f64, f64)>,
}

impl BranchState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a wave; its steepness must exceed the last one.
    pub fn push(&mut self, w: StokesWave) -> Result<(), StokesError> {
        if let Some(last) = self.waves.last() {
            if w.steepness() <= last.steepness() {
                return Err(StokesError::Format(format!(
                    "branch steepness must increase ({} after {})",
                    w.steepness(),
                    last.steepness()
                )));
            }
        }
        self.speed_curve.push((w.steepness(), w.c()));
        self.hamiltonian_curve.push((w.steepness(), compute_hamiltonian(&w).total()));
        self.waves.push(w);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn last(&self) -> Option<&StokesWave> {
        self.waves.last()
    }

    /// Stored wave closest in steepness to `s`.
    pub fn nearest(&self, s: f64) -> Option<&StokesWave> {
        self.waves.iter().min_by(|a, b| {
            (a.steepness() - s).abs().partial_cmp(&(b.steepness() - s).abs()).unwrap()
        })
    }

    /// Solves for the wave at steepness `s` inside the stored range, starting
    /// from the interpolant of the neighbouring waves.
    pub fn wave_at(&self, s: f64, opts: &NewtonOptions) -> Result<StokesWave, StokesError> {
        let first = self.waves.first().ok_or_else(|| StokesError::Format("empty branch".into()))?;
        if let Some(w) = self.waves.iter().find(|w| w.steepness() == s) {
            return Ok(w.clone());
        }
        let i = self.waves.iter().rposition(|w| w.steepness() < s);
        let guess = match i {
            Some(i) if i + 1 < self.waves.len() => {
                let (a, b) = (&self.waves[i], &self.waves[i + 1]);
                let t = (s - a.steepness()) / (b.steepness() - a.steepness());
                interpolate(a, b, t).unwrap_or_else(|| a.clone())
            }
            Some(i) => self.waves[i].clone(),
            None => first.clone(),
        };
        let guess = if guess.steepness() == 0.0 && s > 0.0 {
            StokesWave::linear_guess(guess.grid(), guess.aux(), std::f64::consts::PI * s, guess.g())?
        } else {
            guess
        };
        let (w, _) = solve_newton(&guess, Control::Steepness(s), opts)?;
        Ok(w)
    }
}

/// `a + t (b - a)` when both waves share grid and map.
fn interpolate(a: &StokesWave, b: &StokesWave, t: f64) -> Option<StokesWave> {
    if a.n_modes() != b.n_modes() || a.l() != b.l() {
        return None;
    }
    let y: Vec<f64> = a.y_hat().iter().zip(b.y_hat()).map(|(p, q)| p + t * (q - p)).collect();
    let c = a.c() + t * (b.c() - a.c());
    StokesWave::from_cosine(a.grid(), a.aux().cloned(), y, c, a.g()).ok()
}

/// Continuation failure carrying the converged part of the branch.
#[derive(Debug)]
pub struct ContinuationFailure {
    pub error: StokesError,
    pub partial: BranchState,
}

impl fmt::Display for ContinuationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for ContinuationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<ContinuationFailure> for StokesError {
    fn from(f: ContinuationFailure) -> Self {
        f.error
    }
}

/// Re-solves `w` at its own steepness after refinement or a map change.
fn adapt(w: StokesWave, policy: &ContinuationPolicy) -> Result<StokesWave, StokesError> {
    let s = w.steepness();
    let mut w = w;
    if let Some(l) = policy.tier_l(s) {
        if l != w.l() {
            let moved = w.resample(w.n_modes(), l)?;
            w = solve_newton(&moved, Control::Steepness(s), &policy.newton)?.0;
        }
    }
    while policy.refine && !w.is_resolved() && 2 * w.n_modes() <= policy.max_modes {
        let padded = w.resample(2 * w.n_modes(), w.l())?;
        w = solve_newton(&padded, Control::Steepness(s), &policy.newton)?.0;
    }
    Ok(w)
}

/// Continues the branch from a converged `start` up to `s_target`.
pub fn continue_branch(
    start: &StokesWave,
    s_target: f64,
    policy: &ContinuationPolicy,
) -> Result<BranchState, ContinuationFailure> {
    let fail = |error: StokesError, partial: BranchState| ContinuationFailure { error, partial };
    if s_target >= LIMITING_STEEPNESS {
        return Err(fail(StokesError::BeyondLimitingSteepness(s_target), BranchState::new()));
    }
    if s_target < 0.0 {
        return Err(fail(StokesError::NegativeSteepness(s_target), BranchState::new()));
    }
    let res = start.residual_norm();
    if res > CONVERGED_RESIDUAL {
        return Err(fail(StokesError::NewtonDiverged { steps: 0, residual: res }, BranchState::new()));
    }
    let mut branch = BranchState::new();
    let first = match adapt(start.clone(), policy) {
        Ok(w) => w,
        Err(e) => return Err(fail(e, branch)),
    };
    branch.push(first.clone()).map_err(|e| fail(e, BranchState::new()))?;

    let mut cur = first;
    let mut prev: Option<StokesWave> = None;
    let mut step = policy.initial_step;
    let mut stops: Vec<f64> = policy.stops.iter().copied().filter(|&s| s > cur.steepness() && s < s_target).collect();
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());

    const SAME: f64 = 1e-12;
    while s_target - cur.steepness() > SAME {
        let s0 = cur.steepness();
        let room = (LIMITING_STEEPNESS - s0) / 3.0;
        let mut next = (s0 + step.min(room)).min(s_target);
        if let Some(&stop) = stops.iter().find(|&&x| x > s0 + SAME) {
            next = next.min(stop);
        }
        // avoid slivers before a stop or the target
        for mark in stops.iter().chain(std::iter::once(&s_target)) {
            if *mark > next + SAME && *mark - next < 0.05 * step {
                next = *mark;
            }
        }
        let guess = if s0 == 0.0 {
            StokesWave::linear_guess(cur.grid(), cur.aux(), std::f64::consts::PI * next, cur.g())
                .map_err(|e| fail(e, branch.clone()))?
        } else {
            match &prev {
                Some(p) => {
                    let t = (next - p.steepness()) / (s0 - p.steepness());
                    interpolate(p, &cur, t).unwrap_or_else(|| cur.clone())
                }
                None => cur.clone(),
            }
        };
        let solved = solve_newton(&guess, Control::Steepness(next), &policy.newton)
            .and_then(|(w, rep)| Ok((adapt(w, policy)?, rep)));
        match solved {
            Ok((w, rep)) => {
                if rep.steps <= 4 {
                    step = (step * 1.5).min(policy.max_step);
                }
                prev = Some(cur);
                cur = w.clone();
                branch.push(w).map_err(|e| fail(e, branch.clone()))?;
            }
            Err(_) => {
                step *= 0.5;
                if step < policy.min_step {
                    return Err(fail(
                        StokesError::ContinuationStalled { reached: s0, min_step: policy.min_step },
                        branch,
                    ));
                }
            }
        }
    }
    Ok(branch)
}
