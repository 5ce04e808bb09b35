//! Soft ordinal embedding: squared margin hinge over triples, minimized by
//! full-batch gradient descent from random restarts.

use log::debug;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::refine::{Triple, TripleSet};
use crate::seeds::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    /// First trial step of every restart.
    pub initial_step: f64,
    /// Backtracking shrink factor in `(0, 1)`.
    pub decay: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            initial_step: 1.0,
            decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeConfig {
    pub dim: usize,
    pub margin: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub loss_threshold: f64,
    pub step_schedule: StepSchedule,
    pub seed: u64,
    /// Worker threads for restarts; 1 runs them in order on the caller.
    pub threads: usize,
}

impl Default for SoeConfig {
    fn default() -> Self {
        SoeConfig {
            dim: 2,
            margin: 0.1,
            restarts: 20,
            max_iterations: 3000,
            loss_threshold: 1e-3,
            step_schedule: StepSchedule::default(),
            seed: 0,
            threads: 1,
        }
    }
}

impl SoeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.dim < 1 {
            return bad("soe dim must be at least 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("soe margin must be positive");
        }
        if self.restarts < 1 {
            return bad("soe restarts must be at least 1");
        }
        let StepSchedule { initial_step, decay } = self.step_schedule;
        let step_ok = initial_step > 0.0 && initial_step.is_finite();
        let decay_ok = decay > 0.0 && decay < 1.0;
        if !step_ok || !decay_ok {
            return bad("soe step schedule needs initial_step > 0 and 0 < decay < 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeResult {
    pub positions: PointSet,
    pub final_loss: f64,
    pub restarts_used: usize,
    /// Restarts abandoned after a non-finite loss.
    pub discarded: usize,
    pub converged: bool,
    /// Final loss of every completed restart, in restart order.
    pub restart_losses: Vec<f64>,
}

#[inline]
fn hinge_terms(x: &PointSet, t: &Triple, margin: f64) -> (f64, f64, f64) {
    let dab = x.dist(t.head, t.closer);
    let dac = x.dist(t.head, t.farther);
    (dab + margin - dac, dab, dac)
}

/// `sum max(0, d(a,b) + margin - d(a,c))^2` over triples `(a, b, c)`.
pub fn soe_loss(positions: &PointSet, triples: &[Triple], margin: f64) -> f64 {
    triples
        .iter()
        .map(|t| {
            let (h, _, _) = hinge_terms(positions, t, margin);
            if h > 0.0 {
                h * h
            } else {
                0.0
            }
        })
        .sum()
}

/// Loss and its gradient (row-major, same shape as `positions`). Coincident
/// points contribute a zero subgradient.
pub fn soe_loss_grad(positions: &PointSet, triples: &[Triple], margin: f64) -> (f64, Vec<f64>) {
    let dim = positions.dim();
    let mut grad = vec![0.0; positions.as_slice().len()];
    let mut loss = 0.0;
    for t in triples {
        let (h, dab, dac) = hinge_terms(positions, t, margin);
        if h <= 0.0 {
            continue;
        }
        loss += h * h;
        let (a, b, c) = (positions.row(t.head), positions.row(t.closer), positions.row(t.farther));
        let wab = if dab > 0.0 { 2.0 * h / dab } else { 0.0 };
        let wac = if dac > 0.0 { 2.0 * h / dac } else { 0.0 };
        for k in 0..dim {
            let uab = wab * (a[k] - b[k]);
            let uac = wac * (a[k] - c[k]);
            grad[t.head * dim + k] += uab - uac;
            grad[t.closer * dim + k] -= uab;
            grad[t.farther * dim + k] += uac;
        }
    }
    (loss, grad)
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking. Returns the final loss, or `None` if it went non-finite.
/// `trace` receives the loss after every accepted step.
pub fn descend(
    positions: &mut PointSet,
    triples: &[Triple],
    margin: f64,
    max_iterations: usize,
    schedule: StepSchedule,
    mut trace: Option<&mut Vec<f64>>,
) -> Option<f64> {
    const ARMIJO: f64 = 1e-4;
    let (mut loss, mut grad) = soe_loss_grad(positions, triples, margin);
    let mut step = schedule.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..max_iterations {
        if !loss.is_finite() {
            return None;
        }
        if loss == 0.0 {
            break;
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            break;
        }
        if let Some((px, pg)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..grad.len() {
                let s = positions.as_slice()[i] - px[i];
                let y = grad[i] - pg[i];
                ss += s * s;
                sy += s * y;
            }
            if sy > 0.0 {
                step = ss / sy;
            }
        }
        let x0 = positions.as_slice().to_vec();
        let accepted = loop {
            for (x, (&a, &g)) in positions.as_mut_slice().iter_mut().zip(x0.iter().zip(&grad)) {
                *x = a - step * g;
            }
            let trial = soe_loss(positions, triples, margin);
            if trial <= loss - ARMIJO * step * g2 {
                break Some(trial);
            }
            step *= schedule.decay;
            if step < 1e-300 {
                break None;
            }
        };
        let Some(new_loss) = accepted else {
            positions.as_mut_slice().copy_from_slice(&x0);
            break;
        };
        let (l, g) = soe_loss_grad(positions, triples, margin);
        debug_assert!(l <= loss || !l.is_finite());
        let stalled = loss - new_loss <= 1e-15 * loss;
        prev = Some((x0, std::mem::replace(&mut grad, g)));
        loss = l;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(loss);
        }
        if stalled {
            break;
        }
    }
    loss.is_finite().then_some(loss)
}

fn validate_triples(triples: &[Triple], n: usize) -> Result<()> {
    if triples.is_empty() {
        return Err(Error::InvalidArgument("soe needs at least one triple".into()));
    }
    for t in triples {
        let m = t.head.max(t.closer).max(t.farther);
        if m >= n {
            return Err(Error::InvalidArgument(format!(
                "triple ({}, {}, {}) names object {m} but n = {n}",
                t.head, t.closer, t.farther
            )));
        }
    }
    Ok(())
}

fn run_restart(triples: &[Triple], n: usize, config: &SoeConfig, r: usize) -> (PointSet, Option<f64>) {
    let mut rng = stream_rng(config.seed, Stream::Soe, r as u32);
    let coords: Vec<f64> = (0..n * config.dim).map(|_| rng.random::<f64>()).collect();
    let mut x = PointSet::new(config.dim, coords).expect("dim >= 1");
    let loss = descend(
        &mut x,
        triples,
        config.margin,
        config.max_iterations,
        config.step_schedule,
        None,
    );
    let loss = loss.filter(|_| x.is_finite());
    debug!("soe restart {r} in dim {}: {loss:?}", config.dim);
    (x, loss)
}

/// Best of `config.restarts` descents. Stops early once a restart reaches
/// zero loss, since no later restart can beat it.
pub fn soe_fit(triples: &TripleSet, n: usize, config: &SoeConfig) -> Result<SoeResult> {
    config.validate()?;
    let ts = triples.triples();
    validate_triples(ts, n)?;
    let runs: Vec<(PointSet, Option<f64>)> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let all: Vec<_> = pool.install(|| {
            (0..config.restarts)
                .into_par_iter()
                .map(|r| run_restart(ts, n, config, r))
                .collect()
        });
        let cut = all
            .iter()
            .position(|(_, l)| *l == Some(0.0))
            .map_or(all.len(), |i| i + 1);
        all.into_iter().take(cut).collect()
    } else {
        let mut out = Vec::new();
        for r in 0..config.restarts {
            let run = run_restart(ts, n, config, r);
            let done = run.1 == Some(0.0);
            out.push(run);
            if done {
                break;
            }
        }
        out
    };
    let restarts_used = runs.len();
    let mut discarded = 0;
    let mut restart_losses = Vec::new();
    let mut best: Option<(PointSet, f64)> = None;
    for (x, loss) in runs {
        let Some(loss) = loss else {
            discarded += 1;
            continue;
        };
        restart_losses.push(loss);
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((x, loss));
        }
    }
    let (positions, _) = best.ok_or_else(|| {
        Error::InternalInvariant("every soe restart produced a non-finite loss".into())
    })?;
    let final_loss = soe_loss(&positions, ts, config.margin);
    Ok(SoeResult {
        positions,
        final_loss,
        restarts_used,
        discarded,
        converged: final_loss < config.loss_threshold,
        restart_losses,
    })
}

/// Fits in `config.dim`, and once more in twice that dimension if the first
/// attempt does not converge. Returns every attempt; the last is the answer.
pub fn soe_fit_doubling(triples: &TripleSet, n: usize, config: &SoeConfig) -> Result<Vec<SoeResult>> {
    let first = soe_fit(triples, n, config)?;
    if first.converged {
        return Ok(vec![first]);
    }
    let wider = SoeConfig {
        dim: config.dim * 2,
        ..config.clone()
    };
    let second = soe_fit(triples, n, &wider)?;
    Ok(vec![first, second])
}
