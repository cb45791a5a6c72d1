use std::io::{self, Write};

use super::context::{GuidedContext, Scales};
use super::pcg::{pcg_solve, PcgOutcome};
use super::system::{assemble_with, energy_with};
use crate::error::{contract, Result};
use crate::image::{for_each_channel, mean_abs, Image};
use crate::params::FilterParams;

/// Per-iteration record of an IRLS run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrlsTrace {
    pub iterates: usize,
    /// Energy of the initial iterate.
    pub initial_energy: f64,
    /// Mean absolute difference between iterate `n + 1` and `n`.
    pub mad_sequence: Vec<f64>,
    /// Energy after each iteration.
    pub energy_sequence: Vec<f64>,
    pub pcg_iters: Vec<usize>,
    /// The MAD stopping rule fired before `irls_maxit`.
    pub converged: bool,
    /// Every inner PCG solve met its tolerance.
    pub pcg_converged: bool,
}

impl IrlsTrace {
    pub(crate) fn record(&mut self, mad: f64, energy: f64, pcg: &PcgOutcome) {
        self.iterates += 1;
        self.mad_sequence.push(mad);
        self.energy_sequence.push(energy);
        self.pcg_iters.push(pcg.iterations);
        self.pcg_converged &= pcg.converged;
    }

    pub(crate) fn started(initial_energy: f64) -> Self {
        Self {
            initial_energy,
            pcg_converged: true,
            ..Default::default()
        }
    }

    /// Folds per-channel traces into one: MAD averaged over the channels
    /// still iterating, energies summed (a finished channel keeps its last
    /// energy), PCG counts summed.
    pub fn combine(traces: &[IrlsTrace]) -> IrlsTrace {
        if traces.len() == 1 {
            return traces[0].clone();
        }
        let iterates = traces.iter().map(|t| t.iterates).max().unwrap_or(0);
        let mut out = IrlsTrace {
            iterates,
            initial_energy: traces.iter().map(|t| t.initial_energy).sum(),
            converged: traces.iter().all(|t| t.converged),
            pcg_converged: traces.iter().all(|t| t.pcg_converged),
            ..Default::default()
        };
        for k in 0..iterates {
            let active: Vec<&IrlsTrace> = traces.iter().filter(|t| t.iterates > k).collect();
            out.mad_sequence
                .push(active.iter().map(|t| t.mad_sequence[k]).sum::<f64>() / active.len() as f64);
            out.pcg_iters.push(active.iter().map(|t| t.pcg_iters[k]).sum());
            out.energy_sequence.push(
                traces
                    .iter()
                    .map(|t| match t.energy_sequence.get(k) {
                        Some(&e) => e,
                        None => t.energy_sequence.last().copied().unwrap_or(t.initial_energy),
                    })
                    .sum(),
            );
        }
        out
    }

    /// Writes the trace as CSV: `iteration,mad,energy,pcg_iters`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "iteration,mad,energy,pcg_iters")?;
        for k in 0..self.iterates {
            writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                self.mad_sequence[k],
                self.energy_sequence[k],
                self.pcg_iters[k]
            )?;
        }
        Ok(())
    }
}

/// One reweighted update: assemble at `current` and solve, warm-started
/// at `current`.
pub fn irls_step(
    ctx: &GuidedContext,
    current: &Image,
    target: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<(Image, PcgOutcome)> {
    let sys = assemble_with(ctx, current, target, p, scales)?;
    let outcome = pcg_solve(&sys, current.data(), p.pcg_tol, p.pcg_maxit)?;
    let next = Image::gray(ctx.width(), ctx.height(), outcome.x.clone())?;
    Ok((next, outcome))
}

/// IRLS on a single channel. `observer` sees every new iterate with its
/// 1-based iteration index.
pub fn irls_filter_channel(
    ctx: &GuidedContext,
    target: &Image,
    p: &FilterParams,
    init: &Image,
    mut observer: impl FnMut(usize, &Image),
) -> Result<(Image, IrlsTrace)> {
    ctx.check_channel(target, "target")?;
    ctx.check_channel(init, "initial iterate")?;
    let scales = Scales::from_params(p);
    let mut current = init.clone();
    let mut trace = IrlsTrace::started(energy_with(ctx, &current, target, p, scales)?);
    for it in 1..=p.irls_maxit {
        let (next, outcome) = irls_step(ctx, &current, target, p, scales)?;
        let mad = mean_abs(&next, &current)?;
        let energy = energy_with(ctx, &next, target, p, scales)?;
        trace.record(mad, energy, &outcome);
        observer(it, &next);
        current = next;
        if mad < p.irls_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((current, trace))
}

/// Robust guided filtering of `target` under `guide`, starting from `init`.
/// Multi-channel targets are filtered channel by channel with the shared
/// guidance; the returned trace combines the channels (see
/// [`IrlsTrace::combine`]).
pub fn irls_filter(
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    init: &Image,
) -> Result<(Image, IrlsTrace)> {
    if !target.same_dims(init) {
        return contract("initial iterate must match the target's dimensions");
    }
    if !target.same_spatial_dims(guide) {
        return contract("guidance must match the target's spatial dimensions");
    }
    let ctx = GuidedContext::new(guide, p)?;
    let mut traces = Vec::with_capacity(target.channels());
    let mut k = 0;
    let out = for_each_channel(target, |plane| {
        let init_plane = if init.channels() == 1 {
            init.clone()
        } else {
            init.channel(k)
        };
        k += 1;
        let (filtered, trace) = irls_filter_channel(&ctx, plane, p, &init_plane, |_, _| {})?;
        traces.push(trace);
        Ok(filtered)
    })?;
    Ok((out, IrlsTrace::combine(&traces)))
}
