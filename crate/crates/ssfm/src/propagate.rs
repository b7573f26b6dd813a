//! Split-step propagation: dispersion in the frequency domain, Manakov-type
//! nonlinear phase in the time domain, lumped gain and noise at span ends.
//!
//! Fields stay launch-normalised inside a span. Loss enters the nonlinear
//! stage through per-step effective lengths (exact per mode, so modes with
//! different attenuation weaken at their own rates), and the accumulated
//! attenuation is applied together with the amplifier gain at the span end.
//! The splitting is symmetric, with the nonlinear rotation of each step
//! placed at the step midpoint and adjacent dispersion segments merged.
//!
//! Step widths are jittered around the uniform width instead of forming a
//! lattice. On a lattice the step-frozen nonlinear operator re-phases
//! whenever a pump-probe walk-off rate is commensurate with the step length,
//! which manufactures spurious phase-matched interaction between carriers
//! that in reality walk past each other; aperiodic midpoints keep those
//! contributions incoherent.
//!
//! Freezing the cross-mode intensity over a step still leaves an error floor
//! proportional to the step length for pump components that walk past the
//! probe within the step, and modes here differ in group delay by whole
//! nanoseconds per kilometre. When modes with distinct group delays share a
//! fibre, the nonlinear phase is therefore assembled in the frequency
//! domain: each pump intensity component gets the exact within-step response
//! for its walk-off rate, making the first-order cross-mode transfer exact
//! for any step count. Contributions between modes of equal group delay keep
//! the plain effective-length weight, which is already exact for them.

use fiberplan_core::{FiberSpec, ModeSpec, SystemConfig};
use fiberplan_core::units::PLANCK;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::fft::FftPair;
use crate::grid::SimGrid;
use crate::prng;
use crate::synth::complex_gaussian;
use crate::SsfmOptions;

/// Propagation constant of one mode at frequency offset `f`, rad/km.
pub(crate) fn mode_beta(m: &ModeSpec, f: f64) -> f64 {
    let w = std::f64::consts::TAU * f;
    m.beta0 + w * (m.beta1 + w * (0.5 * m.beta2 + w * m.beta3 / 6.0))
}

/// Effective length of the fibre segment [z0, z1] under attenuation `alpha`.
fn segment_weight(alpha: f64, z0: f64, z1: f64) -> f64 {
    if alpha == 0.0 {
        z1 - z0
    } else {
        ((-alpha * z0).exp() - (-alpha * z1).exp()) / alpha
    }
}

/// Step boundaries for one span: golden-ratio jitter of the step widths
/// around the uniform width, rescaled so the last boundary lands exactly on
/// the span end. `salt` offsets the sequence so spans do not share a pattern.
fn step_boundaries(length_km: f64, steps: usize, salt: u64) -> Vec<f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let widths: Vec<f64> = (0..steps)
        .map(|k| 1.0 + 0.9 * (((k as f64 + 1.0 + 31.0 * salt as f64) * PHI).fract() - 0.5))
        .collect();
    let scale = length_km / widths.iter().sum::<f64>();
    let mut z = Vec::with_capacity(steps + 1);
    z.push(0.0);
    for w in &widths {
        z.push(z.last().unwrap() + w * scale);
    }
    z[steps] = length_km;
    z
}

fn beta_tables(fiber: &FiberSpec, grid: &SimGrid) -> Vec<Vec<f64>> {
    fiber
        .modes
        .iter()
        .map(|m| (0..grid.n_samples).map(|k| mode_beta(m, grid.bin_offset_hz(k))).collect())
        .collect()
}

fn fill_rotations(beta: &[Vec<f64>], h_km: f64, rot: &mut [Vec<Complex64>]) {
    rot.par_iter_mut().zip(beta).for_each(|(r, b)| {
        for (x, bk) in r.iter_mut().zip(b) {
            *x = Complex64::from_polar(1.0, -bk * h_km);
        }
    });
}

fn apply_linear(fields: &mut [Vec<Complex64>], rot: &[Vec<Complex64>], fft: &FftPair) {
    fields.par_iter_mut().enumerate().for_each(|(idx, field)| {
        let r = &rot[idx / 2];
        fft.forward(field);
        for (x, c) in field.iter_mut().zip(r.iter()) {
            *x *= *c;
        }
        fft.inverse(field);
    });
}

/// Within-step response of the probe to a pump intensity component at offset
/// `f_hz`, for pump power decay `alpha` and group-delay difference `rate`
/// (probe minus pump, s/km) over [z0, z1], referenced to the step midpoint
/// where the frozen intensity is sampled. Reduces to the segment weight when
/// the offset or the rate vanishes.
fn walkoff_window(alpha: f64, rate: f64, z0: f64, z1: f64, f_hz: f64) -> Complex64 {
    let delta = std::f64::consts::TAU * f_hz * rate;
    let a = Complex64::new(-alpha, delta);
    let h = z1 - z0;
    let core = if a.norm() * h < 1e-6 {
        (a * z0).exp() * h * (1.0 + 0.5 * a * h)
    } else {
        ((a * z1).exp() - (a * z0).exp()) / a
    };
    core * Complex64::from_polar(1.0, -0.5 * delta * (z0 + z1))
}

/// Fills `rots` like [`nonlinear_rotations`], but resolves cross-mode
/// walk-off: pump intensities go through the frequency domain and each
/// component picks up the within-step window for its offset, so the summed
/// steps telescope to the exact first-order cross-mode response of the span.
#[allow(clippy::too_many_arguments)]
fn filtered_rotations(
    fields: &[Vec<Complex64>],
    fiber: &FiberSpec,
    cmat: &[Vec<f64>],
    (z0, z1): (f64, f64),
    grid: &SimGrid,
    fft: &FftPair,
    ibuf: &mut [Vec<Complex64>],
    theta: &mut [Vec<Complex64>],
    rots: &mut [Complex64],
) {
    let d = fiber.n_modes();
    ibuf.par_iter_mut().enumerate().for_each(|(q, buf)| {
        let (x, y) = (&fields[q * 2], &fields[q * 2 + 1]);
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(x[i].norm_sqr() + y[i].norm_sqr(), 0.0);
        }
        fft.forward(buf);
    });
    // One window per distinct (pump attenuation, delay difference) pair;
    // the opposite delay sign is the complex conjugate.
    let mut windows: Vec<(f64, f64, Vec<Complex64>)> = Vec::new();
    for p in 0..d {
        for q in 0..d {
            let dr = fiber.modes[p].beta1 - fiber.modes[q].beta1;
            let al = fiber.modes[q].attenuation;
            if dr == 0.0 || windows.iter().any(|(a, r, _)| *a == al && *r == dr) {
                continue;
            }
            let mut w = vec![Complex64::default(); grid.n_samples];
            if let Some((_, _, twin)) =
                windows.iter().find(|(a, r, _)| *a == al && *r == -dr)
            {
                for (x, t) in w.iter_mut().zip(twin) {
                    *x = t.conj();
                }
            } else {
                w.par_iter_mut().enumerate().for_each(|(j, x)| {
                    *x = walkoff_window(al, dr, z0, z1, grid.bin_offset_hz(j));
                });
            }
            windows.push((al, dr, w));
        }
    }
    theta.par_iter_mut().enumerate().for_each(|(p, th)| {
        th.iter_mut().for_each(|x| *x = Complex64::default());
        for q in 0..d {
            let c = cmat[p][q];
            let dr = fiber.modes[p].beta1 - fiber.modes[q].beta1;
            if dr == 0.0 {
                let w = c * segment_weight(fiber.modes[q].attenuation, z0, z1);
                for (x, s) in th.iter_mut().zip(&ibuf[q]) {
                    *x += w * s;
                }
            } else {
                let al = fiber.modes[q].attenuation;
                let win = windows
                    .iter()
                    .find(|(a, r, _)| *a == al && *r == dr)
                    .map(|(_, _, w)| w)
                    .expect("window built for every distinct pair");
                for ((x, s), w) in th.iter_mut().zip(&ibuf[q]).zip(win) {
                    *x += c * w * s;
                }
            }
        }
        fft.inverse(th);
    });
    rots.par_chunks_mut(d).enumerate().for_each(|(i, slot)| {
        for (p, r) in slot.iter_mut().enumerate() {
            *r = Complex64::from_polar(1.0, theta[p][i].re);
        }
    });
}

/// Fills `rots[i * d + p]` with the nonlinear phase rotation of mode `p` at
/// sample `i`, from the instantaneous two-polarisation mode intensities.
fn nonlinear_rotations(
    fields: &[Vec<Complex64>],
    step_mat: &[Vec<f64>],
    rots: &mut [Complex64],
    d: usize,
) {
    const CHUNK: usize = 4096;
    rots.par_chunks_mut(CHUNK * d).enumerate().for_each(|(chunk, out)| {
        let base = chunk * CHUNK;
        let mut intens = vec![0.0; d];
        for (j, slot) in out.chunks_mut(d).enumerate() {
            let i = base + j;
            for (q, iq) in intens.iter_mut().enumerate() {
                *iq = fields[q * 2][i].norm_sqr() + fields[q * 2 + 1][i].norm_sqr();
            }
            for (p, r) in slot.iter_mut().enumerate() {
                let theta: f64 =
                    step_mat[p].iter().zip(&intens).map(|(c, iq)| c * iq).sum();
                *r = Complex64::from_polar(1.0, theta);
            }
        }
    });
}

fn apply_rotations(fields: &mut [Vec<Complex64>], rots: &[Complex64], d: usize) {
    fields.par_iter_mut().enumerate().for_each(|(idx, field)| {
        let mode = idx / 2;
        for (i, x) in field.iter_mut().enumerate() {
            *x *= rots[i * d + mode];
        }
    });
}

/// Runs one span of fibre over the launch-normalised fields. Fields come out
/// still normalised: the span loss is left for the amplifier stage.
pub(crate) fn propagate_span(
    fields: &mut [Vec<Complex64>],
    fiber: &FiberSpec,
    length_km: f64,
    steps: usize,
    salt: u64,
    grid: &SimGrid,
    fft: &FftPair,
) {
    let d = fiber.n_modes();
    let z = step_boundaries(length_km, steps, salt);
    let mid = |k: usize| 0.5 * (z[k] + z[k + 1]);
    let beta = beta_tables(fiber, grid);
    let mut rot = vec![vec![Complex64::new(0.0, 0.0); grid.n_samples]; d];
    // Nonlinear coupling weights: intra-mode 8/9, inter-mode 4/3.
    let cmat: Vec<Vec<f64>> = (0..d)
        .map(|p| {
            (0..d)
                .map(|q| {
                    let pre = if p == q { 8.0 / 9.0 } else { 4.0 / 3.0 };
                    fiber.gamma * pre * fiber.coupling[p][q]
                })
                .collect()
        })
        .collect();

    let mixed_delays = fiber.modes.iter().any(|m| m.beta1 != fiber.modes[0].beta1);
    let mut scratch = if mixed_delays {
        let buf = vec![vec![Complex64::default(); grid.n_samples]; d];
        Some((buf.clone(), buf))
    } else {
        None
    };

    let mut rots = vec![Complex64::new(1.0, 0.0); grid.n_samples * d];
    fill_rotations(&beta, mid(0), &mut rot);
    apply_linear(fields, &rot, fft);
    for k in 0..steps {
        if let Some((ibuf, theta)) = scratch.as_mut() {
            let bounds = (z[k], z[k + 1]);
            filtered_rotations(fields, fiber, &cmat, bounds, grid, fft, ibuf, theta, &mut rots);
        } else {
            let step_mat: Vec<Vec<f64>> = (0..d)
                .map(|p| {
                    (0..d)
                        .map(|q| {
                            cmat[p][q]
                                * segment_weight(fiber.modes[q].attenuation, z[k], z[k + 1])
                        })
                        .collect()
                })
                .collect();
            nonlinear_rotations(fields, &step_mat, &mut rots, d);
        }
        apply_rotations(fields, &rots, d);
        let next = if k + 1 == steps { length_km - mid(k) } else { mid(k + 1) - mid(k) };
        fill_rotations(&beta, next, &mut rot);
        apply_linear(fields, &rot, fft);
    }
}

fn scale_fields(fields: &mut [Vec<Complex64>], per_mode: &[f64]) {
    for (idx, field) in fields.iter_mut().enumerate() {
        let s = per_mode[idx / 2];
        for x in field.iter_mut() {
            *x *= s;
        }
    }
}

/// Adds white circular-Gaussian noise with power spectral density
/// `0.5 nf (gain - 1) h nu` per polarisation over the whole simulated band.
fn add_ase(
    fields: &mut [Vec<Complex64>],
    noise_figure: f64,
    gain: f64,
    nu: f64,
    bandwidth: f64,
    master_seed: u64,
    stage: usize,
) {
    let variance = 0.5 * noise_figure * (gain - 1.0).max(0.0) * PLANCK * nu * bandwidth;
    if variance <= 0.0 {
        return;
    }
    for (idx, field) in fields.iter_mut().enumerate() {
        let (mode, pol) = (idx / 2, idx % 2);
        let mut rng =
            prng::stream("ase", master_seed, &[stage as u64, mode as u64, pol as u64]);
        for x in field.iter_mut() {
            *x += complex_gaussian(&mut rng, variance);
        }
    }
}

/// Full link: each span followed by its amplifier. Launch powers are defined
/// at the first span's fibre input, so the booster ahead of that reference
/// plane contributes only its noise, never gain; it shares the noise figure
/// of the first span's amplifier. ASE stages are numbered 0 for the booster
/// and s + 1 for span s.
pub(crate) fn run_link(
    cfg: &SystemConfig,
    grid: &SimGrid,
    fields: &mut [Vec<Complex64>],
    gains: &[f64],
    opts: &SsfmOptions,
    planner: &mut FftPlanner<f64>,
) {
    let fft = FftPair::new(planner, grid.n_samples);
    let d = cfg.n_modes();
    let nu = cfg.plan.center_frequency;
    if opts.ase {
        let nf = cfg.span_amplifier(0).noise_figure;
        add_ase(fields, nf, cfg.link.booster_gain, nu, grid.sample_rate, opts.master_seed, 0);
    }
    for s in 0..cfg.n_spans() {
        let span = &cfg.link.spans[s];
        let fiber = cfg.span_fiber(s);
        propagate_span(fields, fiber, span.length_km, opts.steps_per_span, s as u64, grid, &fft);
        let scales: Vec<f64> = (0..d)
            .map(|m| (-0.5 * fiber.modes[m].attenuation * span.length_km).exp() * gains[s].sqrt())
            .collect();
        scale_fields(fields, &scales);
        if opts.ase {
            let nf = cfg.span_amplifier(s).noise_figure;
            add_ase(fields, nf, gains[s], nu, grid.sample_rate, opts.master_seed, s + 1);
        }
    }
}
