//! Precomputed four-wave-mixing interference tensors.
//!
//! For every distinct span geometry (fiber type + length) the engine stores
//! one dense tensor of triple-frequency overlap integrals indexed by
//! (receiver channel, receiver mode, pump mode, three pump channels). The
//! fourth- and sixth-moment correction tensors are exact index slices of the
//! same storage, so only this one tensor is ever computed.

use fiberplan_core::SystemConfig;
use rayon::prelude::*;

use crate::beta::BetaProfile;
use crate::kernel::{mismatch_u_integral, SpanKernel};
use crate::EgnError;

/// Spans sharing fiber type and length; their tensors are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanClass {
    pub fiber: usize,
    pub length_km: f64,
    pub spans: Vec<usize>,
}

/// The per-span-class interference tensors of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct XTensorSet {
    n_channels: usize,
    n_modes: usize,
    points_per_band: u32,
    classes: Vec<SpanClass>,
    span_class: Vec<usize>,
    tensors: Vec<Vec<f64>>,
}

/// Groups spans into classes by (fiber, length), in first-use order.
pub fn span_classes(cfg: &SystemConfig) -> (Vec<SpanClass>, Vec<usize>) {
    let mut classes: Vec<SpanClass> = Vec::new();
    let mut span_class = Vec::with_capacity(cfg.n_spans());
    for (s, span) in cfg.link.spans.iter().enumerate() {
        let found = classes
            .iter()
            .position(|c| c.fiber == span.fiber && c.length_km.to_bits() == span.length_km.to_bits());
        let idx = match found {
            Some(i) => i,
            None => {
                classes.push(SpanClass { fiber: span.fiber, length_km: span.length_km, spans: vec![] });
                classes.len() - 1
            }
        };
        classes[idx].spans.push(s);
        span_class.push(idx);
    }
    (classes, span_class)
}

impl XTensorSet {
    /// Number of tensor elements per span class.
    fn class_len(n: usize, d: usize) -> usize {
        n * d * d * n * n * n
    }

    #[inline]
    fn flat(&self, i2: usize, p: usize, q: usize, k2: usize, m2: usize, n2: usize) -> usize {
        let (n, d) = (self.n_channels, self.n_modes);
        debug_assert!(i2 < n && k2 < n && m2 < n && n2 < n && p < d && q < d);
        ((((i2 * d + p) * d + q) * n + k2) * n + m2) * n + n2
    }

    /// Builds tensors at the config's quadrature resolution.
    pub fn build(cfg: &SystemConfig) -> Result<Self, EgnError> {
        Self::build_with_points(cfg, cfg.solver.quad_points_per_band)
    }

    /// Builds tensors at an explicit resolution (used by convergence checks).
    pub fn build_with_points(cfg: &SystemConfig, points: u32) -> Result<Self, EgnError> {
        let (classes, span_class) = span_classes(cfg);
        for class in &classes {
            let fiber = &cfg.fibers[class.fiber];
            if fiber.modes.iter().any(|m| m.attenuation <= 0.0) {
                return Err(EgnError::LosslessFiber { fiber: fiber.name.clone() });
            }
        }
        let tensors = classes
            .iter()
            .map(|class| compute_class_tensor(cfg, class, points))
            .collect();
        Ok(Self {
            n_channels: cfg.plan.n_channels,
            n_modes: cfg.n_modes(),
            points_per_band: points,
            classes,
            span_class,
            tensors,
        })
    }

    pub(crate) fn from_parts(
        cfg: &SystemConfig,
        points_per_band: u32,
        tensors: Vec<Vec<f64>>,
    ) -> Self {
        let (classes, span_class) = span_classes(cfg);
        debug_assert_eq!(classes.len(), tensors.len());
        Self {
            n_channels: cfg.plan.n_channels,
            n_modes: cfg.n_modes(),
            points_per_band,
            classes,
            span_class,
            tensors,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn points_per_band(&self) -> u32 {
        self.points_per_band
    }

    pub fn classes(&self) -> &[SpanClass] {
        &self.classes
    }

    pub fn class_of_span(&self, span: usize) -> usize {
        self.span_class[span]
    }

    pub(crate) fn raw_tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    /// Primary tensor: pumps at channels (k2, m2) on mode q and n2 on the
    /// receiver mode p, received on channel i2.
    pub fn xa(&self, class: usize, i2: usize, p: usize, k2: usize, m2: usize, n2: usize, q: usize) -> f64 {
        self.tensors[class][self.flat(i2, p, q, k2, m2, n2)]
    }

    /// Fourth-moment self-pair slice: the conjugate pump pair collapses onto
    /// one channel.
    pub fn xb(&self, class: usize, i2: usize, p: usize, k2: usize, n2: usize, q: usize) -> f64 {
        self.xa(class, i2, p, k2, k2, n2, q)
    }

    /// Fourth-moment cross-pair slice: the repeated channel splits across the
    /// receiver and pump modes.
    pub fn xc(&self, class: usize, i2: usize, p: usize, k2: usize, n2: usize, q: usize) -> f64 {
        self.xa(class, i2, p, n2, k2, k2, q)
    }

    /// Sixth-moment slice: all three pumps on one channel.
    pub fn xd(&self, class: usize, i2: usize, p: usize, n2: usize, q: usize) -> f64 {
        self.xa(class, i2, p, n2, n2, n2, q)
    }
}

fn compute_class_tensor(cfg: &SystemConfig, class: &SpanClass, points: u32) -> Vec<f64> {
    let n = cfg.plan.n_channels;
    let d = cfg.n_modes();
    let fiber = &cfg.fibers[class.fiber];
    let profiles: Vec<BetaProfile> = fiber.modes.iter().map(BetaProfile::from_mode).collect();
    let len = XTensorSet::class_len(n, d);

    let decompose = |idx: usize| {
        let n2 = idx % n;
        let rest = idx / n;
        let m2 = rest % n;
        let rest = rest / n;
        let k2 = rest % n;
        let rest = rest / n;
        let q = rest % d;
        let rest = rest / d;
        let p = rest % d;
        let i2 = rest / d;
        (i2, p, q, k2, m2, n2)
    };

    // Equal pump and receiver modes make the integral symmetric in the two
    // same-mode pump channels; compute the canonical half and mirror it so
    // the symmetry holds bit for bit.
    let mut tensor: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|idx| {
            let (i2, p, q, k2, m2, n2) = decompose(idx);
            if p == q && m2 > n2 {
                return f64::NAN; // mirrored below
            }
            entry_integral(cfg, fiber, &profiles, class.length_km, points, i2, p, q, k2, m2, n2)
        })
        .collect();
    for idx in 0..len {
        let (i2, p, q, k2, m2, n2) = decompose(idx);
        if p == q && m2 > n2 {
            let src = ((((i2 * d + p) * d + q) * n + k2) * n + n2) * n + m2;
            tensor[idx] = tensor[src];
        }
    }
    tensor
}

#[allow(clippy::too_many_arguments)]
fn entry_integral(
    cfg: &SystemConfig,
    fiber: &fiberplan_core::FiberSpec,
    profiles: &[BetaProfile],
    length_km: f64,
    points: u32,
    i2: usize,
    p: usize,
    q: usize,
    k2: usize,
    m2: usize,
    n2: usize,
) -> f64 {
    let plan = &cfg.plan;
    let b = plan.bandwidth;
    // Frequency conservation: pump sum must be able to reach the receiver band.
    let center_gap = plan.channel_offset(n2) + plan.channel_offset(m2)
        - plan.channel_offset(k2)
        - plan.channel_offset(i2);
    if center_gap.abs() >= 2.0 * b {
        return 0.0;
    }

    // Combined attenuation (a_n + a_m + a_k - a_i) / 2 collapses to the pump
    // mode's attenuation for this mode pairing.
    let kernel = SpanKernel::new(fiber.modes[q].attenuation, length_km);
    let bp = &profiles[p];
    let bq = &profiles[q];
    let gamma_tilde = if p == q {
        8.0 / 9.0 * fiber.gamma * fiber.coupling[p][p]
    } else {
        4.0 / 3.0 * fiber.gamma * fiber.coupling[p][q]
    };

    let band_i = plan.channel_band(i2);
    let band_k = plan.channel_band(k2);
    let band_m = plan.channel_band(m2);
    let band_n = plan.channel_band(n2);
    let r = points as usize;
    let dv = b / r as f64;

    let mut acc = 0.0;
    for jv in 0..r {
        let v = band_n.0 + (jv as f64 + 0.5) * dv;
        for jw in 0..r {
            let w = band_m.0 + (jw as f64 + 0.5) * dv;
            acc += mismatch_u_integral(&kernel, bp, bq, band_i, band_k, v, w, dv);
        }
    }
    gamma_tilde * gamma_tilde / (b * b * b) * acc * dv * dv
}
