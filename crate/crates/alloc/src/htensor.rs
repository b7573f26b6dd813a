//! Flat-carrier views of the interference tensors.
//!
//! The engine indexes tensor entries by (channel, mode) tuples; the planner
//! addresses carriers through one flat index l = channel * D + mode
//! (channel-major, the same slot convention used for power vectors). This
//! module wraps a tensor set with accessors under the flat indexing: values
//! are unchanged, and index combinations whose modes cannot arise from any
//! underlying entry read as zero.

use fiberplan_egn::XTensorSet;

/// Flat-index view over a built tensor set.
pub struct HTensorSet<'a> {
    xt: &'a XTensorSet,
    d: usize,
    n_ch: usize,
}

/// Re-indexes a tensor set to flat carrier labels. Pure relabeling.
pub fn reshape_to_h(xt: &XTensorSet) -> HTensorSet<'_> {
    HTensorSet::new(xt)
}

impl<'a> HTensorSet<'a> {
    pub fn new(xt: &'a XTensorSet) -> Self {
        Self { xt, d: xt.n_modes(), n_ch: xt.n_channels() }
    }

    /// Number of flat carrier labels, channels times modes.
    pub fn n_slots(&self) -> usize {
        self.n_ch * self.d
    }

    pub fn slot(&self, channel: usize, mode: usize) -> usize {
        channel * self.d + mode
    }

    pub fn channel_mode(&self, slot: usize) -> (usize, usize) {
        (slot / self.d, slot % self.d)
    }

    /// Dominant kernel: nonzero when l1 and l2 share a mode and l3 carries
    /// the observed carrier's mode.
    pub fn a(&self, class: usize, l: usize, l1: usize, l2: usize, l3: usize) -> f64 {
        let (i2, p) = self.channel_mode(l);
        let (k2, q1) = self.channel_mode(l1);
        let (m2, q2) = self.channel_mode(l2);
        let (n2, p3) = self.channel_mode(l3);
        if q1 != q2 || p3 != p {
            return 0.0;
        }
        self.xt.xa(class, i2, p, k2, m2, n2, q1)
    }

    /// First fourth-moment slice: nonzero when l1 = l2 (the squared pump)
    /// and l3 carries the observed mode.
    pub fn b(&self, class: usize, l: usize, l1: usize, l2: usize, l3: usize) -> f64 {
        let (i2, p) = self.channel_mode(l);
        let (k2, q) = self.channel_mode(l1);
        let (n2, p3) = self.channel_mode(l3);
        if l1 != l2 || p3 != p {
            return 0.0;
        }
        self.xt.xb(class, i2, p, k2, n2, q)
    }

    /// Second fourth-moment slice: pump powers (k2 on the observed mode,
    /// k2 and n2 on a shared mode q).
    pub fn c(&self, class: usize, l: usize, l1: usize, l2: usize, l3: usize) -> f64 {
        let (i2, p) = self.channel_mode(l);
        let (k2a, pa) = self.channel_mode(l1);
        let (k2b, q) = self.channel_mode(l2);
        let (n2, qb) = self.channel_mode(l3);
        if pa != p || k2a != k2b || qb != q {
            return 0.0;
        }
        self.xt.xc(class, i2, p, k2b, n2, q)
    }

    /// Sixth-moment diagonal: one pump channel cubed, squared on mode q and
    /// once on the observed mode.
    pub fn d(&self, class: usize, l: usize, l1: usize, l2: usize, l3: usize) -> f64 {
        let (i2, p) = self.channel_mode(l);
        let (n2a, _q) = self.channel_mode(l1);
        let (n2b, p3) = self.channel_mode(l3);
        if l1 != l2 || n2b != n2a || p3 != p {
            return 0.0;
        }
        self.xt.xd(class, i2, p, n2a, _q)
    }
}
