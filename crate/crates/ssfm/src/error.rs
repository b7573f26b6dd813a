//! Reasons a configuration cannot be simulated in the time domain.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsfmError {
    /// Lightpaths covering only part of the link would need add/drop
    /// filtering mid-link, which a single circular block cannot model.
    #[error(
        "lightpath {id} covers spans {first}..={last} of 0..={end}; the time-domain \
         simulator only handles lightpaths that run the whole link"
    )]
    UnsupportedTopology { id: String, first: usize, last: usize, end: usize },

    /// The constellation moments match none of the symbol sets the
    /// transmitter knows how to draw.
    #[error(
        "constellation moments (mu4 = {mu4}, mu6 = {mu6}) match no known symbol set \
         (PSK, circular Gaussian, 16-QAM)"
    )]
    UnsupportedConstellation { mu4: f64, mu6: f64 },

    /// Channel centres must land on the simulation frequency grid exactly,
    /// or the brick-wall channels would smear across bins.
    #[error(
        "channel {channel} sits at {offset_hz} Hz, not an integer multiple of the grid \
         resolution {df_hz} Hz"
    )]
    IncommensurateGrid { channel: usize, offset_hz: f64, df_hz: f64 },

    /// The plan needs more oversampling than the simulator will do.
    #[error("plan needs {needed_ghz:.1} GHz of simulated band; the cap is {cap_ghz:.1} GHz")]
    GridTooWide { needed_ghz: f64, cap_ghz: f64 },

    /// Sinc-pulse synthesis realises a rectangular spectrum exactly one
    /// symbol rate wide; any other channel bandwidth is not reproducible.
    #[error(
        "channel bandwidth {bandwidth_hz} Hz differs from the symbol rate {symbol_rate_hz} Hz; \
         sinc pulses cannot realise that spectrum"
    )]
    BandwidthMismatch { bandwidth_hz: f64, symbol_rate_hz: f64 },

    /// Too few split steps for the second-order error model to mean anything.
    #[error("steps_per_span = {steps} is below the minimum of {min}")]
    TooFewSteps { steps: usize, min: usize },

    /// Launch power or gain vectors do not match the plan shape.
    #[error("{0}")]
    ShapeMismatch(String),
}
