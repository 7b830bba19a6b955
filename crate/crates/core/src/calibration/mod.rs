//! Conductance-scale calibration: sweep a `(nConn, gScale)` grid, pick the
//! spike-rate matching scale per connection count while discarding runs with
//! non-finite neurons, then fit `gScale = k1 / (k2 + nConn) + k3`.

mod fit;
mod select;
mod sweep;

pub use fit::{fit_gscale, mape, predict, FitResult};
pub use select::{select_optima, Selection};
pub use sweep::{log_spaced, sweep, write_optima_csv, SweepFailure, SweepOutcome, SweepRow, SweepTemplate};
