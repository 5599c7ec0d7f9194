use std::io::Write;

use super::LoopRecord;
use crate::error::{Error, Result};

/// Column order of the loop time series.
pub const LOOP_COLUMNS: [&str; 8] = [
    "period",
    "alpha",
    "sigma_z2_emp",
    "sigma_hat2_emp",
    "overconfidence",
    "mean_abs_price_error",
    "mean_payoff",
    "payoff_variance",
];

/// Write one row per period.
pub fn write_loop_csv<W: Write>(records: &[LoopRecord], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Data(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOOP_COLUMNS).map_err(err)?;
    for r in records {
        w.write_record([
            r.period.to_string(),
            r.alpha.to_string(),
            r.sigma_z2_emp.to_string(),
            r.sigma_hat2_emp.to_string(),
            r.overconfidence.to_string(),
            r.mean_abs_price_error.to_string(),
            r.mean_payoff.to_string(),
            r.payoff_variance.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}
