use std::io::Write;

use super::{Action, MdpSolution, PolicyTrajectory};
use crate::error::{Error, Result};

pub const POLICY_COLUMNS: [&str; 5] = ["mu_tilde", "sigma_tilde", "action", "list_price", "value"];
pub const TRAJECTORY_COLUMNS: [&str; 3] = ["tau", "list_price_pct_of_first", "sale_hazard"];

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// One row per grid cell; `list_price` is empty where the seller exits.
pub fn write_policy_csv<W: Write>(solution: &MdpSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLICY_COLUMNS).map_err(csv_err)?;
    let g = &solution.grid;
    for j in 0..g.n_sigma {
        for i in 0..g.n_mu {
            let (name, price) = match solution.action(i, j) {
                Action::Exit => ("exit", String::new()),
                Action::List(l) => ("list", l.to_string()),
            };
            w.write_record([
                g.mu_at(i).to_string(),
                g.sigma_at(j).to_string(),
                name.to_string(),
                price,
                solution.value(i, j).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_trajectory_csv<W: Write>(trajectory: &PolicyTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for p in &trajectory.points {
        w.write_record([
            p.tau.to_string(),
            p.mean_list_pct_of_first.to_string(),
            p.sale_hazard.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}
