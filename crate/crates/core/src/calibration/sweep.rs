use std::cmp::Ordering;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run, StorageChoice};
use crate::error::{Error, Result};
use crate::model::NetworkSpec;

/// One calibration measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub n_conn: usize,
    pub g_scale: f64,
    /// Spikes per neuron per second in the target population.
    pub avg_spike: f64,
    pub sum_nans: usize,
}

/// A grid cell whose network could not be built or run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepFailure {
    pub n_conn: usize,
    pub g_scale: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutcome {
    /// Sorted by `(nConn, gScale)`.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Builds the network measured at one grid cell.
pub trait SweepTemplate: Sync {
    fn build(&self, n_conn: usize, g_scale: f64) -> Result<NetworkSpec>;
}

impl<F> SweepTemplate for F
where
    F: Fn(usize, f64) -> Result<NetworkSpec> + Sync,
{
    fn build(&self, n_conn: usize, g_scale: f64) -> Result<NetworkSpec> {
        self(n_conn, g_scale)
    }
}

fn by_cell(a: (usize, f64), b: (usize, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// `n` values spaced evenly in log between `lo` and `hi`, endpoints exact.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Runs one simulation per `(nConn, gScale)` cell on `parallelism` workers.
///
/// Every cell uses the template's seed, so only the two swept variables
/// change across the grid. Output order does not depend on scheduling.
pub fn sweep(
    template: &dyn SweepTemplate,
    n_conn_values: &[usize],
    g_scale_values: &[f64],
    target_population: &str,
    storage: StorageChoice,
    parallelism: usize,
) -> Result<SweepOutcome> {
    if n_conn_values.is_empty() || g_scale_values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one nConn and one gScale value".into()));
    }
    let mut cells: Vec<(usize, f64)> = n_conn_values
        .iter()
        .flat_map(|&n| g_scale_values.iter().map(move |&g| (n, g)))
        .collect();
    cells.sort_by(|a, b| by_cell(*a, *b));
    cells.dedup();

    let measure = |&(n_conn, g_scale): &(usize, f64)| -> std::result::Result<SweepRow, SweepFailure> {
        let fail = |e: Error| SweepFailure { n_conn, g_scale, reason: e.to_string() };
        let spec = template.build(n_conn, g_scale).map_err(fail)?;
        let result = run(&spec, storage).map_err(fail)?;
        let avg_spike = *result
            .avg_spike
            .get(target_population)
            .ok_or_else(|| fail(Error::UnknownPopulation(target_population.into())))?;
        Ok(SweepRow { n_conn, g_scale, avg_spike, sum_nans: result.sum_nans })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| cells.par_iter().map(measure).collect());

    let mut outcome = SweepOutcome::default();
    for r in results {
        match r {
            Ok(row) => outcome.rows.push(row),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}

impl SweepOutcome {
    /// Writes the `simulation_result.out` table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nConn,gScale,avgSpike,sumNaNs")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n_conn, r.g_scale, r.avg_spike, r.sum_nans)?;
        }
        Ok(())
    }

    pub fn write_failures_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nConn,gScale,reason")?;
        for f in &self.failures {
            writeln!(w, "{},{},\"{}\"", f.n_conn, f.g_scale, f.reason.replace('"', "'"))?;
        }
        Ok(())
    }

    /// Reads rows back from a `simulation_result.out` table.
    pub fn read_rows<R: BufRead>(r: R) -> Result<Vec<SweepRow>> {
        let bad = |line: usize, what: &str| Error::InvalidArgument(format!("line {line}: {what}"));
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim() == "nConn,gScale,avgSpike,sumNaNs" => {}
            _ => return Err(bad(1, "expected header nConn,gScale,avgSpike,sumNaNs")),
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(bad(k + 2, "expected 4 fields"));
            }
            rows.push(SweepRow {
                n_conn: f[0].parse().map_err(|_| bad(k + 2, "nConn"))?,
                g_scale: f[1].parse().map_err(|_| bad(k + 2, "gScale"))?,
                avg_spike: f[2].parse().map_err(|_| bad(k + 2, "avgSpike"))?,
                sum_nans: f[3].parse().map_err(|_| bad(k + 2, "sumNaNs"))?,
            });
        }
        Ok(rows)
    }
}

/// Writes `optima.csv`.
pub fn write_optima_csv<W: Write>(optima: &[(usize, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "nConn,gScale")?;
    for (n, g) in optima {
        writeln!(w, "{n},{g}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_izhikevich_net;

    fn small(n_conn: usize, g: f64) -> Result<NetworkSpec> {
        let mut spec = build_izhikevich_net(100, n_conn, 0.8, g, 11)?;
        spec.duration_ms = 200.0;
        spec
            .synapses
            .iter_mut()
            .for_each(|s| s.storage = crate::model::Storage::Sparse);
        Ok(spec)
    }

    #[test]
    fn log_spacing_endpoints() {
        let g = log_spaced(0.5, 8.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!((g[0], g[4]), (0.5, 8.0));
        assert!((g[2] - 2.0).abs() < 1e-12);
        assert_eq!(log_spaced(3.0, 9.0, 1), vec![3.0]);
    }

    #[test]
    fn single_point_grid_matches_direct_run() {
        let out = sweep(&small, &[20], &[1.5], "izhikevich", StorageChoice::PerGroup, 1).unwrap();
        assert_eq!(out.rows.len(), 1);
        let direct = run(&small(20, 1.5).unwrap(), StorageChoice::PerGroup).unwrap();
        assert_eq!(out.rows[0].avg_spike, direct.avg_spike["izhikevich"]);
        assert_eq!(out.rows[0].sum_nans, direct.sum_nans);
    }

    #[test]
    fn rows_sorted_and_parallelism_invariant() {
        let a = sweep(&small, &[50, 10, 30], &[2.0, 0.5, 1.0], "izhikevich", StorageChoice::PerGroup, 1).unwrap();
        let b = sweep(&small, &[10, 30, 50], &[0.5, 1.0, 2.0], "izhikevich", StorageChoice::PerGroup, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 9);
        assert!(a.rows.windows(2).all(|w| by_cell((w[0].n_conn, w[0].g_scale), (w[1].n_conn, w[1].g_scale)).is_lt()));
    }

    #[test]
    fn failing_cells_are_recorded() {
        let out = sweep(&small, &[10, 101], &[1.0], "izhikevich", StorageChoice::PerGroup, 2).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].n_conn, 101);
    }

    #[test]
    fn csv_round_trip() {
        let out = sweep(&small, &[10, 20], &[0.7, 1.3], "izhikevich", StorageChoice::PerGroup, 2).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        assert_eq!(SweepOutcome::read_rows(&buf[..]).unwrap(), out.rows);
    }
}
