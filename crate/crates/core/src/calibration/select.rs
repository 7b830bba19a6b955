use std::collections::BTreeMap;

use crate::calibration::SweepRow;
use crate::error::{Error, Result};

/// Relative tolerance for locating the reference gScale in a swept grid.
const GSCALE_MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub reference_avg_spike: f64,
    /// `(nConn, gScale*)`, ascending in nConn.
    pub optima: Vec<(usize, f64)>,
    /// nConn values with no NaN-free row.
    pub excluded: Vec<usize>,
}

impl Selection {
    pub fn warnings(&self) -> Vec<String> {
        self.excluded
            .iter()
            .map(|n| format!("warning: nConn = {n} omitted, every gScale produced non-finite neurons"))
            .collect()
    }
}

fn same_gscale(a: f64, b: f64) -> bool {
    (a - b).abs() <= GSCALE_MATCH_RTOL * a.abs().max(b.abs())
}

/// For every nConn, the NaN-free gScale whose rate is closest to the
/// reference row's rate. Ties go to the smaller gScale.
pub fn select_optima(rows: &[SweepRow], ref_n_conn: usize, ref_g_scale: f64) -> Result<Selection> {
    let reference = rows
        .iter()
        .filter(|r| r.n_conn == ref_n_conn && same_gscale(r.g_scale, ref_g_scale))
        .min_by(|a, b| a.g_scale.total_cmp(&b.g_scale))
        .ok_or(Error::MissingReference { n_conn: ref_n_conn, g_scale: ref_g_scale })?;
    if reference.sum_nans != 0 {
        return Err(Error::ContaminatedReference {
            n_conn: ref_n_conn,
            g_scale: ref_g_scale,
            sum_nans: reference.sum_nans,
        });
    }
    let target = reference.avg_spike;

    let mut by_conn: BTreeMap<usize, Option<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let best = by_conn.entry(r.n_conn).or_insert(None);
        if r.sum_nans != 0 {
            continue;
        }
        let dist = (r.avg_spike - target).abs();
        let better = match *best {
            None => true,
            Some((d, g)) => dist < d || (dist == d && r.g_scale < g),
        };
        if better {
            *best = Some((dist, r.g_scale));
        }
    }

    let mut selection = Selection { reference_avg_spike: target, optima: Vec::new(), excluded: Vec::new() };
    for (n, best) in by_conn {
        match best {
            Some((_, g)) => selection.optima.push((n, g)),
            None => selection.excluded.push(n),
        }
    }
    Ok(selection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n_conn: usize, g_scale: f64, avg_spike: f64, sum_nans: usize) -> SweepRow {
        SweepRow { n_conn, g_scale, avg_spike, sum_nans }
    }

    #[test]
    fn picks_closest_nan_free_row() {
        let rows = [
            row(100, 1.0, 5.0, 0),
            row(100, 2.0, 9.0, 0),
            row(100, 3.0, 20.0, 5),
            row(1000, 1.0, 10.0, 0),
        ];
        let s = select_optima(&rows, 1000, 1.0).unwrap();
        assert_eq!(s.optima, vec![(100, 2.0), (1000, 1.0)]);
        assert!(s.excluded.is_empty());
    }

    #[test]
    fn all_contaminated_nconn_is_omitted() {
        let rows = [row(100, 1.0, 50.0, 3), row(100, 2.0, 9.0, 1), row(1000, 1.0, 10.0, 0)];
        let s = select_optima(&rows, 1000, 1.0).unwrap();
        assert_eq!(s.optima, vec![(1000, 1.0)]);
        assert_eq!(s.excluded, vec![100]);
        assert_eq!(s.warnings().len(), 1);
        assert!(s.warnings()[0].contains("nConn = 100"));
    }

    #[test]
    fn ties_break_to_smaller_gscale() {
        let rows = [row(100, 4.0, 12.0, 0), row(100, 1.0, 8.0, 0), row(1000, 1.0, 10.0, 0)];
        assert_eq!(select_optima(&rows, 1000, 1.0).unwrap().optima[0], (100, 1.0));
    }

    #[test]
    fn reference_errors() {
        let rows = [row(100, 1.0, 5.0, 0), row(1000, 1.0, 10.0, 2)];
        assert!(matches!(select_optima(&rows, 500, 1.0), Err(Error::MissingReference { .. })));
        assert!(matches!(select_optima(&rows, 1000, 1.0), Err(Error::ContaminatedReference { .. })));
    }

    #[test]
    fn reference_found_despite_rounding() {
        let rows = [row(1000, 1.0000000000000002, 10.0, 0)];
        assert!(select_optima(&rows, 1000, 1.0).is_ok());
    }

    fn arb_rows() -> impl Strategy<Value = Vec<SweepRow>> {
        let grid: Vec<(usize, f64)> =
            [100usize, 200, 300].iter().flat_map(|&n| [0.5, 1.0, 2.0, 4.0].map(move |g| (n, g))).collect();
        prop::collection::vec((0.0f64..40.0, prop_oneof![3 => Just(0usize), 1 => 1usize..10]), grid.len()).prop_map(
            move |vals| {
                grid.iter()
                    .zip(vals)
                    .map(|(&(n, g), (avg, nans))| row(n, g, (avg * 4.0).round() / 4.0, nans))
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn order_invariant_and_nan_free(mut rows in arb_rows(), seed in any::<u64>()) {
            rows.iter_mut().filter(|r| r.n_conn == 300 && r.g_scale == 1.0).for_each(|r| r.sum_nans = 0);
            let a = select_optima(&rows, 300, 1.0).unwrap();
            let mut shuffled = rows.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = select_optima(&shuffled, 300, 1.0).unwrap();
            prop_assert_eq!(&a, &b);
            for (n, g) in a.optima {
                let src = rows.iter().find(|r| r.n_conn == n && r.g_scale == g).unwrap();
                prop_assert_eq!(src.sum_nans, 0);
            }
        }
    }
}
