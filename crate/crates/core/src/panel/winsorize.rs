//! Per time-step, per feature winsorization.
//!
//! Quantiles use the inverse empirical CDF: for `n` sorted values the
//! `p`-quantile is the `max(1, ceil(n p))`-th smallest value. Clipping to an
//! order statistic leaves that statistic in place, so winsorizing twice is
//! the same as winsorizing once.

use super::{CrossSection, Panel};
use crate::error::{ClaError, Result};

pub const DEFAULT_LOWER: f64 = 0.05;
pub const DEFAULT_UPPER: f64 = 0.95;

/// `p`-quantile of an ascending slice under the inverse-ECDF convention.
pub fn inverse_ecdf_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((n as f64) * p).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn winsorize(panel: &Panel, lower: f64, upper: f64) -> Result<Panel> {
    if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower >= upper {
        return Err(ClaError::Precondition(format!("winsorize needs 0 <= lower < upper <= 1, got ({lower}, {upper})")));
    }
    let sections = panel
        .sections()
        .iter()
        .map(|s| {
            let mut values = s.values.clone();
            let mut col = Vec::with_capacity(values.nrows());
            for j in 0..values.ncols() {
                col.clear();
                col.extend((0..values.nrows()).map(|i| values.get(i, j)));
                if col.is_empty() {
                    continue;
                }
                col.sort_by(f64::total_cmp);
                let lo = inverse_ecdf_quantile(&col, lower);
                let hi = inverse_ecdf_quantile(&col, upper);
                for i in 0..values.nrows() {
                    values.set(i, j, values.get(i, j).clamp(lo, hi));
                }
            }
            CrossSection { time: s.time.clone(), entities: s.entities.clone(), values }
        })
        .collect();
    Panel::new(panel.feature_names().to_vec(), sections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::panel::{EntityId, TimeId};
    use proptest::prelude::*;

    fn one_column_panel(col: &[f64]) -> Panel {
        let rows: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
        Panel::new(
            vec!["x".into()],
            vec![CrossSection {
                time: TimeId("0".into()),
                entities: (0..col.len()).map(|i| EntityId(format!("{i:04}"))).collect(),
                values: FeatureMatrix::from_rows(&rows).unwrap(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn one_to_hundred() {
        let col: Vec<f64> = (1..=100).map(f64::from).collect();
        // Independent rank computation: ceil(100*0.05)=5th and ceil(100*0.95)=95th values.
        let out = winsorize(&one_column_panel(&col), DEFAULT_LOWER, DEFAULT_UPPER).unwrap();
        let got = out.section(0).values.column(0);
        for (i, v) in got.iter().enumerate() {
            let orig = (i + 1) as f64;
            let want = orig.clamp(5.0, 95.0);
            assert_eq!(*v, want);
        }
        assert!(got[..5].iter().all(|&v| v == 5.0));
        assert!(got[95..].iter().all(|&v| v == 95.0));
        assert_eq!(&got[5..95], &col[5..95]);
    }

    #[test]
    fn constant_column_unchanged() {
        let col = vec![3.25; 40];
        let out = winsorize(&one_column_panel(&col), 0.05, 0.95).unwrap();
        assert_eq!(out.section(0).values.column(0), col);
    }

    #[test]
    fn bad_quantiles_rejected() {
        let p = one_column_panel(&[1.0, 2.0]);
        assert!(winsorize(&p, 0.5, 0.5).is_err());
        assert!(winsorize(&p, -0.1, 0.5).is_err());
        assert!(winsorize(&p, 0.1, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn idempotent_and_bounded(
            col in prop::collection::vec(-1e3f64..1e3, 1..60),
            lower in 0.0f64..0.45,
            width in 0.05f64..0.55,
        ) {
            let upper = (lower + width).min(1.0);
            let p = one_column_panel(&col);
            let once = winsorize(&p, lower, upper).unwrap();
            let twice = winsorize(&once, lower, upper).unwrap();
            prop_assert_eq!(&once, &twice);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let lo = inverse_ecdf_quantile(&sorted, lower);
            let hi = inverse_ecdf_quantile(&sorted, upper);
            for v in once.section(0).values.column(0) {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }
}
