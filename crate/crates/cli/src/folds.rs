//! Cross-validation fold assignment.
//!
//! Patients are dealt round-robin into k folds. When acquisition dates are
//! available they are sorted first (stable, so ties keep manifest order),
//! which gives every fold a similar temporal spread instead of concentrating
//! early scans in one fold.

use crate::error::{HarnessError, Result};

/// Assigns a fold in `0..k` to each patient, returned in input order.
/// `dates` must be ISO-8601 strings aligned with `patient_ids`, so that
/// lexicographic order is chronological order.
pub fn make_folds(patient_ids: &[String], k: usize, dates: Option<&[String]>) -> Result<Vec<usize>> {
    let n = patient_ids.len();
    if k < 2 || k > n {
        return Err(HarnessError::InvalidFoldCount { k, patients: n });
    }
    if let Some(dates) = dates {
        if dates.len() != n {
            return Err(HarnessError::Manifest(format!(
                "{} dates for {n} patients",
                dates.len()
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    if let Some(dates) = dates {
        order.sort_by_key(|&i| &dates[i]);
    }

    let mut folds = vec![0usize; n];
    for (rank, &patient) in order.iter().enumerate() {
        folds[patient] = rank % k;
    }
    Ok(folds)
}

/// Number of patients per fold.
pub fn fold_sizes(folds: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; k];
    for &f in folds {
        sizes[f] += 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:03}")).collect()
    }

    #[test]
    fn ninety_four_patients_split_into_five_balanced_folds() {
        let folds = make_folds(&ids(94), 5, None).unwrap();
        let mut sizes = fold_sizes(&folds, 5);
        sizes.sort_unstable();
        assert_eq!(sizes, vec![18, 19, 19, 19, 19]);
    }

    #[test]
    fn each_patient_alone_when_k_equals_n() {
        let folds = make_folds(&ids(4), 4, None).unwrap();
        let sizes = fold_sizes(&folds, 4);
        assert_eq!(sizes, vec![1, 1, 1, 1]);
    }

    #[test]
    fn degenerate_counts_are_rejected() {
        assert!(matches!(
            make_folds(&ids(3), 5, None),
            Err(HarnessError::InvalidFoldCount { k: 5, patients: 3 })
        ));
        assert!(matches!(
            make_folds(&ids(3), 1, None),
            Err(HarnessError::InvalidFoldCount { .. })
        ));
        assert!(matches!(
            make_folds(&ids(0), 2, None),
            Err(HarnessError::InvalidFoldCount { .. })
        ));
    }

    #[test]
    fn dated_patients_interleave_chronologically() {
        // Dates given in scrambled order; the deal must follow date order.
        let dates: Vec<String> = [
            "2021-06-01",
            "2020-01-15",
            "2022-03-09",
            "2020-07-24",
            "2021-01-02",
            "2020-03-30",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        let folds = make_folds(&ids(6), 2, Some(&dates)).unwrap();

        let mut ranked: Vec<(&String, usize)> = dates.iter().zip(folds.iter().copied()).collect();
        ranked.sort_by_key(|(d, _)| *d);
        for (rank, (_, fold)) in ranked.iter().enumerate() {
            assert_eq!(*fold, rank % 2);
        }
    }

    #[test]
    fn tied_dates_keep_input_order() {
        let dates: Vec<String> = ["2021-01-01"; 5].into_iter().map(String::from).collect();
        let folds = make_folds(&ids(5), 2, Some(&dates)).unwrap();
        assert_eq!(folds, vec![0, 1, 0, 1, 0]);
        assert_eq!(folds, make_folds(&ids(5), 2, None).unwrap());
    }

    #[test]
    fn mismatched_date_count_is_rejected() {
        let dates = vec!["2021-01-01".to_string()];
        assert!(matches!(
            make_folds(&ids(3), 2, Some(&dates)),
            Err(HarnessError::Manifest(_))
        ));
    }
}
