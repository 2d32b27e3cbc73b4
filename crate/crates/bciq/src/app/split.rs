//! Stratified train/test splitting and k-fold partitioning. Both shuffle
//! within each class stratum and allocate counts so every class is
//! represented proportionally to within one sample.

use std::collections::BTreeMap;

use crate::mathcore::Rng;

use super::AppError;

/// Indices grouped by class, in first-appearance order of the labels.
fn strata(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Split indices into train and test sets, stratified by label.
///
/// Per-class test counts start at the floor of the proportional share; the
/// remaining slots (up to one per class) go to the classes with the largest
/// fractional remainders, so every class lands within one sample of its
/// exact share. Members are shuffled within each stratum first.
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), AppError> {
    if labels.is_empty() {
        return Err(AppError::InsufficientData("no labels to split".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AppError::InvalidParameter(format!(
            "test fraction {test_fraction} must be strictly between 0 and 1"
        )));
    }
    let by_class = strata(labels);
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < 2) {
        return Err(AppError::InsufficientData(format!(
            "class {class} has only {} member(s); need at least 2 to split",
            members.len()
        )));
    }

    let mut rng = Rng::new(seed).stream("split");
    let total_test = (labels.len() as f64 * test_fraction).round_ties_even() as usize;

    let mut shares: Vec<(usize, Vec<usize>, usize, f64)> = Vec::new();
    let mut allocated = 0usize;
    for (&class, members) in &by_class {
        let mut members = members.clone();
        rng.shuffle(&mut members);
        let exact = members.len() as f64 * test_fraction;
        let base = (exact.floor() as usize).min(members.len());
        allocated += base;
        shares.push((class, members, base, exact - exact.floor()));
    }

    // Hand out the remaining slots by largest fractional remainder,
    // breaking ties by class id.
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        shares[b]
            .3
            .partial_cmp(&shares[a].3)
            .unwrap()
            .then(shares[a].0.cmp(&shares[b].0))
    });
    let mut leftover = total_test.saturating_sub(allocated);
    for &i in &order {
        if leftover == 0 {
            break;
        }
        if shares[i].2 < shares[i].1.len() {
            shares[i].2 += 1;
            leftover -= 1;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, members, take, _) in shares {
        test.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    Ok((train, test))
}

/// Partition indices into `k` stratified folds.
///
/// Each class's shuffled members are dealt round-robin onto the folds, with
/// the dealing cursor carried across classes so overall fold sizes stay
/// within one of each other.
pub fn kfold_indices(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, AppError> {
    if k < 2 {
        return Err(AppError::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    let by_class = strata(labels);
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(AppError::InvalidParameter(format!(
            "k = {k} exceeds the {} member(s) of class {class}",
            members.len()
        )));
    }

    let mut rng = Rng::new(seed).stream("split");
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for members in by_class.values() {
        let mut members = members.clone();
        rng.shuffle(&mut members);
        for idx in members {
            folds[cursor].push(idx);
            cursor = (cursor + 1) % k;
        }
    }
    Ok(folds)
}
