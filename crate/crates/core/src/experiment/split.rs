use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExperimentError;

/// Per-class quotas summing to `floor(alpha · N)`: each class gets the floor
/// of its share, and leftover slots go to the largest remainders (ties to
/// the smaller label).
fn quotas(counts: &BTreeMap<usize, usize>, alpha: f64) -> BTreeMap<usize, usize> {
    let n: usize = counts.values().sum();
    let target = (alpha * n as f64).floor() as usize;
    let mut q: BTreeMap<usize, usize> = counts.iter().map(|(&c, &k)| (c, (alpha * k as f64).floor() as usize)).collect();
    let mut rest: Vec<(f64, usize)> = counts.iter().map(|(&c, &k)| (alpha * k as f64 - q[&c] as f64, c)).collect();
    rest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = target.saturating_sub(q.values().sum::<usize>());
    for &(_, c) in rest.iter().take(missing) {
        *q.get_mut(&c).unwrap() += 1;
    }
    q
}

fn check_sides(train: &BTreeMap<usize, usize>, counts: &BTreeMap<usize, usize>) -> Result<(), ExperimentError> {
    for (&c, &k) in counts {
        let t = train[&c];
        if t == 0 || t == k {
            return Err(ExperimentError::Plan(format!(
                "class {c} has {k} units; a split ratio leaving {t} for training empties one side"
            )));
        }
    }
    Ok(())
}

/// Seeded, label-stratified split of sample indices with exactly
/// `floor(alpha · N)` in training. Returns sorted `(train, test)` indices.
pub fn split_dataset(labels: &[usize], alpha: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ExperimentError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ExperimentError::Plan(format!("split ratio {alpha} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let counts = by_class.iter().map(|(&c, v)| (c, v.len())).collect();
    let q = quotas(&counts, alpha);
    check_sides(&q, &counts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut idx) in by_class {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..q[&c]]);
        test.extend_from_slice(&idx[q[&c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Like [`split_dataset`] but over whole groups (simulation runs), so no
/// run contributes to both sides. Each group takes the label of its first
/// sample.
pub fn split_by_group(labels: &[usize], groups: &[u64], alpha: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ExperimentError> {
    let mut seen = BTreeMap::new();
    for (&l, &g) in labels.iter().zip(groups) {
        seen.entry(g).or_insert(l);
    }
    let ids: Vec<u64> = seen.keys().copied().collect();
    let group_labels: Vec<usize> = seen.values().copied().collect();
    let (train_groups, _) = split_dataset(&group_labels, alpha, seed)?;
    let train_ids: Vec<u64> = train_groups.iter().map(|&i| ids[i]).collect();
    Ok((0..labels.len()).partition(|&i| train_ids.binary_search(&groups[i]).is_ok()))
}
