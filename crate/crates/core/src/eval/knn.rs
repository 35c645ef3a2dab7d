use super::EvalError;

/// k-nearest-neighbour vote under Euclidean distance.
///
/// Distance ties keep the lower training index; vote ties go to the lower
/// label.
pub fn knn_classify(
    train: &[Vec<f64>],
    labels: &[u32],
    sample: &[f64],
    k: usize,
) -> Result<u32, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    if train.len() != labels.len() {
        return Err(EvalError::Invalid(format!(
            "{} samples, {} labels",
            train.len(),
            labels.len()
        )));
    }
    if k == 0 || k > train.len() {
        return Err(EvalError::Invalid(format!(
            "k = {k} outside 1..={}",
            train.len()
        )));
    }
    if let Some(bad) = train.iter().find(|t| t.len() != sample.len()) {
        return Err(EvalError::Invalid(format!(
            "sample dimension {} differs from training dimension {}",
            sample.len(),
            bad.len()
        )));
    }
    // squared distances order the same as distances
    let mut ranked: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (
                t.iter().zip(sample).map(|(a, b)| (a - b) * (a - b)).sum(),
                i,
            )
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut votes: Vec<(u32, usize)> = Vec::new();
    for &(_, i) in &ranked[..k] {
        match votes.iter_mut().find(|(l, _)| *l == labels[i]) {
            Some(v) => v.1 += 1,
            None => votes.push((labels[i], 1)),
        }
    }
    votes.sort_by_key(|&(label, _)| label);
    let best = votes.iter().map(|v| v.1).max().expect("k ≥ 1");
    Ok(votes.iter().find(|v| v.1 == best).expect("max exists").0)
}
