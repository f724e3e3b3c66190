use super::RetrieveError;

/// 1-based rank of `correct` among `scores`.
///
/// Items scoring strictly higher come first; equal scores are broken by
/// position, so an earlier tie outranks the correct item.
pub fn rank_in_scores(scores: &[f64], correct: usize) -> usize {
    let sc = scores[correct];
    let higher = scores.iter().filter(|&&s| s > sc).count();
    let earlier_ties = scores[..correct].iter().filter(|&&s| s == sc).count();
    1 + higher + earlier_ties
}

/// Percentage of ranks at or below `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64, RetrieveError> {
    if ranks.is_empty() {
        return Err(RetrieveError::EmptyRanks);
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(100.0 * hits as f64 / ranks.len() as f64)
}

/// Median rank; an even count averages the two middle values.
pub fn median_rank(ranks: &[usize]) -> Result<f64, RetrieveError> {
    if ranks.is_empty() {
        return Err(RetrieveError::EmptyRanks);
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    })
}
