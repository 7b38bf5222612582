use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::records::ReviewComment;
use super::CorpusError;

/// Uniform sample of `n` comments without replacement. The result order is
/// the sampling order, so `n == corpus.len()` yields a permutation.
pub fn sample_comments(
    corpus: &[ReviewComment],
    n: usize,
    seed: u64,
) -> Result<Vec<ReviewComment>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Argument("cannot sample from an empty corpus".into()));
    }
    if n > corpus.len() {
        return Err(CorpusError::Argument(format!(
            "sample size {n} exceeds corpus size {}",
            corpus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let (chosen, _) = indices.partial_shuffle(&mut rng, n);
    Ok(chosen.iter().map(|&i| corpus[i].clone()).collect())
}
