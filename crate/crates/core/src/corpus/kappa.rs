use std::collections::BTreeMap;

use super::CorpusError;

/// Cohen's kappa between two annotators' label lists.
///
/// Returns 1.0 when chance agreement is 1 (both annotators used one and the
/// same label everywhere).
pub fn cohens_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64, CorpusError> {
    if labels_a.len() != labels_b.len() {
        return Err(CorpusError::Argument(format!(
            "label lists differ in length: {} vs {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(CorpusError::Argument("kappa needs at least one label pair".into()));
    }
    let n = labels_a.len() as f64;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64;
    let p_o = agree / n;

    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for a in labels_a {
        marginals.entry(a).or_default().0 += 1;
    }
    for b in labels_b {
        marginals.entry(b).or_default().1 += 1;
    }
    // Integer products keep the sum exact and order independent.
    let chance: usize = marginals.values().map(|(ca, cb)| ca * cb).sum();
    let p_e = chance as f64 / (n * n);

    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_agreement() {
        let a = ["x", "y", "x", "z"];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn chance_level_two_by_two() {
        // Contingency: AA=1, AB=1, BA=1, BB=1 -> p_o = 0.5, p_e = 0.5*0.5 + 0.5*0.5 = 0.5.
        let a = ["A", "A", "B", "B"];
        let b = ["A", "B", "A", "B"];
        assert_eq!(cohens_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_label_everywhere() {
        assert_eq!(cohens_kappa(&["q"; 3], &["q"; 3]).unwrap(), 1.0);
    }

    #[test]
    fn textbook_value() {
        // 50 items: yes/yes 20, yes/no 5, no/yes 10, no/no 15.
        // p_o = 0.7, p_e = 0.5*0.6 + 0.5*0.4 = 0.5, kappa = 0.4.
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, n) in [(1, 1, 20), (1, 0, 5), (0, 1, 10), (0, 0, 15)] {
            for _ in 0..n {
                a.push(x);
                b.push(y);
            }
        }
        assert!((cohens_kappa(&a, &b).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(cohens_kappa(&[1, 2], &[1]).is_err());
        assert!(cohens_kappa::<u8>(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(pairs in prop::collection::vec((0u8..5, 0u8..5), 1..60)) {
            let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let k = cohens_kappa(&a, &b).unwrap();
            prop_assert_eq!(k, cohens_kappa(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&k));
        }

        #[test]
        fn relabeling_invariant(pairs in prop::collection::vec((0u8..5, 0u8..5), 1..60), shift in 1u8..5) {
            let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            // Bijection on 0..5 that also reverses the label order.
            let relabel = |x: &u8| 4 - ((x + shift) % 5);
            let ra: Vec<u8> = a.iter().map(relabel).collect();
            let rb: Vec<u8> = b.iter().map(relabel).collect();
            prop_assert_eq!(cohens_kappa(&a, &b).unwrap(), cohens_kappa(&ra, &rb).unwrap());
        }
    }
}
