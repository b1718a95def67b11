use super::rank::{fractional_rank, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least 2 observations required, got {0}")]
    TooShort(usize),
    #[error("undefined correlation: a vector is constant")]
    Undefined,
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(CorrelationError::TooShort(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 || x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Err(CorrelationError::Undefined);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of two rank vectors, computed as the Pearson
/// correlation of the ranks so that tied (fractional) ranks are handled.
pub fn spearman(rank_a: &[f64], rank_b: &[f64]) -> Result<f64, CorrelationError> {
    pearson(rank_a, rank_b)
}

/// Ranks both score vectors and returns their Spearman correlation.
pub fn spearman_of_scores(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    spearman(
        &fractional_rank(x, Direction::Ascending),
        &fractional_rank(y, Direction::Ascending),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_reversed() {
        let r = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_abs_diff_eq!(spearman(&r, &r).unwrap(), 1.0, epsilon = 1e-15);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(spearman(&r, &rev).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_without_ties() {
        // 1 - 6 * 2 / (4 * 15)
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn linear_relations() {
        let x = [1.0, 2.5, 3.0, 7.0, -2.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yneg: Vec<f64> = x.iter().map(|v| -v + 7.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y2).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pearson(&x, &yneg).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(CorrelationError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(CorrelationError::TooShort(1)));
        assert_eq!(spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(CorrelationError::Undefined));
    }

    #[test]
    fn two_points_are_plus_or_minus_one() {
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), -1.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..20)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
            if let (Ok(a), Ok(b)) = (spearman_of_scores(&x, &y), spearman_of_scores(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn spearman_monotone_invariant(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let tx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            if let Ok(a) = spearman_of_scores(&x, &y) {
                prop_assert!((a - spearman_of_scores(&tx, &y).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn pearson_affine_sign(x in prop::collection::vec(-10.0f64..10.0, 3..15), alpha in -5.0f64..5.0, beta in -3.0f64..3.0) {
            prop_assume!(alpha.abs() > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| alpha * v + beta).collect();
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!((r - alpha.signum()).abs() < 1e-9);
            }
        }
    }
}
