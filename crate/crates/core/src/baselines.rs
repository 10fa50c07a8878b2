//! Reference attachment rules and the per-user mean rating predictor.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{degree_vector, Graph};
use crate::optimizer::TrainingSample;

/// `p = 1/n` on every node.
pub fn uniform_attachment(n: usize) -> Result<DVector<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("uniform attachment needs n >= 1".into()));
    }
    Ok(DVector::from_element(n, 1.0 / n as f64))
}

/// Degree-proportional probabilities `d / (1^T d)`.
pub fn preferential_attachment(g: &Graph) -> Result<DVector<f64>> {
    let d = degree_vector(g);
    let total = d.sum();
    if g.nnz() == 0 || total <= 0.0 {
        return Err(Error::InvalidArgument(
            "preferential attachment needs a positive total degree".into(),
        ));
    }
    Ok(d / total)
}

/// Mean training pattern and mean training weights, ignoring the MSE.
pub fn training_mean(training: &[TrainingSample]) -> Result<(DVector<f64>, DVector<f64>)> {
    let first = training
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
    let n = first.len();
    let mut p = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for s in training {
        crate::error::check_len("training sample", n, s.len())?;
        p += &s.b_plus;
        w += &s.a_plus;
    }
    let t = training.len() as f64;
    Ok((p / t, w / t))
}

pub fn user_mean_prediction(ratings: &[f64]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::InvalidArgument("user has no ratings".into()));
    }
    Ok(ratings.iter().sum::<f64>() / ratings.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{barabasi_albert, erdos_renyi};
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_attachment(4).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(uniform_attachment(1).unwrap().as_slice(), &[1.0]);
        assert!(uniform_attachment(0).is_err());
    }

    proptest! {
        #[test]
        fn uniform_sums_to_one(n in 1usize..5000) {
            prop_assert!((uniform_attachment(n).unwrap().sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn preferential_is_a_distribution(n in 3usize..80, seed in 0u64..500) {
            let g = barabasi_albert(n, 2, seed).unwrap();
            let p = preferential_attachment(&g).unwrap();
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn user_mean_matches_fold(r in prop::collection::vec(1.0f64..5.0, 1..50)) {
            let fold = r.iter().fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
            prop_assert!((user_mean_prediction(&r).unwrap() - fold.0 / fold.1 as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn preferential_examples() {
        let path = Graph::from_edges(3, false, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(preferential_attachment(&path).unwrap().as_slice(), &[0.25, 0.5, 0.25]);

        let ring = Graph::from_edges(5, false, (0..5).map(|i| (i, (i + 1) % 5, 1.0))).unwrap();
        assert_eq!(preferential_attachment(&ring).unwrap(), uniform_attachment(5).unwrap());

        assert!(preferential_attachment(&Graph::empty(4, false)).is_err());
    }

    #[test]
    fn preferential_matches_degree_oracle() {
        let g = erdos_renyi(40, 0.2, 3).unwrap();
        let dense = g.to_dense();
        let degrees: Vec<f64> = (0..40).map(|i| dense.row(i).sum()).collect();
        let total: f64 = degrees.iter().sum();
        let p = preferential_attachment(&g).unwrap();
        for i in 0..40 {
            assert!((p[i] - degrees[i] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn training_mean_examples() {
        let s = |b: [f64; 2], a: [f64; 2]| {
            TrainingSample::new(0.0, DVector::from_row_slice(&a), DVector::from_row_slice(&b)).unwrap()
        };
        let one = s([1.0, 0.0], [0.4, 0.0]);
        let (p, w) = training_mean(&[one.clone(), one.clone(), one.clone()]).unwrap();
        assert_eq!(p, one.b_plus);
        assert!((w - &one.a_plus).amax() < 1e-15);

        let (p, _) = training_mean(&[s([1.0, 0.0], [1.0, 0.0]), s([0.0, 1.0], [0.0, 1.0])]).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        assert!(training_mean(&[]).is_err());
    }

    #[test]
    fn user_mean_examples() {
        assert_eq!(user_mean_prediction(&[3.0]).unwrap(), 3.0);
        assert_eq!(user_mean_prediction(&[2.0, 4.0]).unwrap(), 3.0);
        assert!(user_mean_prediction(&[]).is_err());
    }
}
