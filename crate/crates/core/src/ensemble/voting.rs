use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier, Model};
use crate::error::{Error, Result};

/// Soft-voting combiner over already trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingModel {
    members: Vec<Model>,
    weights: Vec<f64>,
}

impl VotingModel {
    pub fn members(&self) -> &[Model] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Wraps at least two members sharing feature dimension and class count.
///
/// Weights default to equal; they must be non-negative with a positive sum.
pub fn fit_voting(members: Vec<Model>, weights: Option<Vec<f64>>) -> Result<VotingModel> {
    if members.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "voting needs at least two members, got {}",
            members.len()
        )));
    }
    let (d, k) = (members[0].n_features(), members[0].n_classes());
    for (i, m) in members.iter().enumerate().skip(1) {
        if m.n_features() != d || m.n_classes() != k {
            return Err(Error::InvalidParam(format!(
                "member {i} has shape ({}, {}), expected ({d}, {k})",
                m.n_features(),
                m.n_classes()
            )));
        }
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; members.len()]);
    if weights.len() != members.len() {
        return Err(Error::InvalidParam(format!(
            "{} weights for {} members",
            weights.len(),
            members.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::InvalidParam(
            "voting weights must be non-negative with a positive sum".into(),
        ));
    }
    Ok(VotingModel { members, weights })
}

impl Classifier for VotingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn n_classes(&self) -> usize {
        self.members[0].n_classes()
    }

    /// Weighted mean of member probability vectors.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        let mut out = vec![0.0; self.n_classes()];
        for (member, &w) in self.members.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(member.predict_proba(x)?) {
                *o += w * p;
            }
        }
        let total: f64 = self.weights.iter().sum();
        out.iter_mut().for_each(|o| *o /= total);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureDataset;
    use crate::tree::{fit_tree, TreeParams};

    /// A depth-0 tree whose only leaf is `proba` (weights pick the mix).
    fn constant(proba: [f64; 2]) -> Model {
        let ds = FeatureDataset::new(vec![0.0, 0.0], 1, vec![0, 1], vec!["a".into(), "b".into()])
            .unwrap();
        let params = TreeParams {
            max_depth: Some(0),
            ..Default::default()
        };
        fit_tree(&ds, Some(&proba), params).unwrap().into()
    }

    #[test]
    fn hand_average() {
        let v = fit_voting(vec![constant([0.8, 0.2]), constant([0.4, 0.6])], None).unwrap();
        let p = v.predict_proba(&[1.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12);
        assert_eq!(v.predict(&[1.0]).unwrap(), 0);
    }

    #[test]
    fn unanimity_and_degenerate_weight() {
        let a = constant([0.3, 0.7]);
        let v = fit_voting(vec![a.clone(), a.clone()], None).unwrap();
        assert_eq!(v.predict_proba(&[0.0]).unwrap(), a.predict_proba(&[0.0]).unwrap());
        let w = fit_voting(vec![a.clone(), constant([0.9, 0.1])], Some(vec![1.0, 0.0])).unwrap();
        assert_eq!(w.predict_proba(&[0.0]).unwrap(), a.predict_proba(&[0.0]).unwrap());
    }

    #[test]
    fn rejects_bad_membership() {
        assert!(fit_voting(vec![constant([0.5, 0.5])], None).is_err());
        let pair = || vec![constant([0.5, 0.5]), constant([0.5, 0.5])];
        assert!(fit_voting(pair(), Some(vec![1.0])).is_err());
        assert!(fit_voting(pair(), Some(vec![0.0, 0.0])).is_err());
        assert!(fit_voting(pair(), Some(vec![-1.0, 2.0])).is_err());
        let wide = FeatureDataset::new(vec![0.0, 0.0], 2, vec![0], vec!["a".into(), "b".into()])
            .unwrap();
        let wide: Model = fit_tree(&wide, None, TreeParams::default()).unwrap().into();
        assert!(fit_voting(vec![constant([0.5, 0.5]), wide], None).is_err());
    }
}
