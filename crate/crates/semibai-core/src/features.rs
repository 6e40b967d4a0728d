//! Arm feature sets and design policies (distributions over arms).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math;

/// A finite collection of feature vectors in `R^dim`, one per arm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSet {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl FeatureSet {
    /// Build a feature set, checking that every vector has length `dim`.
    pub fn new(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let fs = FeatureSet { dim, vectors };
        fs.validate()?;
        Ok(fs)
    }

    /// Structural validation: consistent dimensions, finite entries.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if self.vectors.is_empty() {
            return Err(invalid("feature set must contain at least one vector"));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(invalid(format!(
                    "vector {i} has length {} but dim is {}",
                    v.len(),
                    self.dim
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("vector {i} contains a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Check the norm bound `||x||_2 <= 1` on every vector (small float slack).
    pub fn check_norm_bound(&self) -> Result<()> {
        for (i, v) in self.vectors.iter().enumerate() {
            let n = math::hypot_many(v);
            if n > 1.0 + 1e-9 {
                return Err(Error::AssumptionViolated(format!(
                    "vector {i} has norm {n:.6}, above the unit bound"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// Features translated by `-anchor_vector` (used by anchored designs).
    pub fn shifted(&self, anchor: usize) -> Vec<Vec<f64>> {
        let a = &self.vectors[anchor];
        self.vectors
            .iter()
            .map(|v| v.iter().zip(a.iter()).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// A probability distribution over the arms of a feature set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Policy {
    pub weights: Vec<f64>,
}

impl Policy {
    /// Build a policy, checking non-negativity and normalization.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let p = Policy { weights };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(k: usize) -> Self {
        Policy { weights: vec![1.0 / k as f64; k] }
    }

    /// Point mass on a single arm.
    pub fn delta(k: usize, arm: usize) -> Self {
        let mut w = vec![0.0; k];
        w[arm] = 1.0;
        Policy { weights: w }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(invalid("policy must have at least one weight"));
        }
        let mut sum = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if !w.is_finite() || w < -1e-12 {
                return Err(invalid(format!("policy weight {i} is {w}, must be >= 0")));
            }
            sum += w;
        }
        if math::abs(sum - 1.0) > 1e-9 {
            return Err(invalid(format!("policy weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sample an arm index given a uniform draw `u` in `[0, 1)`.
    ///
    /// Deterministic cumulative scan; the final positive-weight arm absorbs
    /// any rounding shortfall so the map is total on `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
                acc += w;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_set_rejects_ragged_vectors() {
        let err = FeatureSet::new(2, vec![vec![1.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn norm_bound_flags_long_vectors() {
        let fs = FeatureSet::new(2, vec![vec![1.5, 0.0]]).unwrap();
        assert!(matches!(fs.check_norm_bound(), Err(Error::AssumptionViolated(_))));
        let ok = FeatureSet::new(2, vec![vec![0.6, 0.8]]).unwrap();
        assert!(ok.check_norm_bound().is_ok());
    }

    #[test]
    fn shifted_subtracts_anchor() {
        let fs =
            FeatureSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let s = fs.shifted(2);
        assert_eq!(s[0], vec![0.5, -0.5]);
        assert_eq!(s[1], vec![-0.5, 0.5]);
        assert_eq!(s[2], vec![0.0, 0.0]);
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::new(vec![0.5, 0.5]).is_ok());
        assert!(Policy::new(vec![0.5, 0.6]).is_err());
        assert!(Policy::new(vec![-0.1, 1.1]).is_err());
        Policy::uniform(4).validate().unwrap();
        Policy::delta(3, 1).validate().unwrap();
    }

    #[test]
    fn sampling_respects_cumulative_order() {
        let p = Policy::new(vec![0.25, 0.0, 0.75]).unwrap();
        assert_eq!(p.sample_with(0.0), 0);
        assert_eq!(p.sample_with(0.24), 0);
        assert_eq!(p.sample_with(0.25), 2);
        assert_eq!(p.sample_with(0.999), 2);
    }

    #[cfg(feature = "serde")]
    #[test]
    fn serde_round_trip_matches_layout() {
        let fs = FeatureSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let js = serde_json::to_string(&fs).unwrap();
        assert_eq!(js, r#"{"dim":2,"vectors":[[1.0,0.0],[0.0,1.0]]}"#);
        let back: FeatureSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, fs);

        let p = Policy::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0.5,0.5]");
    }
}
