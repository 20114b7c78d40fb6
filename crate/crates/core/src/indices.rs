//! Weight rows of the supported cardinal-probabilistic interaction indices.
//!
//! Every index is described by coalition weights `p_t^s(n)` (used when
//! aggregating discrete derivatives) and Möbius weights `q_t^s(n)` (used when
//! aggregating Möbius coefficients of supersets). The chaining and faithful
//! indices are only available through their Möbius weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, binomial_ratio, ln_binomial, sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexFamily {
    /// Shapley value (order 1 of the Shapley row).
    Sv,
    /// Shapley interaction index.
    Sii,
    /// Banzhaf value.
    Bv,
    /// Banzhaf interaction index.
    Bii,
    /// Chaining interaction index.
    Chii,
    /// Möbius transform itself.
    Moebius,
    /// Faithful Shapley interaction index of maximal order `k`.
    Fsii,
    /// Faithful Banzhaf interaction index of maximal order `k`.
    Fbii,
}

impl IndexFamily {
    pub const ALL: [IndexFamily; 8] = [
        IndexFamily::Sv,
        IndexFamily::Sii,
        IndexFamily::Bv,
        IndexFamily::Bii,
        IndexFamily::Chii,
        IndexFamily::Moebius,
        IndexFamily::Fsii,
        IndexFamily::Fbii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexFamily::Sv => "sv",
            IndexFamily::Sii => "sii",
            IndexFamily::Bv => "bv",
            IndexFamily::Bii => "bii",
            IndexFamily::Chii => "chii",
            IndexFamily::Moebius => "moebius",
            IndexFamily::Fsii => "fsii",
            IndexFamily::Fbii => "fbii",
        }
    }

    pub fn is_faithful(self) -> bool {
        matches!(self, IndexFamily::Fsii | IndexFamily::Fbii)
    }

    /// Values only define singleton targets.
    pub fn is_value(self) -> bool {
        matches!(self, IndexFamily::Sv | IndexFamily::Bv)
    }

    pub fn is_banzhaf(self) -> bool {
        matches!(self, IndexFamily::Bv | IndexFamily::Bii)
    }

    /// Whether the family has coalition weights `p_t^s(n)`.
    pub fn has_coalition_weights(self) -> bool {
        !matches!(self, IndexFamily::Chii | IndexFamily::Fsii | IndexFamily::Fbii)
    }
}

impl fmt::Display for IndexFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidIndex(format!("unknown index family {s:?}")))
    }
}

/// An index family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub family: IndexFamily,
    /// Banzhaf weight `w`, only read by the Banzhaf families.
    pub banzhaf_w: f64,
    /// Maximal order `k`. Defines the faithful indices; bounds targets otherwise.
    pub max_order: usize,
}

impl IndexSpec {
    pub fn new(family: IndexFamily, max_order: usize) -> Self {
        let max_order = if family.is_value() { 1 } else { max_order };
        Self {
            family,
            banzhaf_w: 0.5,
            max_order,
        }
    }

    pub fn with_banzhaf_w(mut self, w: f64) -> Self {
        self.banzhaf_w = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::InvalidIndex("max order must be at least 1".into()));
        }
        if self.family.is_value() && self.max_order != 1 {
            return Err(Error::InvalidIndex(format!(
                "{} is a value; max order must be 1",
                self.family
            )));
        }
        if self.family.is_banzhaf() && !(self.banzhaf_w > 0.0 && self.banzhaf_w < 1.0) {
            return Err(Error::InvalidIndex(format!(
                "banzhaf weight must lie in (0, 1), got {}",
                self.banzhaf_w
            )));
        }
        Ok(())
    }

    /// Checks that a target of size `s` is admissible for this index.
    pub fn validate_order(&self, s: usize) -> Result<()> {
        if s == 0 {
            return Err(Error::InvalidIndex("targets must be nonempty".into()));
        }
        if (self.family.is_faithful() || self.family.is_value()) && s > self.max_order {
            return Err(Error::InvalidIndex(format!(
                "{} target of order {s} exceeds max order {}",
                self.family, self.max_order
            )));
        }
        Ok(())
    }

    /// Coalition weight `p_t^s(n)`.
    pub fn p_weight(&self, n: usize, s: usize, t: usize) -> Result<f64> {
        if !self.family.has_coalition_weights() {
            return Err(Error::NoCoalitionWeights {
                family: self.family.name(),
            });
        }
        if s == 0 || s > n || t > n - s {
            return Err(Error::WeightRange { n, s, t });
        }
        let rest = n - s;
        Ok(match self.family {
            IndexFamily::Sv | IndexFamily::Sii => {
                if rest < 100 {
                    1.0 / ((rest + 1) as f64 * binomial(rest as u64, t as u64))
                } else {
                    (-((rest + 1) as f64).ln() - ln_binomial(rest as u64, t as u64)).exp()
                }
            }
            IndexFamily::Bv | IndexFamily::Bii => {
                let w = self.banzhaf_w;
                if w == 0.5 {
                    0.5f64.powi(rest as i32)
                } else {
                    (t as f64 * w.ln() + (rest - t) as f64 * (1.0 - w).ln()).exp()
                }
            }
            IndexFamily::Moebius => {
                if t == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            IndexFamily::Chii | IndexFamily::Fsii | IndexFamily::Fbii => unreachable!(),
        })
    }

    /// Möbius weight `q_t^s(n)`.
    pub fn q_weight(&self, n: usize, s: usize, t: usize) -> Result<f64> {
        if s == 0 || t < s || t > n {
            return Err(Error::WeightRange { n, s, t });
        }
        let k = self.max_order;
        if self.family.is_faithful() && s > k {
            return Err(Error::InvalidIndex(format!(
                "{} weight requested for order {s} above max order {k}",
                self.family
            )));
        }
        let d = t - s;
        Ok(match self.family {
            IndexFamily::Sv | IndexFamily::Sii => 1.0 / (d + 1) as f64,
            IndexFamily::Bv | IndexFamily::Bii => self.banzhaf_w.powi(d as i32),
            IndexFamily::Moebius => {
                if d == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            IndexFamily::Chii => s as f64 / t as f64,
            IndexFamily::Fbii => {
                if t == s {
                    1.0
                } else if t <= k {
                    0.0
                } else {
                    sign(k - s) * 0.5f64.powi(d as i32) * binomial((d - 1) as u64, (k - s) as u64)
                }
            }
            IndexFamily::Fsii => {
                if t == s {
                    1.0
                } else if t <= k {
                    0.0
                } else {
                    let lead = s as f64 / (k + s) as f64 * binomial(k as u64, s as u64);
                    let ratio = binomial_ratio((t - 1) as u64, k as u64, (t + k - 1) as u64, (k + s) as u64);
                    sign(k - s) * lead * ratio
                }
            }
        })
    }
}

impl fmt::Display for IndexSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.family.is_banzhaf() && self.banzhaf_w != 0.5 {
            write!(f, "(w={})", self.banzhaf_w)?;
        }
        if self.family.is_faithful() {
            write!(f, "(k={})", self.max_order)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: IndexFamily) -> IndexSpec {
        IndexSpec::new(f, 3)
    }

    #[test]
    fn table_examples() {
        let sii = spec(IndexFamily::Sii);
        assert!((sii.p_weight(3, 1, 1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let bii = spec(IndexFamily::Bii);
        for t in 0..=3 {
            assert_eq!(bii.p_weight(5, 2, t).unwrap(), 0.125);
        }
        let mob = spec(IndexFamily::Moebius);
        assert_eq!(mob.p_weight(7, 2, 0).unwrap(), 1.0);
        assert_eq!(mob.p_weight(7, 2, 1).unwrap(), 0.0);

        assert_eq!(sii.q_weight(5, 2, 2).unwrap(), 1.0);
        assert_eq!(bii.q_weight(5, 1, 3).unwrap(), 0.25);
        assert_eq!(spec(IndexFamily::Chii).q_weight(6, 2, 4).unwrap(), 0.5);
    }

    #[test]
    fn range_and_family_errors() {
        let sii = spec(IndexFamily::Sii);
        assert!(matches!(sii.p_weight(3, 0, 0), Err(Error::WeightRange { .. })));
        assert!(matches!(sii.p_weight(3, 2, 2), Err(Error::WeightRange { .. })));
        assert!(matches!(sii.q_weight(3, 2, 1), Err(Error::WeightRange { .. })));
        assert!(matches!(
            spec(IndexFamily::Chii).p_weight(3, 1, 0),
            Err(Error::NoCoalitionWeights { .. })
        ));
        let fsii = IndexSpec::new(IndexFamily::Fsii, 2);
        assert!(matches!(fsii.q_weight(5, 3, 4), Err(Error::InvalidIndex(_))));
        assert!(IndexSpec::new(IndexFamily::Bii, 2)
            .with_banzhaf_w(1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn faithful_rows_below_order_are_moebius() {
        for fam in [IndexFamily::Fsii, IndexFamily::Fbii] {
            let idx = IndexSpec::new(fam, 3);
            assert_eq!(idx.q_weight(8, 2, 2).unwrap(), 1.0);
            assert_eq!(idx.q_weight(8, 1, 3).unwrap(), 0.0);
            assert!(idx.q_weight(8, 1, 4).unwrap() != 0.0);
        }
        // FBII, k=1, s=1, t=2: (-1)^0 (1/2)^1 C(0,0) = 1/2
        assert_eq!(IndexSpec::new(IndexFamily::Fbii, 1).q_weight(4, 1, 2).unwrap(), 0.5);
    }

    #[test]
    fn distribution_property_sii_bii() {
        for fam in [IndexFamily::Sii, IndexFamily::Bii] {
            let idx = spec(fam);
            for n in 1..=60 {
                for s in 1..=n {
                    let total: f64 = (0..=n - s)
                        .map(|t| binomial((n - s) as u64, t as u64) * idx.p_weight(n, s, t).unwrap())
                        .sum();
                    assert!((total - 1.0).abs() < 1e-12, "{fam} n={n} s={s}: {total}");
                }
            }
        }
        let bw = IndexSpec::new(IndexFamily::Bii, 2).with_banzhaf_w(0.3);
        for n in 1..=40 {
            let total: f64 = (0..=n - 1)
                .map(|t| binomial((n - 1) as u64, t as u64) * bw.p_weight(n, 1, t).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_n_weights_are_finite() {
        let sii = spec(IndexFamily::Sii);
        let w = sii.p_weight(1776, 2, 800).unwrap();
        assert!(w > 0.0 && w.is_finite() || w == 0.0);
        let bii = spec(IndexFamily::Bii);
        assert!(bii.p_weight(1776, 2, 3).unwrap() >= 0.0);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("SII".parse::<IndexFamily>().unwrap(), IndexFamily::Sii);
        assert!("foo".parse::<IndexFamily>().is_err());
    }
}
