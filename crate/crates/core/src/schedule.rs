//! Symbolic Lie-Trotter-Suzuki schedules.
//!
//! A schedule is the list of factors `exp(H_j(μ + v Δλ) · q Δλ)` in the
//! order they act: the first entry is applied first (rightmost in the
//! operator product).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFactor {
    /// One-based term index `j`.
    #[serde(rename = "j")]
    pub term_index: usize,
    /// Evaluation point as a fraction of the step, `v` in `[0, 1]`.
    #[serde(rename = "v")]
    pub offset: f64,
    /// Signed fraction of the step carried by this factor.
    #[serde(rename = "q")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct Schedule {
    m: usize,
    k: u32,
    factors: Vec<ExpFactor>,
}

#[derive(Deserialize)]
struct RawSchedule {
    m: usize,
    k: u32,
    factors: Vec<ExpFactor>,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        Schedule::from_factors(raw.m, raw.k, raw.factors)
    }
}

impl Schedule {
    /// Arbitrary schedule. Only index and offset ranges are checked; the
    /// Suzuki invariants are checked separately by [`Schedule::validate`].
    pub fn from_factors(m: usize, k: u32, factors: Vec<ExpFactor>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSchedule("m must be at least 1".into()));
        }
        if k == 0 {
            return Err(Error::InvalidSchedule("k must be at least 1".into()));
        }
        for (c, f) in factors.iter().enumerate() {
            if f.term_index == 0 || f.term_index > m {
                return Err(Error::InvalidSchedule(format!("factor {c}: term index {} outside 1..={m}", f.term_index)));
            }
            if !(0.0..=1.0).contains(&f.offset) {
                return Err(Error::InvalidSchedule(format!("factor {c}: offset {} outside [0, 1]", f.offset)));
            }
            if !f.weight.is_finite() {
                return Err(Error::InvalidSchedule(format!("factor {c}: non-finite weight")));
            }
        }
        Ok(Self { m, k, factors })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn factors(&self) -> &[ExpFactor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Sum of weights carried by term `j` (one-based).
    pub fn weight_sum(&self, j: usize) -> f64 {
        self.factors.iter().filter(|f| f.term_index == j).map(|f| f.weight).sum()
    }

    /// Checks the structural identities of a k-th order Suzuki schedule:
    /// factor count, per-term occurrences, per-term weight sums and the
    /// `|q| <= Q_k` bound.
    pub fn validate(&self) -> Result<()> {
        let per_term = 2 * 5usize.pow(self.k - 1);
        if self.factors.len() != self.m * per_term {
            return Err(Error::InvalidSchedule(format!(
                "expected {} factors, found {}",
                self.m * per_term,
                self.factors.len()
            )));
        }
        for j in 1..=self.m {
            let count = self.factors.iter().filter(|f| f.term_index == j).count();
            if count != per_term {
                return Err(Error::InvalidSchedule(format!("term {j} occurs {count} times, expected {per_term}")));
            }
            let sum = self.weight_sum(j);
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSchedule(format!("term {j} weights sum to {sum}")));
            }
        }
        let qk = q_k(self.k);
        if q_max(self) > qk * (1.0 + 1e-12) {
            return Err(Error::InvalidSchedule(format!("max |weight| {} exceeds Q_k = {qk}", q_max(self))));
        }
        Ok(())
    }
}

/// `s_p = 1 / (4 - 4^{1/(2p+1)})`.
pub fn s_coefficient(p: u32) -> f64 {
    assert!(p >= 1, "s_p is defined for p >= 1");
    1.0 / (4.0 - 4f64.powf(1.0 / (2 * p + 1) as f64))
}

/// The symmetric second-order splitting: terms `1..=m` then `m..=1`, each
/// evaluated at the midpoint for half the step.
pub fn base_schedule(m: usize) -> Schedule {
    assert!(m >= 1, "m must be at least 1");
    let factors = (1..=m)
        .chain((1..=m).rev())
        .map(|j| ExpFactor { term_index: j, offset: 0.5, weight: 0.5 })
        .collect();
    Schedule { m, k: 1, factors }
}

/// One Suzuki step: five rescaled copies over `[0,s]`, `[s,2s]`,
/// `[2s,1-2s]` (negative width), `[1-2s,1-s]`, `[1-s,1]`.
pub fn recurse(s: &Schedule) -> Schedule {
    let sp = s_coefficient(s.k);
    let blocks = [(0.0, sp), (sp, sp), (2.0 * sp, 1.0 - 4.0 * sp), (1.0 - 2.0 * sp, sp), (1.0 - sp, sp)];
    let mut factors = Vec::with_capacity(5 * s.factors.len());
    for (a, w) in blocks {
        factors.extend(s.factors.iter().map(|f| ExpFactor {
            term_index: f.term_index,
            offset: (a + f.offset * w).clamp(0.0, 1.0),
            weight: f.weight * w,
        }));
    }
    Schedule { m: s.m, k: s.k + 1, factors }
}

/// `2m · 5^{k-1}`, or an error if it does not fit in `u32`.
pub fn factor_count(m: usize, k: u32) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidSchedule("k must be at least 1".into()));
    }
    let m = u32::try_from(m).map_err(|_| Error::OrderTooLarge(k))?;
    5u32.checked_pow(k - 1)
        .and_then(|p| p.checked_mul(2))
        .and_then(|p| p.checked_mul(m))
        .map(|n| n as usize)
        .ok_or(Error::OrderTooLarge(k))
}

pub fn lts_schedule(m: usize, k: u32) -> Result<Schedule> {
    if m == 0 {
        return Err(Error::InvalidSchedule("m must be at least 1".into()));
    }
    factor_count(m, k)?;
    let mut s = base_schedule(m);
    for _ in 1..k {
        s = recurse(&s);
    }
    Ok(s)
}

pub fn q_max(s: &Schedule) -> f64 {
    s.factors.iter().map(|f| f.weight.abs()).fold(0.0, f64::max)
}

/// `(1/2) Π_{i<k} (4 s_i - 1)`.
pub fn q_k_closed_form(k: u32) -> f64 {
    0.5 * (1..k).map(|i| 4.0 * s_coefficient(i) - 1.0).product::<f64>()
}

const SCANNED_ORDERS: u32 = 8;

/// `Q_k`, scanned from the generated `m = 1` schedule for `k <= 8` and from
/// the closed form beyond (the two agree to rounding where both exist).
pub fn q_k(k: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (1..=SCANNED_ORDERS).map(|k| q_max(&lts_schedule(1, k).expect("small order"))).collect()
    });
    assert!(k >= 1, "Q_k is defined for k >= 1");
    if k <= SCANNED_ORDERS {
        table[k as usize - 1]
    } else {
        q_k_closed_form(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn s_coefficient_values() {
        assert!((s_coefficient(1) - 0.414_490_771_7).abs() < 1e-10);
        for p in 1..=20 {
            let s = s_coefficient(p);
            assert!(s > 1.0 / 3.0 && s <= 0.5, "s_{p} = {s}");
        }
        assert!((s_coefficient(1_000_000) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn base_schedules() {
        let one = base_schedule(1);
        assert_eq!(one.factors(), &[ExpFactor { term_index: 1, offset: 0.5, weight: 0.5 }; 2]);
        let two = base_schedule(2);
        let order: Vec<usize> = two.factors().iter().map(|f| f.term_index).collect();
        assert_eq!(order, vec![1, 2, 2, 1]);
        for m in 1..6 {
            assert_eq!(base_schedule(m).len(), 2 * m);
        }
    }

    #[test]
    fn recursion_counts_and_weights() {
        assert_eq!(lts_schedule(2, 2).unwrap().len(), 20);
        assert_eq!(lts_schedule(1, 1).unwrap().len(), 2);
        let s3 = lts_schedule(1, 3).unwrap();
        assert_eq!(s3.len(), 50);
        let s2 = lts_schedule(1, 2).unwrap();
        assert_relative_eq!(q_max(&s2), (1.0 - 4.0 * s_coefficient(1)).abs() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(q_max(&s2), 0.328_981_543_588_751_4, max_relative = 1e-13);
        for s in [s2, s3] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn middle_block_reverses_sample_points() {
        let s2 = lts_schedule(1, 2).unwrap();
        let mid = &s2.factors()[4..6];
        let s1 = s_coefficient(1);
        for f in mid {
            assert!(f.weight < 0.0);
            assert_relative_eq!(f.offset, 0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(s2.factors()[0].offset, s1 / 2.0);
        assert_relative_eq!(s2.factors()[9].offset, 1.0 - s1 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn q_values() {
        assert_eq!(q_k(1), 0.5);
        for k in 1..=10 {
            let q = q_k(k);
            assert!(q >= 1.5 / 3f64.powi(k as i32) && q <= 2.0 * k as f64 / 3f64.powi(k as i32), "k={k}");
        }
        for k in 1..=SCANNED_ORDERS {
            assert_relative_eq!(q_k(k), q_k_closed_form(k), max_relative = 1e-14);
        }
    }

    #[test]
    fn overflow_is_rejected() {
        assert!(matches!(lts_schedule(1, 40), Err(Error::OrderTooLarge(40))));
        assert!(factor_count(4, 14).is_err());
        assert_eq!(factor_count(1, 13).unwrap(), 2 * 5usize.pow(12));
    }

    #[test]
    fn json_round_trip() {
        let s = lts_schedule(2, 2).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.starts_with(r#"{"m":2,"k":2,"factors":[{"j":1,"v":"#));
        let back: Schedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"m":1,"k":1,"factors":[{"j":2,"v":0.5,"q":1.0}]}"#;
        assert!(serde_json::from_str::<Schedule>(bad).is_err());
    }

    #[test]
    fn custom_schedule_fails_validation() {
        let s = Schedule::from_factors(1, 1, vec![ExpFactor { term_index: 1, offset: 0.5, weight: 1.0 }]).unwrap();
        assert!(s.validate().is_err());
    }
}
