use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{MultiIndex, TruncatedSeries, TruncationPolicy};
use crate::error::{Error, Result};

const DROP_BELOW: f64 = 1e-15;

/// On-disk form of a series: the policy plus `[k, l, slow.., e, re, im]` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub policy: TruncationPolicy,
    pub real: bool,
    pub terms: Vec<Vec<f64>>,
}

impl SeriesDocument {
    pub fn from_series(s: &TruncatedSeries) -> Self {
        let terms = s
            .iter()
            .filter(|(_, c)| c.norm() >= DROP_BELOW)
            .map(|(idx, c)| {
                let mut row = Vec::with_capacity(idx.slow.len() + 5);
                row.push(idx.k as f64);
                row.push(idx.l as f64);
                row.extend(idx.slow.iter().map(|&s| s as f64));
                row.push(idx.e as f64);
                row.push(c.re);
                row.push(c.im);
                row
            })
            .collect();
        Self {
            policy: *s.policy(),
            real: s.is_real(),
            terms,
        }
    }

    pub fn to_series(&self) -> Result<TruncatedSeries> {
        self.policy.validate()?;
        let n = self.policy.slow_count();
        let exponent = |x: f64| -> Result<u32> {
            if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
                return Err(Error::SeriesFormat(format!("bad exponent {x}")));
            }
            Ok(x as u32)
        };
        let mut terms = Vec::with_capacity(self.terms.len());
        for row in &self.terms {
            if row.len() != n + 5 {
                return Err(Error::SeriesFormat(format!(
                    "row has {} entries, expected {}",
                    row.len(),
                    n + 5
                )));
            }
            let slow = row[2..2 + n]
                .iter()
                .map(|&x| exponent(x))
                .collect::<Result<Vec<_>>>()?;
            let idx = MultiIndex::new(
                exponent(row[0])?,
                exponent(row[1])?,
                slow,
                exponent(row[n + 2])?,
            );
            if !self.policy.admits(&idx) {
                return Err(Error::SeriesFormat(format!(
                    "index {idx} outside the policy"
                )));
            }
            terms.push((idx, Complex64::new(row[n + 3], row[n + 4])));
        }
        TruncatedSeries::from_terms(self.policy, terms, self.real)
    }
}

impl TruncatedSeries {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SeriesDocument::from_series(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<SeriesDocument>(text)?.to_series()
    }
}
