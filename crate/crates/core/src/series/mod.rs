//! Truncated multivariate power series in the complexified fast pair `(u, v)`,
//! the `2n` slow variables and the formal small parameter `eps`.
//!
//! The fast pair is tied to the real canonical pair by
//! `q = (u + i v)/sqrt2`, `p = (v + i u)/sqrt2`, equivalently
//! `u = (q - i p)/sqrt2`, `v = (p - i q)/sqrt2`. Under this change of
//! variables `(q^2 + p^2)/2 = i u v`, so a function of the action alone is a
//! polynomial in the product `uv` and "analytic in I at I = 0" is the same as
//! "only integer powers of `uv` appear".
//!
//! Coefficients are plain monomial coefficients of `u^k v^l y^s eps^e`.
//! Products silently drop every monomial outside the [`TruncationPolicy`]
//! (graded truncation), which makes the series a quotient ring and keeps
//! multiplication associative.
//!
//! Slow variables are ordered `y1_1..y1_n, y2_1..y2_n`; `(y1_j, y2_j)` is a
//! canonical coordinate/momentum pair.

mod bracket;
mod eval;
mod json;
mod shift;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::EvalPoint;
pub use json::SeriesDocument;
pub use shift::Shift;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Degree bounds shared by every series in one computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Bound on `k + l`.
    pub max_uv_degree: u32,
    /// Bound on the total degree across all slow variables.
    pub max_slow_degree: u32,
    /// Highest retained power of `eps`.
    pub max_eps_order: u32,
    /// Number of `(y1_j, y2_j)` pairs.
    pub n_slow_pairs: u32,
}

impl TruncationPolicy {
    pub fn new(
        max_uv_degree: u32,
        max_slow_degree: u32,
        max_eps_order: u32,
        n_slow_pairs: u32,
    ) -> Result<Self> {
        let policy = Self {
            max_uv_degree,
            max_slow_degree,
            max_eps_order,
            n_slow_pairs,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slow_pairs == 0 {
            return Err(Error::InvalidPolicy(
                "n_slow_pairs must be at least 1".into(),
            ));
        }
        let layout = Layout::checked(self);
        if layout.is_none() {
            return Err(Error::InvalidPolicy(
                "degree bounds too large for the monomial index".into(),
            ));
        }
        Ok(())
    }

    /// Number of slow variables, `2n`.
    pub fn slow_count(&self) -> usize {
        2 * self.n_slow_pairs as usize
    }

    /// Whether a monomial survives truncation under this policy.
    pub fn admits(&self, idx: &MultiIndex) -> bool {
        idx.slow.len() == self.slow_count()
            && idx.uv_degree() <= self.max_uv_degree
            && idx.slow_degree() <= self.max_slow_degree
            && idx.e <= self.max_eps_order
    }

    /// Largest total degree in `(u, v, y)` at which substitutions by
    /// increments of total degree at least one are computed exactly.
    pub fn closed_degree(&self) -> u32 {
        self.max_uv_degree.min(self.max_slow_degree)
    }

    fn layout(&self) -> Layout {
        Layout::checked(self).expect("policy validated at construction")
    }
}

/// Exponents of one monomial `u^k v^l y^slow eps^e`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub k: u32,
    pub l: u32,
    pub slow: Vec<u32>,
    pub e: u32,
}

impl MultiIndex {
    pub fn new(k: u32, l: u32, slow: Vec<u32>, e: u32) -> Self {
        Self { k, l, slow, e }
    }

    /// Index with no slow or `eps` dependence.
    pub fn fast(k: u32, l: u32, slow_count: usize) -> Self {
        Self::new(k, l, vec![0; slow_count], 0)
    }

    pub fn uv_degree(&self) -> u32 {
        self.k + self.l
    }

    pub fn slow_degree(&self) -> u32 {
        self.slow.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.k == self.l
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "u^{} v^{} y^{:?} eps^{}",
            self.k, self.l, self.slow, self.e
        )
    }
}

/// Mixed-radix encoding of a [`MultiIndex`] into a `u64`.
///
/// Digit order, least significant first: `k, l, slow_0..slow_{2n-1}, e`.
/// Inside the truncation bounds no digit of a product overflows, so the code
/// of a product monomial is the sum of the codes of its factors.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    uv_radix: u64,
    slow_radix: u64,
    n_slow: usize,
    size: u64,
}

impl Layout {
    fn checked(policy: &TruncationPolicy) -> Option<Self> {
        let uv_radix = policy.max_uv_degree as u64 + 1;
        let slow_radix = policy.max_slow_degree as u64 + 1;
        let n_slow = policy.slow_count();
        let mut size = uv_radix.checked_mul(uv_radix)?;
        for _ in 0..n_slow {
            size = size.checked_mul(slow_radix)?;
        }
        size = size.checked_mul(policy.max_eps_order as u64 + 1)?;
        Some(Self {
            uv_radix,
            slow_radix,
            n_slow,
            size,
        })
    }

    fn encode(&self, idx: &MultiIndex) -> u64 {
        let mut code = idx.e as u64;
        for &s in idx.slow.iter().rev() {
            code = code * self.slow_radix + s as u64;
        }
        code = code * self.uv_radix + idx.l as u64;
        code * self.uv_radix + idx.k as u64
    }

    fn decode(&self, mut code: u64) -> MultiIndex {
        let k = (code % self.uv_radix) as u32;
        code /= self.uv_radix;
        let l = (code % self.uv_radix) as u32;
        code /= self.uv_radix;
        let mut slow = Vec::with_capacity(self.n_slow);
        for _ in 0..self.n_slow {
            slow.push((code % self.slow_radix) as u32);
            code /= self.slow_radix;
        }
        MultiIndex {
            k,
            l,
            slow,
            e: code as u32,
        }
    }

    /// `(k, l, slow degree, e)` without materialising the slow vector.
    fn grades(&self, mut code: u64) -> Grades {
        let k = (code % self.uv_radix) as u32;
        code /= self.uv_radix;
        let l = (code % self.uv_radix) as u32;
        code /= self.uv_radix;
        let mut slow = 0;
        for _ in 0..self.n_slow {
            slow += (code % self.slow_radix) as u32;
            code /= self.slow_radix;
        }
        Grades {
            k,
            l,
            slow,
            e: code as u32,
        }
    }

    fn eps_stride(&self) -> u64 {
        self.slot_stride(self.n_slow)
    }

    /// Code increment for one power of slow slot `j` (`j == n_slow` is `eps`).
    fn slot_stride(&self, j: usize) -> u64 {
        self.uv_radix * self.uv_radix * self.slow_radix.pow(j as u32)
    }

    fn var_stride(&self, var: Var) -> u64 {
        match var {
            Var::U => 1,
            Var::V => self.uv_radix,
            Var::Eps => self.eps_stride(),
            Var::Y1(j) => self.slot_stride(j),
            Var::Y2(j) => self.slot_stride(self.n_slow / 2 + j),
        }
    }

    /// Exponent of `var` in the monomial with this code.
    fn exponent(&self, code: u64, var: Var) -> u32 {
        match var {
            Var::U => (code % self.uv_radix) as u32,
            Var::V => ((code / self.uv_radix) % self.uv_radix) as u32,
            Var::Eps => (code / self.eps_stride()) as u32,
            Var::Y1(_) | Var::Y2(_) => ((code / self.var_stride(var)) % self.slow_radix) as u32,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Grades {
    k: u32,
    l: u32,
    slow: u32,
    e: u32,
}

/// Sums coefficients by monomial code; dense when the monomial space is small.
enum Accumulator {
    Dense {
        values: Vec<Complex64>,
        touched: Vec<u64>,
    },
    Sparse(HashMap<u64, Complex64>),
}

const DENSE_LIMIT: u64 = 1 << 21;

impl Accumulator {
    fn new(layout: &Layout) -> Self {
        if layout.size <= DENSE_LIMIT {
            Accumulator::Dense {
                values: vec![Complex64::new(0.0, 0.0); layout.size as usize],
                touched: Vec::new(),
            }
        } else {
            Accumulator::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn add(&mut self, code: u64, c: Complex64) {
        match self {
            Accumulator::Dense { values, touched } => {
                let slot = &mut values[code as usize];
                if slot.re == 0.0 && slot.im == 0.0 {
                    touched.push(code);
                }
                *slot += c;
            }
            Accumulator::Sparse(map) => *map.entry(code).or_default() += c,
        }
    }

    fn finish(self) -> BTreeMap<u64, Complex64> {
        match self {
            Accumulator::Dense {
                values,
                mut touched,
            } => {
                touched.sort_unstable();
                touched.dedup();
                touched
                    .into_iter()
                    .map(|code| (code, values[code as usize]))
                    .filter(|(_, c)| !is_zero(*c))
                    .collect()
            }
            Accumulator::Sparse(map) => map.into_iter().filter(|(_, c)| !is_zero(*c)).collect(),
        }
    }
}

#[inline]
fn is_zero(c: Complex64) -> bool {
    c.re == 0.0 && c.im == 0.0
}

/// A variable of the series ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    U,
    V,
    /// `y1_j`, zero based.
    Y1(usize),
    /// `y2_j`, zero based.
    Y2(usize),
    Eps,
}

impl Var {
    pub fn parse(name: &str, n_slow_pairs: usize) -> Result<Self> {
        let unknown = || Error::UnknownVariable(name.to_string());
        let slow = |rest: &str| -> Result<usize> {
            let j: usize = rest.parse().map_err(|_| unknown())?;
            if j == 0 || j > n_slow_pairs {
                return Err(unknown());
            }
            Ok(j - 1)
        };
        match name {
            "u" => Ok(Var::U),
            "v" => Ok(Var::V),
            "eps" => Ok(Var::Eps),
            _ if name.starts_with("y1_") => Ok(Var::Y1(slow(&name[3..])?)),
            _ if name.starts_with("y2_") => Ok(Var::Y2(slow(&name[3..])?)),
            _ => Err(unknown()),
        }
    }

    /// Position among the slow variables, if this is one.
    pub(crate) fn slow_slot(self, n_slow_pairs: usize) -> Option<usize> {
        match self {
            Var::Y1(j) => Some(j),
            Var::Y2(j) => Some(n_slow_pairs + j),
            _ => None,
        }
    }
}

/// Truncated power series with complex coefficients.
///
/// Values are immutable; every operation returns a new series. The `real`
/// flag records that the series was built only from operations that map
/// real functions of `(q, p, y)` to real functions.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    policy: TruncationPolicy,
    terms: BTreeMap<u64, Complex64>,
    real: bool,
}

impl TruncatedSeries {
    pub fn zero(policy: TruncationPolicy) -> Self {
        Self {
            policy,
            terms: BTreeMap::new(),
            real: true,
        }
    }

    pub fn constant(policy: TruncationPolicy, c: Complex64) -> Self {
        let mut s = Self::zero(policy);
        s.real = c.im == 0.0;
        if !is_zero(c) {
            s.terms.insert(0, c);
        }
        s
    }

    pub fn real_constant(policy: TruncationPolicy, c: f64) -> Self {
        Self::constant(policy, Complex64::new(c, 0.0))
    }

    pub fn one(policy: TruncationPolicy) -> Self {
        Self::real_constant(policy, 1.0)
    }

    /// Single monomial `c * u^k v^l y^s eps^e`; empty if it lies outside the policy.
    pub fn monomial(policy: TruncationPolicy, idx: &MultiIndex, c: Complex64) -> Result<Self> {
        if idx.slow.len() != policy.slow_count() {
            return Err(Error::DimensionMismatch {
                expected: policy.slow_count(),
                got: idx.slow.len(),
            });
        }
        let mut s = Self::zero(policy);
        s.real = false;
        if policy.admits(idx) && !is_zero(c) {
            s.terms.insert(policy.layout().encode(idx), c);
        }
        Ok(s)
    }

    /// Builds a series from explicit `(index, coefficient)` pairs, summing
    /// repeated indices. Indices outside the policy are dropped.
    pub fn from_terms<I>(policy: TruncationPolicy, terms: I, real: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let layout = policy.layout();
        let mut map: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (idx, c) in terms {
            if idx.slow.len() != policy.slow_count() {
                return Err(Error::DimensionMismatch {
                    expected: policy.slow_count(),
                    got: idx.slow.len(),
                });
            }
            if policy.admits(&idx) {
                *map.entry(layout.encode(&idx)).or_default() += c;
            }
        }
        map.retain(|_, c| !is_zero(*c));
        Ok(Self {
            policy,
            terms: map,
            real,
        })
    }

    pub fn u(policy: TruncationPolicy) -> Self {
        let idx = MultiIndex::fast(1, 0, policy.slow_count());
        Self::monomial(policy, &idx, Complex64::new(1.0, 0.0)).expect("dimension matches")
    }

    pub fn v(policy: TruncationPolicy) -> Self {
        let idx = MultiIndex::fast(0, 1, policy.slow_count());
        Self::monomial(policy, &idx, Complex64::new(1.0, 0.0)).expect("dimension matches")
    }

    /// `q = (u + i v)/sqrt2`.
    pub fn q(policy: TruncationPolicy) -> Self {
        let n = policy.slow_count();
        let terms = [
            (
                MultiIndex::fast(1, 0, n),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
            ),
            (
                MultiIndex::fast(0, 1, n),
                Complex64::new(0.0, FRAC_1_SQRT_2),
            ),
        ];
        Self::from_terms(policy, terms, true).expect("dimension matches")
    }

    /// `p = (v + i u)/sqrt2`.
    pub fn p(policy: TruncationPolicy) -> Self {
        let n = policy.slow_count();
        let terms = [
            (
                MultiIndex::fast(1, 0, n),
                Complex64::new(0.0, FRAC_1_SQRT_2),
            ),
            (
                MultiIndex::fast(0, 1, n),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
            ),
        ];
        Self::from_terms(policy, terms, true).expect("dimension matches")
    }

    /// The action `I = (q^2 + p^2)/2 = i u v`.
    pub fn action(policy: TruncationPolicy) -> Self {
        let idx = MultiIndex::fast(1, 1, policy.slow_count());
        let mut s = Self::monomial(policy, &idx, I).expect("dimension matches");
        s.real = true;
        s
    }

    /// A slow coordinate or momentum, or `eps`.
    pub fn variable(policy: TruncationPolicy, var: Var) -> Result<Self> {
        let n_pairs = policy.n_slow_pairs as usize;
        let mut idx = MultiIndex::fast(0, 0, policy.slow_count());
        match var {
            Var::U => return Ok(Self::u(policy)),
            Var::V => return Ok(Self::v(policy)),
            Var::Eps => idx.e = 1,
            Var::Y1(j) | Var::Y2(j) => {
                if j >= n_pairs {
                    return Err(Error::UnknownVariable(format!("{var:?}")));
                }
                let slot = var.slow_slot(n_pairs).expect("slow variable");
                idx.slow[slot] = 1;
            }
        }
        let mut s = Self::monomial(policy, &idx, Complex64::new(1.0, 0.0))?;
        s.real = true;
        Ok(s)
    }

    pub fn eps(policy: TruncationPolicy) -> Self {
        Self::variable(policy, Var::Eps).expect("eps is always defined")
    }

    /// `H(I) = sum_j coeffs[j] I^j`, stored through `I = i uv` as the diagonal
    /// entries `(j, j)` with value `coeffs[j] * i^j`.
    pub fn from_action_polynomial(coeffs: &[f64], policy: TruncationPolicy) -> Result<Self> {
        let n = policy.slow_count();
        let mut terms = Vec::with_capacity(coeffs.len());
        let mut phase = Complex64::new(1.0, 0.0);
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 && 2 * j > policy.max_uv_degree as usize {
                return Err(Error::DegreeOverflow {
                    degree: 2 * j,
                    bound: policy.max_uv_degree as usize,
                });
            }
            if c != 0.0 {
                terms.push((MultiIndex::fast(j as u32, j as u32, n), phase * c));
            }
            phase *= I;
        }
        Self::from_terms(policy, terms, true)
    }

    /// `coeff * q^a p^b * prod y1_j^{s1_j} * prod y2_j^{s2_j}`, truncated.
    pub fn phase_monomial(
        policy: TruncationPolicy,
        q_pow: u32,
        p_pow: u32,
        y1_pows: &[u32],
        y2_pows: &[u32],
        coeff: f64,
    ) -> Result<Self> {
        let n_pairs = policy.n_slow_pairs as usize;
        for pows in [y1_pows, y2_pows] {
            if pows.len() != n_pairs {
                return Err(Error::DimensionMismatch {
                    expected: n_pairs,
                    got: pows.len(),
                });
            }
        }
        let q = Self::q(policy);
        let p = Self::p(policy);
        let mut acc = Self::real_constant(policy, coeff);
        for _ in 0..q_pow {
            acc = acc.mul(&q)?;
        }
        for _ in 0..p_pow {
            acc = acc.mul(&p)?;
        }
        let mut slow = y1_pows.to_vec();
        slow.extend_from_slice(y2_pows);
        let slow_part = Self::monomial(
            policy,
            &MultiIndex::new(0, 0, slow, 0),
            Complex64::new(1.0, 0.0),
        )?;
        let mut out = acc.mul(&slow_part)?;
        out.real = true;
        Ok(out)
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Overrides the reality flag, e.g. after a composition known to be real.
    pub fn with_real_flag(mut self, real: bool) -> Self {
        self.real = real;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        let layout = self.policy.layout();
        self.terms
            .iter()
            .map(move |(&code, &c)| (layout.decode(code), c))
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Complex64 {
        if !self.policy.admits(idx) {
            return Complex64::new(0.0, 0.0);
        }
        let code = self.policy.layout().encode(idx);
        self.terms.get(&code).copied().unwrap_or_default()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Lowest power of `eps` with a nonzero coefficient.
    pub fn lowest_eps_order(&self) -> Option<u32> {
        let layout = self.policy.layout();
        self.terms.keys().map(|&code| layout.grades(code).e).min()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.policy != other.policy {
            return Err(Error::PolicyMismatch {
                left: self.policy,
                right: other.policy,
            });
        }
        Ok(())
    }

    fn with_terms(&self, terms: BTreeMap<u64, Complex64>, real: bool) -> Self {
        Self {
            policy: self.policy,
            terms,
            real,
        }
    }

    /// Keeps the terms whose index satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&MultiIndex) -> bool) -> Self {
        let layout = self.policy.layout();
        let terms = self
            .terms
            .iter()
            .filter(|(&code, _)| keep(&layout.decode(code)))
            .map(|(&code, &c)| (code, c))
            .collect();
        self.with_terms(terms, self.real)
    }

    fn filter_grades(&self, keep: impl Fn(Grades) -> bool, real: bool) -> Self {
        let layout = self.policy.layout();
        let terms = self
            .terms
            .iter()
            .filter(|(&code, _)| keep(layout.grades(code)))
            .map(|(&code, &c)| (code, c))
            .collect();
        self.with_terms(terms, real)
    }

    /// Terms with `k == l`, i.e. the functions of the action alone.
    pub fn diagonal_part(&self) -> Self {
        self.filter_grades(|g| g.k == g.l, self.real)
    }

    pub fn off_diagonal_part(&self) -> Self {
        self.filter_grades(|g| g.k != g.l, self.real)
    }

    /// Largest off-diagonal coefficient magnitude (0 for a diagonal series).
    pub fn off_diagonal_norm(&self) -> f64 {
        let layout = self.policy.layout();
        self.terms
            .iter()
            .filter(|(&code, _)| {
                let g = layout.grades(code);
                g.k != g.l
            })
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Terms of total `(u, v, y)` degree at most [`TruncationPolicy::closed_degree`].
    pub fn closed_part(&self) -> Self {
        let bound = self.policy.closed_degree();
        self.filter_grades(|g| g.k + g.l + g.slow <= bound, self.real)
    }

    pub fn is_uv_diagonal(&self) -> bool {
        self.off_diagonal_norm() == 0.0
    }

    /// Coefficient of `eps^order` (the returned series still carries the factor).
    pub fn eps_part(&self, order: u32) -> Self {
        self.filter_grades(|g| g.e == order, self.real)
    }

    /// Terms of `eps` order at least `order`.
    pub fn eps_tail(&self, order: u32) -> Self {
        self.filter_grades(|g| g.e >= order, self.real)
    }

    pub fn is_eps_free(&self) -> bool {
        let layout = self.policy.layout();
        self.terms.keys().all(|&c| layout.grades(c).e == 0)
    }

    pub fn is_slow_free(&self) -> bool {
        let layout = self.policy.layout();
        self.terms.keys().all(|&c| layout.grades(c).slow == 0)
    }

    /// Multiplies by `eps^shift`, dropping orders beyond the policy.
    pub fn mul_eps_power(&self, shift: u32) -> Self {
        let layout = self.policy.layout();
        let stride = layout.eps_stride();
        let max = self.policy.max_eps_order;
        let terms = self
            .terms
            .iter()
            .filter(|(&code, _)| layout.grades(code).e + shift <= max)
            .map(|(&code, &c)| (code + stride * shift as u64, c))
            .collect();
        self.with_terms(terms, self.real)
    }

    /// Divides by `eps^shift`; fails if a lower order is present.
    pub fn div_eps_power(&self, shift: u32) -> Result<Self> {
        if let Some(low) = self.lowest_eps_order() {
            if low < shift {
                return Err(Error::RemainderOrder {
                    before: shift,
                    after: low,
                });
            }
        }
        let stride = self.policy.layout().eps_stride();
        let terms = self
            .terms
            .iter()
            .map(|(&code, &c)| (code - stride * shift as u64, c))
            .collect();
        Ok(self.with_terms(terms, self.real))
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(&k, &c)| (k, -c)).collect();
        self.with_terms(terms, self.real)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        if is_zero(factor) {
            return Self::zero(self.policy).with_real_flag(true);
        }
        let terms = self.terms.iter().map(|(&k, &c)| (k, c * factor)).collect();
        self.with_terms(terms, self.real && factor.im == 0.0)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Applies `f` to every coefficient given its index; zero results are dropped.
    pub fn map_terms(
        &self,
        real: bool,
        mut f: impl FnMut(&MultiIndex, Complex64) -> Complex64,
    ) -> Self {
        let layout = self.policy.layout();
        let terms = self
            .terms
            .iter()
            .map(|(&code, &c)| (code, f(&layout.decode(code), c)))
            .filter(|(_, c)| !is_zero(*c))
            .collect();
        self.with_terms(terms, real)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut terms = self.terms.clone();
        for (&code, &c) in &other.terms {
            let entry = terms.entry(code).or_default();
            *entry += c;
            if is_zero(*entry) {
                terms.remove(&code);
            }
        }
        Ok(self.with_terms(terms, self.real && other.real))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Truncated Cauchy product.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let real = self.real && other.real;
        if self.is_empty() || other.is_empty() {
            return Ok(Self::zero(self.policy).with_real_flag(real));
        }
        let layout = self.policy.layout();
        let graded = |s: &Self| -> Vec<(u64, Complex64, u32, u32, u32)> {
            s.terms
                .iter()
                .map(|(&code, &c)| {
                    let g = layout.grades(code);
                    (code, c, g.k + g.l, g.slow, g.e)
                })
                .collect()
        };
        let (a, b) = (graded(self), graded(other));
        let p = &self.policy;
        let mut acc = Accumulator::new(&layout);
        for &(code_a, ca, uv_a, slow_a, e_a) in &a {
            for &(code_b, cb, uv_b, slow_b, e_b) in &b {
                if uv_a + uv_b <= p.max_uv_degree
                    && slow_a + slow_b <= p.max_slow_degree
                    && e_a + e_b <= p.max_eps_order
                {
                    acc.add(code_a + code_b, ca * cb);
                }
            }
        }
        Ok(self.with_terms(acc.finish(), real))
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut acc = Self::one(self.policy);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc.with_real_flag(self.real))
    }

    /// Sum of many series under one policy.
    pub fn sum<'a>(
        policy: TruncationPolicy,
        items: impl IntoIterator<Item = &'a Self>,
    ) -> Result<Self> {
        let mut acc = Self::zero(policy);
        for s in items {
            acc = acc.add(s)?;
        }
        Ok(acc)
    }

    /// Largest coefficient difference; `None` if the policies differ.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        self.sub(other).ok().map(|d| d.max_abs_coeff())
    }

    /// Human-readable form with diagonal terms rewritten through `uv = -i I`,
    /// e.g. `1*I + 0.5*y1_1^2*eps`. Coefficients below `1e-15` are dropped.
    pub fn to_action_form(&self) -> String {
        let n = self.policy.n_slow_pairs as usize;
        let mut parts = Vec::new();
        for (idx, c) in self.iter() {
            if c.norm() < 1e-15 {
                continue;
            }
            let mut factors = Vec::new();
            let c = if idx.is_diagonal() {
                if idx.k > 0 {
                    factors.push(power("I", idx.k));
                }
                c * (-I).powu(idx.k)
            } else {
                if idx.k > 0 {
                    factors.push(power("u", idx.k));
                }
                if idx.l > 0 {
                    factors.push(power("v", idx.l));
                }
                c
            };
            for (slot, &d) in idx.slow.iter().enumerate() {
                if d > 0 {
                    let name = if slot < n {
                        format!("y1_{}", slot + 1)
                    } else {
                        format!("y2_{}", slot - n + 1)
                    };
                    factors.push(power(&name, d));
                }
            }
            if idx.e > 0 {
                factors.push(power("eps", idx.e));
            }
            let coeff = if c.im.abs() <= 1e-12 * c.norm().max(1.0) {
                format!("{}", c.re)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            factors.insert(0, coeff);
            parts.push(factors.join("*"));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ").replace("+ -", "- ")
        }
    }
}

fn power(name: &str, d: u32) -> String {
    if d == 1 {
        name.to_string()
    } else {
        format!("{name}^{d}")
    }
}
