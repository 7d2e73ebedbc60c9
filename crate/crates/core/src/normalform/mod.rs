//! Order-by-order normalization through mixed generating functions
//! `S = qP + y1 z2 + eps*S1(q, P, y1, z2)`.
//!
//! Old variables `(q, p, y1, y2)` and new ones `(Q, P, z1, z2)` are tied by
//!
//! ```text
//! p  = P  + eps dS1/dq      Q  = q  + eps dS1/dP
//! y2 = z2 + eps dS1/dy1     z1 = y1 + eps dS1/dz2
//! ```
//!
//! `S1` is stored with the fast pair `(q, P)` read through the same `(u, v)`
//! basis as any other series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homological::{
    phase_average, solve_with_frequency, FrequencySeries, IntegrationConstant,
};
use crate::series::{Shift, TruncatedSeries, TruncationPolicy, Var};

/// Relative size below which an order that must cancel is treated as rounding.
pub const CANCELLATION_TOL: f64 = 1e-12;

/// `H = h0(I) + eps * g0(q, p, y)`.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub h0: TruncatedSeries,
    pub g0: TruncatedSeries,
    pub policy: TruncationPolicy,
    pub label: String,
}

impl HamiltonianSpec {
    pub fn new(h0: TruncatedSeries, g0: TruncatedSeries, label: impl Into<String>) -> Result<Self> {
        let policy = *h0.policy();
        if *g0.policy() != policy {
            return Err(Error::PolicyMismatch {
                left: policy,
                right: *g0.policy(),
            });
        }
        if !h0.is_eps_free() {
            return Err(Error::Problem("h0 must not depend on eps".into()));
        }
        if !h0.is_slow_free() {
            return Err(Error::Problem(
                "h0 must not depend on the slow variables".into(),
            ));
        }
        FrequencySeries::new(&h0)?;
        Ok(Self {
            h0,
            g0,
            policy,
            label: label.into(),
        })
    }

    /// `h0 + eps * g0` as one series.
    pub fn hamiltonian(&self) -> TruncatedSeries {
        self.h0
            .add(&self.g0.mul_eps_power(1))
            .expect("policies checked at construction")
    }
}

/// One step's `S1`, in mixed variables.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingFunction {
    pub s1: TruncatedSeries,
    pub step_index: usize,
}

impl GeneratingFunction {
    pub fn zero(policy: TruncationPolicy, step_index: usize) -> Self {
        Self {
            s1: TruncatedSeries::zero(policy),
            step_index,
        }
    }

    /// `eps * S1` together with its first partial derivatives.
    fn scaled_partials(&self) -> Partials {
        let n = self.s1.policy().n_slow_pairs as usize;
        let es = self.s1.mul_eps_power(1);
        let diff = |var| es.diff(var).expect("slow index in range");
        Partials {
            s_q: es.diff_q(),
            s_p: es.diff_p(),
            s_y1: (0..n).map(|j| diff(Var::Y1(j))).collect(),
            s_z2: (0..n).map(|j| diff(Var::Y2(j))).collect(),
        }
    }
}

struct Partials {
    s_q: TruncatedSeries,
    s_p: TruncatedSeries,
    s_y1: Vec<TruncatedSeries>,
    s_z2: Vec<TruncatedSeries>,
}

/// Output of one normalization step.
#[derive(Clone, Debug)]
pub struct Step {
    pub h_next: TruncatedSeries,
    pub g_next: TruncatedSeries,
    pub generator: GeneratingFunction,
    /// `eps * g_next`, without the loss of the top `eps` order.
    pub remainder: TruncatedSeries,
    /// Size of the rounding residue dropped from the order that cancels.
    pub cancellation_residue: f64,
}

/// Kills the lowest-order phase dependence of `g` in `h + eps*g`.
pub fn normalization_step(h: &TruncatedSeries, g: &TruncatedSeries, step: usize) -> Result<Step> {
    let policy = *h.policy();
    let Some(e0) = g.lowest_eps_order() else {
        return Ok(Step {
            h_next: h.clone(),
            g_next: g.clone(),
            generator: GeneratingFunction::zero(policy, step),
            remainder: TruncatedSeries::zero(policy),
            cancellation_residue: 0.0,
        });
    };
    let off = h.off_diagonal_norm();
    if off > 0.0 {
        return Err(Error::NotDiagonal { magnitude: off });
    }
    let freq = FrequencySeries::new(h)?;
    let f = g.eps_part(e0);
    let s1 = solve_with_frequency(&freq, &f, IntegrationConstant::ZeroMean)?;
    let generator = GeneratingFunction {
        s1,
        step_index: step,
    };
    let h_next = h.add(&phase_average(&f).mul_eps_power(1))?;
    let transformed = pullback_hamiltonian(h, g, &generator)?;
    let diff = transformed.sub(&h_next)?;

    let scale = transformed.max_abs_coeff().max(1.0);
    let low = diff.filter(|idx| idx.e <= e0 + 1);
    let residue = low.max_abs_coeff();
    if residue > CANCELLATION_TOL * scale {
        return Err(Error::RemainderOrder {
            before: e0,
            after: diff.lowest_eps_order().unwrap_or(e0 + 1).saturating_sub(1),
        });
    }
    let remainder = diff.eps_tail(e0 + 2);
    let g_next = remainder.div_eps_power(1)?;
    Ok(Step {
        h_next,
        g_next,
        generator,
        remainder,
        cancellation_residue: residue,
    })
}

/// Old variables as series in the new ones, by the graded fixed point
/// `dq = -eps S1_P(Q + dq, P, z1 + dy1, z2)`, `dy1 = -eps S1_z2(...)`.
pub fn old_in_new(gen: &GeneratingFunction) -> Result<Shift> {
    let policy = *gen.s1.policy();
    let n = policy.n_slow_pairs as usize;
    let d = gen.scaled_partials();
    let mixed = |dq: &TruncatedSeries, dy1: &[TruncatedSeries]| {
        let mut shift = Shift::zero(policy);
        shift.dq = dq.clone();
        shift.dy[..n].clone_from_slice(dy1);
        shift
    };

    let mut dq = TruncatedSeries::zero(policy);
    let mut dy1 = vec![TruncatedSeries::zero(policy); n];
    let mut last_order = None;
    for _ in 0..=policy.max_eps_order + 1 {
        let at = mixed(&dq, &dy1);
        let next_dq = d.s_p.shift(&at)?.neg();
        let next_dy1 = d
            .s_z2
            .iter()
            .map(|s| s.shift(&at).map(|x| x.neg()))
            .collect::<Result<Vec<_>>>()?;
        let mut defect: Option<u32> = next_dq.sub(&dq)?.lowest_eps_order();
        for (a, b) in next_dy1.iter().zip(&dy1) {
            if let Some(o) = a.sub(b)?.lowest_eps_order() {
                defect = Some(defect.map_or(o, |x| x.min(o)));
            }
        }
        dq = next_dq;
        dy1 = next_dy1;
        match (defect, last_order) {
            (None, _) => {
                let at = mixed(&dq, &dy1);
                let mut shift = at.clone();
                shift.dp = d.s_q.shift(&at)?;
                for j in 0..n {
                    shift.dy[n + j] = d.s_y1[j].shift(&at)?;
                }
                return Ok(shift);
            }
            (Some(o), Some(prev)) if o <= prev => {
                return Err(Error::FixedPointStalled { order: o })
            }
            (Some(o), _) => last_order = Some(o),
        }
    }
    Err(Error::FixedPointStalled {
        order: last_order.unwrap_or(0),
    })
}

/// `(h + eps*g)` expressed in the new variables of `gen`.
pub fn pullback_hamiltonian(
    h: &TruncatedSeries,
    g: &TruncatedSeries,
    gen: &GeneratingFunction,
) -> Result<TruncatedSeries> {
    let k = h.add(&g.mul_eps_power(1))?;
    if gen.s1.is_empty() {
        return Ok(k);
    }
    k.shift(&old_in_new(gen)?)
}

/// Old Hamiltonian at `(q, P + eps S1_q, y1, z2 + eps S1_y1)` minus the new one at
/// `(q + eps S1_P, P, y1 + eps S1_z2, z2)`, as a series in the mixed variables,
/// restricted to the degrees where both sides are computed exactly.
pub fn mixed_identity_defect(
    old: &TruncatedSeries,
    new: &TruncatedSeries,
    gen: &GeneratingFunction,
) -> Result<TruncatedSeries> {
    let policy = *gen.s1.policy();
    let n = policy.n_slow_pairs as usize;
    let d = gen.scaled_partials();
    let mut old_shift = Shift::zero(policy);
    old_shift.dp = d.s_q.clone();
    old_shift.dy[n..].clone_from_slice(&d.s_y1);
    let mut new_shift = Shift::zero(policy);
    new_shift.dq = d.s_p.clone();
    new_shift.dy[..n].clone_from_slice(&d.s_z2);
    Ok(old
        .shift(&old_shift)?
        .sub(&new.shift(&new_shift)?)?
        .closed_part())
}

/// Result of [`normal_form`].
#[derive(Clone, Debug)]
pub struct NormalFormResult {
    pub h_final: TruncatedSeries,
    pub remainder: TruncatedSeries,
    pub generators: Vec<GeneratingFunction>,
    /// Largest coefficient of each step's `g_i`.
    pub step_norms: Vec<f64>,
    pub cancellation_residues: Vec<f64>,
    pub requested_order: usize,
}

impl NormalFormResult {
    /// `h_final + remainder`, the full transformed Hamiltonian.
    pub fn transformed_hamiltonian(&self) -> TruncatedSeries {
        self.h_final.add(&self.remainder).expect("same policy")
    }
}

/// Summary record for reports.
#[derive(Clone, Debug, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub g_norm: f64,
    pub generator_terms: usize,
}

/// Applies [`normalization_step`] `m` times, stopping early once `g` vanishes.
pub fn normal_form(spec: &HamiltonianSpec, m: usize) -> Result<NormalFormResult> {
    let max = spec.policy.max_eps_order as usize;
    if m > max {
        return Err(Error::InvalidPolicy(format!(
            "order {m} exceeds max_eps_order {max}"
        )));
    }
    let mut h = spec.h0.clone();
    let mut g = spec.g0.clone();
    let mut remainder = g.mul_eps_power(1);
    let mut generators = Vec::with_capacity(m);
    let mut step_norms = Vec::with_capacity(m);
    let mut residues = Vec::with_capacity(m);
    for i in 0..m {
        if g.is_empty() {
            break;
        }
        step_norms.push(g.max_abs_coeff());
        let step = normalization_step(&h, &g, i)?;
        let off = step.h_next.off_diagonal_norm();
        if off >= 1e-14 {
            return Err(Error::NotDiagonal { magnitude: off });
        }
        generators.push(step.generator);
        residues.push(step.cancellation_residue);
        h = step.h_next;
        g = step.g_next;
        remainder = step.remainder;
    }
    if let Some(low) = remainder.lowest_eps_order() {
        let done = generators.len() as u32;
        if low < done + 1 {
            return Err(Error::RemainderOrder {
                before: done,
                after: low,
            });
        }
    }
    Ok(NormalFormResult {
        h_final: h,
        remainder,
        generators,
        step_norms,
        cancellation_residues: residues,
        requested_order: m,
    })
}
