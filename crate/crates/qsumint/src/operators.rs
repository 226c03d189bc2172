//! The operator algebra: the D-function, the M sum-integral operator
//! (prefactor, kernel, application to a discrete kernel), and the Bailey
//! lemma step.
//!
//! In half-step form (hp = twice the exponent shift) the building blocks
//! are balanced Pochhammer ratios `ppr(w, hp)`:
//!
//!   D((T,NT); (W,n); (Z,m)) = q^NT / (Z^{2m} W^{2n} T^{2NT})
//!       * ppr(r W Z / T,   n - NT + m) * ppr(r W / (T Z), n - NT - m)
//!       * ppr(r Z / (T W), -n - NT + m) * ppr(r / (T W Z), -n - NT - m)
//!   with r = q^{1/2} on the fixed branch,
//!
//!   M-kernel((T,MT); (X,mx); (Z,nz)) = 1 / (Z^{2 nz} X^{2 mx} * monomial)
//!       * ppr(T X Z, mx + MT + nz) * ppr(T X / Z,   mx + MT - nz)
//!       * ppr(T Z / X, -mx + MT + nz) * ppr(T / (X Z), -mx + MT - nz),
//!
//!   M-prefactor(T, MT) = (q^MT T^2; q)_inf / (q^{1+MT} T^{-2}; q)_inf.
//!
//! The M parameter is a product of spectral pairs. For a single pair
//! (t, m_t) the kernel monomial is t^{2 m_t}. For the composite parameter
//! (s, n_s)(t, n_t) the Pochhammer arguments use the product fugacity st
//! and the index sum, but the monomial is s^{2 n_s} t^{2 n_t} -- NOT
//! (st)^{2(n_s+n_t)}. The two differ by s^{2 n_t} t^{2 n_s}, and only the
//! former satisfies the star-triangle relation and the Bailey lemma (the
//! inversion-paired D-functions fix the same convention).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qkernel::{
    guard_balanced_ratio, poch_pair_ratio, powi, qpoch, QModulus, SpectralPoint, TruncationPolicy,
};
use crate::quadrature::{z_sum_integral, DiscreteKernel, UnitCircleGrid};

/// Arguments of the D-function: the scaling pair and its two slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DPair {
    /// The scaling pair (t, n_t).
    pub t: SpectralPoint,
    /// The (omega, n) slot.
    pub u: SpectralPoint,
    /// The (z, m) slot.
    pub v: SpectralPoint,
}

/// The pointwise D-function. Satisfies D(1,0;u;v) = 1 and the inversion
/// property D(t,n)*D(1/t,-n) = 1.
pub fn d_function(p: &DPair, qm: &QModulus, policy: &TruncationPolicy) -> Result<Complex64> {
    let (t, nt) = (p.t.fugacity(), p.t.index());
    let (w, n) = (p.u.fugacity(), p.u.index());
    let (z, m) = (p.v.fugacity(), p.v.index());
    let r = qm.sqrt_q();

    let factors = [
        (r * w * z / t, n - nt + m),
        (r * w / (t * z), n - nt - m),
        (r * z / (t * w), -n - nt + m),
        (r / (t * w * z), -n - nt - m),
    ];
    let mut out = qm.pow_int(nt) / (powi(z, 2 * m) * powi(w, 2 * n) * powi(t, 2 * nt));
    for (base, hp) in factors {
        out *= poch_pair_ratio(base, hp, qm, policy)?;
    }
    if !out.is_finite() {
        return Err(Error::Domain("D-function overflow".into()));
    }
    Ok(out)
}

/// The parameter of an M operator: one spectral pair, or a product of
/// pairs for the combined operator of the Bailey step.
#[derive(Debug, Clone, PartialEq)]
pub struct MOperator {
    params: Vec<SpectralPoint>,
}

impl MOperator {
    pub fn new(t: SpectralPoint) -> Self {
        MOperator { params: vec![t] }
    }

    /// The combined operator with parameter product s*t and index sum.
    pub fn composite(s: SpectralPoint, t: SpectralPoint) -> Self {
        MOperator { params: vec![s, t] }
    }

    pub fn params(&self) -> &[SpectralPoint] {
        &self.params
    }

    /// Product fugacity and index sum, used in every Pochhammer argument
    /// and in the prefactor.
    pub fn combined(&self) -> SpectralPoint {
        let a = self
            .params
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * p.fugacity());
        let n = self.params.iter().map(|p| p.index()).sum();
        SpectralPoint::new(a, n).expect("nonzero fugacities have a nonzero product")
    }

    /// The kernel monomial prod_i u_i^{2 nu_i}.
    pub fn monomial(&self) -> Complex64 {
        self.params
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| {
                acc * powi(p.fugacity(), 2 * p.index())
            })
    }
}

impl From<SpectralPoint> for MOperator {
    fn from(t: SpectralPoint) -> Self {
        MOperator::new(t)
    }
}

/// The scalar prefactor (q^{m_t} t^2;q)_inf / (q^{1+m_t} t^{-2};q)_inf
/// of M, with (t, m_t) the combined parameter. Structurally this is the
/// balanced ratio ppr(q/t^2, 2 m_t), but the exponents are integers, so
/// integer q-powers are used directly (q^{m_t} t^2 = 1 stays exact).
pub fn m_prefactor(t: &SpectralPoint, qm: &QModulus, policy: &TruncationPolicy) -> Result<Complex64> {
    let t2 = t.fugacity() * t.fugacity();
    guard_balanced_ratio(qm.q() / t2, 2 * t.index(), qm, policy.pole_guard_delta)?;
    let den_arg = qm.pow_int(1 + t.index()) / t2;
    let den = qpoch(den_arg, qm, policy)?;
    if den.norm() == 0.0 {
        return Err(Error::ZeroDenominator {
            arg_re: den_arg.re,
            arg_im: den_arg.im,
        });
    }
    Ok(qpoch(qm.pow_int(t.index()) * t2, qm, policy)? / den)
}

/// The M integrand excluding measure and prefactor, evaluated at external
/// slot `x` and integration slot `z`.
pub fn m_kernel(
    op: &MOperator,
    x: &SpectralPoint,
    z: &SpectralPoint,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let c = op.combined();
    let (t, mt) = (c.fugacity(), c.index());
    let (xf, mx) = (x.fugacity(), x.index());
    let (zf, nz) = (z.fugacity(), z.index());

    let factors = [
        (t * xf * zf, mx + mt + nz),
        (t * xf / zf, mx + mt - nz),
        (t * zf / xf, -mx + mt + nz),
        (t / (xf * zf), -mx + mt - nz),
    ];
    let mut out = (powi(zf, 2 * nz) * powi(xf, 2 * mx) * op.monomial()).inv();
    for (base, hp) in factors {
        out *= poch_pair_ratio(base, hp, qm, policy)?;
    }
    if !out.is_finite() {
        return Err(Error::Domain("M-kernel overflow".into()));
    }
    Ok(out)
}

/// Apply M to a discrete kernel:
///
///   beta(x, m) = prefactor * sum_n integral_T [d_n z]
///                m_kernel((x,m); (z,n)) * alpha(z, n).
///
/// The returned kernel evaluates lazily (one sum-integral per point, on the
/// grid captured here) and carries a per-(z-node, m) cache. The paper's
/// domain condition |t x| < 1, |t/x| < 1 is checked at each evaluation
/// point.
pub fn m_apply(
    op: &MOperator,
    alpha: &DiscreteKernel,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
) -> DiscreteKernel {
    let op = op.clone();
    let alpha = alpha.clone();
    let qm = *qm;
    let policy = *policy;
    let grid = grid.clone();
    let prefactor = m_prefactor(&op.combined(), &qm, &policy);
    let label = format!("M[{}]", alpha.label());

    DiscreteKernel::new(label, move |x, m| {
        let t_abs = op.combined().fugacity().norm();
        let x_abs = x.norm();
        if t_abs * x_abs >= 1.0 || t_abs / x_abs >= 1.0 {
            return Err(Error::Domain(format!(
                "M application requires |t x| < 1 and |t/x| < 1, got |t| = {t_abs}, |x| = {x_abs}"
            )));
        }
        let ext = SpectralPoint::new(x, m)?;
        let op_inner = op.clone();
        let alpha_inner = alpha.clone();
        let qm_inner = qm;
        let policy_inner = policy;
        let integrand = DiscreteKernel::new("m_apply integrand", move |z, n| {
            let int_slot = SpectralPoint::new(z, n)?;
            let k = m_kernel(&op_inner, &ext, &int_slot, &qm_inner, &policy_inner)?;
            Ok(k * alpha_inner.eval(z, n)?)
        });
        let sum = z_sum_integral(&integrand, &qm, &policy, &grid)?;
        Ok(prefactor.clone()? * sum.value)
    })
    .memoized()
}

/// One Bailey lemma step. Given a pair (alpha, beta) relative to (t, n_t),
/// returns the new pair relative to the composite parameter (s,n_s)(t,n_t):
///
///   alpha'(x, k) = D((s,n_s); y; (x,k)) * alpha(x, k)
///   beta'(x, k)  = D((1/t,-n_t); y; (x,k))
///                  * [ M(s,n_s) applied to D((st, n_s+n_t); y; .) * beta ](x, k)
///
/// The D prefactor of beta' is the exact inverse of D((t,n_t); y; (x,k));
/// with it, beta' = M-composite(s,t) alpha' pointwise. Each beta'
/// evaluation runs one nested sum-integral; kernels are cached.
pub fn bailey_step(
    alpha: &DiscreteKernel,
    beta: &DiscreteKernel,
    s: SpectralPoint,
    t: SpectralPoint,
    y: SpectralPoint,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
) -> Result<(DiscreteKernel, DiscreteKernel)> {
    let st = MOperator::composite(s, t).combined();

    let alpha_in = alpha.clone();
    let (qm_a, policy_a) = (*qm, *policy);
    let alpha_prime = DiscreteKernel::new(format!("alpha'[{}]", alpha.label()), move |x, k| {
        let d = d_function(
            &DPair {
                t: s,
                u: y,
                v: SpectralPoint::new(x, k)?,
            },
            &qm_a,
            &policy_a,
        )?;
        Ok(d * alpha_in.eval(x, k)?)
    })
    .memoized();

    let beta_in = beta.clone();
    let (qm_b, policy_b) = (*qm, *policy);
    let d_beta = DiscreteKernel::new(format!("D(st)*{}", beta.label()), move |z, m| {
        let d = d_function(
            &DPair {
                t: st,
                u: y,
                v: SpectralPoint::new(z, m)?,
            },
            &qm_b,
            &policy_b,
        )?;
        Ok(d * beta_in.eval(z, m)?)
    })
    .memoized();

    let applied = m_apply(&MOperator::new(s), &d_beta, qm, policy, grid);
    let t_inv = t.inverse();
    let (qm_c, policy_c) = (*qm, *policy);
    let beta_prime = DiscreteKernel::new(format!("beta'[{}]", beta.label()), move |x, k| {
        let d = d_function(
            &DPair {
                t: t_inv,
                u: y,
                v: SpectralPoint::new(x, k)?,
            },
            &qm_c,
            &policy_c,
        )?;
        Ok(d * applied.eval(x, k)?)
    })
    .memoized();

    Ok((alpha_prime, beta_prime))
}
