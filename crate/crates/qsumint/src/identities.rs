//! End-to-end identity verifiers: the q-beta sum-integral evaluation, the
//! substitution map with its balancing conditions, the star-triangle
//! relation at kernel level, the one-step Bailey check, and the seeded
//! samplers that drive them.
//!
//! The q-beta evaluation, for six balanced pairs (a_j, n_j) with
//! sum n_j = 0 and prod a_j = q:
//!
//!   sum_{m in Z} integral_T [d_m z] z^{-6m}
//!       prod_{j=1}^6 ppr(a_j z, m + n_j) ppr(a_j / z, n_j - m)
//!   = prod_j a_j^{-n_j} prod_{1<=j<k<=6} ppr(a_j a_k, n_j + n_k),
//!
//! with [d_m z] applied once per term and z^{-6m} the aggregate of one
//! z^{-m} per factor.
//!
//! The star-triangle relation is checked pointwise in the external slots
//! (omega, k) and (x, j):
//!
//!   P(s) P(t) sum_m integral_T [d_m z]
//!       K_s((omega,k);(z,m)) D((st,N); (y,l); (z,m)) K_t((z,m);(x,j))
//!   = D((t,n_t);(y,l);(omega,k))
//!     * P(st,N) K_[s,t]((omega,k);(x,j))
//!     * D((s,n_s);(y,l);(x,j)),
//!
//! where K_[s,t] is the composite M kernel (monomial s^{2n_s} t^{2n_t}) and
//! N = n_s + n_t. Comparing kernels avoids the second nested sum-integral;
//! `verify_star_triangle_applied` optionally integrates both sides against
//! the test kernel delta_{j,0} as a sanity path.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::{
    bailey_step, d_function, m_apply, m_kernel, m_prefactor, DPair, MOperator,
};
use crate::qkernel::{
    guard_balanced_ratio, poch_pair_ratio, powi, qpoch, QModulus, SpectralPoint, TruncationPolicy,
};
use crate::quadrature::{
    pole_guard, refine_z_sum_integral, z_sum_integral_windowed, DiscreteKernel, PoleFamily,
    RefinedSumIntegral, SumIntegral, UnitCircleGrid,
};
use crate::report::{Params, Report, Settings};

/// Absolute tolerance on |prod a_j - q| accepted at sextet construction.
pub const BALANCE_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// Six spectral pairs under the balancing conditions sum n_j = 0 (exact)
/// and prod a_j = q (to BALANCE_EPS).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancedSextet {
    points: [SpectralPoint; 6],
}

impl BalancedSextet {
    pub fn new(points: [SpectralPoint; 6], qm: &QModulus) -> Result<Self> {
        let n_sum: i64 = points.iter().map(|p| p.index()).sum();
        if n_sum != 0 {
            return Err(Error::Domain(format!(
                "sextet indices must sum to zero, got {n_sum}"
            )));
        }
        let prod = points
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * p.fugacity());
        let defect = (prod - qm.q()).norm();
        if defect >= BALANCE_EPS {
            return Err(Error::Domain(format!(
                "sextet fugacities must multiply to q: |prod - q| = {defect:.3e}"
            )));
        }
        Ok(BalancedSextet { points })
    }

    /// Derive the sixth fugacity as q / prod(a_1..a_5) with index
    /// n_6 = -(n_1 + ... + n_5).
    pub fn from_five(five: [SpectralPoint; 5], qm: &QModulus) -> Result<Self> {
        let prod = five
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * p.fugacity());
        let n_sum: i64 = five.iter().map(|p| p.index()).sum();
        let sixth = SpectralPoint::new(qm.q() / prod, -n_sum)?;
        Self::new(
            [five[0], five[1], five[2], five[3], five[4], sixth],
            qm,
        )
    }

    pub fn points(&self) -> &[SpectralPoint; 6] {
        &self.points
    }

    /// The twelve reciprocal-Pochhammer families the integrand induces.
    pub fn pole_families(&self, qm: &QModulus) -> Vec<PoleFamily> {
        self.points
            .iter()
            .enumerate()
            .flat_map(|(j, p)| {
                PoleFamily::for_balanced_pair(&format!("a{}", j + 1), p.fugacity().norm(), qm)
            })
            .collect()
    }

    fn params(&self, qm: &QModulus) -> Params {
        let mut params = Params::new();
        params.push_complex("q", qm.q());
        for (j, p) in self.points.iter().enumerate() {
            params.push_complex(&format!("a{}", j + 1), p.fugacity());
            params.push_int(&format!("n{}", j + 1), p.index());
        }
        params
    }
}

/// Spectral data of one star-triangle check: the two operator parameters,
/// the (y, l) pair, and the external slots (omega, k) and (x, j).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarTriangleConfig {
    pub s: SpectralPoint,
    pub t: SpectralPoint,
    pub y: SpectralPoint,
    pub omega: SpectralPoint,
    pub x: SpectralPoint,
}

impl StarTriangleConfig {
    /// The combined pair (s t, n_s + n_t).
    pub fn st(&self) -> SpectralPoint {
        MOperator::composite(self.s, self.t).combined()
    }

    fn params(&self, qm: &QModulus) -> Params {
        let mut params = Params::new();
        params.push_complex("q", qm.q());
        params.push_complex("s", self.s.fugacity());
        params.push_int("n_s", self.s.index());
        params.push_complex("t", self.t.fugacity());
        params.push_int("n_t", self.t.index());
        params.push_complex("y", self.y.fugacity());
        params.push_int("l", self.y.index());
        params.push_complex("omega", self.omega.fugacity());
        params.push_int("k", self.omega.index());
        params.push_complex("x", self.x.fugacity());
        params.push_int("j", self.x.index());
        params
    }
}

/// New parameters induced by a star-triangle configuration:
///
///   a1 = s w,           n1 = k + n_s
///   a2 = s / w,         n2 = -k + n_s
///   a3 = q^{1/2} y/(st), n3 = l - n_s - n_t
///   a4 = q^{1/2}/(st y), n4 = -l - n_s - n_t
///   a5 = t x,           n5 = j + n_t
///   a6 = t / x,         n6 = -j + n_t
///
/// Balancing holds identically: the indices telescope to zero and the
/// fugacities multiply to s^2 t^2 q (st)^{-2} = q.
pub fn substitution_map(cfg: &StarTriangleConfig, qm: &QModulus) -> Result<BalancedSextet> {
    let (s, ns) = (cfg.s.fugacity(), cfg.s.index());
    let (t, nt) = (cfg.t.fugacity(), cfg.t.index());
    let (y, l) = (cfg.y.fugacity(), cfg.y.index());
    let (w, k) = (cfg.omega.fugacity(), cfg.omega.index());
    let (x, j) = (cfg.x.fugacity(), cfg.x.index());
    let r = qm.sqrt_q();
    let st = s * t;
    let points = [
        SpectralPoint::new(s * w, k + ns)?,
        SpectralPoint::new(s / w, -k + ns)?,
        SpectralPoint::new(r * y / st, l - ns - nt)?,
        SpectralPoint::new(r / (st * y), -l - ns - nt)?,
        SpectralPoint::new(t * x, j + nt)?,
        SpectralPoint::new(t / x, -j + nt)?,
    ];
    BalancedSextet::new(points, qm)
}

// ---------------------------------------------------------------------------
// q-beta sum-integral
// ---------------------------------------------------------------------------

/// The q-beta integrand (measure excluded): z^{-6m} times the six balanced
/// factor pairs.
pub fn qbeta_integrand(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> DiscreteKernel {
    let points = *sextet.points();
    let qm = *qm;
    let policy = *policy;
    DiscreteKernel::new("qbeta integrand", move |z, m| {
        let mut out = powi(z, -6 * m);
        for p in &points {
            out *= poch_pair_ratio(p.fugacity() * z, m + p.index(), &qm, &policy)?;
            out *= poch_pair_ratio(p.fugacity() / z, p.index() - m, &qm, &policy)?;
        }
        Ok(out)
    })
}

/// Left side of the q-beta evaluation on a fixed grid.
pub fn qbeta_lhs(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
) -> Result<SumIntegral> {
    pole_guard(&sextet.pole_families(qm), policy)?;
    let kernel = qbeta_integrand(sextet, qm, policy);
    z_sum_integral_windowed(&kernel, qm, policy, grid, 0)
}

/// Left side with the full refinement loop; `min_window` widens the m-sum
/// beyond the two-shell rule (used by the self-consistency oracle).
pub fn qbeta_lhs_refined(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
    min_window: i64,
) -> Result<RefinedSumIntegral> {
    pole_guard(&sextet.pole_families(qm), policy)?;
    let kernel = qbeta_integrand(sextet, qm, policy).memoized();
    refine_z_sum_integral(&kernel, qm, policy, min_window)
}

/// Right side: the monomial prefactor times the 15-pair product. Also
/// reports the smallest numerator Pochhammer modulus encountered, which
/// detects 0 = 0 degenerations.
fn qbeta_rhs_with_degeneracy(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<(Complex64, f64)> {
    let pts = sextet.points();
    let mut out = Complex64::new(1.0, 0.0);
    for p in pts {
        out *= powi(p.fugacity(), -p.index());
    }
    let mut min_num: f64 = f64::INFINITY;
    for j in 0..6 {
        for k in (j + 1)..6 {
            let a = pts[j].fugacity() * pts[k].fugacity();
            let hp = pts[j].index() + pts[k].index();
            guard_balanced_ratio(a, hp, qm, policy.pole_guard_delta)?;
            let num_arg = qm.pow_half(2 + hp) / a;
            let den_arg = qm.pow_half(hp) * a;
            let num = qpoch(num_arg, qm, policy)?;
            let den = qpoch(den_arg, qm, policy)?;
            if den.norm() == 0.0 {
                return Err(Error::ZeroDenominator {
                    arg_re: den_arg.re,
                    arg_im: den_arg.im,
                });
            }
            min_num = min_num.min(num.norm());
            out *= num / den;
        }
    }
    Ok((out, min_num))
}

/// Right side of the q-beta evaluation: prod_j a_j^{-n_j} times the
/// 15-pair Pochhammer product.
pub fn qbeta_rhs(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    qbeta_rhs_with_degeneracy(sextet, qm, policy).map(|(v, _)| v)
}

/// Full q-beta check. Convergence failures and pole rejections are
/// embedded in the report status, not raised.
pub fn verify_qbeta(
    sextet: &BalancedSextet,
    qm: &QModulus,
    policy: &TruncationPolicy,
    identity_tol: f64,
) -> Report {
    let params = sextet.params(qm);
    let mut settings = Settings::from_policy(policy, identity_tol);
    let (rhs, min_num) = match qbeta_rhs_with_degeneracy(sextet, qm, policy) {
        Ok(v) => v,
        Err(e) => return Report::from_error("qbeta", params, settings, &e),
    };
    let lhs = match qbeta_lhs_refined(sextet, qm, policy, 0) {
        Ok(v) => v,
        Err(e) => return Report::from_error("qbeta", params, settings, &e),
    };
    settings.nodes_used = lhs.nodes_used;
    settings.window_used = lhs.window_used;
    let mut report = Report::from_sides("qbeta", params, lhs.value, rhs, settings);
    if min_num < 1e-10 && rhs.norm() < 1e-12 && lhs.value.norm() < 1e-6 {
        report.mark_degenerate("numerator Pochhammer vanishes on both sides (0 = 0)");
    }
    report
}

// ---------------------------------------------------------------------------
// Star-triangle relation
// ---------------------------------------------------------------------------

/// The left-side integrand: M(s)-kernel times D((st,N)) times M(t)-kernel,
/// as a discrete kernel in the integration pair (z, m).
pub fn star_triangle_integrand(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> DiscreteKernel {
    let cfg = *cfg;
    let qm = *qm;
    let policy = *policy;
    let st = cfg.st();
    DiscreteKernel::new("star-triangle integrand", move |z, m| {
        let zm = SpectralPoint::new(z, m)?;
        let ks = m_kernel(&MOperator::new(cfg.s), &cfg.omega, &zm, &qm, &policy)?;
        let d = d_function(&DPair { t: st, u: cfg.y, v: zm }, &qm, &policy)?;
        let kt = m_kernel(&MOperator::new(cfg.t), &zm, &cfg.x, &qm, &policy)?;
        Ok(ks * d * kt)
    })
}

/// Pole admissibility of a star-triangle configuration: the induced sextet
/// families plus the z-independent denominator ladders of the prefactors
/// and right-side factors.
pub fn validate_star_triangle(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<()> {
    let sextet = substitution_map(cfg, qm)?;
    pole_guard(&sextet.pole_families(qm), policy)?;
    let delta = policy.pole_guard_delta;
    let st = cfg.st();
    for p in [cfg.s, cfg.t, st] {
        let t2 = p.fugacity() * p.fugacity();
        guard_balanced_ratio(qm.q() / t2, 2 * p.index(), qm, delta)?;
    }
    // Denominator arguments of the three pointwise right-side factors.
    let r = qm.sqrt_q();
    let point_args = |tp: SpectralPoint, u: SpectralPoint, v: SpectralPoint| {
        let (t, nt) = (tp.fugacity(), tp.index());
        let (w, n) = (u.fugacity(), u.index());
        let (z, m) = (v.fugacity(), v.index());
        [
            (r * w * z / t, n - nt + m),
            (r * w / (t * z), n - nt - m),
            (r * z / (t * w), -n - nt + m),
            (r / (t * w * z), -n - nt - m),
        ]
    };
    for (base, hp) in point_args(cfg.t, cfg.y, cfg.omega)
        .into_iter()
        .chain(point_args(cfg.s, cfg.y, cfg.x))
    {
        guard_balanced_ratio(base, hp, qm, delta)?;
    }
    let (tf, nt) = (st.fugacity(), st.index());
    let (wf, k) = (cfg.omega.fugacity(), cfg.omega.index());
    let (xf, j) = (cfg.x.fugacity(), cfg.x.index());
    for (base, hp) in [
        (tf * wf * xf, k + nt + j),
        (tf * wf / xf, k + nt - j),
        (tf * xf / wf, -k + nt + j),
        (tf / (wf * xf), -k + nt - j),
    ] {
        guard_balanced_ratio(base, hp, qm, delta)?;
    }
    Ok(())
}

/// Left side on a fixed grid: both M prefactors times the sum-integral of
/// the kernel product.
pub fn star_triangle_lhs(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
) -> Result<SumIntegral> {
    validate_star_triangle(cfg, qm, policy)?;
    let pref = m_prefactor(&cfg.s, qm, policy)? * m_prefactor(&cfg.t, qm, policy)?;
    let kernel = star_triangle_integrand(cfg, qm, policy);
    let sum = z_sum_integral_windowed(&kernel, qm, policy, grid, 0)?;
    Ok(SumIntegral {
        value: pref * sum.value,
        window_used: sum.window_used,
    })
}

/// Left side with the full refinement loop.
pub fn star_triangle_lhs_refined(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
    min_window: i64,
) -> Result<RefinedSumIntegral> {
    validate_star_triangle(cfg, qm, policy)?;
    let pref = m_prefactor(&cfg.s, qm, policy)? * m_prefactor(&cfg.t, qm, policy)?;
    let kernel = star_triangle_integrand(cfg, qm, policy).memoized();
    let refined = refine_z_sum_integral(&kernel, qm, policy, min_window)?;
    Ok(RefinedSumIntegral {
        value: pref * refined.value,
        ..refined
    })
}

/// Right side: D((t,n_t);(y,l);(omega,k)) * P(st,N) * composite M kernel
/// * D((s,n_s);(y,l);(x,j)). Pointwise, no integration.
pub fn star_triangle_rhs(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let composite = MOperator::composite(cfg.s, cfg.t);
    let d_t = d_function(
        &DPair {
            t: cfg.t,
            u: cfg.y,
            v: cfg.omega,
        },
        qm,
        policy,
    )?;
    let pref = m_prefactor(&composite.combined(), qm, policy)?;
    let kern = m_kernel(&composite, &cfg.omega, &cfg.x, qm, policy)?;
    let d_s = d_function(
        &DPair {
            t: cfg.s,
            u: cfg.y,
            v: cfg.x,
        },
        qm,
        policy,
    )?;
    Ok(d_t * pref * kern * d_s)
}

/// Full star-triangle check at kernel level; failures are embedded in the
/// report status.
pub fn verify_star_triangle(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
    identity_tol: f64,
) -> Report {
    let params = cfg.params(qm);
    let mut settings = Settings::from_policy(policy, identity_tol);
    let rhs = match star_triangle_rhs(cfg, qm, policy) {
        Ok(v) => v,
        Err(e) => return Report::from_error("star-triangle", params, settings, &e),
    };
    let lhs = match star_triangle_lhs_refined(cfg, qm, policy, 0) {
        Ok(v) => v,
        Err(e) => return Report::from_error("star-triangle", params, settings, &e),
    };
    settings.nodes_used = lhs.nodes_used;
    settings.window_used = lhs.window_used;
    Report::from_sides("star-triangle", params, lhs.value, rhs, settings)
}

/// Sanity path: apply both sides to the test kernel delta_{j,0} and
/// integrate over the (x, j) slot, turning the kernel identity into a
/// scalar one. The left side becomes a nested double sum-integral.
pub fn verify_star_triangle_applied(
    cfg: &StarTriangleConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
    identity_tol: f64,
) -> Result<Report> {
    validate_star_triangle(cfg, qm, policy)?;
    let grid = UnitCircleGrid::new(policy.quad_nodes_min)?;
    let qm_v = *qm;
    let policy_v = *policy;

    // LHS: integrate the x-slot of the kernel-level left side at j = 0.
    let cfg_l = *cfg;
    let outer = DiscreteKernel::new("star-triangle applied lhs", move |x, j| {
        if j != 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let cfg_x = StarTriangleConfig {
            x: SpectralPoint::new(x, 0)?,
            ..cfg_l
        };
        let kernel = star_triangle_integrand(&cfg_x, &qm_v, &policy_v);
        let grid_inner = UnitCircleGrid::new(policy_v.quad_nodes_min)?;
        Ok(z_sum_integral_windowed(&kernel, &qm_v, &policy_v, &grid_inner, 0)?.value)
    })
    .memoized();
    let pref = m_prefactor(&cfg.s, qm, policy)? * m_prefactor(&cfg.t, qm, policy)?;
    let lhs = pref * z_sum_integral_windowed(&outer, qm, policy, &grid, 0)?.value;

    // RHS: same integration applied to the pointwise right side.
    let cfg_r = *cfg;
    let rhs_kernel = DiscreteKernel::new("star-triangle applied rhs", move |x, j| {
        if j != 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let cfg_x = StarTriangleConfig {
            x: SpectralPoint::new(x, 0)?,
            ..cfg_r
        };
        star_triangle_rhs(&cfg_x, &qm_v, &policy_v)
    });
    let rhs = z_sum_integral_windowed(&rhs_kernel, qm, policy, &grid, 0)?.value;

    let mut settings = Settings::from_policy(policy, identity_tol);
    settings.nodes_used = grid.node_count();
    Ok(Report::from_sides(
        "star-triangle-applied",
        cfg.params(qm),
        lhs,
        rhs,
        settings,
    ))
}

// ---------------------------------------------------------------------------
// Bailey one-step check
// ---------------------------------------------------------------------------

/// Inputs of one Bailey-lemma trial: the operator parameters and the
/// evaluation points for the pointwise comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaileyConfig {
    pub s: SpectralPoint,
    pub t: SpectralPoint,
    pub y: SpectralPoint,
    pub eval_points: [SpectralPoint; 3],
}

impl BaileyConfig {
    fn params(&self, qm: &QModulus) -> Params {
        let mut params = Params::new();
        params.push_complex("q", qm.q());
        params.push_complex("s", self.s.fugacity());
        params.push_int("n_s", self.s.index());
        params.push_complex("t", self.t.fugacity());
        params.push_int("n_t", self.t.index());
        params.push_complex("y", self.y.fugacity());
        params.push_int("l", self.y.index());
        for (i, p) in self.eval_points.iter().enumerate() {
            params.push_complex(&format!("x{}", i + 1), p.fugacity());
            params.push_int(&format!("k{}", i + 1), p.index());
        }
        params
    }
}

/// Seed the pair alpha = delta_{n,0}, beta = M(t) alpha, run one Bailey
/// step, and compare beta' against the composite application
/// M_[s,t] alpha' at the three evaluation points. The reported lhs/rhs are
/// the worst point's values.
pub fn verify_bailey(
    cfg: &BaileyConfig,
    qm: &QModulus,
    policy: &TruncationPolicy,
    identity_tol: f64,
) -> Report {
    let params = cfg.params(qm);
    let mut settings = Settings::from_policy(policy, identity_tol);

    let run = || -> Result<(Complex64, Complex64, f64, Vec<f64>)> {
        let grid = UnitCircleGrid::new(policy.quad_nodes_min)?;
        let alpha = DiscreteKernel::delta_n0();
        let beta = m_apply(&MOperator::new(cfg.t), &alpha, qm, policy, &grid);
        let (alpha_prime, beta_prime) =
            bailey_step(&alpha, &beta, cfg.s, cfg.t, cfg.y, qm, policy, &grid)?;
        let rhs_kernel = m_apply(
            &MOperator::composite(cfg.s, cfg.t),
            &alpha_prime,
            qm,
            policy,
            &grid,
        );
        let mut worst = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), -1.0);
        let mut rels = Vec::new();
        for p in &cfg.eval_points {
            let lhs = beta_prime.eval(p.fugacity(), p.index())?;
            let rhs = rhs_kernel.eval(p.fugacity(), p.index())?;
            let rel = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
            rels.push(rel);
            if rel > worst.2 {
                worst = (lhs, rhs, rel);
            }
        }
        Ok((worst.0, worst.1, worst.2, rels))
    };

    match run() {
        Ok((lhs, rhs, _max_rel, rels)) => {
            settings.nodes_used = policy.quad_nodes_min;
            let mut report = Report::from_sides("bailey", params, lhs, rhs, settings);
            report.note = format!(
                "per-point rel errs: {}",
                rels.iter()
                    .map(|r| format!("{r:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            report
        }
        Err(e) => Report::from_error("bailey", params, settings, &e),
    }
}

// ---------------------------------------------------------------------------
// Seeded samplers
// ---------------------------------------------------------------------------

/// How the discrete indices of a q-beta sextet are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// n_1..n_5 free in {-1,0,1}; n_6 balances the sum.
    Free,
    /// Consecutive pairs cancel: n_2 = -n_1, n_4 = -n_3, n_6 = -n_5.
    PairwiseBalanced,
    /// Balanced but NOT pairwise-cancelling (the general regime).
    GeneralBalanced,
}

const SAMPLE_ATTEMPTS: u32 = 1000;
const Q_RANGE: (f64, f64) = (0.1, 0.4);
/// Fugacity moduli are q^e with e in this range.
const MODULUS_EXP_RANGE: (f64, f64) = (0.1, 0.4);

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw_q(rng: &mut ChaCha8Rng, q_override: Option<f64>) -> Result<QModulus> {
    // The draw happens even under an override so the remaining stream does
    // not depend on whether q was pinned.
    let drawn = rng.gen_range(Q_RANGE.0..Q_RANGE.1);
    QModulus::real(q_override.unwrap_or(drawn))
}

fn draw_phase(rng: &mut ChaCha8Rng) -> f64 {
    std::f64::consts::TAU * rng.gen::<f64>()
}

fn draw_index(rng: &mut ChaCha8Rng) -> i64 {
    rng.gen_range(-1..=1)
}

/// Seed-reproducible q-beta sample: q real in [0.1, 0.4), five fugacities
/// with moduli q^e, e in [0.1, 0.4), uniform phases, the sixth fugacity
/// derived from balancing; rejected until the sixth modulus is admissible
/// and the pole guard passes.
pub fn sample_qbeta(
    seed: u64,
    policy: &TruncationPolicy,
    q_override: Option<f64>,
    mode: IndexMode,
) -> Result<(QModulus, BalancedSextet)> {
    let mut rng = rng_for(seed);
    let qm = draw_q(&mut rng, q_override)?;
    let q_abs = qm.abs_q();
    for _ in 0..SAMPLE_ATTEMPTS {
        let indices: [i64; 5] = match mode {
            IndexMode::Free | IndexMode::GeneralBalanced => {
                [0; 5].map(|_| draw_index(&mut rng))
            }
            IndexMode::PairwiseBalanced => {
                let n1 = draw_index(&mut rng);
                let n3 = draw_index(&mut rng);
                let n5 = draw_index(&mut rng);
                [n1, -n1, n3, -n3, n5]
            }
        };
        let mut five = [SpectralPoint::new(Complex64::new(1.0, 0.0), 0)?; 5];
        for (i, p) in five.iter_mut().enumerate() {
            let e = rng.gen_range(MODULUS_EXP_RANGE.0..MODULUS_EXP_RANGE.1);
            *p = SpectralPoint::new(
                Complex64::from_polar(q_abs.powf(e), draw_phase(&mut rng)),
                indices[i],
            )?;
        }
        let sextet = match BalancedSextet::from_five(five, &qm) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if mode == IndexMode::GeneralBalanced {
            let n = sextet.points().map(|p| p.index());
            if n[0] + n[1] == 0 && n[2] + n[3] == 0 && n[4] + n[5] == 0 {
                continue;
            }
        }
        let a6 = sextet.points()[5].fugacity().norm();
        let e6 = a6.ln() / q_abs.ln();
        if !(MODULUS_EXP_RANGE.0..=MODULUS_EXP_RANGE.1).contains(&e6) {
            continue;
        }
        if pole_guard(&sextet.pole_families(&qm), policy).is_ok() {
            return Ok((qm, sextet));
        }
    }
    Err(Error::SamplingExhausted {
        attempts: SAMPLE_ATTEMPTS,
    })
}

/// Seed-reproducible star-triangle sample. The external slots omega and x
/// sit on the unit circle; |s|, |t| are q^e with e in [0.12, 0.19) and |y|
/// stays within q^{0.02} of the circle, which keeps every induced fugacity
/// exponent inside the admissible band.
pub fn sample_star_triangle(
    seed: u64,
    policy: &TruncationPolicy,
    q_override: Option<f64>,
) -> Result<(QModulus, StarTriangleConfig)> {
    let mut rng = rng_for(seed);
    let qm = draw_q(&mut rng, q_override)?;
    let q_abs = qm.abs_q();
    for _ in 0..SAMPLE_ATTEMPTS {
        let cfg = StarTriangleConfig {
            s: SpectralPoint::new(
                Complex64::from_polar(q_abs.powf(rng.gen_range(0.12..0.19)), draw_phase(&mut rng)),
                draw_index(&mut rng),
            )?,
            t: SpectralPoint::new(
                Complex64::from_polar(q_abs.powf(rng.gen_range(0.12..0.19)), draw_phase(&mut rng)),
                draw_index(&mut rng),
            )?,
            y: SpectralPoint::new(
                Complex64::from_polar(q_abs.powf(rng.gen_range(0.0..0.02)), draw_phase(&mut rng)),
                draw_index(&mut rng),
            )?,
            omega: SpectralPoint::new(
                Complex64::from_polar(1.0, draw_phase(&mut rng)),
                draw_index(&mut rng),
            )?,
            x: SpectralPoint::new(
                Complex64::from_polar(1.0, draw_phase(&mut rng)),
                draw_index(&mut rng),
            )?,
        };
        if validate_star_triangle(&cfg, &qm, policy).is_ok() {
            return Ok((qm, cfg));
        }
    }
    Err(Error::SamplingExhausted {
        attempts: SAMPLE_ATTEMPTS,
    })
}

/// Seed-reproducible Bailey trial: star-triangle style parameters plus
/// three unit-circle evaluation points.
pub fn sample_bailey(
    seed: u64,
    policy: &TruncationPolicy,
    q_override: Option<f64>,
) -> Result<(QModulus, BaileyConfig)> {
    let (qm, st_cfg) = sample_star_triangle(seed, policy, q_override)?;
    let mut rng = rng_for(seed ^ 0x6261696c6579);
    let mut eval_points = [st_cfg.x; 3];
    for p in eval_points.iter_mut() {
        *p = SpectralPoint::new(
            Complex64::from_polar(1.0, draw_phase(&mut rng)),
            draw_index(&mut rng),
        )?;
    }
    Ok((
        qm,
        BaileyConfig {
            s: st_cfg.s,
            t: st_cfg.t,
            y: st_cfg.y,
            eval_points,
        },
    ))
}

/// Seed-reproducible reflection sample for a fixed index n: w with modulus
/// in (0.1, 0.9), resampled until both denominator ladders clear the guard.
pub fn sample_reflection(
    seed: u64,
    policy: &TruncationPolicy,
    q_override: Option<f64>,
    n: i64,
) -> Result<(QModulus, Complex64)> {
    let mut rng = rng_for(seed);
    let qm = draw_q(&mut rng, q_override)?;
    for _ in 0..SAMPLE_ATTEMPTS {
        let w = Complex64::from_polar(rng.gen_range(0.1..0.9), draw_phase(&mut rng));
        let ok = guard_balanced_ratio(w, -2 * n, &qm, policy.pole_guard_delta).is_ok()
            && guard_balanced_ratio(w, 2 * n, &qm, policy.pole_guard_delta).is_ok();
        if ok {
            return Ok((qm, w));
        }
    }
    Err(Error::SamplingExhausted {
        attempts: SAMPLE_ATTEMPTS,
    })
}

/// Seed-reproducible D-function sample with admissible arguments.
pub fn sample_dpair(
    seed: u64,
    policy: &TruncationPolicy,
    q_override: Option<f64>,
) -> Result<(QModulus, DPair)> {
    let mut rng = rng_for(seed);
    let qm = draw_q(&mut rng, q_override)?;
    let q_abs = qm.abs_q();
    for _ in 0..SAMPLE_ATTEMPTS {
        let p = DPair {
            t: SpectralPoint::new(
                Complex64::from_polar(
                    q_abs.powf(rng.gen_range(MODULUS_EXP_RANGE.0..MODULUS_EXP_RANGE.1)),
                    draw_phase(&mut rng),
                ),
                rng.gen_range(-2..=2),
            )?,
            u: SpectralPoint::new(
                Complex64::from_polar(1.0, draw_phase(&mut rng)),
                rng.gen_range(-2..=2),
            )?,
            v: SpectralPoint::new(
                Complex64::from_polar(1.0, draw_phase(&mut rng)),
                rng.gen_range(-2..=2),
            )?,
        };
        let unit = SpectralPoint::new(Complex64::new(1.0, 0.0), 0)?;
        let ok = d_function(&p, &qm, policy).is_ok()
            && d_function(&DPair { t: p.t.inverse(), ..p }, &qm, policy).is_ok()
            && d_function(&DPair { t: unit, ..p }, &qm, policy).is_ok();
        if ok {
            return Ok((qm, p));
        }
    }
    Err(Error::SamplingExhausted {
        attempts: SAMPLE_ATTEMPTS,
    })
}
