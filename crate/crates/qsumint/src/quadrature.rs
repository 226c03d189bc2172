//! Sum-integral evaluation: the [d_m z] measure, trapezoidal contour
//! quadrature on the unit circle, truncated summation over the integer
//! index, and the contour admissibility (pole guard) check.
//!
//! Normalization bookkeeping, in one place: the measure's dz/(4 pi i z)
//! equals d(theta)/(4 pi) on the circle, so
//!
//!   integral_T f(z) dz/(4 pi i z)  ~=  (1/2) * (1/K) sum_k f(z_k).
//!
//! `contour_mean`/`contour_integral` return the plain node average
//! (1/K) sum f(z_k), which is the analytic mean integral_T f(z) dz/(2 pi i z);
//! the extra factor 1/2 is applied exactly once, inside `z_sum_integral`.
//! `measure_weight` returns only the z- and m-dependent product
//! (1 - q^m z^2)(1 - q^m z^{-2}) / q^m.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qkernel::{QModulus, TruncationPolicy};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Equispaced nodes z_k = exp(2 pi i k / K) on the unit circle.
///
/// K is a power of two >= 8 so a doubled grid contains the old nodes
/// bit-exactly (2k/2K and k/K are the same f64 quotient), which lets kernel
/// memoization carry across refinement levels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCircleGrid {
    nodes: Vec<Complex64>,
}

impl UnitCircleGrid {
    pub fn new(node_count: u32) -> Result<Self> {
        if node_count < 8 || !node_count.is_power_of_two() {
            return Err(Error::Domain(format!(
                "grid node count must be a power of two >= 8, got {node_count}"
            )));
        }
        let k = node_count as f64;
        let nodes = (0..node_count)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * (i as f64) / k))
            .collect();
        Ok(UnitCircleGrid { nodes })
    }

    pub fn node_count(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    /// The doubled grid; contains this grid's nodes bit-exactly.
    pub fn refined(&self) -> UnitCircleGrid {
        UnitCircleGrid::new(self.node_count() * 2).expect("doubling preserves the invariant")
    }
}

// ---------------------------------------------------------------------------
// Discrete kernels
// ---------------------------------------------------------------------------

type KernelFn = dyn Fn(Complex64, i64) -> Result<Complex64> + Send + Sync;
type MemoMap = HashMap<(u64, u64, i64), Complex64>;

/// A function of a unit-circle point and an integer index; the object the
/// sum-integral operators act on.
///
/// Evaluation is deterministic for fixed inputs. An optional cache keyed on
/// the bit pattern of z stores successful evaluations; concurrent readers
/// are safe and duplicate computation of an entry is idempotent.
#[derive(Clone)]
pub struct DiscreteKernel {
    label: String,
    eval_fn: Arc<KernelFn>,
    memo: Option<Arc<Mutex<MemoMap>>>,
}

impl std::fmt::Debug for DiscreteKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteKernel")
            .field("label", &self.label)
            .field("memoized", &self.memo.is_some())
            .finish()
    }
}

impl DiscreteKernel {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64, i64) -> Result<Complex64> + Send + Sync + 'static,
    {
        DiscreteKernel {
            label: label.into(),
            eval_fn: Arc::new(f),
            memo: None,
        }
    }

    /// Enable per-(z-node, m) caching on this kernel.
    pub fn memoized(mut self) -> Self {
        self.memo = Some(Arc::new(Mutex::new(HashMap::new())));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn zero() -> Self {
        DiscreteKernel::new("zero", |_, _| Ok(Complex64::new(0.0, 0.0)))
    }

    /// delta_{m,0}: 1 at index 0 (any z), 0 elsewhere.
    pub fn delta_n0() -> Self {
        DiscreteKernel::new("delta_n0", |_, m| {
            Ok(if m == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            })
        })
    }

    pub fn eval(&self, z: Complex64, m: i64) -> Result<Complex64> {
        let key = (z.re.to_bits(), z.im.to_bits(), m);
        if let Some(memo) = &self.memo {
            if let Some(v) = memo.lock().expect("kernel memo poisoned").get(&key) {
                return Ok(*v);
            }
        }
        let v = (self.eval_fn)(z, m)?;
        if let Some(memo) = &self.memo {
            memo.lock().expect("kernel memo poisoned").insert(key, v);
        }
        Ok(v)
    }

    pub fn scaled(&self, c: Complex64) -> DiscreteKernel {
        let inner = self.clone();
        DiscreteKernel::new(format!("{} * scalar", self.label), move |z, m| {
            Ok(c * inner.eval(z, m)?)
        })
    }

    pub fn plus(&self, other: &DiscreteKernel) -> DiscreteKernel {
        let a = self.clone();
        let b = other.clone();
        DiscreteKernel::new(format!("{} + {}", self.label, other.label), move |z, m| {
            Ok(a.eval(z, m)? + b.eval(z, m)?)
        })
    }
}

// ---------------------------------------------------------------------------
// Measure and contour rules
// ---------------------------------------------------------------------------

/// The z- and m-dependent part of [d_m z]:
/// (1 - q^m z^2)(1 - q^m z^{-2}) / q^m.
pub fn measure_weight(z: Complex64, m: i64, qm: &QModulus) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let qmp = qm.pow_int(m);
    let z2 = z * z;
    (one - qmp * z2) * (one - qmp / z2) / qmp
}

/// Node average (1/K) sum_k f(z_k): the trapezoid rule for the analytic mean
/// integral_T f(z) dz/(2 pi i z). Exact for Laurent polynomials of degree
/// below K, exponentially convergent for f analytic in an annulus around T.
pub fn contour_mean<F>(f: F, grid: &UnitCircleGrid) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut sum = Complex64::new(0.0, 0.0);
    for &z in grid.nodes() {
        sum += f(z)?;
    }
    Ok(sum / grid.node_count() as f64)
}

/// Contour mean with refinement: doubles the grid until two successive
/// estimates agree to quad_eps (relative), starting from `grid` and capped
/// at policy.quad_nodes_max. Returns the accepted value and its node count.
pub fn contour_integral<F>(
    f: F,
    grid: &UnitCircleGrid,
    policy: &TruncationPolicy,
) -> Result<(Complex64, u32)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut g = grid.clone();
    let mut prev = contour_mean(&f, &g)?;
    if g.node_count() >= policy.quad_nodes_max {
        return Ok((prev, g.node_count()));
    }
    loop {
        g = g.refined();
        let cur = contour_mean(&f, &g)?;
        let delta = (cur - prev).norm();
        if delta <= policy.quad_eps * cur.norm().max(f64::MIN_POSITIVE) {
            return Ok((cur, g.node_count()));
        }
        if g.node_count() >= policy.quad_nodes_max {
            return Err(Error::QuadratureNonConvergent {
                nodes: g.node_count(),
                delta: delta / cur.norm().max(f64::MIN_POSITIVE),
            });
        }
        prev = cur;
    }
}

// ---------------------------------------------------------------------------
// Z-sum of contour integrals
// ---------------------------------------------------------------------------

/// Result of a truncated sum-integral: the value and the widest |m| shell
/// actually summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumIntegral {
    pub value: Complex64,
    pub window_used: i64,
}

/// sum_{m in Z} integral_T [d_m z] kernel(z, m), on a fixed grid.
///
/// Shells are summed outward in a symmetric window: the m = 0 term, then
/// the {+m, -m} pairs. The window grows until two consecutive shells each
/// contribute less than sum_tail_eps relative to the accumulated magnitude,
/// capped at policy.sum_window_max. Summation order is fixed, so results
/// are bit-reproducible for one configuration.
pub fn z_sum_integral(
    kernel: &DiscreteKernel,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
) -> Result<SumIntegral> {
    z_sum_integral_windowed(kernel, qm, policy, grid, 0)
}

/// Like `z_sum_integral` but never stops before |m| reaches `min_window`
/// (used by the self-consistency oracle to force wider windows).
pub fn z_sum_integral_windowed(
    kernel: &DiscreteKernel,
    qm: &QModulus,
    policy: &TruncationPolicy,
    grid: &UnitCircleGrid,
    min_window: i64,
) -> Result<SumIntegral> {
    let term = |m: i64| -> Result<Complex64> {
        let mean = contour_mean(|z| Ok(measure_weight(z, m, qm) * kernel.eval(z, m)?), grid)?;
        Ok(mean / 2.0)
    };

    let mut total = term(0)?;
    let mut max_shell = total.norm();
    let mut consecutive_small = 0u32;
    let mut shell_abs = 0.0;
    for m in 1..=policy.sum_window_max {
        let shell = term(m)? + term(-m)?;
        total += shell;
        shell_abs = shell.norm();
        max_shell = max_shell.max(shell_abs);
        let scale = total.norm().max(max_shell).max(f64::MIN_POSITIVE);
        if shell_abs <= policy.sum_tail_eps * scale {
            consecutive_small += 1;
            if consecutive_small >= 2 && m >= min_window {
                return Ok(SumIntegral {
                    value: total,
                    window_used: m,
                });
            }
        } else {
            consecutive_small = 0;
        }
    }
    Err(Error::TailNonConvergent {
        window: policy.sum_window_max,
        last_shell: shell_abs,
        scale: total.norm().max(max_shell),
    })
}

/// A sum-integral value together with the resolution that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedSumIntegral {
    pub value: Complex64,
    pub nodes_used: u32,
    pub window_used: i64,
}

/// Full evaluation loop for a sum-integral: evaluate on the coarsest grid,
/// double the node count until two successive levels agree to quad_eps
/// relative, cap at quad_nodes_max. When quad_nodes_min == quad_nodes_max
/// the single evaluation is accepted as pinned by the caller.
pub fn refine_z_sum_integral(
    kernel: &DiscreteKernel,
    qm: &QModulus,
    policy: &TruncationPolicy,
    min_window: i64,
) -> Result<RefinedSumIntegral> {
    let mut grid = UnitCircleGrid::new(policy.quad_nodes_min)?;
    let mut prev = z_sum_integral_windowed(kernel, qm, policy, &grid, min_window)?;
    if policy.quad_nodes_min >= policy.quad_nodes_max {
        return Ok(RefinedSumIntegral {
            value: prev.value,
            nodes_used: grid.node_count(),
            window_used: prev.window_used,
        });
    }
    loop {
        grid = grid.refined();
        let cur = z_sum_integral_windowed(kernel, qm, policy, &grid, min_window)?;
        let delta = (cur.value - prev.value).norm();
        if delta <= policy.quad_eps * cur.value.norm().max(f64::MIN_POSITIVE) {
            return Ok(RefinedSumIntegral {
                value: cur.value,
                nodes_used: grid.node_count(),
                window_used: cur.window_used,
            });
        }
        if grid.node_count() >= policy.quad_nodes_max {
            return Err(Error::QuadratureNonConvergent {
                nodes: grid.node_count(),
                delta: delta / cur.value.norm().max(f64::MIN_POSITIVE),
            });
        }
        prev = cur;
    }
}

// ---------------------------------------------------------------------------
// Pole guard
// ---------------------------------------------------------------------------

/// Which limit point a reciprocal-Pochhammer pole family accumulates at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleSide {
    /// Poles of a (base/z)-type family: must lie inside the circle.
    AccumulatesAtZero,
    /// Poles of a (base*z)-type family: must lie outside the circle.
    AccumulatesAtInfinity,
}

/// Pole moduli of one 1/(w;q)_inf family, net of numerator-zero
/// cancellation, plus the moduli of the nearest cancelled zero/pole pairs
/// ("pinch" points, where the evaluated ratio is smooth but both factors
/// nearly vanish).
#[derive(Debug, Clone, PartialEq)]
pub struct PoleFamily {
    pub label: String,
    pub side: PoleSide,
    pub pole_moduli: Vec<f64>,
    pub pinch_moduli: Vec<f64>,
}

impl PoleFamily {
    /// The two families induced by one balanced factor pair with fugacity
    /// modulus `a_abs`: the (a*z)-side family whose nearest true pole sits
    /// at modulus 1/a_abs, and the (a/z)-side family with nearest pole at
    /// a_abs. Pinch moduli are the half-integer ladder points |q|^e nearest
    /// to a_abs, mapped to the circle.
    pub fn for_balanced_pair(label: &str, a_abs: f64, qm: &QModulus) -> [PoleFamily; 2] {
        let lq = qm.abs_q().ln();
        let t = a_abs.ln() / lq;
        let e_lo = (2.0 * t).floor() / 2.0;
        let e_hi = e_lo + 0.5;
        let ladder_lo = qm.abs_q().powf(e_lo);
        let ladder_hi = qm.abs_q().powf(e_hi);
        [
            PoleFamily {
                label: format!("{label}*z"),
                side: PoleSide::AccumulatesAtInfinity,
                pole_moduli: vec![1.0 / a_abs],
                pinch_moduli: vec![ladder_lo / a_abs, ladder_hi / a_abs],
            },
            PoleFamily {
                label: format!("{label}/z"),
                side: PoleSide::AccumulatesAtZero,
                pole_moduli: vec![a_abs],
                pinch_moduli: vec![a_abs / ladder_lo, a_abs / ladder_hi],
            },
        ]
    }
}

/// Contour admissibility: fails if any pole modulus is within
/// pole_guard_delta of 1, any family has a member on the wrong side of the
/// circle, or any pinch point is within the guard band. The error message
/// lists every offender.
pub fn pole_guard(families: &[PoleFamily], policy: &TruncationPolicy) -> Result<()> {
    let delta = policy.pole_guard_delta;
    let mut offenders = Vec::new();
    for fam in families {
        for &p in &fam.pole_moduli {
            if (p - 1.0).abs() < delta {
                offenders.push(format!("{}: pole modulus {p:.6} within {delta} of the circle", fam.label));
            }
            match fam.side {
                PoleSide::AccumulatesAtInfinity if p < 1.0 => offenders.push(format!(
                    "{}: wrong-side pole at modulus {p:.6} (family accumulates at infinity)",
                    fam.label
                )),
                PoleSide::AccumulatesAtZero if p > 1.0 => offenders.push(format!(
                    "{}: wrong-side pole at modulus {p:.6} (family accumulates at zero)",
                    fam.label
                )),
                _ => {}
            }
        }
        for &p in &fam.pinch_moduli {
            if (p - 1.0).abs() < delta {
                offenders.push(format!(
                    "{}: cancelled zero/pole pair at modulus {p:.6} within {delta} of the circle",
                    fam.label
                ));
            }
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(Error::PoleGuard(offenders.join("; ")))
    }
}
