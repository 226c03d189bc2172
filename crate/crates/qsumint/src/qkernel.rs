//! Foundational q-series arithmetic.
//!
//! Everything downstream is built from three ingredients:
//! - `qpoch`: the infinite product (z;q)_inf = prod_{j>=0} (1 - z q^j),
//!   truncated under a certified geometric tail bound;
//! - `qpow_half`: half-integer powers q^{k/2} computed as a fixed integer
//!   power of one square root, so exponent arithmetic is branch-coherent;
//! - `poch_pair_ratio`: the balanced ratio
//!   (q^{1+p}/w;q)_inf / (q^p w;q)_inf with p = hp/2, which is the shape
//!   every kernel factor in this crate takes. Pairing numerator and
//!   denominator keeps intermediate magnitudes bounded and cancels the
//!   denominator's wrong-side zeros against numerator zeros, so as a
//!   function of a unit-circle variable inside `w` the ratio's true poles
//!   always sit at moduli >= |q|^{-|p|}/|base| (w = base*z) or
//!   <= |base|*|q|^{|p|} (w = base/z).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::report::{Params, Report, Settings};

/// The nome q with its square root fixed once at construction.
///
/// All half-integer powers q^{k/2} are integer powers of `sqrt_q`; no code
/// path extracts a fresh root, so q^{j/2} * q^{k/2} == q^{(j+k)/2} up to
/// rounding in the integer power itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QModulus {
    q: Complex64,
    sqrt_q: Complex64,
}

impl QModulus {
    /// Requires 0 < |q| < 1. The square root is the principal branch.
    pub fn new(q: Complex64) -> Result<Self> {
        let r = q.norm();
        if !r.is_finite() || r <= 0.0 || r >= 1.0 {
            return Err(Error::Domain(format!(
                "nome must satisfy 0 < |q| < 1, got |q| = {r}"
            )));
        }
        Ok(QModulus { q, sqrt_q: q.sqrt() })
    }

    pub fn real(q: f64) -> Result<Self> {
        Self::new(Complex64::new(q, 0.0))
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn sqrt_q(&self) -> Complex64 {
        self.sqrt_q
    }

    pub fn abs_q(&self) -> f64 {
        self.q.norm()
    }

    /// q^{k/2} for integer k, as sqrt_q^k.
    pub fn pow_half(&self, k: i64) -> Complex64 {
        powi(self.sqrt_q, k)
    }

    /// q^k for integer k.
    pub fn pow_int(&self, k: i64) -> Complex64 {
        powi(self.q, k)
    }
}

/// Integer power with negative exponents allowed.
pub fn powi(z: Complex64, k: i64) -> Complex64 {
    if k >= 0 {
        z.powu(k as u32)
    } else {
        z.powu((-k) as u32).inv()
    }
}

/// A paired continuous fugacity and discrete index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    a: Complex64,
    n: i64,
}

impl SpectralPoint {
    pub fn new(a: Complex64, n: i64) -> Result<Self> {
        if !a.is_finite() || a.norm() == 0.0 {
            return Err(Error::Domain(format!(
                "fugacity must be finite and nonzero, got {a}"
            )));
        }
        Ok(SpectralPoint { a, n })
    }

    pub fn fugacity(&self) -> Complex64 {
        self.a
    }

    pub fn index(&self) -> i64 {
        self.n
    }

    /// The inverse pair (1/a, -n).
    pub fn inverse(&self) -> SpectralPoint {
        SpectralPoint {
            a: self.a.inv(),
            n: -self.n,
        }
    }
}

/// All cutoffs and tolerances: infinite products, Z-sums, quadrature, and
/// the pole guard band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Tolerance for the geometric tail bound of infinite products.
    pub product_eps: f64,
    /// Hard cap on product terms.
    pub product_max_terms: u32,
    /// Relative tolerance for the two-shell Z-sum stopping rule.
    pub sum_tail_eps: f64,
    /// Hard cap M on |m| in the symmetric window.
    pub sum_window_max: i64,
    /// Starting node count for contour refinement (power of two, >= 8).
    pub quad_nodes_min: u32,
    /// Final node count the refinement may reach (power of two).
    pub quad_nodes_max: u32,
    /// Relative tolerance for accepting a refinement level.
    pub quad_eps: f64,
    /// Minimum allowed distance of any pole modulus from the unit circle.
    pub pole_guard_delta: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            product_eps: 1e-14,
            product_max_terms: 4096,
            sum_tail_eps: 1e-12,
            sum_window_max: 64,
            quad_nodes_min: 128,
            quad_nodes_max: 4096,
            quad_eps: 1e-8,
            pole_guard_delta: 0.05,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("product_eps", self.product_eps),
            ("sum_tail_eps", self.sum_tail_eps),
            ("quad_eps", self.quad_eps),
            ("pole_guard_delta", self.pole_guard_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sum_window_max < 1 {
            return Err(Error::Config(format!(
                "sum_window_max must be >= 1, got {}",
                self.sum_window_max
            )));
        }
        for (name, k) in [
            ("quad_nodes_min", self.quad_nodes_min),
            ("quad_nodes_max", self.quad_nodes_max),
        ] {
            if k < 8 || !k.is_power_of_two() {
                return Err(Error::Config(format!(
                    "{name} must be a power of two >= 8, got {k}"
                )));
            }
        }
        if self.quad_nodes_min > self.quad_nodes_max {
            return Err(Error::Config(format!(
                "quad_nodes_min {} > quad_nodes_max {}",
                self.quad_nodes_min, self.quad_nodes_max
            )));
        }
        if self.product_max_terms == 0 {
            return Err(Error::Config("product_max_terms must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// q-Pochhammer products
// ---------------------------------------------------------------------------

/// (z;q)_inf = prod_{j>=0} (1 - z q^j).
///
/// Stops at the smallest N with |z| |q|^N / (1 - |q|) < product_eps; the
/// relative truncation error is then at most exp(bound) - 1. Errors if the
/// term cap is hit first or the partial product leaves the f64 range.
pub fn qpoch(z: Complex64, qm: &QModulus, policy: &TruncationPolicy) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("qpoch argument must be finite, got {z}")));
    }
    let one_minus_q = 1.0 - qm.abs_q();
    let mut out = Complex64::new(1.0, 0.0);
    let mut zq = z;
    for _ in 0..policy.product_max_terms {
        if zq.norm() / one_minus_q < policy.product_eps {
            if !out.is_finite() {
                return Err(Error::ProductOverflow { arg_abs: z.norm() });
            }
            return Ok(out);
        }
        out *= Complex64::new(1.0, 0.0) - zq;
        zq *= qm.q();
    }
    Err(Error::ProductNonConvergent {
        max_terms: policy.product_max_terms,
        bound: zq.norm() / one_minus_q,
        eps: policy.product_eps,
    })
}

/// Multi-argument shorthand (z1, z2, ...; q)_inf = prod_i (z_i;q)_inf.
pub fn qpoch_multi(zs: &[Complex64], qm: &QModulus, policy: &TruncationPolicy) -> Result<Complex64> {
    let mut out = Complex64::new(1.0, 0.0);
    for &z in zs {
        out *= qpoch(z, qm, policy)?;
    }
    Ok(out)
}

/// q^{k/2} via the fixed branch: sqrt_q^k.
pub fn qpow_half(qm: &QModulus, k: i64) -> Complex64 {
    qm.pow_half(k)
}

/// Fraction of pole_guard_delta applied at ladder rungs that a numerator
/// zero cancels exactly: the ratio is smooth there, but evaluating it as
/// small/small loses precision, so a narrow band is still rejected.
const CANCELLED_GUARD_RATIO: f64 = 0.02;

/// The balanced Pochhammer ratio
///
///   (q^{1 + hp/2} / w ; q)_inf / (q^{hp/2} w ; q)_inf
///
/// with `hp` twice the shift (so half-integer shifts stay in integer
/// arithmetic). Every kernel factor of the M operator, the D-function, the
/// M prefactor, and the q-beta integrand is one of these.
///
/// The denominator argument is guarded against its pole ladder before
/// evaluation; rungs r <= -hp - 1 are cancelled by numerator zeros and get
/// only the narrow pinch band.
pub fn poch_pair_ratio(
    w: Complex64,
    hp: i64,
    qm: &QModulus,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    guard_balanced_ratio(w, hp, qm, policy.pole_guard_delta)?;
    let num_arg = qm.pow_half(2 + hp) / w;
    let den_arg = qm.pow_half(hp) * w;
    let num = qpoch(num_arg, qm, policy)?;
    let den = qpoch(den_arg, qm, policy)?;
    if den.norm() == 0.0 {
        return Err(Error::ZeroDenominator {
            arg_re: den_arg.re,
            arg_im: den_arg.im,
        });
    }
    let out = num / den;
    if !out.is_finite() {
        return Err(Error::ProductOverflow { arg_abs: den_arg.norm() });
    }
    Ok(out)
}

/// Guard a reciprocal-Pochhammer argument `w` against the pole ladder of
/// 1/(w;q)_inf, i.e. the points q^{-r}, r >= 0. Fails when `w` is within
/// `delta` (relative to the ladder point) of any ladder point.
pub fn guard_pole_ladder(w: Complex64, qm: &QModulus, delta: f64) -> Result<()> {
    guard_ladder_from(w, 0, qm, delta)
}

/// Pole-ladder guard for the ratio `poch_pair_ratio(w, hp)`. Denominator
/// rungs q^{-r} with r <= -hp - 1 coincide with numerator zeros (the ratio
/// is a finite product there), so only true poles r >= max(0, -hp) get the
/// full guard band; cancelled rungs get the pinch band.
pub fn guard_balanced_ratio(w: Complex64, hp: i64, qm: &QModulus, delta: f64) -> Result<()> {
    let den_arg = qm.pow_half(hp) * w;
    let first_true_pole = (-hp).max(0);
    guard_ladder_from(den_arg, first_true_pole, qm, delta)?;
    if first_true_pole > 0 {
        guard_ladder_from(den_arg, 0, qm, delta * CANCELLED_GUARD_RATIO)?;
    }
    Ok(())
}

/// Complex-distance check of `w` against the ladder points q^{-r} for
/// r >= r_min, within `delta` relative to the ladder point.
fn guard_ladder_from(w: Complex64, r_min: i64, qm: &QModulus, delta: f64) -> Result<()> {
    let w_abs = w.norm();
    if w_abs <= 0.0 || !w_abs.is_finite() {
        return Ok(());
    }
    let floor_modulus = qm.abs_q().powi(-r_min as i32);
    // The guarded ladder starts at modulus |q|^{-r_min}; arguments well
    // inside that circle cannot be near any guarded rung.
    if w_abs < floor_modulus * (1.0 - delta) {
        return Ok(());
    }
    let ln_q = qm.abs_q().ln();
    let r_center = -(w_abs.ln()) / ln_q; // |q|^{-r_center} = |w|
    let lo = (r_center.floor() as i64 - 1).max(r_min);
    let hi = (r_center.ceil() as i64 + 1).max(r_min);
    for r in lo..=hi {
        let ladder = powi(qm.q(), -r);
        if (w - ladder).norm() < delta * ladder.norm() {
            return Err(Error::PoleProximity {
                arg_re: w.re,
                arg_im: w.im,
                delta,
                ladder_r: r,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reflection identity
// ---------------------------------------------------------------------------

/// Check the reflection identity
///
///   (q^{1-n}/w;q)_inf / (q^{-n} w;q)_inf
///     = q^n / (-w)^{2n} * (q^{1+n}/w;q)_inf / (q^n w;q)_inf
///
/// for integer n. Both sides are evaluated independently from `qpoch`.
pub fn verify_reflection(
    w: Complex64,
    n: i64,
    qm: &QModulus,
    policy: &TruncationPolicy,
    identity_tol: f64,
) -> Result<Report> {
    if w.norm() == 0.0 || !w.is_finite() {
        return Err(Error::Domain(format!("w must be finite and nonzero, got {w}")));
    }
    let lhs = poch_pair_ratio(w, -2 * n, qm, policy)?;
    // (-w)^{2n} = w^{2n} since the exponent is even.
    let rhs = qm.pow_int(n) * powi(w, -2 * n) * poch_pair_ratio(w, 2 * n, qm, policy)?;

    let mut params = Params::new();
    params.push_complex("q", qm.q());
    params.push_complex("w", w);
    params.push_int("n", n);
    Ok(Report::from_sides(
        "reflection",
        params,
        lhs,
        rhs,
        Settings::from_policy(policy, identity_tol),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qm(q: f64) -> QModulus {
        QModulus::real(q).unwrap()
    }

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn qmodulus_rejects_bad_nomes() {
        assert!(QModulus::real(0.0).is_err());
        assert!(QModulus::real(1.0).is_err());
        assert!(QModulus::real(1.5).is_err());
        assert!(QModulus::new(c(0.8, 0.61)).is_err()); // |q| > 1
        assert!(QModulus::new(c(0.3, 0.3)).is_ok());
    }

    #[test]
    fn sqrt_branch_squares_back() {
        for q in [c(0.3, 0.0), c(0.2, 0.1), c(-0.4, 0.2)] {
            let m = QModulus::new(q).unwrap();
            assert_relative_eq!((m.sqrt_q() * m.sqrt_q()).re, q.re, max_relative = 1e-15);
            assert_relative_eq!((m.sqrt_q() * m.sqrt_q()).im, q.im, max_relative = 1e-15);
        }
    }

    #[test]
    fn qpoch_trivial_values() {
        // Empty product.
        assert_eq!(qpoch(c(0.0, 0.0), &qm(0.5), &pol()).unwrap(), c(1.0, 0.0));
        // First factor vanishes.
        assert_eq!(qpoch(c(1.0, 0.0), &qm(0.5), &pol()).unwrap().norm(), 0.0);
    }

    #[test]
    fn qpoch_matches_long_product_reference() {
        // Reference values from a 200-term product in 40-digit arithmetic.
        let v = qpoch(c(0.5, 0.0), &qm(0.5), &pol()).unwrap();
        assert!((v - c(0.2887880950866024, 0.0)).norm() < 1e-12);

        let v = qpoch(c(0.2, 0.0), &qm(0.5), &pol()).unwrap();
        assert!((v - c(0.6503659421209851, 0.0)).norm() < 1e-12);

        let v = qpoch(c(-0.4, 0.2), &qm(0.35), &pol()).unwrap();
        assert!((v - c(1.6902380580818696, -0.4129165466414577)).norm() < 1e-12);
    }

    #[test]
    fn qpoch_multi_is_the_factor_product() {
        let m = qm(0.25);
        let v = qpoch_multi(&[c(0.25, 0.0), c(0.3, 0.0)], &m, &pol()).unwrap();
        assert!((v - c(0.4347380160862459, 0.0)).norm() < 1e-13);

        assert_eq!(qpoch_multi(&[c(0.0, 0.0); 2], &m, &pol()).unwrap(), c(1.0, 0.0));
        let z = qpoch_multi(&[c(1.0, 0.0), c(0.3, 0.0)], &qm(0.5), &pol()).unwrap();
        assert_eq!(z.norm(), 0.0);

        let a = qpoch(c(0.2, 0.0), &qm(0.5), &pol()).unwrap();
        let b = qpoch(c(0.3, 0.0), &qm(0.5), &pol()).unwrap();
        let ab = qpoch_multi(&[c(0.2, 0.0), c(0.3, 0.0)], &qm(0.5), &pol()).unwrap();
        assert_relative_eq!(ab.re, (a * b).re, max_relative = 1e-14);
    }

    #[test]
    fn qpoch_cap_is_an_error() {
        let tight = TruncationPolicy {
            product_max_terms: 3,
            ..pol()
        };
        let err = qpoch(c(0.5, 0.0), &qm(0.9), &tight).unwrap_err();
        assert!(matches!(err, Error::ProductNonConvergent { .. }));
    }

    #[test]
    fn qpow_half_trivial_values() {
        let m = qm(0.25);
        assert_eq!(qpow_half(&m, 0), c(1.0, 0.0));
        assert_relative_eq!(qpow_half(&m, 2).re, 0.25, max_relative = 1e-15);
        assert_relative_eq!(qpow_half(&m, 1).re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(qpow_half(&m, -2).re, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn branch_coherence_over_exponent_sums() {
        let m = QModulus::new(c(0.2, 0.15)).unwrap();
        for j in -20i64..=20 {
            for k in [-20i64, -7, -1, 0, 1, 5, 20] {
                let lhs = qpow_half(&m, j) * qpow_half(&m, k);
                let rhs = qpow_half(&m, j + k);
                assert!(
                    (lhs - rhs).norm() <= 1e-12 * rhs.norm(),
                    "branch broke at j={j}, k={k}"
                );
            }
        }
    }

    #[test]
    fn poch_pair_ratio_reference_values() {
        // Reference values from 40-digit arithmetic.
        let m = qm(0.4);
        let v = poch_pair_ratio(c(0.6, 0.1), 3, &m, &pol()).unwrap();
        assert!((v - c(0.9723403135353911, 0.09687502454788856)).norm() < 1e-13);
        let v = poch_pair_ratio(c(0.6, 0.1), -3, &m, &pol()).unwrap();
        assert!((v - c(-1.0133123532883996, 0.4238220390170437)).norm() < 1e-13);
    }

    #[test]
    fn poch_pair_ratio_rejects_its_pole_ladder() {
        // den arg = q^0 * 1 = 1 sits exactly on the ladder.
        let err = poch_pair_ratio(c(1.0, 0.0), 0, &qm(0.5), &pol()).unwrap_err();
        assert!(err.is_rejection());
        // hp = -2 cancels the first two rungs: the same point is fine...
        let v = poch_pair_ratio(c(1.0, 0.0), -2, &qm(0.5), &pol());
        assert!(v.is_err()); // exactly on the rung: pinch band
        let v = poch_pair_ratio(c(1.01, 0.0), -2, &qm(0.5), &pol()).unwrap();
        assert!(v.is_finite());
        // ...but its first true pole (den rung r = 2, i.e. w near q^{-1})
        // is rejected.
        let err = poch_pair_ratio(c(2.002, 0.0), -2, &qm(0.5), &pol()).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { ladder_r: 2, .. }));
    }

    #[test]
    fn guard_flags_ladder_proximity() {
        let m = qm(0.5);
        assert!(guard_pole_ladder(c(1.004, 0.0), &m, 0.01).is_err()); // near q^0
        assert!(guard_pole_ladder(c(2.003, 0.0), &m, 0.01).is_err()); // near q^{-1}
        assert!(guard_pole_ladder(c(0.7, 0.0), &m, 0.01).is_ok());
        assert!(guard_pole_ladder(c(-1.0, 0.0), &m, 0.01).is_ok()); // modulus 1, phase far
        assert!(guard_pole_ladder(c(1.5, 0.0), &m, 0.01).is_ok());
    }

    #[test]
    fn reflection_trivial_and_reference_cases() {
        let m = qm(0.5);
        // n = 0: both sides are literally the same expression.
        let r = verify_reflection(c(0.7, 0.0), 0, &m, &pol(), 1e-12).unwrap();
        assert_eq!(r.lhs, r.rhs);

        // Reference sides from 40-digit arithmetic: w = 0.3, n = 1, q = 0.5.
        let r = verify_reflection(c(0.3, 0.0), 1, &m, &pol(), 1e-12).unwrap();
        assert!((r.lhs_c() - c(0.47276082751170325, 0.0)).norm() < 1e-13);
        assert!(r.rel_err < 1e-12, "rel_err = {}", r.rel_err);

        let r = verify_reflection(c(0.3, 0.1), -2, &qm(0.4), &pol(), 1e-12).unwrap();
        assert!(r.rel_err < 1e-12, "rel_err = {}", r.rel_err);
    }

    #[test]
    fn reflection_rejects_pole_adjacent_w() {
        let m = qm(0.5);
        // w near q^{-1}: a true pole of both sides (rhs denominator hits
        // (1;q)_inf there).
        let err = verify_reflection(c(2.003, 0.0), 1, &m, &pol(), 1e-12).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
        // w near q itself is a cancelled zero/pole rung of the left side:
        // fine outside the narrow pinch band, rejected inside it.
        let r = verify_reflection(c(0.505, 0.0), 1, &m, &pol(), 1e-12).unwrap();
        assert!(r.rel_err < 1e-12);
        let err = verify_reflection(c(0.50002, 0.0), 1, &m, &pol(), 1e-12).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn reflection_residual_sweep() {
        let m = qm(0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in -4i64..=4 {
            let mut done = 0;
            while done < 50 {
                let r = 0.1 + 0.8 * rng.gen::<f64>();
                let th = std::f64::consts::TAU * rng.gen::<f64>();
                let w = Complex64::from_polar(r, th);
                match verify_reflection(w, n, &m, &pol(), 1e-12) {
                    Ok(rep) => {
                        assert!(rep.rel_err < 1e-10, "n={n}, w={w}, rel={}", rep.rel_err);
                        done += 1;
                    }
                    Err(e) if e.is_rejection() => continue,
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
        }
    }

    #[test]
    fn tail_bound_honesty() {
        let m = qm(0.5);
        let loose = pol();
        let tight = TruncationPolicy {
            product_eps: loose.product_eps / 100.0,
            ..loose
        };
        for z in [c(0.5, 0.0), c(-0.9, 0.4), c(3.0, -2.0)] {
            let a = qpoch(z, &m, &loose).unwrap();
            let b = qpoch(z, &m, &tight).unwrap();
            assert!(
                (a - b).norm() <= loose.product_eps * b.norm().max(1e-300),
                "tail bound dishonest at z={z}"
            );
        }
    }

    proptest! {
        // Functional equation (z;q)_inf = (1-z)(zq;q)_inf.
        #[test]
        fn functional_equation(
            re in -1.5f64..1.5,
            im in -1.5f64..1.5,
            q in 0.05f64..0.9,
        ) {
            let m = qm(q);
            let p = pol();
            let z = c(re, im);
            let lhs = qpoch(z, &m, &p).unwrap();
            let rhs = (c(1.0, 0.0) - z) * qpoch(z * m.q(), &m, &p).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1e-300);
            prop_assert!((lhs - rhs).norm() <= 4.0 * p.product_eps * scale);
        }

        // Inverse pairing of SpectralPoint.
        #[test]
        fn spectral_point_inverse_is_involutive(
            re in -2.0f64..2.0,
            im in -2.0f64..2.0,
            n in -10i64..10,
        ) {
            prop_assume!(re.abs() > 1e-3 || im.abs() > 1e-3);
            let p = SpectralPoint::new(c(re, im), n).unwrap();
            let back = p.inverse().inverse();
            prop_assert!((back.fugacity() - p.fugacity()).norm() < 1e-12 * p.fugacity().norm());
            prop_assert_eq!(back.index(), p.index());
        }
    }
}
