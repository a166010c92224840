//! Scalar special functions and quadrature shared by the rest of the crate.
//!
//! Everything here is plain `f64`. Binomial weights are assembled in log
//! space with a single exponentiation per term so that tails stay accurate
//! out to society sizes in the low hundreds, and sums of many terms go
//! through [`CompensatedSum`].

use thiserror::Error;

/// Errors from the special-function and quadrature routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    /// An argument left the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iteration budget ran out before the requested accuracy was met.
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
}

/// Accuracy knobs shared by the iterative routines.
///
/// `abs_tol` and `rel_tol` must be positive; an iteration stops once the
/// error estimate drops below `max(abs_tol, rel_tol * |value|)`. `max_iter`
/// bounds refinement steps (continued-fraction terms, interval splits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs_tol: 1e-12, rel_tol: 1e-10, max_iter: 200 }
    }
}

/// Neumaier-compensated running sum.
///
/// Adding terms of wildly different magnitude in any order keeps the
/// accumulated rounding error at one ulp of the true sum instead of
/// growing with the term count.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Density of the standard normal distribution.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Distribution function of the standard normal.
///
/// Evaluated through `erfc` so both tails keep full relative accuracy;
/// relative error stays below 1e-13 for |x| <= 8.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on (0, 1).
///
/// Wichura's PPND16 rational approximations, good to about 3 ulp across
/// the whole open interval.
pub fn std_normal_quantile(u: f64) -> Result<f64, NumericsError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(NumericsError::Domain(format!(
            "quantile argument must lie in (0, 1), got {u}"
        )));
    }
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * ppnd16_central(r));
    }
    let r = if q < 0.0 { u } else { 1.0 - u };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        ppnd16_middle(r - 1.6)
    } else {
        ppnd16_tail(r - 5.0)
    };
    Ok(if q < 0.0 { -v } else { v })
}

// Coefficients low to high; evaluated by Horner's rule.
fn horner(r: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

fn ppnd16_central(r: f64) -> f64 {
    horner(
        r,
        &[
            3.3871328727963666080e0,
            1.3314166789178437745e2,
            1.9715909503065514427e3,
            1.3731693765509461125e4,
            4.5921953931549871457e4,
            6.7265770927008700853e4,
            3.3430575583588128105e4,
            2.5090809287301226727e3,
        ],
    ) / horner(
        r,
        &[
            1.0,
            4.2313330701600911252e1,
            6.8718700749205790830e2,
            5.3941960214247511077e3,
            2.1213794301586595867e4,
            3.9307895800092710610e4,
            2.8729085735721942674e4,
            5.2264952788528545610e3,
        ],
    )
}

fn ppnd16_middle(r: f64) -> f64 {
    horner(
        r,
        &[
            1.42343711074968357734e0,
            4.63033784615654529590e0,
            5.76949722146069140550e0,
            3.64784832476320460504e0,
            1.27045825245236838258e0,
            2.41780725177450611770e-1,
            2.27238449892691845833e-2,
            7.74545014278341407640e-4,
        ],
    ) / horner(
        r,
        &[
            1.0,
            2.05319162663775882187e0,
            1.67638483018380384940e0,
            6.89767334985100004550e-1,
            1.48103976427480074590e-1,
            1.51986665636164571966e-2,
            5.47593808499534494600e-4,
            1.05075007164441684324e-9,
        ],
    )
}

fn ppnd16_tail(r: f64) -> f64 {
    horner(
        r,
        &[
            6.65790464350110377720e0,
            5.46378491116411436990e0,
            1.78482653991729133580e0,
            2.96560571828504891230e-1,
            2.65321895265761230930e-2,
            1.24266094738807843860e-3,
            2.71155556874348757815e-5,
            2.01033439929228813265e-7,
        ],
    ) / horner(
        r,
        &[
            1.0,
            5.99832206555887937690e-1,
            1.36929880922735805310e-1,
            1.48753612908506148525e-2,
            7.86869131145613259100e-4,
            1.84631831751005468180e-5,
            1.42151175831644588870e-7,
            2.04426310338993978564e-15,
        ],
    )
}

/// Natural log of the binomial coefficient C(n, k).
///
/// Returns negative infinity for k outside 0..=n, which makes the
/// corresponding probability weight an exact zero after exponentiation.
///
/// # Examples
///
/// ```
/// let v = vise::numerics::log_binomial_coefficient(5, 2);
/// assert!((v - 10f64.ln()).abs() < 1e-12);
/// ```
pub fn log_binomial_coefficient(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// Natural log of the complete Beta function B(a, b).
pub fn log_beta_function(a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::Domain(format!(
            "log_beta_function requires positive finite arguments, got a={a}, b={b}"
        )));
    }
    Ok(libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b))
}

/// Regularized incomplete Beta function I_x(a, b).
///
/// Continued-fraction evaluation (modified Lentz) with the usual symmetry
/// switch at x > (a+1)/(a+b+2) so the fraction always converges quickly.
/// Relative accuracy is close to machine precision for a, b up to 1e4.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::Domain(format!(
            "shape parameters must be positive and finite, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(NumericsError::Domain(format!(
            "x must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let xc = 1.0 - x;
    let swap = x > (a + 1.0) / (a + b + 2.0);
    // The complement travels with x so the swapped call never recomputes it.
    let (xx, xxc, aa, bb) = if swap { (xc, x, b, a) } else { (x, xc, a, b) };
    let front = beta_front(xx, xxc, aa, bb) / aa;
    let cf = beta_continued_fraction(xx, aa, bb)?;
    Ok(if swap { 1.0 - front * cf } else { front * cf })
}

// x^a (1-x)^b / B(a, b).
//
// The naive route exp(a ln x + b ln(1-x) - lnB) loses digits once lgamma
// operates at magnitudes around 1e5: the final sum is small while the
// addends are huge, so the lgamma rounding error survives intact. Splitting
// by shape size keeps every intermediate comparable to the result:
// large shapes use Stirling-corrected groupings where each log term is
// centered (via fused multiply-add offsets) before being scaled.
fn beta_front(x: f64, xc: f64, a: f64, b: f64) -> f64 {
    const SHAPE_SPLIT: f64 = 15.0;
    let s = a + b;
    let ln_front = if a < SHAPE_SPLIT && b < SHAPE_SPLIT {
        let ln_b = libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(s);
        a * x.ln() + b * (-x).ln_1p() - ln_b
    } else if a >= SHAPE_SPLIT && b >= SHAPE_SPLIT {
        // r_s is the exact rounding residue of s = fl(a + b); dropping it
        // would bias the result by about s * eps.
        let r_s = (s - a) - b;
        let term_a = a * (x.mul_add(s, -a) / a).ln_1p();
        let term_b = b * (xc.mul_add(s, -b) / b).ln_1p();
        let scale = 0.5 * (a * b / (2.0 * std::f64::consts::PI * s)).ln();
        term_a + term_b + scale - r_s - stirling_correction(a) - stirling_correction(b)
            + stirling_correction(s)
    } else {
        // One small shape, one large. lnB is regrouped so lgamma only ever
        // sees the small argument; the large-argument difference collapses
        // to well-scaled logs.
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        let d = s - large;
        let ln_b = libm::lgamma(small) - (large - 0.5) * (d / large).ln_1p()
            - d * (s.ln() - 1.0)
            - stirling_correction(s)
            + stirling_correction(large);
        let term_a = if x <= 0.5 { a * x.ln() } else { a * (-xc).ln_1p() };
        let term_b = if xc <= 0.5 { b * xc.ln() } else { b * (-x).ln_1p() };
        term_a + term_b - ln_b
    };
    ln_front.exp()
}

// Stirling-series remainder: lgamma(z) = (z - 1/2) ln z - z + ln(2 pi)/2 + r(z).
// Five terms keep the truncation below 3e-16 for z >= 15.
fn stirling_correction(z: f64) -> f64 {
    let w = 1.0 / z;
    let w2 = w * w;
    w * (1.0 / 12.0
        + w2 * (-1.0 / 360.0 + w2 * (1.0 / 1260.0 + w2 * (-1.0 / 1680.0 + w2 * (1.0 / 1188.0)))))
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64, NumericsError> {
    // Lentz guards: a vanishing denominator is nudged to TINY instead of
    // dividing by zero.
    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-15;
    let max_iter = Tolerance::default().max_iter;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            return Ok(h);
        }
    }
    Err(NumericsError::NoConvergence(max_iter))
}

/// Upper binomial tail P{X > k} for X ~ Binomial(n, p).
///
/// For k in 0..n this is the regularized incomplete Beta I_p(k+1, n-k);
/// k < 0 gives 1 and k >= n gives 0 by convention, so the function is
/// total over every absolute acceptance threshold.
pub fn binomial_upper_tail(n: u64, p: f64, k: i64) -> Result<f64, NumericsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NumericsError::Domain(format!(
            "success probability must lie in [0, 1], got {p}"
        )));
    }
    if k < 0 {
        return Ok(1.0);
    }
    if k as u64 >= n {
        return Ok(0.0);
    }
    let k = k as u64;
    regularized_incomplete_beta(p, (k + 1) as f64, (n - k) as f64)
}

/// Globally adaptive Gauss-Kronrod integration of `f` over (lo, hi).
///
/// Either bound may be infinite; infinite ranges are folded onto finite
/// ones with the rational substitutions t/(1-t) and t/(1-t^2). The worst
/// segment is bisected until the summed error estimate meets `tol`, and
/// running out of `tol.max_iter` splits is reported as failure rather than
/// returning a value of unknown quality.
pub fn adaptive_quadrature<F>(f: F, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(NumericsError::Domain(format!(
            "integration bounds must satisfy lo < hi, got {lo} and {hi}"
        )));
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => gk_adaptive(&f, lo, hi, tol),
        (true, false) => gk_adaptive(
            &|t: f64| {
                let w = 1.0 - t;
                f(lo + t / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => gk_adaptive(
            &|t: f64| {
                let w = 1.0 - t;
                f(hi - t / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => gk_adaptive(
            &|t: f64| {
                let w = 1.0 - t * t;
                f(t / w) * (1.0 + t * t) / (w * w)
            },
            -1.0,
            1.0,
            tol,
        ),
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    integral: f64,
    error: f64,
}

fn gk_adaptive(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    let (integral, error) = gk15(f, lo, hi);
    let mut segments = vec![Segment { lo, hi, integral, error }];
    for _ in 0..tol.max_iter {
        let mut total = CompensatedSum::new();
        let mut err = 0.0;
        for s in &segments {
            total.add(s.integral);
            err += s.error;
        }
        let total = total.value();
        if err <= tol.abs_tol.max(tol.rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("segment list never empty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        let (i1, e1) = gk15(f, s.lo, mid);
        let (i2, e2) = gk15(f, mid, s.hi);
        segments.push(Segment { lo: s.lo, hi: mid, integral: i1, error: e1 });
        segments.push(Segment { lo: mid, hi: s.hi, integral: i2, error: e2 });
    }
    Err(NumericsError::NoConvergence(tol.max_iter))
}

// 15-point Kronrod extension of 7-point Gauss on [-1, 1]; nonzero
// abscissae come in symmetric pairs, odd indices are the Gauss points.
const XGK: [f64; 7] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let fc = f(center);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    for (j, &x) in XGK.iter().enumerate() {
        fv1[j] = f(center - h * x);
        fv2[j] = f(center + h * x);
        resk += WGK[j] * (fv1[j] + fv2[j]);
        if j % 2 == 1 {
            resg += WG[j / 2] * (fv1[j] + fv2[j]);
        }
    }
    // resasc gauges how far the integrand strays from its mean on the
    // segment; it scales the error estimate the QUADPACK way.
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let resasc = resasc * h.abs();
    let raw = ((resk - resg) * h).abs();
    let error = if resasc != 0.0 && raw != 0.0 {
        resasc * (200.0 * raw / resasc).powf(1.5).min(1.0)
    } else {
        raw
    };
    (resk * h, error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got:e}, want {want:e}, diff {:e}",
            (got - want).abs()
        );
    }

    fn assert_rel(got: f64, want: f64, tol: f64) {
        let rel = ((got - want) / want).abs();
        assert!(rel <= tol, "got {got:e}, want {want:e}, rel {rel:e}");
    }

    #[test]
    fn normal_pdf_values() {
        assert_close(std_normal_pdf(0.0), 0.3989422804014327, 1e-16);
        assert_close(std_normal_pdf(1.0), 0.24197072451914335, 1e-16);
        assert_eq!(std_normal_pdf(3.0), std_normal_pdf(-3.0));
    }

    #[test]
    fn normal_cdf_reference_values() {
        // (x, Phi(x)) evaluated at 40-digit precision and rounded to f64.
        let table = [
            (-8.0, 6.2209605742717841e-16),
            (-4.0, 3.1671241833119921e-5),
            (-2.0, 0.022750131948179207),
            (-1.0, 0.15865525393145705),
            (-0.5, 0.30853753872598690),
            (0.5, 0.69146246127401310),
            (1.0, 0.84134474606854295),
            (2.0, 0.97724986805182079),
            (4.0, 0.99996832875816688),
            (8.0, 0.99999999999999938),
        ];
        for (x, want) in table {
            assert_rel(std_normal_cdf(x), want, 1e-13);
        }
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn normal_cdf_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        let mut x = -8.0;
        while x <= 8.0 {
            let v = std_normal_cdf(x);
            assert!(v >= prev);
            assert_close(v + std_normal_cdf(-x), 1.0, 1e-15);
            prev = v;
            x += 0.03125;
        }
    }

    #[test]
    fn normal_cdf_derivative_matches_pdf() {
        let h = 1e-5;
        let mut x = -5.0;
        while x <= 5.0 {
            let fd = (std_normal_cdf(x + h) - std_normal_cdf(x - h)) / (2.0 * h);
            assert_close(fd, std_normal_pdf(x), 1e-8);
            x += 0.25;
        }
    }

    #[test]
    fn normal_cdf_agrees_with_quadrature_of_pdf() {
        let tol = Tolerance::default();
        let q = adaptive_quadrature(std_normal_pdf, f64::NEG_INFINITY, 1.0, &tol).unwrap();
        assert_close(q, std_normal_cdf(1.0), 1e-12);
    }

    #[test]
    fn normal_quantile_round_trip() {
        assert_close(std_normal_quantile(0.5).unwrap(), 0.0, 1e-15);
        assert_rel(std_normal_quantile(0.975).unwrap(), 1.9599639845400542, 1e-14);
        assert_rel(std_normal_quantile(1e-10).unwrap(), -6.3613409024040562, 1e-14);
        for i in 1..2000 {
            let u = i as f64 / 2000.0;
            let x = std_normal_quantile(u).unwrap();
            assert_close(std_normal_cdf(x), u, 1e-14);
        }
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn log_binomial_against_exact_integers() {
        assert_eq!(log_binomial_coefficient(5, 0), 0.0);
        assert_rel(log_binomial_coefficient(5, 2), 10f64.ln(), 1e-13);
        assert_eq!(log_binomial_coefficient(5, 6), f64::NEG_INFINITY);
        assert_eq!(log_binomial_coefficient(5, -1), f64::NEG_INFINITY);
        // Pascal row as exact u128 arithmetic.
        let n = 60u64;
        let mut c: u128 = 1;
        for k in 0..=n {
            if k > 0 {
                c = c * (n - k + 1) as u128 / k as u128;
            }
            let got = log_binomial_coefficient(n, k as i64);
            if c == 1 {
                assert_eq!(got, 0.0);
            } else {
                assert_rel(got, (c as f64).ln(), 1e-12);
            }
        }
    }

    #[test]
    fn log_beta_values() {
        assert_close(log_beta_function(1.0, 1.0).unwrap(), 0.0, 1e-15);
        // B(3, 4) = 2! 3! / 6! = 1/60
        assert_rel(log_beta_function(3.0, 4.0).unwrap(), -4.0943445622221007, 1e-14);
        assert_rel(log_beta_function(2.5, 3.5).unwrap(), -3.3018352699620526, 1e-14);
        assert!(log_beta_function(0.0, 1.0).is_err());
        assert!(log_beta_function(1.0, -2.0).is_err());
    }

    #[test]
    fn log_beta_agrees_with_quadrature() {
        let tol = Tolerance::default();
        for (a, b) in [(2.5, 3.5), (1.0, 7.0), (4.0, 4.0)] {
            let q = adaptive_quadrature(
                |t: f64| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0),
                0.0,
                1.0,
                &tol,
            )
            .unwrap();
            assert_rel(log_beta_function(a, b).unwrap().exp(), q, 1e-9);
        }
    }

    #[test]
    fn incomplete_beta_reference_values() {
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert_rel(regularized_incomplete_beta(0.3, 4.0, 7.0).unwrap(), 0.3503892816, 1e-12);
        assert_rel(
            regularized_incomplete_beta(0.7, 0.5, 0.5).unwrap(),
            0.63098988043445462,
            1e-12,
        );
        // I_x(1, 1) = x.
        assert_rel(regularized_incomplete_beta(0.37, 1.0, 1.0).unwrap(), 0.37, 1e-13);
    }

    #[test]
    fn incomplete_beta_large_parameters() {
        // 40-digit references; the continued fraction must stay accurate
        // at shape parameters up to 1e4.
        assert_rel(
            regularized_incomplete_beta(0.501, 1e4, 1e4).unwrap(),
            0.61135004785746235,
            1e-12,
        );
        assert_rel(
            regularized_incomplete_beta(0.48, 1e4, 1e4).unwrap(),
            7.6107391134267448e-9,
            1e-12,
        );
        assert_rel(
            regularized_incomplete_beta(0.98, 5000.0, 100.0).unwrap(),
            0.40788983603580055,
            1e-12,
        );
        assert_close(regularized_incomplete_beta(0.5, 1e4, 1e4).unwrap(), 0.5, 1e-12);
    }

    #[test]
    fn incomplete_beta_symmetry() {
        let mut x = 0.02;
        while x < 1.0 {
            for (a, b) in [(0.7, 2.0), (3.0, 5.0), (12.0, 4.5), (40.0, 40.0)] {
                let lhs = regularized_incomplete_beta(x, a, b).unwrap();
                let rhs = regularized_incomplete_beta(1.0 - x, b, a).unwrap();
                assert_close(lhs + rhs, 1.0, 1e-13);
            }
            x += 0.02;
        }
    }

    #[test]
    fn incomplete_beta_domain_errors() {
        assert!(regularized_incomplete_beta(-0.1, 1.0, 1.0).is_err());
        assert!(regularized_incomplete_beta(1.1, 1.0, 1.0).is_err());
        assert!(regularized_incomplete_beta(0.5, 0.0, 1.0).is_err());
        assert!(regularized_incomplete_beta(0.5, 1.0, f64::INFINITY).is_err());
        assert!(regularized_incomplete_beta(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn binomial_tail_small_cases() {
        // P{X > 1} for X ~ Bin(3, 1/2): 4 of 8 outcomes.
        assert_close(binomial_upper_tail(3, 0.5, 1).unwrap(), 0.5, 1e-14);
        assert_eq!(binomial_upper_tail(3, 0.5, -1).unwrap(), 1.0);
        assert_eq!(binomial_upper_tail(3, 0.5, 3).unwrap(), 0.0);
        assert_eq!(binomial_upper_tail(3, 0.0, 1).unwrap(), 0.0);
        assert_eq!(binomial_upper_tail(3, 1.0, 1).unwrap(), 1.0);
        assert_rel(binomial_upper_tail(10, 0.3, 3).unwrap(), 0.3503892816, 1e-12);
        assert_rel(binomial_upper_tail(40, 0.45, 17).unwrap(), 0.56093803181099149, 1e-12);
        assert!(binomial_upper_tail(10, 1.5, 3).is_err());
    }

    #[test]
    fn quadrature_polynomials_exact() {
        let tol = Tolerance::default();
        let v = adaptive_quadrature(|x| x * x, 0.0, 1.0, &tol).unwrap();
        assert_close(v, 1.0 / 3.0, 1e-14);
        let v = adaptive_quadrature(|x| (2.0 * x).sin(), 0.0, std::f64::consts::PI, &tol).unwrap();
        assert_close(v, 0.0, 1e-12);
    }

    #[test]
    fn quadrature_infinite_ranges() {
        let tol = Tolerance::default();
        let v = adaptive_quadrature(std_normal_pdf, f64::NEG_INFINITY, f64::INFINITY, &tol).unwrap();
        assert_close(v, 1.0, 1e-12);
        let v = adaptive_quadrature(|x: f64| (-x).exp(), 0.0, f64::INFINITY, &tol).unwrap();
        assert_close(v, 1.0, 1e-12);
        let v = adaptive_quadrature(|x| x * std_normal_pdf(x), 0.0, f64::INFINITY, &tol).unwrap();
        assert_rel(v, 0.3989422804014327, 1e-11);
        let v = adaptive_quadrature(|x: f64| x.exp(), f64::NEG_INFINITY, 0.0, &tol).unwrap();
        assert_close(v, 1.0, 1e-12);
    }

    #[test]
    fn quadrature_reports_failure_instead_of_guessing() {
        let tight = Tolerance { abs_tol: 1e-14, rel_tol: 1e-14, max_iter: 4 };
        let r = adaptive_quadrature(|x: f64| x.abs().powf(-0.9), 1e-300, 1.0, &tight);
        assert_eq!(r, Err(NumericsError::NoConvergence(4)));
        assert!(adaptive_quadrature(|x| x, 1.0, 0.0, &Tolerance::default()).is_err());
        assert!(adaptive_quadrature(|x| x, f64::NAN, 1.0, &Tolerance::default()).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut c = CompensatedSum::new();
        let mut naive = 1.0f64;
        c.add(1.0);
        for _ in 0..20 {
            c.add(1e-16);
            naive += 1e-16;
        }
        assert_eq!(naive, 1.0); // each naive add rounds away
        assert_close(c.value(), 1.0 + 2e-15, 1e-18);
    }
}
