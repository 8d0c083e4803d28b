//! Error function of real and complex argument, and the stable
//! `√π ξ e^{ξ²} erf(ξ)` product that appears in the Gaussian arrival-time closed forms.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;
use std::f64::consts::PI;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Real error function, accurate to a few ulps.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs();
    let v = if a < 2.5 { erf_series(a) } else { 1.0 - erfc_cf(a) };
    v.copysign(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 2.5 {
        erfc_cf(x)
    } else if x > 0.5 {
        1.0 - erf_series(x)
    } else if x >= -2.5 {
        1.0 - erf(x)
    } else {
        2.0 - erfc_cf(-x)
    }
}

/// Scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x >= 2.5 {
        erfc_cf_scaled(x)
    } else {
        (x * x).exp() * erfc(x)
    }
}

// erf(x) = 2/√π e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!, all terms positive
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

fn erfc_cf(x: f64) -> f64 {
    (-x * x).exp() * erfc_cf_scaled(x)
}

// e^{x²} erfc(x) = (1/√π) · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz
fn erfc_cf_scaled(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (SQRT_PI * f)
}

/// Complex error function, series form valid on the strip `|Im z| ≤ 10`
/// (relative accuracy about 1e-13 away from the zeros of erf).
pub fn erf_complex(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -erf_complex(-z);
    }
    let (x, y) = (z.re, z.im);
    if y == 0.0 {
        return Complex64::new(erf(x), 0.0);
    }
    let ex2 = (-x * x).exp();
    let two_xy = 2.0 * x * y;
    let (s2, c2) = two_xy.sin_cos();
    // e^{-x²}/(2πx) [(1 - cos 2xy) + i sin 2xy], written to stay finite at x = 0
    let sin_xy = (x * y).sin();
    let re1 = if x == 0.0 { 0.0 } else { 2.0 * sin_xy * sin_xy / x };
    let im1 = if x == 0.0 { 2.0 * y } else { s2 / x };
    let mut re = erf(x) + ex2 / (2.0 * PI) * re1;
    let mut im = ex2 / (2.0 * PI) * im1;
    let mut sre = 0.0f64;
    let mut sim = 0.0f64;
    let n_peak = 2.0 * y.abs();
    let mut n = 1.0f64;
    loop {
        let damp = (-n * n / 4.0).exp();
        let (ch, sh) = ((n * y).cosh(), (n * y).sinh());
        let denom = n * n + 4.0 * x * x;
        let f = 2.0 * x - 2.0 * x * ch * c2 + n * sh * s2;
        let g = 2.0 * x * ch * s2 + n * sh * c2;
        let tr = damp * f / denom;
        let ti = damp * g / denom;
        sre += tr;
        sim += ti;
        if n > n_peak && tr.abs() <= 1e-17 * sre.abs().max(1e-300) && ti.abs() <= 1e-17 * sim.abs().max(1e-300) {
            break;
        }
        if n > n_peak + 60.0 {
            break;
        }
        n += 1.0;
    }
    re += 2.0 / PI * ex2 * sre;
    im += 2.0 / PI * ex2 * sim;
    Complex64::new(re, im)
}

/// `√π ξ e^{ξ²} erf(ξ)`. Even and non-negative; overflows to `+∞` once
/// `ξ² > ~709`, so callers that need larger arguments use
/// [`ln_one_plus_scaled_erf_product`].
pub fn scaled_erf_product(xi: f64) -> f64 {
    let a = xi.abs();
    SQRT_PI * a * (a * a).exp() * erf(a)
}

/// `ln(1 + √π ξ e^{ξ²} erf(ξ))`, finite for every finite `ξ`.
pub fn ln_one_plus_scaled_erf_product(xi: f64) -> f64 {
    let a = xi.abs();
    if a < 5.0 {
        scaled_erf_product(a).ln_1p()
    } else {
        // ξ² + ln(e^{-ξ²} + √π ξ erf ξ)
        a * a + ((-a * a).exp() + SQRT_PI * a * erf(a)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // reference values computed with 40-digit arithmetic
    const REAL_REF: [(f64, f64, f64); 9] = [
        (0.1, 0.1124629160182848984, 0.8875370839817151016),
        (0.5, 0.52049987781304653768, 0.47950012218695346232),
        (1.0, 0.84270079294971486934, 0.15729920705028513066),
        (1.9, 0.99279042923525746724, 0.0072095707647425327628),
        (2.0, 0.99532226501895273416, 0.0046777349810472658379),
        (2.5, 0.99959304798255504106, 0.00040695201744495893956),
        (3.0, 0.99997790950300141456, 0.000022090496998585441373),
        (4.5, 0.99999999980338395585, 1.9661604415428874763e-10),
        (6.0, 0.99999999999999997848, 2.1519736712498913117e-17),
    ];

    #[test]
    fn real_erf_and_erfc_against_reference() {
        for &(x, e, ec) in &REAL_REF {
            assert!(rel(erf(x), e) < 2e-15, "erf({x})");
            assert!(rel(erf(-x), -e) < 2e-15);
            assert!(rel(erfc(x), ec) < 1e-13, "erfc({x}) = {} vs {ec}", erfc(x));
            assert!(rel(erfc(-x), 2.0 - ec) < 1e-15);
        }
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(40.0), 1.0);
        assert!((erfcx(30.0) - 0.018_795_888_861_416_751_5).abs() < 1e-16);
    }

    #[test]
    fn complex_erf_against_reference() {
        let cases = [
            ((0.5, 0.5), (0.64261291485482052832, 0.45788139443519221584)),
            ((1.0, 2.0), (-0.53664356577856503399, -5.0491437034470346695)),
            ((-0.3, 4.0), (-865230.15857056818363, -804043.16978946645534)),
            ((2.5, -1.0), (0.99938268513779984535, 0.00084694454339379261683)),
            ((0.1, 9.5), (8.7989721837897747657e+37, -2.9018090981832066488e+37)),
            ((4.0, 0.2), (1.0000000012242361476, 1.59826088378811231e-8)),
            ((0.0, 3.0), (0.0, 1629.9946226015656511)),
            ((1e-3, 1e-3), (0.0011283799193478393092, 0.0011283784148422831823)),
            ((3.0, 8.0), (-2.5054570509939420053e+22, -4.4507408319910922852e+22)),
        ];
        for ((x, y), (re, im)) in cases {
            let v = erf_complex(Complex64::new(x, y));
            let exact = Complex64::new(re, im);
            assert!((v - exact).norm() <= 1e-12 * exact.norm(), "erf({x}+{y}i) = {v} vs {exact}");
        }
    }

    #[test]
    fn complex_erf_reduces_to_real_axis() {
        for x in [-3.0, -0.7, 0.2, 1.3, 5.0] {
            let v = erf_complex(Complex64::new(x, 1e-300));
            assert!((v.re - erf(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_product_values() {
        assert_eq!(scaled_erf_product(0.0), 0.0);
        assert!(rel(scaled_erf_product(1.0), 4.0601569385574099511) < 1e-14);
        // direct formula with the reference erf
        assert!(rel(scaled_erf_product(1.0), SQRT_PI * 1f64.exp() * 0.84270079294971486934) < 1e-15);
        assert!(rel(scaled_erf_product(5.0), 638126805572.08705112) < 1e-13);
        assert!(scaled_erf_product(30.0).is_infinite());
    }

    #[test]
    fn log_form_is_finite_to_700() {
        let cases = [
            (1.0, 1.6213974983435825524),
            (5.0, 27.181802855358830089),
            (10.0, 102.87495003591874577),
            (30.0, 903.97356232458685546),
            (300.0, 90006.276147417580901),
            (700.0, 490007.1234452779681),
        ];
        for (x, v) in cases {
            assert!(rel(ln_one_plus_scaled_erf_product(x), v) < 1e-14, "ξ={x}");
            assert!(rel(ln_one_plus_scaled_erf_product(-x), v) < 1e-14);
        }
        assert!(ln_one_plus_scaled_erf_product(1e-9).abs() < 1e-17);
    }

    proptest::proptest! {
        #[test]
        fn scaled_product_matches_direct_formula(xi in -5.0f64..5.0) {
            let direct = SQRT_PI * xi * (xi * xi).exp() * erf(xi);
            let v = scaled_erf_product(xi);
            proptest::prop_assert!(v >= 0.0);
            proptest::prop_assert!((v - direct).abs() <= 1e-10 * direct.abs().max(1e-300));
        }

        #[test]
        fn scaled_product_is_even_and_grows_with_magnitude(a in 0.0f64..25.0, d in 1e-6f64..1.0) {
            proptest::prop_assert_eq!(scaled_erf_product(a), scaled_erf_product(-a));
            proptest::prop_assert!(scaled_erf_product(a + d) > scaled_erf_product(a));
            proptest::prop_assert!(1.0 + scaled_erf_product(-a) >= 0.0);
        }

        #[test]
        fn log_form_matches_log_of_direct(xi in -20.0f64..20.0) {
            let direct = scaled_erf_product(xi).ln_1p();
            proptest::prop_assert!((ln_one_plus_scaled_erf_product(xi) - direct).abs() <= 1e-13 * direct.max(1e-300));
        }
    }
}
