//! Discrete Fourier transforms on uniform grids (backed by `rustfft`) and a
//! sampled approximation of the continuous transform `∫ f(x) e^{-ikx} dx`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::grid::GridSpec;

/// Unnormalized forward DFT: `X_m = Σ_j x_j e^{-2πi jm/n}`.
pub fn dft_forward(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// Inverse DFT including the `1/n` factor, so `dft_inverse(dft_forward(x)) = x`.
pub fn dft_inverse(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    let n = data.len();
    FftPlanner::new().plan_fft_inverse(n).process(data);
    let s = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= s;
    }
}

/// Samples of `F(k) = ∫ f(x) e^{-ikx} dx` on the centered wavenumber grid
/// `k_m = 2π (m - n/2) / (n dx)`, from samples of `f` on the uniform grid `x`
/// (rectangle rule, exact up to aliasing when `f` is band-limited and decays
/// inside the grid). `x.n` must be even.
pub fn continuous_ft(samples: &[Complex64], x: &GridSpec) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let n = x.n;
    if samples.len() != n {
        return Err(Error::invalid(format!("expected {n} samples, got {}", samples.len())));
    }
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid {
            field: "x".into(),
            reason: "transform grid needs an even number of points".into(),
        });
    }
    let dx = x.spacing();
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(j, &v)| if j % 2 == 0 { v } else { -v })
        .collect();
    dft_forward(&mut buf);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let ks: Vec<f64> = (0..n).map(|m| (m as f64 - (n / 2) as f64) * dk).collect();
    let out = buf
        .into_iter()
        .zip(ks.iter())
        .map(|(v, &k)| v * Complex64::from_polar(dx, -k * x.min))
        .collect();
    Ok((ks, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_transform() {
        let g = GridSpec::new(-20.0, 20.0 - 40.0 / 512.0, 512).unwrap();
        let xs = g.points();
        let f: Vec<Complex64> = xs.iter().map(|&x| Complex64::new((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.0)).collect();
        let (ks, ft) = continuous_ft(&f, &g).unwrap();
        for (k, v) in ks.iter().zip(ft.iter()) {
            let exact = Complex64::from_polar((2.0 * std::f64::consts::PI).sqrt() * (-k * k / 2.0).exp(), -k);
            assert!((v - exact).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn odd_grid_rejected() {
        let g = GridSpec::new(0.0, 1.0, 5).unwrap();
        assert!(continuous_ft(&[Complex64::new(0.0, 0.0); 5], &g).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn forward_inverse_round_trip(seed in 0u64..u64::MAX, n in 1usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let orig: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut v = orig.clone();
            dft_forward(&mut v);
            dft_inverse(&mut v);
            let scale = orig.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (a, b) in v.iter().zip(orig.iter()) {
                proptest::prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }
}
