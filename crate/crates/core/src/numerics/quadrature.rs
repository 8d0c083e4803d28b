//! Adaptive Gauss-Kronrod quadrature (21-point Kronrod / 10-point Gauss pair),
//! a vector-valued variant that shares nodes across many integrands, and
//! Gauss-Legendre panel rules with cumulative integration matrices.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = QuadratureConfig {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0 && self.rel_tol >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::invalid("at least one tolerance must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions must be positive"));
        }
        Ok(())
    }

    /// Same budget with tighter tolerances.
    pub fn with_tol(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    fn target(&self, value_norm: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value_norm)
    }
}

/// Endpoint behaviour declared by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularityHint {
    #[default]
    None,
    /// Integrand behaves like `(x - a)^(-1/2)` near `a`.
    InvSqrtAtA,
    /// Integrand behaves like `(b - x)^(-1/2)` near `b`.
    InvSqrtAtB,
}

/// Value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Scalar types the adaptive integrator can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(self) -> f64;
    fn finite(self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_381_236_710,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn check<T: QuadValue>(v: T, x: f64) -> Result<T> {
    if v.finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { at: x })
    }
}

fn gk21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Result<(T, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = check(f(c), c)?;
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = check(f(c - dx), c - dx)?;
        let f2 = check(f(c + dx), c + dx)?;
        let s = f1 + f2;
        kron = kron + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    Ok((kron, (kron - gauss).norm()))
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive GK21 over the union of consecutive `breaks` intervals.
pub fn integrate_pieces<T, F>(f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    cfg.validate()?;
    if breaks.len() < 2 {
        return Err(Error::invalid("need at least two break points"));
    }
    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("integration limits must be finite"));
        }
        if a == b {
            continue;
        }
        let (v, e) = gk21(&f, a, b)?;
        evals += 21;
        total = total + v;
        total_err += e;
        heap.push(Segment { a, b, value: v, error: e });
    }
    let mut splits = 0;
    while total_err > cfg.target(total.norm()) {
        if splits >= cfg.max_subdivisions {
            return Err(Error::NonConvergence {
                estimate: total.norm(),
                error_bound: total_err,
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at machine resolution
            heap.push(Segment { error: 0.0, ..seg });
            total_err -= seg.error;
            continue;
        }
        let (v1, e1) = gk21(&f, seg.a, mid)?;
        let (v2, e2) = gk21(&f, mid, seg.b)?;
        evals += 42;
        total = total - seg.value + v1 + v2;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        splits += 1;
        if splits % 64 == 0 {
            // resum to limit drift
            total = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(QuadEstimate {
        value: total,
        error: total_err,
        evaluations: evals,
    })
}

/// [`integrate_pieces`] for integrands that can fail; the first error raised by
/// `f` is returned in place of the quadrature result.
pub fn integrate_fallible<T, F>(f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T>,
{
    let first = std::cell::RefCell::new(None);
    let out = integrate_pieces(
        |x: f64| match f(x) {
            Ok(v) => v,
            Err(e) => {
                first.borrow_mut().get_or_insert(e);
                T::zero()
            }
        },
        breaks,
        cfg,
    );
    match first.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

/// `∫_a^b f(x) dx`, with an optional endpoint substitution `u² = x - a` (or `b - x`).
pub fn integrate_1d<F>(f: F, a: f64, b: f64, hint: SingularityHint, cfg: &QuadratureConfig) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    integrate_1d_detailed(f, a, b, hint, cfg).map(|e| e.value)
}

pub fn integrate_1d_detailed<T, F>(
    f: F,
    a: f64,
    b: f64,
    hint: SingularityHint,
    cfg: &QuadratureConfig,
) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if b < a {
        let mut est = integrate_1d_detailed(f, b, a, hint_flip(hint), cfg)?;
        est.value = est.value * -1.0;
        return Ok(est);
    }
    let len = b - a;
    match hint {
        SingularityHint::None => integrate_pieces(f, &[a, b], cfg),
        SingularityHint::InvSqrtAtA => {
            integrate_pieces(|u: f64| f(a + u * u) * (2.0 * u), &[0.0, len.sqrt()], cfg)
        }
        SingularityHint::InvSqrtAtB => {
            integrate_pieces(|u: f64| f(b - u * u) * (2.0 * u), &[0.0, len.sqrt()], cfg)
        }
    }
}

fn hint_flip(h: SingularityHint) -> SingularityHint {
    match h {
        SingularityHint::None => SingularityHint::None,
        SingularityHint::InvSqrtAtA => SingularityHint::InvSqrtAtB,
        SingularityHint::InvSqrtAtB => SingularityHint::InvSqrtAtA,
    }
}

/// Real integrand over `[a, b]` split into `pieces` equal initial intervals.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, cfg: &QuadratureConfig) -> Result<f64> {
    integrate_pieces(f, &uniform_breaks(a, b, pieces), cfg).map(|e| e.value)
}

/// Complex integrand over `[a, b]` split into `pieces` equal initial intervals.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    pieces: usize,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    integrate_pieces(f, &uniform_breaks(a, b, pieces), cfg).map(|e| e.value)
}

pub fn uniform_breaks(a: f64, b: f64, pieces: usize) -> Vec<f64> {
    let pieces = pieces.max(1);
    (0..=pieces)
        .map(|i| {
            if i == pieces {
                b
            } else {
                a + (b - a) * i as f64 / pieces as f64
            }
        })
        .collect()
}

/// `∫_a^∞ f` (or `∫_{-∞}^a f` when `upward` is false) through `x = a ± u/(1-u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, upward: bool, cfg: &QuadratureConfig) -> Result<f64> {
    let sign = if upward { 1.0 } else { -1.0 };
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u;
        let x = a + sign * u / d;
        let v = f(x) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_pieces(g, &uniform_breaks(0.0, 1.0, 8), cfg).map(|e| e.value)
}

/// Vector-valued adaptive GK21: `out[k] = ∫ f_k(x) dx` where `f(x, buf)` fills all
/// components at once. Error control uses the max norm over components.
pub fn integrate_vec<F>(n: usize, f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Vec<Complex64>>
where
    F: Fn(f64, &mut [Complex64]),
{
    cfg.validate()?;
    if breaks.len() < 2 {
        return Err(Error::invalid("need at least two break points"));
    }
    struct VSeg {
        a: f64,
        b: f64,
        value: Vec<Complex64>,
        error: f64,
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut buf = vec![zero; n];
    let eval = |a: f64, b: f64, buf: &mut [Complex64]| -> Result<(Vec<Complex64>, f64)> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut kron = vec![zero; n];
        let mut gauss = vec![zero; n];
        f(c, buf);
        for k in 0..n {
            kron[k] = buf[k] * WGK[10];
        }
        for j in 0..10 {
            let dx = h * XGK[j];
            for &x in &[c - dx, c + dx] {
                f(x, buf);
                for k in 0..n {
                    kron[k] += buf[k] * WGK[j];
                    if j % 2 == 1 {
                        gauss[k] += buf[k] * WG[j / 2];
                    }
                }
            }
        }
        let mut err = 0.0f64;
        for k in 0..n {
            kron[k] *= h;
            gauss[k] *= h;
            if !(kron[k].re.is_finite() && kron[k].im.is_finite()) {
                return Err(Error::NonFinite { at: c });
            }
            err = err.max((kron[k] - gauss[k]).norm());
        }
        Ok((kron, err))
    };
    let mut segs: Vec<VSeg> = Vec::new();
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (v, e) = eval(w[0], w[1], &mut buf)?;
        segs.push(VSeg { a: w[0], b: w[1], value: v, error: e });
    }
    let sum = |segs: &[VSeg]| {
        let mut tot = vec![zero; n];
        for s in segs {
            for (t, v) in tot.iter_mut().zip(&s.value) {
                *t += v;
            }
        }
        tot
    };
    let mut splits = 0;
    loop {
        let total = sum(&segs);
        let scale = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let total_err: f64 = segs.iter().map(|s| s.error).sum();
        if total_err <= cfg.target(scale) {
            return Ok(total);
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::NonConvergence {
                estimate: scale,
                error_bound: total_err,
            });
        }
        // split the worst few segments per pass
        let mut order: Vec<usize> = (0..segs.len()).collect();
        order.sort_by(|&i, &j| segs[j].error.total_cmp(&segs[i].error));
        let batch = (segs.len() / 8).clamp(1, 16);
        let mut replaced = Vec::new();
        for &i in order.iter().take(batch) {
            let s = &segs[i];
            let mid = 0.5 * (s.a + s.b);
            if mid <= s.a || mid >= s.b || s.error == 0.0 {
                continue;
            }
            let (v1, e1) = eval(s.a, mid, &mut buf)?;
            let (v2, e2) = eval(mid, s.b, &mut buf)?;
            replaced.push((i, VSeg { a: s.a, b: mid, value: v1, error: e1 }, VSeg { a: mid, b: s.b, value: v2, error: e2 }));
            splits += 1;
        }
        if replaced.is_empty() {
            return Ok(total);
        }
        for (i, s1, s2) in replaced {
            segs[i] = s1;
            segs.push(s2);
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre panel rule with a cumulative integration matrix:
/// `∫_{-1}^{x_i} p(s) ds = Σ_j cumulative[i][j] p(x_j)` for polynomials of degree < n.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let lagrange = |j: usize, s: f64| -> f64 {
            let mut v = 1.0;
            for (m, &xm) in x.iter().enumerate() {
                if m != j {
                    v *= (s - xm) / (x[j] - xm);
                }
            }
            v
        };
        let mut cumulative = vec![vec![0.0; n]; n];
        for i in 0..n {
            let half = 0.5 * (x[i] + 1.0);
            let mid = 0.5 * (x[i] - 1.0);
            for (j, row) in cumulative[i].iter_mut().enumerate() {
                *row = (0..n).map(|k| w[k] * lagrange(j, mid + half * x[k])).sum::<f64>() * half;
            }
        }
        PanelRule {
            nodes: x,
            weights: w,
            cumulative,
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}
