//! Cohen-class kernels `χ(θ,τ)` with declared structural flags.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::GAUSSIAN_CUTOFF;
use crate::phase_space::ApparatusWindow1D;

/// Structural properties of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KernelFlags {
    /// `χ(0,0) = 1`
    pub preserves_norm: bool,
    /// `χ(θ,0) = 1`
    pub marginal_x: bool,
    /// `χ(0,τ) = 1`
    pub marginal_p: bool,
    pub tau_independent: bool,
    /// `χ` depends on `θτ` only
    pub scale_invariant: bool,
}

pub type KernelFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    /// `χ ≡ 1`
    Wigner,
    /// Kernel of the windowed transform: `∫dy φ*(y-ħτ/2) φ(y+ħτ/2) e^{iθy}`.
    Spectrogram(ApparatusWindow1D),
    /// `χ = e^{i s ħθτ/2}` with `s = ±1`.
    Ordering(i8),
    /// `χ = cos(ħθτ/2)`.
    Cosine,
    /// User kernel. `k_transform(θ,k) = ∫dτ χ(θ,τ) e^{iτk}` enables the
    /// momentum-space routes; `smoothing` bounds how far (in x and p) the
    /// kernel spreads a distribution.
    Custom {
        name: String,
        chi: KernelFn,
        k_transform: Option<KernelFn>,
        smoothing: (f64, f64),
    },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl KernelKind {
    pub fn id(&self) -> String {
        match self {
            KernelKind::Wigner => "wigner".into(),
            KernelKind::Spectrogram(w) => format!("spectrogram(sigma={},center={})", w.sigma, w.center),
            KernelKind::Ordering(s) => format!("ordering({})", if *s > 0 { "+1" } else { "-1" }),
            KernelKind::Cosine => "cosine".into(),
            KernelKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }
}

/// A kernel together with verified flags and the `ħ` it was built for.
#[derive(Clone, Debug)]
pub struct CohenKernel {
    kind: KernelKind,
    flags: KernelFlags,
    hbar: f64,
}

const SPOT_CHECKS: usize = 100;
const SPOT_TOL: f64 = 1e-12;

impl CohenKernel {
    pub fn wigner() -> Self {
        Self::builtin(KernelKind::Wigner, 1.0)
    }

    pub fn spectrogram(window: ApparatusWindow1D, hbar: f64) -> Self {
        Self::builtin(KernelKind::Spectrogram(window), hbar)
    }

    pub fn ordering(sign: i8, hbar: f64) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::invalid("ordering sign must be +1 or -1"));
        }
        Ok(Self::builtin(KernelKind::Ordering(sign), hbar))
    }

    pub fn cosine(hbar: f64) -> Self {
        Self::builtin(KernelKind::Cosine, hbar)
    }

    fn builtin(kind: KernelKind, hbar: f64) -> Self {
        let flags = match &kind {
            KernelKind::Wigner => KernelFlags {
                preserves_norm: true,
                marginal_x: true,
                marginal_p: true,
                tau_independent: true,
                scale_invariant: true,
            },
            KernelKind::Spectrogram(_) => KernelFlags {
                preserves_norm: true,
                ..Default::default()
            },
            KernelKind::Ordering(_) | KernelKind::Cosine => KernelFlags {
                preserves_norm: true,
                marginal_x: true,
                marginal_p: true,
                tau_independent: false,
                scale_invariant: true,
            },
            KernelKind::Custom { .. } => unreachable!("custom kernels go through CohenKernel::custom"),
        };
        let k = CohenKernel { kind, flags, hbar };
        debug_assert!(k.verify_flags().is_ok());
        k
    }

    /// User-defined kernel; every flag declared `true` is spot-checked on 100
    /// seeded random `(θ,τ)` points.
    pub fn custom(
        name: impl Into<String>,
        chi: KernelFn,
        k_transform: Option<KernelFn>,
        smoothing: (f64, f64),
        flags: KernelFlags,
        hbar: f64,
    ) -> Result<Self> {
        if !(smoothing.0 >= 0.0 && smoothing.1 >= 0.0) {
            return Err(Error::invalid("kernel smoothing radii must be non-negative"));
        }
        let k = CohenKernel {
            kind: KernelKind::Custom {
                name: name.into(),
                chi,
                k_transform,
                smoothing,
            },
            flags,
            hbar,
        };
        k.verify_flags()?;
        Ok(k)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn flags(&self) -> KernelFlags {
        self.flags
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn id(&self) -> String {
        self.kind.id()
    }

    /// `χ(θ,τ)`.
    pub fn eval(&self, theta: f64, tau: f64) -> Complex64 {
        let h = self.hbar;
        match &self.kind {
            KernelKind::Wigner => Complex64::new(1.0, 0.0),
            KernelKind::Spectrogram(w) => {
                let s2 = w.sigma * w.sigma;
                let mag = (-h * h * tau * tau / (2.0 * s2) - theta * theta * s2 / 8.0).exp();
                Complex64::from_polar(mag, theta * w.center)
            }
            KernelKind::Ordering(s) => Complex64::from_polar(1.0, *s as f64 * h * theta * tau / 2.0),
            KernelKind::Cosine => Complex64::new((h * theta * tau / 2.0).cos(), 0.0),
            KernelKind::Custom { chi, .. } => chi(theta, tau),
        }
    }

    /// Checks every flag declared `true`.
    pub fn verify_flags(&self) -> Result<()> {
        let one = Complex64::new(1.0, 0.0);
        let c00 = self.eval(0.0, 0.0);
        if c00.norm() < 1e-12 {
            return Err(Error::KernelSingular(format!("{}: χ(0,0) = 0", self.id())));
        }
        let fail = |what: &str, th: f64, ta: f64| {
            Err(Error::invalid(format!("kernel {} declares {what} but fails at (θ,τ) = ({th}, {ta})", self.id())))
        };
        if self.flags.preserves_norm && (c00 - one).norm() > SPOT_TOL {
            return fail("preserves_norm", 0.0, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
        for _ in 0..SPOT_CHECKS {
            let th: f64 = rng.gen_range(-10.0..10.0);
            let ta: f64 = rng.gen_range(-10.0..10.0);
            let v = self.eval(th, ta);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { at: th });
            }
            if self.flags.marginal_x && (self.eval(th, 0.0) - one).norm() > SPOT_TOL {
                return fail("marginal_x", th, 0.0);
            }
            if self.flags.marginal_p && (self.eval(0.0, ta) - one).norm() > SPOT_TOL {
                return fail("marginal_p", 0.0, ta);
            }
            if self.flags.tau_independent && (v - self.eval(th, 0.0)).norm() > SPOT_TOL {
                return fail("tau_independent", th, ta);
            }
            if self.flags.scale_invariant {
                let lambda: f64 = rng.gen_range(0.2..5.0);
                if (v - self.eval(th * lambda, ta / lambda)).norm() > SPOT_TOL {
                    return fail("scale_invariant", th, ta);
                }
            }
        }
        Ok(())
    }

    /// Requires `χ(0,0) = 1`.
    pub fn require_normalized(&self) -> Result<()> {
        self.verify_flags()?;
        if !self.flags.preserves_norm {
            return Err(Error::invalid(format!("kernel {} does not preserve the norm", self.id())));
        }
        Ok(())
    }

    /// How far the kernel spreads a distribution in `x` and in `p`
    /// (radius beyond which its phase-space smoothing is below 1e-16).
    pub fn smoothing(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::Spectrogram(w) => (
                w.center.abs() + GAUSSIAN_CUTOFF * w.sigma,
                GAUSSIAN_CUTOFF * 2.0 * self.hbar / w.sigma,
            ),
            KernelKind::Custom { smoothing, .. } => *smoothing,
            _ => (0.0, 0.0),
        }
    }

    /// `|θ|` beyond which `χ(θ,·)` is negligible, if the kernel decays in `θ`.
    pub fn theta_cutoff(&self) -> Option<f64> {
        match &self.kind {
            KernelKind::Spectrogram(w) => Some(GAUSSIAN_CUTOFF * 2.0 * std::f64::consts::SQRT_2 / w.sigma),
            _ => None,
        }
    }

    /// Kernels other than `χ ≡ 1` carry `ħ`; it must match the state's.
    pub(crate) fn check_hbar(&self, hbar: f64) -> Result<()> {
        if matches!(self.kind, KernelKind::Wigner) || (self.hbar - hbar).abs() <= 1e-12 * hbar {
            return Ok(());
        }
        Err(Error::invalid(format!(
            "kernel built for hbar = {} but the state uses hbar = {hbar}",
            self.hbar
        )))
    }

    /// Momentum-space form of the kernel, `K(θ,k) = ∫dτ χ(θ,τ) e^{iτk}`,
    /// split into delta terms and a smooth part.
    pub(crate) fn k_form(&self) -> Result<KForm> {
        let h = self.hbar;
        Ok(match &self.kind {
            KernelKind::Wigner => KForm::Deltas(vec![(0.0, 1.0)]),
            // 2π δ(k + sħθ/2)
            KernelKind::Ordering(s) => KForm::Deltas(vec![(-(*s as f64) * h / 2.0, 1.0)]),
            KernelKind::Cosine => KForm::Deltas(vec![(-h / 2.0, 0.5), (h / 2.0, 0.5)]),
            KernelKind::Spectrogram(w) => {
                let w = *w;
                KForm::Smooth {
                    k: Arc::new(move |theta: f64, k: f64| {
                        let s2 = w.sigma * w.sigma;
                        let mag = (2.0 * std::f64::consts::PI).sqrt() * w.sigma / h
                            * (-theta * theta * s2 / 8.0 - s2 * k * k / (2.0 * h * h)).exp();
                        Complex64::from_polar(mag, theta * w.center)
                    }),
                    width: std::f64::consts::SQRT_2 * h / w.sigma,
                }
            }
            KernelKind::Custom { chi, .. } if self.flags.tau_independent => {
                let chi = chi.clone();
                KForm::Weighted(Arc::new(move |theta: f64, _k: f64| chi(theta, 0.0)))
            }
            KernelKind::Custom { k_transform: Some(k), smoothing, .. } => KForm::Smooth {
                k: k.clone(),
                width: smoothing.1.max(1e-300) / GAUSSIAN_CUTOFF,
            },
            KernelKind::Custom { name, .. } => {
                return Err(Error::Unsupported(format!(
                    "custom kernel `{name}` has no momentum-space transform"
                )))
            }
        })
    }
}

/// `K(θ,k)` either as a sum of delta terms or as a smooth function.
pub(crate) enum KForm {
    /// Terms `(a, w)` standing for `2π w δ(k - a θ)`.
    Deltas(Vec<(f64, f64)>),
    /// `2π χ(θ,0) δ(k)` for kernels that do not depend on `τ`; the function ignores `k`.
    Weighted(KernelFn),
    /// Smooth `K(θ,k)` whose `k`-profile has 1/e half-width about `width`.
    Smooth { k: KernelFn, width: f64 },
}
