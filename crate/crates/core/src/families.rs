//! Exponential-family models with quadratic variance functions, the two
//! over-dispersed mixture families, their variance-stabilizing transforms and
//! samplers.
//!
//! Every family is parameterized on the mean scale. For the five NEF-QVF kinds
//! the variance is V(mu) = a0 + a1*mu + a2*mu^2 and the mean-matching shift
//! constants are a = a1/4, b = -a2/2.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

/// Which distribution family an observation series follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    Poisson,
    /// Binomial with a known number of trials r per observation.
    Binomial { r: u32 },
    /// Negative binomial with known dispersion r > 0.
    NegBinomial { r: f64 },
    /// Gamma with known shape r > 0.
    Gamma { r: f64 },
    /// NEF built on the generalized hyperbolic secant distribution, r known.
    NefGhs { r: f64 },
    /// Gamma-Poisson mixture with known scale sigma > 0 (over-dispersed counts).
    GammaPoisson { sigma: f64 },
    /// Beta-binomial mixture with r trials, known k = a + b of the latent Beta
    /// and a caller-supplied dispersion sigma used in the transform shifts.
    BetaBinomial { r: u32, k: f64, sigma: f64 },
}

/// Which shift constants the transform G((X + a)/(m + b)) uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VstVariant {
    /// a = a1/4, b = -a2/2: bias of the transformed mean is O(m^-2).
    MeanMatching,
    /// Classical c = 0 root/arcsine transform (Poisson and Binomial only).
    Bartlett,
    /// Classical c = 3/8 root/arcsine transform (Poisson and Binomial only).
    Anscombe,
    /// a = b = 0, the plain VST used for general (non-QVF) families.
    GeneralNef,
    /// Root transform 2 sqrt((X+c)/m), arcsine transform
    /// 2 sqrt(r) arcsin sqrt((X+c)/(rm+2c)); log transform ln(X/(m - c)).
    CustomOffset(f64),
}

/// Shift constants (a, b) of the transform G((X + a)/(m + b)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VstConstants {
    pub a: f64,
    pub b: f64,
}

/// A family together with its mean-domain; the unit every pipeline stage is
/// configured with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyModel {
    kind: FamilyKind,
}

impl FamilyModel {
    pub fn poisson() -> Self {
        FamilyModel {
            kind: FamilyKind::Poisson,
        }
    }

    pub fn binomial(r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::BadConfig("binomial r must be positive".into()));
        }
        Ok(FamilyModel {
            kind: FamilyKind::Binomial { r },
        })
    }

    pub fn neg_binomial(r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::BadConfig("negative binomial r must be positive".into()));
        }
        Ok(FamilyModel {
            kind: FamilyKind::NegBinomial { r },
        })
    }

    pub fn gamma(r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::BadConfig("gamma r must be positive".into()));
        }
        Ok(FamilyModel {
            kind: FamilyKind::Gamma { r },
        })
    }

    pub fn nef_ghs(r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::BadConfig("NEF-GHS r must be positive".into()));
        }
        Ok(FamilyModel {
            kind: FamilyKind::NefGhs { r },
        })
    }

    pub fn gamma_poisson(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::BadConfig("gamma-Poisson sigma must be positive".into()));
        }
        Ok(FamilyModel {
            kind: FamilyKind::GammaPoisson { sigma },
        })
    }

    pub fn beta_binomial(r: u32, k: f64, sigma: f64) -> Result<Self> {
        if r == 0 || !(k > 0.0) || !(sigma >= 0.0) {
            return Err(Error::BadConfig(
                "beta-binomial needs r >= 1, k > 0 and sigma >= 0".into(),
            ));
        }
        Ok(FamilyModel {
            kind: FamilyKind::BetaBinomial { r, k, sigma },
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Open interval of valid means.
    pub fn mean_domain(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Poisson
            | FamilyKind::NegBinomial { .. }
            | FamilyKind::Gamma { .. }
            | FamilyKind::GammaPoisson { .. } => (0.0, f64::INFINITY),
            FamilyKind::Binomial { r } => (0.0, r as f64),
            FamilyKind::NefGhs { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::BetaBinomial { .. } => (0.0, 1.0),
        }
    }

    fn check_interior(&self, mu: f64) -> Result<()> {
        let (lo, hi) = self.mean_domain();
        if mu > lo && mu < hi {
            Ok(())
        } else {
            Err(Error::Domain { mu, lo, hi })
        }
    }

    /// Coefficients (a0, a1, a2) of V(mu) = a0 + a1 mu + a2 mu^2, for the five
    /// QVF kinds. None for the over-dispersed mixture families.
    pub fn qvf_coefficients(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            FamilyKind::Poisson => Some((0.0, 1.0, 0.0)),
            FamilyKind::Binomial { r } => Some((0.0, 1.0, -1.0 / r as f64)),
            FamilyKind::NegBinomial { r } => Some((0.0, 1.0, 1.0 / r)),
            FamilyKind::Gamma { r } => Some((0.0, 0.0, 1.0 / r)),
            FamilyKind::NefGhs { r } => Some((r, 0.0, 1.0 / r)),
            FamilyKind::GammaPoisson { .. } | FamilyKind::BetaBinomial { .. } => None,
        }
    }

    /// V(mu), the per-observation variance at mean mu.
    pub fn variance_at(&self, mu: f64) -> Result<f64> {
        self.check_interior(mu)?;
        Ok(match self.kind {
            FamilyKind::Poisson => mu,
            FamilyKind::Binomial { r } => mu - mu * mu / r as f64,
            FamilyKind::NegBinomial { r } => mu + mu * mu / r,
            FamilyKind::Gamma { r } => mu * mu / r,
            FamilyKind::NefGhs { r } => r + mu * mu / r,
            FamilyKind::GammaPoisson { sigma } => mu * (1.0 + sigma),
            // Count variance of one Binomial(r, Z) draw with Beta(mu*k, (1-mu)*k)
            // mixing; reduces to r*mu*(1-mu) when r = 1.
            FamilyKind::BetaBinomial { r, k, .. } => {
                let r = r as f64;
                r * mu * (1.0 - mu) * (1.0 + (r - 1.0) / (k + 1.0))
            }
        })
    }

    /// G(mu), the target of the variance stabilizing transformation.
    pub fn g_apply(&self, mu: f64) -> Result<f64> {
        self.check_interior(mu)?;
        Ok(self.g_closed(mu))
    }

    // G extended to the closed mean domain where finite.
    fn g_closed(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Poisson | FamilyKind::GammaPoisson { .. } => 2.0 * mu.sqrt(),
            FamilyKind::Binomial { r } => {
                let r = r as f64;
                2.0 * r.sqrt() * (mu / r).sqrt().asin()
            }
            FamilyKind::NegBinomial { r } => 2.0 * r.sqrt() * (mu / r).sqrt().asinh(),
            FamilyKind::Gamma { r } => r.sqrt() * mu.ln(),
            FamilyKind::NefGhs { r } => r.sqrt() * (mu / r).asinh(),
            FamilyKind::BetaBinomial { .. } => 2.0 * mu.sqrt().asin(),
        }
    }

    /// Closed range of G over the mean domain, the interval denoised values
    /// are clamped to before inversion.
    pub fn g_range(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Poisson | FamilyKind::NegBinomial { .. } | FamilyKind::GammaPoisson { .. } => {
                (0.0, f64::INFINITY)
            }
            FamilyKind::Binomial { r } => {
                let r = r as f64;
                (0.0, r.sqrt() * std::f64::consts::PI)
            }
            FamilyKind::Gamma { .. } | FamilyKind::NefGhs { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            FamilyKind::BetaBinomial { .. } => (0.0, std::f64::consts::PI),
        }
    }

    /// G^-1(y), clamping out-of-range y to the nearest closed endpoint of the
    /// mean domain. Total by construction.
    pub fn g_inverse(&self, y: f64) -> f64 {
        let (lo, hi) = self.g_range();
        let y = y.clamp(lo, hi);
        match self.kind {
            FamilyKind::Poisson | FamilyKind::GammaPoisson { .. } => (y / 2.0) * (y / 2.0),
            FamilyKind::Binomial { r } => {
                let r = r as f64;
                let s = (y / (2.0 * r.sqrt())).sin();
                r * s * s
            }
            FamilyKind::NegBinomial { r } => {
                let s = (y / (2.0 * r.sqrt())).sinh();
                r * s * s
            }
            FamilyKind::Gamma { r } => (y / r.sqrt()).exp(),
            FamilyKind::NefGhs { r } => r * (y / r.sqrt()).sinh(),
            FamilyKind::BetaBinomial { .. } => {
                let s = (y / 2.0).sin();
                s * s
            }
        }
    }

    /// Shift constants for a variant.
    pub fn vst_constants(&self, variant: VstVariant) -> Result<VstConstants> {
        if let VstVariant::GeneralNef = variant {
            return Ok(VstConstants { a: 0.0, b: 0.0 });
        }
        match self.kind {
            FamilyKind::Poisson | FamilyKind::Binomial { .. } => {
                let c = match variant {
                    VstVariant::MeanMatching => 0.25,
                    VstVariant::Bartlett => 0.0,
                    VstVariant::Anscombe => 0.375,
                    VstVariant::CustomOffset(c) => c,
                    VstVariant::GeneralNef => unreachable!(),
                };
                Ok(match self.kind {
                    FamilyKind::Poisson => VstConstants { a: c, b: 0.0 },
                    // denominator rm + 2c = r (m + 2c/r)
                    FamilyKind::Binomial { r } => VstConstants {
                        a: c,
                        b: 2.0 * c / r as f64,
                    },
                    _ => unreachable!(),
                })
            }
            FamilyKind::NegBinomial { r } => match variant {
                VstVariant::MeanMatching => Ok(VstConstants {
                    a: 0.25,
                    b: -0.5 / r,
                }),
                VstVariant::CustomOffset(c) => Ok(VstConstants {
                    a: c,
                    b: -2.0 * c / r,
                }),
                _ => Err(Error::UnsupportedVariant),
            },
            FamilyKind::Gamma { r } | FamilyKind::NefGhs { r } => match variant {
                VstVariant::MeanMatching => Ok(VstConstants { a: 0.0, b: -0.5 / r }),
                // log transform ln(X/(m - c)) for r = 1
                VstVariant::CustomOffset(c) => Ok(VstConstants { a: 0.0, b: -c / r }),
                _ => Err(Error::UnsupportedVariant),
            },
            FamilyKind::GammaPoisson { sigma } => match variant {
                VstVariant::MeanMatching => Ok(VstConstants {
                    a: (sigma + 1.0) / 4.0,
                    b: 0.0,
                }),
                _ => Err(Error::UnsupportedVariant),
            },
            FamilyKind::BetaBinomial { r, sigma, .. } => match variant {
                // denominator rm + (sigma+1)/2 = r (m + (sigma+1)/(2r))
                VstVariant::MeanMatching => Ok(VstConstants {
                    a: (sigma + 1.0) / 4.0,
                    b: (sigma + 1.0) / (2.0 * r as f64),
                }),
                _ => Err(Error::UnsupportedVariant),
            },
        }
    }

    /// The shifted transform H_m(x) = G((x + a)/(m + b)) applied to the sum x
    /// of a bin of size m.
    pub fn hm_transform(&self, variant: VstVariant, x: f64, m: f64) -> Result<f64> {
        let VstConstants { a, b } = self.vst_constants(variant)?;
        let arg = match self.kind {
            // 2 sqrt(r) arcsin sqrt((x + (s+1)/4)/(rm + (s+1)/2)): the
            // argument here is on the r-trial count scale, not the mean scale.
            FamilyKind::BetaBinomial { r, .. } => {
                let r = r as f64;
                let ratio = (x + a) / (r * (m + b));
                if !(0.0..=1.0).contains(&ratio) {
                    return Err(Error::Domain { mu: ratio, lo: 0.0, hi: 1.0 });
                }
                return Ok(2.0 * r.sqrt() * ratio.sqrt().asin());
            }
            _ => (x + a) / (m + b),
        };
        let (lo, hi) = self.mean_domain();
        // closure of the mean domain; G is finite at every closed finite
        // endpoint except mu = 0 for Gamma, where the sum x > 0 anyway
        let closed_ok = match self.kind {
            FamilyKind::Gamma { .. } => arg > 0.0,
            _ => arg >= lo && arg <= hi,
        };
        if !closed_ok {
            return Err(Error::Domain { mu: arg, lo, hi });
        }
        Ok(self.g_closed(arg))
    }

    /// True for count-valued families.
    pub fn is_discrete(&self) -> bool {
        !matches!(
            self.kind,
            FamilyKind::Gamma { .. } | FamilyKind::NefGhs { .. }
        )
    }

    /// Checks that one observation lies in the support of the family.
    pub fn supports(&self, value: f64) -> bool {
        let is_count = value.fract() == 0.0 && value >= 0.0;
        match self.kind {
            FamilyKind::Poisson | FamilyKind::NegBinomial { .. } | FamilyKind::GammaPoisson { .. } => {
                is_count
            }
            FamilyKind::Binomial { r } | FamilyKind::BetaBinomial { r, .. } => {
                is_count && value <= r as f64
            }
            FamilyKind::Gamma { .. } => value > 0.0,
            FamilyKind::NefGhs { .. } => value.is_finite(),
        }
    }

    /// One draw with mean mu (for BetaBinomial the raw count with mean r*mu).
    /// Deterministic given the state of the caller-owned generator.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Result<f64> {
        self.check_interior(mu)?;
        let draw = match self.kind {
            FamilyKind::Poisson => sample_poisson(mu, rng),
            FamilyKind::Binomial { r } => {
                let d = Binomial::new(r as u64, mu / r as f64)
                    .map_err(|e| Error::BadConfig(e.to_string()))?;
                d.sample(rng) as f64
            }
            FamilyKind::NegBinomial { r } => {
                // gamma-Poisson mixture: Z ~ Gamma(r, mu/r), X | Z ~ Poisson(Z)
                let z = Gamma::new(r, mu / r)
                    .map_err(|e| Error::BadConfig(e.to_string()))?
                    .sample(rng);
                sample_poisson(z, rng)
            }
            FamilyKind::Gamma { r } => Gamma::new(r, mu / r)
                .map_err(|e| Error::BadConfig(e.to_string()))?
                .sample(rng),
            FamilyKind::NefGhs { .. } => return Err(Error::UnsupportedSampling),
            FamilyKind::GammaPoisson { sigma } => {
                let z = Gamma::new(mu / sigma, sigma)
                    .map_err(|e| Error::BadConfig(e.to_string()))?
                    .sample(rng);
                sample_poisson(z, rng)
            }
            FamilyKind::BetaBinomial { r, k, .. } => {
                let z = Beta::new(mu * k, (1.0 - mu) * k)
                    .map_err(|e| Error::BadConfig(e.to_string()))?
                    .sample(rng);
                Binomial::new(r as u64, z.clamp(0.0, 1.0))
                    .map_err(|e| Error::BadConfig(e.to_string()))?
                    .sample(rng) as f64
            }
        };
        Ok(draw)
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive finite lambda").sample(rng)
}
