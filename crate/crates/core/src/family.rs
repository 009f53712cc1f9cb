//! Response families: link functions, inverse links, mean derivatives and
//! variance functions.
//!
//! Supported pairs are gaussian/identity, binomial/logit, binomial/probit and
//! poisson/log.
//!
//! Inverse links saturate in floating point: the logistic and probit means
//! round to exactly 1 once `eta` exceeds roughly 37 and 8.3 respectively,
//! and lose relative resolution in `1 - mu` well before that. The solver
//! therefore clamps binomial means to `[MEAN_EPS, 1 - MEAN_EPS]`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::normal;

/// Numerical guard for binomial means inside the solver.
pub const MEAN_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("unknown family `{0}` (expected gaussian, binomial or poisson)")]
    UnknownFamily(String),
    #[error("unknown link `{0}` (expected identity, logit, probit or log)")]
    UnknownLink(String),
    #[error("link `{link}` is not supported for the {family} family")]
    UnsupportedPair { family: Family, link: Link },
    #[error("fixed dispersion must be positive and finite, got {0}")]
    BadDispersion(f64),
    #[error("mean {mu} is outside the domain of the {what}")]
    Domain { mu: f64, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Logit,
    Probit,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    Estimate,
    Fixed(f64),
}

impl Family {
    pub fn default_link(self) -> Link {
        match self {
            Family::Gaussian => Link::Identity,
            Family::Binomial => Link::Logit,
            Family::Poisson => Link::Log,
        }
    }

    /// Variance function `v(mu)`.
    pub fn variance(self, mu: f64) -> Result<f64, FamilyError> {
        match self {
            Family::Gaussian if mu.is_finite() => Ok(1.0),
            Family::Binomial if mu > 0.0 && mu < 1.0 => Ok(mu * (1.0 - mu)),
            Family::Poisson if mu > 0.0 && mu.is_finite() => Ok(mu),
            _ => Err(FamilyError::Domain {
                mu,
                what: self.domain_name(),
            }),
        }
    }

    fn domain_name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian variance function",
            Family::Binomial => "binomial variance function",
            Family::Poisson => "poisson variance function",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }
}

impl Link {
    /// `eta = g(mu)`.
    pub fn link(self, mu: f64) -> Result<f64, FamilyError> {
        let domain = |what| FamilyError::Domain { mu, what };
        match self {
            Link::Identity if mu.is_finite() => Ok(mu),
            Link::Logit if mu > 0.0 && mu < 1.0 => Ok((mu / (1.0 - mu)).ln()),
            Link::Probit if mu > 0.0 && mu < 1.0 => Ok(normal::quantile(mu)),
            Link::Log if mu > 0.0 && mu.is_finite() => Ok(mu.ln()),
            Link::Identity => Err(domain("identity link")),
            Link::Logit => Err(domain("logit link")),
            Link::Probit => Err(domain("probit link")),
            Link::Log => Err(domain("log link")),
        }
    }

    /// `mu = g^{-1}(eta)`.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal::cdf(eta),
            Link::Log => eta.exp(),
        }
    }

    /// `d mu / d eta`, strictly positive for finite `eta` until underflow.
    pub fn mean_derivative(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logit => {
                let e = (-eta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Link::Probit => normal::pdf(eta),
            Link::Log => eta.exp(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(FamilyError::UnknownFamily(other.to_string())),
        }
    }
}

impl FromStr for Link {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" => Ok(Link::Identity),
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "log" => Ok(Link::Log),
            other => Err(FamilyError::UnknownLink(other.to_string())),
        }
    }
}

/// A validated family/link pair together with the dispersion mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpec {
    family: Family,
    link: Link,
    dispersion: Dispersion,
}

impl FamilySpec {
    pub fn new(family: Family, link: Link, dispersion: Dispersion) -> Result<Self, FamilyError> {
        let allowed = matches!(
            (family, link),
            (Family::Gaussian, Link::Identity)
                | (Family::Binomial, Link::Logit)
                | (Family::Binomial, Link::Probit)
                | (Family::Poisson, Link::Log)
        );
        if !allowed {
            return Err(FamilyError::UnsupportedPair { family, link });
        }
        if let Dispersion::Fixed(phi) = dispersion {
            if !(phi > 0.0 && phi.is_finite()) {
                return Err(FamilyError::BadDispersion(phi));
            }
        }
        Ok(Self {
            family,
            link,
            dispersion,
        })
    }

    /// The family with its default link and an estimated dispersion.
    pub fn canonical(family: Family) -> Self {
        Self {
            family,
            link: family.default_link(),
            dispersion: Dispersion::Estimate,
        }
    }

    pub fn gaussian() -> Self {
        Self::canonical(Family::Gaussian)
    }

    pub fn logistic() -> Self {
        Self::canonical(Family::Binomial)
    }

    pub fn probit() -> Self {
        Self {
            family: Family::Binomial,
            link: Link::Probit,
            dispersion: Dispersion::Estimate,
        }
    }

    pub fn poisson() -> Self {
        Self::canonical(Family::Poisson)
    }

    pub fn with_dispersion(self, dispersion: Dispersion) -> Result<Self, FamilyError> {
        Self::new(self.family, self.link, dispersion)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn dispersion(&self) -> Dispersion {
        self.dispersion
    }

    /// Inverse link followed by the solver's domain guard.
    pub fn mean(&self, eta: f64) -> f64 {
        self.clamp_mean(self.link.inverse(eta))
    }

    pub fn clamp_mean(&self, mu: f64) -> f64 {
        match self.family {
            Family::Binomial => mu.clamp(MEAN_EPS, 1.0 - MEAN_EPS),
            Family::Poisson => mu.max(f64::MIN_POSITIVE),
            Family::Gaussian => mu,
        }
    }

    pub fn variance(&self, mu: f64) -> Result<f64, FamilyError> {
        self.family.variance(mu)
    }

    pub fn is_logit(&self) -> bool {
        self.link == Link::Logit
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.link)
    }
}
