//! Elliptical spread kernel.
//!
//! A burning cell sits at one focus of an ellipse whose semi-major axis grows
//! at `(HROS + BROS) / 2` and semi-minor axis at `FROS`. The directional rate
//! of spread at angle `phi` from the head direction is the focal polar radius
//! `a (1 - e^2) / (1 - e cos phi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest eccentricity the ECC factor may produce.
pub const MAX_ECCENTRICITY: f64 = 1.0 - 1e-6;

/// Head, flank and back rates of spread, m/min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosTriple {
    pub hros: f64,
    pub fros: f64,
    pub bros: f64,
}

impl RosTriple {
    pub fn new(hros: f64, fros: f64, bros: f64) -> Self {
        RosTriple { hros, fros, bros }
    }
}

/// Multipliers on HROS, FROS, BROS and the eccentricity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorTuple {
    pub hros: f64,
    pub fros: f64,
    pub bros: f64,
    pub ecc: f64,
}

impl FactorTuple {
    pub const IDENTITY: FactorTuple = FactorTuple {
        hros: 1.0,
        fros: 1.0,
        bros: 1.0,
        ecc: 1.0,
    };

    pub fn new(hros: f64, fros: f64, bros: f64, ecc: f64) -> Self {
        FactorTuple { hros, fros, bros, ecc }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        FactorTuple::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.hros, self.fros, self.bros, self.ecc]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

impl Default for FactorTuple {
    fn default() -> Self {
        FactorTuple::IDENTITY
    }
}

/// Ellipse growth rates: semi-axes per minute plus eccentricity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseRates {
    pub a_rate: f64,
    pub b_rate: f64,
    pub ecc: f64,
}

const ROUNDING_SLACK: f64 = 1e-12;

/// FROS from HROS, BROS and the length-to-breadth ratio.
pub fn derive_flank_ros(hros: f64, bros: f64, lb: f64) -> Result<f64> {
    if !(lb >= 1.0) {
        return Err(Error::InvalidLengthToBreadth(lb));
    }
    Ok((hros + bros) / (2.0 * lb))
}

fn check_triple(ros: &RosTriple) -> Result<()> {
    let ok = [ros.hros, ros.fros, ros.bros]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("rates of spread must be finite and >= 0: {ros:?}")))
    }
}

pub fn ellipse_rates(ros: RosTriple) -> Result<EllipseRates> {
    check_triple(&ros)?;
    let a_rate = (ros.hros + ros.bros) / 2.0;
    if a_rate == 0.0 {
        if ros.fros > 0.0 {
            return Err(Error::ImaginaryEccentricity {
                fros: ros.fros,
                semi_major: a_rate,
            });
        }
        return Ok(EllipseRates {
            a_rate: 0.0,
            b_rate: 0.0,
            ecc: 0.0,
        });
    }
    // a circle scaled by a common factor can land one ulp above a_rate
    if ros.fros > a_rate * (1.0 + ROUNDING_SLACK) {
        return Err(Error::ImaginaryEccentricity {
            fros: ros.fros,
            semi_major: a_rate,
        });
    }
    let ratio = (ros.fros / a_rate).min(1.0);
    Ok(EllipseRates {
        a_rate,
        b_rate: ros.fros,
        ecc: (1.0 - ratio * ratio).sqrt().min(MAX_ECCENTRICITY),
    })
}

/// Ellipse of the factor-scaled rates, with the eccentricity rescaled by the
/// ECC factor and clamped to `[0, MAX_ECCENTRICITY]`.
pub fn apply_factors(ros: RosTriple, x: FactorTuple) -> Result<EllipseRates> {
    if !x.is_valid() {
        return Err(Error::invalid(format!("adjustment factors must be finite and >= 0: {x:?}")));
    }
    let scaled = RosTriple {
        hros: x.hros * ros.hros,
        fros: x.fros * ros.fros,
        bros: x.bros * ros.bros,
    };
    let base = ellipse_rates(scaled)?;
    if base.a_rate == 0.0 {
        return Ok(base);
    }
    let ecc = (x.ecc * base.ecc).clamp(0.0, MAX_ECCENTRICITY);
    Ok(EllipseRates {
        a_rate: base.a_rate,
        b_rate: base.a_rate * (1.0 - ecc * ecc).sqrt(),
        ecc,
    })
}

/// Rate of spread along `phi` degrees from the head direction.
pub fn spread_rate(er: &EllipseRates, phi: f64) -> f64 {
    if er.a_rate == 0.0 {
        return 0.0;
    }
    let cos = phi.to_radians().cos();
    er.a_rate * (1.0 - er.ecc * er.ecc) / (1.0 - er.ecc * cos)
}
