//! Agreement between simulated and observed burn grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BurnGrid, ScarSeries};

/// SSIM stabilizers for unit dynamic range: `(0.01 L)^2`, `(0.03 L)^2`.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// Side of the square window used by [`ssim_windowed`].
pub const SSIM_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Square root of the differing-cell count.
    #[default]
    Frobenius,
    /// Differing-cell count.
    Hamming,
}

impl Norm {
    pub fn eval(self, sim: &BurnGrid, obs: &BurnGrid) -> Result<f64> {
        match self {
            Norm::Frobenius => frobenius_error(sim, obs),
            Norm::Hamming => hamming(sim, obs).map(|n| n as f64),
        }
    }
}

/// Per-period weights of the scar-evolution error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if !mu.iter().any(|&m| m > 0.0) {
            return Err(Error::invalid("at least one weight must be positive"));
        }
        Ok(WeightVector(mu))
    }

    /// `1/T` for each of `T` periods.
    pub fn uniform(periods: usize) -> Result<Self> {
        Self::new(vec![1.0 / periods as f64; periods])
    }

    /// All weight on the last period.
    pub fn final_only(periods: usize) -> Result<Self> {
        let mut mu = vec![0.0; periods];
        if let Some(last) = mu.last_mut() {
            *last = 1.0;
        }
        Self::new(mu)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|m| m * k).collect())
    }
}

pub fn hamming(a: &BurnGrid, b: &BurnGrid) -> Result<usize> {
    a.check_shape(b)?;
    Ok(a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count())
}

pub fn frobenius_error(a: &BurnGrid, b: &BurnGrid) -> Result<f64> {
    Ok((hamming(a, b)? as f64).sqrt())
}

/// Fraction of cells that differ.
pub fn mse(a: &BurnGrid, b: &BurnGrid) -> Result<f64> {
    Ok(hamming(a, b)? as f64 / a.len() as f64)
}

/// `sum_t mu_t * norm(sim_t, obs_t)`.
pub fn weighted_error(sim: &ScarSeries, obs: &ScarSeries, mu: &WeightVector, norm: Norm) -> Result<f64> {
    if sim.len() != obs.len() || mu.len() != obs.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: simulated {}, observed {}, weights {}",
            sim.len(),
            obs.len(),
            mu.len()
        )));
    }
    if sim.timestamps() != obs.timestamps() {
        return Err(Error::invalid("simulated and observed report times differ"));
    }
    let mut total = 0.0;
    for ((s, o), &m) in sim.grids().iter().zip(obs.grids()).zip(mu.as_slice()) {
        if m != 0.0 {
            total += m * norm.eval(s, o)?;
        } else {
            s.check_shape(o)?;
        }
    }
    Ok(total)
}

fn ssim_from_sums(n: f64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64) -> f64 {
    let ma = sa / n;
    let mb = sb / n;
    let va = saa / n - ma * ma;
    let vb = sbb / n - mb * mb;
    let cov = sab / n - ma * mb;
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

/// Single-window SSIM over the whole grid, intensities 0/1.
pub fn ssim(a: &BurnGrid, b: &BurnGrid) -> Result<f64> {
    a.check_shape(b)?;
    let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (f64::from(u8::from(x)), f64::from(u8::from(y)));
        sa += x;
        sb += y;
        sab += x * y;
    }
    // binary intensities: x^2 = x
    Ok(ssim_from_sums(a.len() as f64, sa, sb, sa, sb, sab))
}

/// Mean SSIM over all 8x8 windows at stride 1 (the whole grid when smaller).
pub fn ssim_windowed(a: &BurnGrid, b: &BurnGrid) -> Result<f64> {
    a.check_shape(b)?;
    let wr = SSIM_WINDOW.min(a.rows());
    let wc = SSIM_WINDOW.min(a.cols());
    let n = (wr * wc) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=a.rows() - wr {
        for c0 in 0..=a.cols() - wc {
            let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
            for r in r0..r0 + wr {
                for c in c0..c0 + wc {
                    let x = f64::from(u8::from(*a.get(r, c)));
                    let y = f64::from(u8::from(*b.get(r, c)));
                    sa += x;
                    sb += y;
                    sab += x * y;
                }
            }
            total += ssim_from_sums(n, sa, sb, sa, sb, sab);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// All per-grid metrics at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub frobenius: f64,
    pub hamming: usize,
    pub mse: f64,
    pub ssim: f64,
    pub ssim_windowed: f64,
}

pub fn compare(a: &BurnGrid, b: &BurnGrid) -> Result<Comparison> {
    let hamming = hamming(a, b)?;
    Ok(Comparison {
        frobenius: (hamming as f64).sqrt(),
        hamming,
        mse: hamming as f64 / a.len() as f64,
        ssim: ssim(a, b)?,
        ssim_windowed: ssim_windowed(a, b)?,
    })
}
