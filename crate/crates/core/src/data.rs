//! Regression data: `t = sin(2*pi*x) + zeta`, where each target is corrupted
//! with probability `p / 100` by a location-zero student-t draw.
//!
//! Inputs, the corruption mask and the noise magnitudes come from three
//! separate streams of the run seed. The set of corrupted indices therefore
//! depends only on the seed and `p`, and two datasets that differ only in the
//! noise shape are corrupted at the same indices.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Degrees of freedom of the noise.
    pub nu_noise: f64,
    /// Scale of the noise.
    pub scale: f64,
    /// Corruption probability in percent.
    pub p_percent: u32,
}

impl NoiseSpec {
    pub fn new(nu_noise: f64, scale: f64, p_percent: u32) -> Result<Self> {
        let spec = Self {
            nu_noise,
            scale,
            p_percent,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn clean() -> Self {
        Self {
            nu_noise: 1.0,
            scale: 0.0,
            p_percent: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu_noise > 0.0 && self.nu_noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise dof must be positive, got {}", self.nu_noise)));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise scale must be >= 0, got {}", self.scale)));
        }
        if self.p_percent > 100 {
            return Err(Error::InvalidConfig(format!("p must be in [0, 100], got {}", self.p_percent)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<f64>,
    /// Observed, possibly corrupted targets.
    pub ts: Vec<f64>,
    /// Noise-free targets, for evaluation only.
    pub clean_ts: Vec<f64>,
    pub corrupted: Vec<bool>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn corrupted_fraction(&self) -> f64 {
        self.corrupted.iter().filter(|&&c| c).count() as f64 / self.len() as f64
    }
}

pub fn ground_truth(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

/// One location-zero student-t draw, `scale * z / sqrt(c / nu)` with `z`
/// standard normal and `c ~ chi^2(nu)`. Both draws are consumed even when the
/// scale is zero so the stream position does not depend on the scale.
pub fn sample_student_t<R: Rng + ?Sized>(nu: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(format!("student-t dof must be positive, got {nu}")));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("student-t scale must be >= 0, got {scale}")));
    }
    let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let z: f64 = StandardNormal.sample(rng);
    let c = chi.sample(rng);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(scale * z / (c / nu).sqrt())
}

pub fn make_dataset(n: usize, noise: &NoiseSpec, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    noise.validate()?;
    let mut inputs = stream(seed, Stream::Inputs);
    let mut mask = stream(seed, Stream::NoiseMask);
    let mut magnitude = stream(seed, Stream::NoiseMagnitude);
    let prob = f64::from(noise.p_percent) / 100.0;

    let mut data = Dataset {
        xs: Vec::with_capacity(n),
        ts: Vec::with_capacity(n),
        clean_ts: Vec::with_capacity(n),
        corrupted: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let x: f64 = inputs.random();
        let clean = ground_truth(x);
        let u: f64 = mask.random();
        let zeta = sample_student_t(noise.nu_noise, noise.scale, &mut magnitude)?;
        let hit = u < prob;
        data.xs.push(x);
        data.clean_ts.push(clean);
        data.ts.push(if hit { clean + zeta } else { clean });
        data.corrupted.push(hit);
    }
    Ok(data)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    x: f64,
    t: f64,
    clean_t: f64,
    corrupted_flag: u8,
}

/// Writes `x,t,clean_t,corrupted_flag` with a header row.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..data.len() {
        w.serialize(DatasetRow {
            x: data.xs[i],
            t: data.ts[i],
            clean_t: data.clean_ts[i],
            corrupted_flag: u8::from(data.corrupted[i]),
        })?;
    }
    w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`], rejecting rows whose
/// clean target is not exactly `sin(2*pi*x)`.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let mut data = Dataset {
        xs: Vec::new(),
        ts: Vec::new(),
        clean_ts: Vec::new(),
        corrupted: Vec::new(),
    };
    for (i, row) in r.deserialize::<DatasetRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |message: String| Error::Parse { line, message };
        if !(row.x.is_finite() && row.t.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        if !(0.0..=1.0).contains(&row.x) {
            return Err(bad(format!("x = {} outside [0, 1]", row.x)));
        }
        if row.clean_t.to_bits() != ground_truth(row.x).to_bits() {
            return Err(bad(format!("clean_t = {} is not sin(2 pi x)", row.clean_t)));
        }
        let flag = match row.corrupted_flag {
            0 => false,
            1 => true,
            other => return Err(bad(format!("corrupted_flag must be 0 or 1, got {other}"))),
        };
        if !flag && row.t.to_bits() != row.clean_t.to_bits() {
            return Err(bad("uncorrupted row has t != clean_t".into()));
        }
        data.xs.push(row.x);
        data.ts.push(row.t);
        data.clean_ts.push(row.clean_t);
        data.corrupted.push(flag);
    }
    Ok(data)
}
