//! Binary-coded families of Gaussian class distributions.
//!
//! A family holds `p` pairs of `r`-dimensional sub-distributions that differ only
//! in location (unit separation, shared isotropic covariance). Class `j` picks,
//! for each pair `i`, the member selected by bit `i` of `j` and concatenates the
//! draws, so points live in `R^(p·r)` and the squared distance between two class
//! means equals the Hamming distance of their codes.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Largest supported code width.
pub const MAX_WIDTH: u32 = 30;

/// Fixed-width binary code of a class index.
///
/// Bit `i` (least significant first) selects the member of pair `i`; the
/// textual form prints the most significant digit first, so `5` at width 4
/// reads `0101`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    index: u32,
    width: u32,
}

impl BinaryCode {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Value of the digit controlling pair `pair`.
    pub fn bit(&self, pair: u32) -> bool {
        (self.index >> pair) & 1 == 1
    }

    /// Digits in reading order (most significant first), leading zeros kept.
    pub fn digits(&self) -> Vec<u8> {
        (0..self.width).rev().map(|i| ((self.index >> i) & 1) as u8).collect()
    }

    /// Decodes a most-significant-first digit sequence.
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        let width = digits.len() as u32;
        check_width(width)?;
        let mut index = 0u32;
        for &d in digits {
            if d > 1 {
                return Err(Error::invalid("digits", format!("{d} is not a binary digit")));
            }
            index = (index << 1) | d as u32;
        }
        Ok(BinaryCode { index, width })
    }
}

impl fmt::Display for BinaryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.index, width = self.width as usize)
    }
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::invalid(
            "width",
            format!("must be in 1..={MAX_WIDTH}, got {width}"),
        ));
    }
    Ok(())
}

fn check_index(index: u32, width: u32) -> Result<()> {
    let bound = 1u64 << width;
    if u64::from(index) >= bound {
        return Err(Error::IndexOutOfRange {
            index: index.into(),
            bound,
        });
    }
    Ok(())
}

pub fn binary_code(index: u32, width: u32) -> Result<BinaryCode> {
    check_width(width)?;
    check_index(index, width)?;
    Ok(BinaryCode { index, width })
}

/// Hamming distance between the width-`width` codes of `a` and `b`.
pub fn class_distance(a: u32, b: u32, width: u32) -> Result<u32> {
    check_width(width)?;
    check_index(a, width)?;
    check_index(b, width)?;
    Ok((a ^ b).count_ones())
}

/// Two sub-distributions sharing an isotropic covariance, locations one unit apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubDistributionPair {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// Standard deviation of every coordinate; the covariance is `sigma²·I`.
    pub sigma: f64,
}

impl SubDistributionPair {
    pub fn location(&self, bit: bool) -> &[f64] {
        if bit {
            &self.mu1
        } else {
            &self.mu0
        }
    }

    pub fn covariance(&self) -> Array2<f64> {
        Array2::eye(self.mu0.len()) * (self.sigma * self.sigma)
    }

    pub fn separation(&self) -> f64 {
        self.mu0
            .iter()
            .zip(&self.mu1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Serializable generation parameters of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub p: u32,
    pub r: usize,
    pub sigma_scale: f64,
    pub seed: u64,
}

/// One class of the family: its code and the per-pair locations it selects.
#[derive(Debug, Clone)]
pub struct ClassSpec<'a> {
    pub code: BinaryCode,
    pub locations: Vec<&'a [f64]>,
}

impl ClassSpec<'_> {
    pub fn mean(&self) -> Array1<f64> {
        self.locations.iter().flat_map(|loc| loc.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFamily {
    params: FamilyParams,
    pairs: Vec<SubDistributionPair>,
}

impl DistributionFamily {
    pub fn params(&self) -> FamilyParams {
        self.params
    }

    pub fn p(&self) -> u32 {
        self.params.p
    }

    pub fn r(&self) -> usize {
        self.params.r
    }

    pub fn sigma_scale(&self) -> f64 {
        self.params.sigma_scale
    }

    pub fn pairs(&self) -> &[SubDistributionPair] {
        &self.pairs
    }

    /// Ambient dimension `p·r`.
    pub fn dim(&self) -> usize {
        self.params.p as usize * self.params.r
    }

    pub fn num_classes(&self) -> u64 {
        1u64 << self.params.p
    }

    pub fn class_spec(&self, index: u32) -> Result<ClassSpec<'_>> {
        let code = binary_code(index, self.params.p)?;
        let locations = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| pair.location(code.bit(i as u32)))
            .collect();
        Ok(ClassSpec { code, locations })
    }
}

/// Builds the `p` location pairs.
///
/// `mu0` has independent standard-normal coordinates and `mu1 = mu0 + u` for a
/// uniformly random unit vector `u`.
pub fn build_family(p: u32, r: usize, sigma_scale: f64, seed: u64) -> Result<DistributionFamily> {
    check_width(p)?;
    if r == 0 {
        return Err(Error::invalid("r", "must be at least 1"));
    }
    if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
        return Err(Error::invalid(
            "sigma_scale",
            format!("must be positive and finite, got {sigma_scale}"),
        ));
    }
    let mut rng = seed::rng(seed::derive(seed, seed::stream::FAMILY));
    let mut pairs = Vec::with_capacity(p as usize);
    for _ in 0..p {
        let mu0: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        let dir = loop {
            let v: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let mu1 = mu0.iter().zip(&dir).map(|(m, u)| m + u).collect();
        pairs.push(SubDistributionPair {
            mu0,
            mu1,
            sigma: sigma_scale,
        });
    }
    Ok(DistributionFamily {
        params: FamilyParams {
            p,
            r,
            sigma_scale,
            seed,
        },
        pairs,
    })
}

impl FamilyParams {
    pub fn build(&self) -> Result<DistributionFamily> {
        build_family(self.p, self.r, self.sigma_scale, self.seed)
    }
}

/// Draws `n` points of class `index`, one row per point.
pub fn sample_class(family: &DistributionFamily, index: u32, n: usize, seed: u64) -> Result<Array2<f64>> {
    let spec = family.class_spec(index)?;
    let mean = spec.mean();
    let sigma = family.sigma_scale();
    let mut rng = seed::rng(seed);
    let mut out = Array2::zeros((n, family.dim()));
    for mut row in out.rows_mut() {
        for (x, m) in row.iter_mut().zip(mean.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *x = m + sigma * z;
        }
    }
    Ok(out)
}

/// Exact centroid of class `index`.
pub fn class_mean(family: &DistributionFamily, index: u32) -> Result<Array1<f64>> {
    Ok(family.class_spec(index)?.mean())
}

pub fn euclidean(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).mapv(|x| x * x).sum().sqrt()
}
