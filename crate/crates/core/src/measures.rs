//! Point clouds, finitely supported probability measures and seeded samplers.
//!
//! Balls follow the open convention `B_r = {|x| < r}`: [`restrict`] keeps atoms
//! with `|x| < r` and [`tail_mass`] counts atoms with `|x| ≥ r`, so an atom sitting
//! exactly on the sphere belongs to the tail.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::{fmt_f64, parse_f64};

/// Tolerance on `Σ w = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("a measure needs at least one atom")]
    Empty,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("weight {index} is negative or not finite: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("no atom lies in the open ball of radius {radius}")]
    NoMassInBall { radius: f64 },
    #[error("family `{0}` has no sampler")]
    UnknownFamily(String),
    #[error("invalid sampler parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid tail profile: {0}")]
    InvalidProfile(String),
    #[error("malformed point file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A sequence of points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::InvalidParameter("dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(MeasureError::Parse(format!(
                "{} coordinates are not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MeasureError> {
        let first = rows.first().ok_or(MeasureError::Empty)?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for (index, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(MeasureError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Points on the real line.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Self { dim: 1, data: xs.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Keeps the points selected by `keep`, in order.
    pub fn select(&self, mut keep: impl FnMut(usize, &[f64]) -> bool) -> Self {
        let mut data = Vec::new();
        for (i, x) in self.iter().enumerate() {
            if keep(i, x) {
                data.extend_from_slice(x);
            }
        }
        Self { dim: self.dim, data }
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "point dimension");
        self.data.extend_from_slice(x);
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// One point per row. A non-numeric first row is treated as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MeasureError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let values: Option<Vec<f64>> = record.iter().map(parse_f64).collect();
            match values {
                Some(v) => rows.push(v),
                None if line == 0 => continue,
                None => return Err(MeasureError::Parse(format!("non-numeric field on row {line}"))),
            }
        }
        Self::from_rows(&rows)
    }
}

/// Neumaier-compensated sum.
pub fn accurate_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// A finitely supported probability measure `Σ w_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    points: PointCloud,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(repr: MeasureRepr) -> Result<Self, Self::Error> {
        let points = PointCloud::from_rows(&repr.points)?;
        if points.dim() != repr.dim {
            return Err(MeasureError::DimensionMismatch {
                index: 0,
                expected: repr.dim,
                found: points.dim(),
            });
        }
        DiscreteMeasure::new(points, repr.weights)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            dim: m.dim(),
            points: m.points.to_rows(),
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    pub fn new(points: PointCloud, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::Empty);
        }
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MeasureError::InvalidWeight { index, value });
            }
        }
        let total = accurate_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(Self { points, weights })
    }

    /// Normalizes nonnegative masses to a probability vector.
    pub fn from_masses(points: PointCloud, masses: Vec<f64>) -> Result<Self, MeasureError> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(MeasureError::NotNormalized(total));
        }
        Self::new(points, masses.iter().map(|m| m / total).collect())
    }

    pub fn uniform(points: PointCloud) -> Result<Self, MeasureError> {
        let n = points.len();
        if n == 0 {
            return Err(MeasureError::Empty);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(x: &[f64]) -> Self {
        Self {
            points: PointCloud { dim: x.len(), data: x.to_vec() },
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    /// Atoms carrying positive weight.
    pub fn support(&self) -> PointCloud {
        self.points.select(|i, _| self.weights[i] > 0.0)
    }

    /// Multiplies every coordinate by `factor`.
    pub fn dilate(&self, factor: f64) -> Self {
        Self {
            points: self.points.scaled(factor),
            weights: self.weights.clone(),
        }
    }

    /// Translates every atom by `shift`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim(), "shift dimension");
        let mut data = self.points.data.clone();
        for x in data.chunks_exact_mut(self.dim()) {
            for (v, s) in x.iter_mut().zip(shift) {
                *v += s;
            }
        }
        Self {
            points: PointCloud { dim: self.dim(), data },
            weights: self.weights.clone(),
        }
    }

    /// Collapses coincident atoms into one atom carrying their summed weight.
    /// Atoms keep the order of their first appearance.
    pub fn merge_duplicates(&self) -> Self {
        let mut index: std::collections::HashMap<Vec<u64>, usize> = Default::default();
        let mut points = PointCloud::empty(self.dim());
        let mut weights = Vec::new();
        for (x, &w) in self.points.iter().zip(&self.weights) {
            // -0.0 and 0.0 are the same location
            let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&k) => weights[k] += w,
                None => {
                    index.insert(key, weights.len());
                    points.push(x);
                    weights.push(w);
                }
            }
        }
        Self { points, weights }
    }

    /// Total weight of atoms with `|x| < r`.
    pub fn weight_in_open_ball(&self, r: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(x, _)| norm(x) < r)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MeasureError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (x, &wt) in self.points.iter().zip(&self.weights) {
            let mut row: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
            row.push(fmt_f64(wt));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows of `d` coordinates followed by a weight. A non-numeric first
    /// row is treated as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MeasureError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let values: Option<Vec<f64>> = record.iter().map(parse_f64).collect();
            let Some(values) = values else {
                if line == 0 {
                    continue;
                }
                return Err(MeasureError::Parse(format!("non-numeric field on row {line}")));
            };
            if values.len() < 2 {
                return Err(MeasureError::Parse(format!(
                    "row {line} needs coordinates and a weight"
                )));
            }
            let (coords, w) = values.split_at(values.len() - 1);
            rows.push(coords.to_vec());
            weights.push(w[0]);
        }
        let points = PointCloud::from_rows(&rows)?;
        Self::new(points, weights)
    }

    pub fn to_json(&self) -> Result<String, MeasureError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, MeasureError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Empirical measure: uniform weights `1/n`, duplicates kept as separate atoms.
pub fn empirical(points: PointCloud) -> Result<DiscreteMeasure, MeasureError> {
    DiscreteMeasure::uniform(points)
}

/// Conditional measure on the open ball `B_radius(0)`.
///
/// For uniform weights the result is uniform over the surviving atoms, which is
/// the empirical measure of the samples falling into the ball.
pub fn restrict(m: &DiscreteMeasure, radius: f64) -> Result<DiscreteMeasure, MeasureError> {
    let mut points = PointCloud::empty(m.dim());
    let mut masses = Vec::new();
    for (x, &w) in m.points.iter().zip(&m.weights) {
        if norm(x) < radius {
            points.push(x);
            masses.push(w);
        }
    }
    let total: f64 = masses.iter().sum();
    if points.is_empty() || !(total > 0.0) {
        return Err(MeasureError::NoMassInBall { radius });
    }
    let weights = masses.iter().map(|w| w / total).collect();
    Ok(DiscreteMeasure { points, weights })
}

/// Conditional measure on the complement `B_radius^c`, or `None` if it is null.
pub fn restrict_complement(m: &DiscreteMeasure, radius: f64) -> Option<DiscreteMeasure> {
    let mut points = PointCloud::empty(m.dim());
    let mut masses = Vec::new();
    for (x, &w) in m.points.iter().zip(&m.weights) {
        if norm(x) >= radius {
            points.push(x);
            masses.push(w);
        }
    }
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let weights = masses.iter().map(|w| w / total).collect();
    Some(DiscreteMeasure { points, weights })
}

/// `∫ |x|^p dm`.
pub fn moment_pow(m: &DiscreteMeasure, p: f64) -> f64 {
    m.points
        .iter()
        .zip(&m.weights)
        .map(|(x, w)| w * norm(x).powf(p))
        .sum()
}

/// `M_p(m) = (∫ |x|^p dm)^{1/p}`.
pub fn moment(m: &DiscreteMeasure, p: f64) -> f64 {
    assert!(p >= 1.0, "moment order must be at least 1");
    moment_pow(m, p).powf(1.0 / p)
}

/// `m(B_r^c)`: weight of atoms with `|x| ≥ r`.
pub fn tail_mass(m: &DiscreteMeasure, r: f64) -> f64 {
    m.points
        .iter()
        .zip(&m.weights)
        .filter(|(x, _)| norm(x) >= r)
        .map(|(_, w)| w)
        .sum()
}

/// Distribution family attached to a tail profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    Gaussian,
    Exponential,
    Compact { radius: f64 },
    DiscreteAtoms,
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Compact { .. } => "compact",
            Family::DiscreteAtoms => "discrete_atoms",
            Family::Custom => "custom",
        }
    }
}

/// Exponential tail envelope `m(B_r^c) ≤ 2 exp(−c r^α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub c: f64,
    pub alpha: f64,
    pub family: Family,
}

impl TailProfile {
    pub fn new(c: f64, alpha: f64, family: Family) -> Result<Self, MeasureError> {
        let profile = Self { c, alpha, family };
        profile.validate()?;
        Ok(profile)
    }

    pub fn custom(c: f64, alpha: f64) -> Result<Self, MeasureError> {
        Self::new(c, alpha, Family::Custom)
    }

    /// `N(0, σ² I_d)`: `c = 1/(dσ²)` for `d ≥ 2`. In one dimension that
    /// constant is not an envelope (it fails around `r ≈ 2.2σ`), so `d = 1`
    /// uses the Chernoff constant `1/(2σ²)`.
    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self, MeasureError> {
        if !(sigma > 0.0) {
            return Err(MeasureError::InvalidParameter("sigma must be positive".into()));
        }
        let d = dim.max(2) as f64;
        Self::new(1.0 / (d * sigma * sigma), 2.0, Family::Gaussian)
    }

    /// Radius `R = scale · Exp(1)` with a uniform direction: `P(|X| ≥ r) = e^{−r/scale}`.
    pub fn exponential(scale: f64) -> Result<Self, MeasureError> {
        if !(scale > 0.0) {
            return Err(MeasureError::InvalidParameter("scale must be positive".into()));
        }
        Self::new(1.0 / scale, 1.0, Family::Exponential)
    }

    /// Any measure on the closed ball of radius `R`: with `c = ln 2 / R²`,
    /// `2 exp(−c r²) ≥ 1` on `r ≤ R` and the tail vanishes beyond.
    pub fn compact(radius: f64) -> Result<Self, MeasureError> {
        if !(radius > 0.0) {
            return Err(MeasureError::InvalidParameter("radius must be positive".into()));
        }
        Self::new(std::f64::consts::LN_2 / (radius * radius), 2.0, Family::Compact { radius })
    }

    /// Envelope for a finitely supported measure, built like [`TailProfile::compact`].
    pub fn for_atoms(m: &DiscreteMeasure) -> Self {
        let radius = m.points.iter().map(norm).fold(0.0, f64::max);
        let c = if radius > 0.0 {
            std::f64::consts::LN_2 / (radius * radius)
        } else {
            1.0
        };
        Self { c, alpha: 2.0, family: Family::DiscreteAtoms }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(MeasureError::InvalidProfile(format!("c = {} must be positive", self.c)));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(MeasureError::InvalidProfile(format!(
                "alpha = {} must be at least 1",
                self.alpha
            )));
        }
        if let Family::Compact { radius } = self.family {
            if !(radius > 0.0) {
                return Err(MeasureError::InvalidProfile("compact radius must be positive".into()));
            }
        }
        Ok(())
    }

    /// Upper envelope for `m(B_r^c)`, capped at 1; exactly 0 beyond a compact radius.
    pub fn tail_envelope(&self, r: f64) -> f64 {
        if let Family::Compact { radius } = self.family {
            if r > radius {
                return 0.0;
            }
        }
        (2.0 * (-self.c * r.powf(self.alpha)).exp()).min(1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<DiscreteMeasure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub profile: TailProfile,
    pub dim: usize,
    #[serde(default)]
    pub parameters: SamplerParams,
}

impl SamplerSpec {
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self, MeasureError> {
        Ok(Self {
            profile: TailProfile::gaussian(sigma, dim)?,
            dim,
            parameters: SamplerParams { scale: Some(sigma), ..Default::default() },
        })
    }

    pub fn exponential(dim: usize, scale: f64) -> Result<Self, MeasureError> {
        Ok(Self {
            profile: TailProfile::exponential(scale)?,
            dim,
            parameters: SamplerParams { scale: Some(scale), ..Default::default() },
        })
    }

    /// Uniform on the ball of the given radius.
    pub fn uniform_ball(dim: usize, radius: f64) -> Result<Self, MeasureError> {
        Ok(Self {
            profile: TailProfile::compact(radius)?,
            dim,
            parameters: SamplerParams::default(),
        })
    }

    pub fn atoms(measure: DiscreteMeasure) -> Self {
        Self {
            profile: TailProfile::for_atoms(&measure),
            dim: measure.dim(),
            parameters: SamplerParams { atoms: Some(measure), ..Default::default() },
        }
    }

    /// The ground-truth measure of a `discrete_atoms` sampler.
    pub fn ground_truth(&self) -> Option<&DiscreteMeasure> {
        match self.profile.family {
            Family::DiscreteAtoms => self.parameters.atoms.as_ref(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        self.profile.validate()?;
        if self.dim == 0 {
            return Err(MeasureError::InvalidParameter("dimension must be positive".into()));
        }
        if let Some(mean) = &self.parameters.mean {
            if mean.len() != self.dim {
                return Err(MeasureError::InvalidParameter(format!(
                    "mean has {} entries for dimension {}",
                    mean.len(),
                    self.dim
                )));
            }
        }
        match &self.profile.family {
            Family::Gaussian | Family::Exponential => {
                let scale = self.parameters.scale.ok_or_else(|| {
                    MeasureError::InvalidParameter("missing scale parameter".into())
                })?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(MeasureError::InvalidParameter(format!(
                        "scale must be positive, got {scale}"
                    )));
                }
            }
            Family::Compact { .. } => {}
            Family::DiscreteAtoms => {
                let atoms = self.parameters.atoms.as_ref().ok_or_else(|| {
                    MeasureError::InvalidParameter("discrete_atoms needs an atom list".into())
                })?;
                if atoms.dim() != self.dim {
                    return Err(MeasureError::InvalidParameter(
                        "atom dimension differs from sampler dimension".into(),
                    ));
                }
            }
            Family::Custom => return Err(MeasureError::UnknownFamily("custom".into())),
        }
        Ok(())
    }
}

/// Deterministic generator for the `stream`-th substream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` i.i.d. points; a pure function of `(spec, n, seed)`.
pub fn sample(spec: &SamplerSpec, n: usize, seed: u64) -> Result<PointCloud, MeasureError> {
    sample_with(spec, n, &mut stream_rng(seed, 0))
}

pub fn sample_with<R: Rng + ?Sized>(
    spec: &SamplerSpec,
    n: usize,
    rng: &mut R,
) -> Result<PointCloud, MeasureError> {
    if n == 0 {
        return Err(MeasureError::InvalidParameter("sample size must be positive".into()));
    }
    spec.validate()?;
    let d = spec.dim;
    let mut data = Vec::with_capacity(n * d);
    match &spec.profile.family {
        Family::Gaussian => {
            let sigma = spec.parameters.scale.unwrap_or(1.0);
            for _ in 0..n * d {
                let z: f64 = rng.sample(StandardNormal);
                data.push(sigma * z);
            }
        }
        Family::Exponential => {
            let scale = spec.parameters.scale.unwrap_or(1.0);
            let radial = Exp::new(1.0).expect("unit rate");
            for _ in 0..n {
                let r = scale * radial.sample(rng);
                push_direction(rng, d, r, &mut data);
            }
        }
        Family::Compact { radius } => {
            for _ in 0..n {
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / d as f64);
                push_direction(rng, d, r, &mut data);
            }
        }
        Family::DiscreteAtoms => {
            let atoms = spec.parameters.atoms.as_ref().expect("validated");
            let index = WeightedIndex::new(atoms.weights())
                .map_err(|e| MeasureError::InvalidParameter(e.to_string()))?;
            for _ in 0..n {
                data.extend_from_slice(atoms.point(index.sample(rng)));
            }
        }
        Family::Custom => unreachable!("rejected by validate"),
    }
    if let Some(mean) = &spec.parameters.mean {
        for x in data.chunks_exact_mut(d) {
            for (v, m) in x.iter_mut().zip(mean) {
                *v += m;
            }
        }
    }
    PointCloud::new(d, data)
}

fn push_direction<R: Rng + ?Sized>(rng: &mut R, d: usize, r: f64, out: &mut Vec<f64>) {
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&z);
        if len > 0.0 {
            out.extend(z.iter().map(|v| r * v / len));
            return;
        }
    }
}
