//! Datasets, genotype → phenotype providers and the viability filter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::genome::{ncd, GeneticTopology, Genotype};
use crate::math::{abs, ln, sqrt};
use crate::stats::{jarque_bera, mean, pearson_r2, variance};

/// Molecules with their observed activity `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    molecule_ids: Vec<String>,
    activity: Vec<f64>,
}

impl Dataset {
    pub fn new(molecule_ids: Vec<String>, activity: Vec<f64>) -> Result<Self> {
        if molecule_ids.len() != activity.len() {
            return Err(Error::LengthMismatch {
                expected: molecule_ids.len(),
                found: activity.len(),
            });
        }
        if activity.len() < 3 {
            return Err(Error::InvalidArgument("a dataset needs at least 3 molecules".into()));
        }
        if activity.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("activity values must be finite".into()));
        }
        let mut seen = BTreeSet::new();
        for id in &molecule_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(alloc::format!("duplicate molecule id {id}")));
            }
        }
        Ok(Self {
            molecule_ids,
            activity,
        })
    }

    pub fn molecule_ids(&self) -> &[String] {
        &self.molecule_ids
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn len(&self) -> usize {
        self.activity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activity.is_empty()
    }
}

/// Descriptor values of one genotype over the molecule set.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    pub values: Vec<f64>,
    pub genotype: Genotype,
}

/// Realizes genotypes as phenotypes.
pub trait DescriptorProvider {
    /// `None` when the provider has no phenotype for `genotype`.
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype>;

    /// Every genotype the provider knows, when that set is finite and small
    /// enough to enumerate. Sample initialization draws from it instead of
    /// the whole topology.
    fn catalog(&self) -> Option<Vec<Genotype>> {
        None
    }
}

impl<P: DescriptorProvider + ?Sized> DescriptorProvider for &P {
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype> {
        (**self).provide(genotype)
    }

    fn catalog(&self) -> Option<Vec<Genotype>> {
        (**self).catalog()
    }
}

impl<P: DescriptorProvider + ?Sized> DescriptorProvider for alloc::boxed::Box<P> {
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype> {
        (**self).provide(genotype)
    }

    fn catalog(&self) -> Option<Vec<Genotype>> {
        (**self).catalog()
    }
}

/// Exact lookup of stored descriptor rows keyed by rendered genotype.
#[derive(Debug, Clone)]
pub struct TableProvider {
    rows: BTreeMap<Genotype, Vec<f64>>,
    width: usize,
}

impl TableProvider {
    /// Builds the table from `(rendered genotype, values)` rows. Every key
    /// must parse against `topology` and every row must have `width` values.
    pub fn new<I>(topology: &GeneticTopology, separator: &str, width: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut map = BTreeMap::new();
        for (key, values) in rows {
            if values.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    found: values.len(),
                });
            }
            let genotype = topology.parse(&key, separator)?;
            if map.insert(genotype, values).is_some() {
                return Err(Error::InvalidArgument(alloc::format!("duplicate descriptor row {key}")));
            }
        }
        Ok(Self { rows: map, width })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn genotypes(&self) -> impl Iterator<Item = &Genotype> {
        self.rows.keys()
    }
}

impl DescriptorProvider for TableProvider {
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype> {
        self.rows.get(genotype).map(|values| Phenotype {
            values: values.clone(),
            genotype: genotype.clone(),
        })
    }

    fn catalog(&self) -> Option<Vec<Genotype>> {
        Some(self.rows.keys().cloned().collect())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(h: u64) -> f64 {
    // 53 random bits in [0, 1)
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

const PLANT_TAG: u64 = 0x706c_616e_7465_6400;
const NOISE_TAG: u64 = 0x6e6f_6973_6500_0000;

/// Designated genotypes whose values jointly carry the activity signal.
///
/// The centered activity is split into `k` parts `Y/k + d_j`, where the
/// deviations `d_j` sum to zero and have the spread of `Y/k`. The planted
/// set therefore reproduces `Y` exactly (up to noise) while one member alone
/// explains about `1/k` of it. Each part is rescaled to the mean and spread
/// of the uniform background; `noise_sd` is measured in units of that
/// spread. With `locality > 0`, a genotype at distance `d` from its nearest
/// planted genotype blends toward that genotype's part with weight
/// `(1 - d/NC)^locality`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub genotypes: Vec<Genotype>,
    pub noise_sd: f64,
    pub locality: f64,
}

/// Deterministic pseudo-descriptors derived from a hash of
/// `(seed, genotype, molecule)`, uniform on `[low, high)`.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    seed: u64,
    low: f64,
    high: f64,
    activity: Vec<f64>,
    planted: Option<PlantedSignal>,
    /// Values of each planted genotype.
    components: Vec<Vec<f64>>,
}

impl SyntheticProvider {
    pub fn new(seed: u64, low: f64, high: f64, dataset: &Dataset) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidConfig("synthetic interval needs low < high".into()));
        }
        Ok(Self {
            seed,
            low,
            high,
            activity: dataset.activity().to_vec(),
            planted: None,
            components: Vec::new(),
        })
    }

    pub fn with_planted(mut self, planted: PlantedSignal) -> Result<Self> {
        if planted.genotypes.is_empty() {
            return Err(Error::InvalidConfig("planted signal needs at least one genotype".into()));
        }
        let len = planted.genotypes[0].len();
        if planted.genotypes.iter().any(|g| g.len() != len) {
            return Err(Error::TopologyMismatch);
        }
        let distinct: BTreeSet<&Genotype> = planted.genotypes.iter().collect();
        if distinct.len() != planted.genotypes.len() {
            return Err(Error::InvalidConfig("planted genotypes must be distinct".into()));
        }
        if !(planted.noise_sd >= 0.0 && planted.locality >= 0.0) {
            return Err(Error::InvalidConfig("noise and locality must be >= 0".into()));
        }
        self.components = self.split_activity(&planted);
        self.planted = Some(planted);
        Ok(self)
    }

    fn split_activity(&self, planted: &PlantedSignal) -> Vec<Vec<f64>> {
        let k = planted.genotypes.len();
        let m = self.activity.len();
        let y_mean = mean(&self.activity);
        let y_sd = sqrt(variance(&self.activity));
        let kf = k as f64;
        // raw deviations before the zero-sum projection
        let scale = if k > 1 { y_sd / kf / sqrt(1.0 - 1.0 / kf) } else { 0.0 };
        let raw: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let key = splitmix(self.seed ^ PLANT_TAG ^ j as u64);
                (0..m).map(|i| scale * self.gaussian(key, i)).collect()
            })
            .collect();
        let mid = 0.5 * (self.low + self.high);
        let spread = (self.high - self.low) / sqrt(12.0);
        (0..k)
            .map(|j| {
                let part: Vec<f64> = (0..m)
                    .map(|i| {
                        let centre = raw.iter().map(|r| r[i]).sum::<f64>() / kf;
                        (self.activity[i] - y_mean) / kf + raw[j][i] - centre
                    })
                    .collect();
                let mu = mean(&part);
                let sd = sqrt(variance(&part));
                let noise_key = splitmix(self.seed ^ PLANT_TAG ^ NOISE_TAG ^ j as u64);
                (0..m)
                    .map(|i| {
                        let z = if sd > 0.0 { (part[i] - mu) / sd } else { 0.0 };
                        mid + spread * (z + planted.noise_sd * self.gaussian(noise_key, i))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn planted(&self) -> Option<&PlantedSignal> {
        self.planted.as_ref()
    }

    fn genotype_key(&self, genotype: &Genotype) -> u64 {
        genotype
            .alleles()
            .iter()
            .fold(splitmix(self.seed), |h, &a| splitmix(h ^ u64::from(a)))
    }

    fn uniform(&self, key: u64, molecule: usize) -> f64 {
        let u = unit(splitmix(key ^ splitmix(molecule as u64)));
        self.low + (self.high - self.low) * u
    }

    fn gaussian(&self, key: u64, molecule: usize) -> f64 {
        let h = splitmix(key ^ splitmix(molecule as u64 ^ NOISE_TAG));
        let u1 = 1.0 - unit(h); // (0, 1]
        let u2 = unit(splitmix(h));
        sqrt(-2.0 * ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    fn values(&self, genotype: &Genotype) -> Vec<f64> {
        let key = self.genotype_key(genotype);
        let m = self.activity.len();
        let Some(planted) = &self.planted else {
            return (0..m).map(|i| self.uniform(key, i)).collect();
        };
        let nearest = planted
            .genotypes
            .iter()
            .enumerate()
            .filter_map(|(j, g)| ncd(g, genotype).ok().map(|d| (d, j)))
            .min();
        match nearest {
            Some((0, j)) => self.components[j].clone(),
            Some((d, j)) if planted.locality > 0.0 => {
                let nc = genotype.len() as f64;
                let w = libm::pow(1.0 - d as f64 / nc, planted.locality);
                (0..m)
                    .map(|i| w * self.components[j][i] + (1.0 - w) * self.uniform(key, i))
                    .collect()
            }
            _ => (0..m).map(|i| self.uniform(key, i)).collect(),
        }
    }
}

impl DescriptorProvider for SyntheticProvider {
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype> {
        Some(Phenotype {
            values: self.values(genotype),
            genotype: genotype.clone(),
        })
    }
}

/// Optional viability checks beyond finiteness and non-constancy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViabilityPolicy {
    /// Floor on `|sd / mean|`.
    pub min_cv: Option<f64>,
    /// Jarque-Bera p-value must be at least this.
    pub jb_alpha: Option<f64>,
    /// Floor on the simple-regression r² with the activity.
    pub min_simple_r2: Option<f64>,
}

impl ViabilityPolicy {
    pub fn validate(&self) -> Result<()> {
        if let Some(cv) = self.min_cv {
            if !(cv >= 0.0 && cv.is_finite()) {
                return Err(Error::InvalidConfig("min_cv must be a nonnegative real".into()));
            }
        }
        for (name, v) in [("jb_alpha", self.jb_alpha), ("min_simple_r2", self.min_simple_r2)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidConfig(alloc::format!("{name} must lie in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Why a candidate descriptor was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViabilityFailure {
    Absent,
    NonFinite,
    Constant,
    LowVariation,
    NonNormal,
    LowExplanation,
    Duplicate,
}

impl fmt::Display for ViabilityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViabilityFailure::Absent => "absent",
            ViabilityFailure::NonFinite => "non-finite",
            ViabilityFailure::Constant => "constant",
            ViabilityFailure::LowVariation => "low-variation",
            ViabilityFailure::NonNormal => "non-normal",
            ViabilityFailure::LowExplanation => "low-explanation",
            ViabilityFailure::Duplicate => "duplicate",
        })
    }
}

/// Per-criterion outcome; optional criteria are `None` when not configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViabilityReport {
    pub finite: bool,
    pub not_constant: bool,
    pub variation: Option<bool>,
    pub normality: Option<bool>,
    pub explanation: Option<bool>,
}

impl ViabilityReport {
    pub fn passed(&self) -> bool {
        self.finite
            && self.not_constant
            && self.variation != Some(false)
            && self.normality != Some(false)
            && self.explanation != Some(false)
    }

    /// The first failing criterion.
    pub fn failure(&self) -> Option<ViabilityFailure> {
        if !self.finite {
            Some(ViabilityFailure::NonFinite)
        } else if !self.not_constant {
            Some(ViabilityFailure::Constant)
        } else if self.variation == Some(false) {
            Some(ViabilityFailure::LowVariation)
        } else if self.normality == Some(false) {
            Some(ViabilityFailure::NonNormal)
        } else if self.explanation == Some(false) {
            Some(ViabilityFailure::LowExplanation)
        } else {
            None
        }
    }
}

pub fn check_viability(
    phenotype: &Phenotype,
    dataset: &Dataset,
    policy: &ViabilityPolicy,
) -> Result<ViabilityReport> {
    let x = &phenotype.values;
    if x.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            found: x.len(),
        });
    }
    let finite = x.iter().all(|v| v.is_finite());
    let not_constant = x.iter().any(|v| *v != x[0]);
    let usable = finite && not_constant;

    let variation = policy.min_cv.map(|floor| {
        usable && {
            let mu = mean(x);
            let sd = sqrt(variance(x));
            // zero mean with spread counts as unbounded variation
            mu == 0.0 || abs(sd / mu) >= floor
        }
    });
    let normality = policy.jb_alpha.map(|alpha| {
        usable
            && jarque_bera(x)
                .map(|jb| jb.p_value >= alpha)
                .unwrap_or(false)
    });
    let explanation = policy
        .min_simple_r2
        .map(|floor| usable && pearson_r2(x, dataset.activity()) >= floor);

    Ok(ViabilityReport {
        finite,
        not_constant,
        variation,
        normality,
        explanation,
    })
}
