//! TOML configuration: the evolution parameters and the run manifest that
//! binds topology, data and output locations.

use std::path::{Path, PathBuf};

use galgo_core::descriptors::{
    Dataset, DescriptorProvider, Phenotype, PlantedSignal, SyntheticProvider, TableProvider,
    ViabilityPolicy,
};
use galgo_core::engine::EvolutionConfig;
use galgo_core::genome::{GeneticTopology, Genotype, MutationMode};
use galgo_core::regress::{InterceptMode, ValidityRules};
use galgo_core::scores::{ObjectiveKind, ObjectiveSpec, SelectionAggregate, DEFAULT_VS_CAP};
use galgo_core::strategy::{Method, StrategySpec};
use serde::{Deserialize, Serialize};

use crate::data::{read_activity, read_descriptors};
use crate::error::{read_to_string, CliError, CliResult};
use crate::topology::load_cgt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Proportional,
    Deterministic,
    Tournament,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Proportional => Method::Proportional,
            MethodName::Deterministic => Method::Deterministic,
            MethodName::Tournament => Method::Tournament,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveName {
    Se,
    R2,
    Mt,
    Hr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateName {
    Nalive,
    Min,
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationName {
    PerGenotype,
    PerGene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterceptName {
    Fallback,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: ObjectiveName,
    #[serde(default = "one")]
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub method: MethodName,
    #[serde(default = "default_aggregate")]
    pub aggregate: AggregateName,
    #[serde(default)]
    pub use_ranks: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalSection {
    pub method: MethodName,
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_vs_cap")]
    pub vs_cap: f64,
    #[serde(default)]
    pub use_ranks: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValiditySection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_unique_offset")]
    pub unique_offset: usize,
    #[serde(default = "default_significance_offset")]
    pub significance_offset: usize,
}

impl Default for ValiditySection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            unique_offset: default_unique_offset(),
            significance_offset: default_significance_offset(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViabilitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jb_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_simple_r2: Option<f64>,
}

/// Evolution parameters as written in a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionFile {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_pp")]
    pub pp: f64,
    #[serde(default = "default_cp")]
    pub cp: f64,
    #[serde(default = "default_mutation")]
    pub mutation: MutationName,
    #[serde(default = "yes")]
    pub keep_best: bool,
    pub max_generations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_objective: Option<f64>,
    #[serde(default = "default_intercept")]
    pub intercept_mode: InterceptName,
    #[serde(default = "default_init_attempts")]
    pub init_attempts_per_slot: usize,
    pub objective: ObjectiveSection,
    pub selection: SelectionSection,
    pub survival: SurvivalSection,
    #[serde(default)]
    pub validity: ValiditySection,
    #[serde(default)]
    pub viability: ViabilitySection,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_aggregate() -> AggregateName {
    AggregateName::Max
}
fn default_vs_cap() -> f64 {
    DEFAULT_VS_CAP
}
fn default_alpha() -> f64 {
    0.05
}
fn default_unique_offset() -> usize {
    1
}
fn default_significance_offset() -> usize {
    6
}
fn default_pp() -> f64 {
    0.1
}
fn default_cp() -> f64 {
    0.3
}
fn default_mutation() -> MutationName {
    MutationName::PerGenotype
}
fn default_intercept() -> InterceptName {
    InterceptName::Fallback
}
fn default_init_attempts() -> usize {
    200
}

impl EvolutionFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read_to_string(path)?).map_err(|e| e.in_file(path))
    }

    /// Canonical TOML text; also the input of the config fingerprint.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("evolution config serializes")
    }

    pub fn to_config(&self, seed: u64) -> CliResult<EvolutionConfig> {
        let kind = match self.objective.kind {
            ObjectiveName::Se => ObjectiveKind::Se,
            ObjectiveName::R2 => ObjectiveKind::R2,
            ObjectiveName::Mt => ObjectiveKind::Mt,
            ObjectiveName::Hr => ObjectiveKind::Hr,
        };
        let strategy = |method: MethodName, use_ranks, norm: Option<[f64; 2]>, digits| StrategySpec {
            method: method.into(),
            use_ranks,
            normalization: norm.map(|[a, b]| (a, b)),
            significant_digits: digits,
        };
        Ok(EvolutionConfig {
            p: self.p,
            n: self.n,
            k: self.k,
            pp: self.pp,
            cp: self.cp,
            mutation: match self.mutation {
                MutationName::PerGenotype => MutationMode::PerGenotype,
                MutationName::PerGene => MutationMode::PerGene,
            },
            keep_best: self.keep_best,
            objective: ObjectiveSpec::new(kind, self.objective.s)?,
            selection: strategy(
                self.selection.method,
                self.selection.use_ranks,
                self.selection.normalization,
                self.selection.digits,
            ),
            survival: strategy(
                self.survival.method,
                self.survival.use_ranks,
                self.survival.normalization,
                self.survival.digits,
            ),
            selection_aggregate: match self.selection.aggregate {
                AggregateName::Nalive => SelectionAggregate::NAlive,
                AggregateName::Min => SelectionAggregate::Min,
                AggregateName::Max => SelectionAggregate::Max,
                AggregateName::Avg => SelectionAggregate::Avg,
            },
            q: self.survival.q,
            r: self.survival.r,
            vs_cap: self.survival.vs_cap,
            validity: ValidityRules {
                alpha: self.validity.alpha,
                unique_offset: self.validity.unique_offset,
                significance_offset: self.validity.significance_offset,
            },
            viability: ViabilityPolicy {
                min_cv: self.viability.min_cv,
                jb_alpha: self.viability.jb_alpha,
                min_simple_r2: self.viability.min_simple_r2,
            },
            intercept_mode: match self.intercept_mode {
                InterceptName::Fallback => InterceptMode::Fallback,
                InterceptName::Both => InterceptMode::Both,
            },
            max_generations: self.max_generations,
            target_objective: self.target_objective,
            seed,
            init_attempts_per_slot: self.init_attempts_per_slot,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DescriptorSource {
    Table {
        path: PathBuf,
    },
    Synthetic {
        seed: u64,
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
        #[serde(default)]
        planted: Vec<String>,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        locality: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    #[serde(default = "default_threshold")]
    pub threshold: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub round_expected: bool,
}

fn default_runs() -> usize {
    46
}
fn default_threshold() -> u64 {
    galgo_core::experiment::DEFAULT_TOP_THRESHOLD
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            runs_per_cell: default_runs(),
            threshold: default_threshold(),
            alpha: default_alpha(),
            round_expected: false,
        }
    }
}

/// Where a run finds its inputs and writes its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<PathBuf>,
    /// Use `binary_genes` two-letter genes instead of a topology file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_genes: Option<usize>,
    pub activity: PathBuf,
    pub evolution: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Separator between alleles when genotypes are written as text.
    #[serde(default)]
    pub separator: String,
    pub descriptors: DescriptorSource,
    #[serde(default)]
    pub grid: GridSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Manifest {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Data(e.to_string()))
    }

    /// Reads a manifest and resolves its relative paths against the
    /// manifest's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut m = Self::parse(&read_to_string(path)?).map_err(|e| e.in_file(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = m.topology.as_mut() {
            resolve(t);
        }
        resolve(&mut m.activity);
        resolve(&mut m.evolution);
        resolve(&mut m.output);
        if let DescriptorSource::Table { path } = &mut m.descriptors {
            resolve(path);
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Descriptor source realized from a manifest.
#[derive(Debug, Clone)]
pub enum Provider {
    Table(TableProvider),
    Synthetic(SyntheticProvider),
}

impl DescriptorProvider for Provider {
    fn provide(&self, genotype: &Genotype) -> Option<Phenotype> {
        match self {
            Provider::Table(p) => p.provide(genotype),
            Provider::Synthetic(p) => p.provide(genotype),
        }
    }

    fn catalog(&self) -> Option<Vec<Genotype>> {
        match self {
            Provider::Table(p) => p.catalog(),
            Provider::Synthetic(p) => p.catalog(),
        }
    }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct Project {
    pub manifest: Manifest,
    pub evolution: EvolutionFile,
    pub topology: GeneticTopology,
    pub dataset: Dataset,
    pub provider: Provider,
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: file not found", path.display())))
    }
}

impl Project {
    pub fn load(manifest_path: &Path) -> CliResult<Self> {
        require(manifest_path)?;
        let manifest = Manifest::load(manifest_path)?;
        require(&manifest.activity)?;
        require(&manifest.evolution)?;
        let topology = match (&manifest.topology, manifest.binary_genes) {
            (Some(path), None) => {
                require(path)?;
                load_cgt(path)?
            }
            (None, Some(n)) => GeneticTopology::binary(n)?,
            _ => {
                return Err(CliError::Data(format!(
                    "{}: set exactly one of topology and binary_genes",
                    manifest_path.display()
                )))
            }
        };
        let dataset = read_activity(&manifest.activity)?;
        let evolution = EvolutionFile::load(&manifest.evolution)?;
        let provider = match &manifest.descriptors {
            DescriptorSource::Table { path } => {
                require(path)?;
                Provider::Table(read_descriptors(path, &topology, &manifest.separator, &dataset)?)
            }
            DescriptorSource::Synthetic {
                seed,
                low,
                high,
                planted,
                noise,
                locality,
            } => {
                let base = SyntheticProvider::new(*seed, *low, *high, &dataset)?;
                if planted.is_empty() {
                    Provider::Synthetic(base)
                } else {
                    let genotypes = planted
                        .iter()
                        .map(|g| topology.parse(g, &manifest.separator))
                        .collect::<Result<Vec<_>, _>>()?;
                    Provider::Synthetic(base.with_planted(PlantedSignal {
                        genotypes,
                        noise_sd: *noise,
                        locality: *locality,
                    })?)
                }
            }
        };
        let project = Self {
            manifest,
            evolution,
            topology,
            dataset,
            provider,
        };
        project.config(project.manifest.seed)?.validate(&project.topology.size())?;
        Ok(project)
    }

    pub fn config(&self, seed: u64) -> CliResult<EvolutionConfig> {
        self.evolution.to_config(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EVOLUTION: &str = r#"
p = 20
n = 2
k = 3
max_generations = 50

[objective]
kind = "r2"

[selection]
method = "tournament"
normalization = [0.0, 1.0]

[survival]
method = "deterministic"
q = 2.0
"#;

    #[test]
    fn evolution_defaults_and_round_trip() {
        let file = EvolutionFile::parse(EVOLUTION).unwrap();
        let cfg = file.to_config(9).unwrap();
        assert_eq!(cfg.selection.method, Method::Tournament);
        assert_eq!(cfg.selection.normalization, Some((0.0, 1.0)));
        assert_eq!(cfg.survival.method, Method::Deterministic);
        assert_eq!(cfg.q, 2.0);
        assert_eq!(cfg.validity.alpha, 0.05);
        assert_eq!(cfg.seed, 9);
        assert!(cfg.keep_best);
        let normalized = file.to_toml();
        assert_eq!(EvolutionFile::parse(&normalized).unwrap(), file);
        assert_eq!(EvolutionFile::parse(&normalized).unwrap().to_toml(), normalized);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{EVOLUTION}\nbogus = 1\n");
        assert!(EvolutionFile::parse(&text).is_err());
        assert!(EvolutionFile::parse(&EVOLUTION.replace("r2", "r3")).is_err());
    }

    #[test]
    fn hr_with_unit_exponent_is_a_config_error() {
        let text = EVOLUTION.replace("kind = \"r2\"", "kind = \"hr\"\ns = 1.0");
        assert!(EvolutionFile::parse(&text).unwrap().to_config(0).is_err());
    }

    #[test]
    fn manifest_sources() {
        let m = Manifest::parse(
            r#"
binary_genes = 10
activity = "y.csv"
evolution = "evo.toml"
seed = 5

[descriptors]
source = "synthetic"
seed = 3
planted = ["0000000000", "1111111111"]
noise = 0.02
locality = 2.0
"#,
        )
        .unwrap();
        assert_eq!(m.grid.runs_per_cell, 46);
        assert_eq!(m.output, PathBuf::from("out"));
        assert!(matches!(m.descriptors, DescriptorSource::Synthetic { seed: 3, .. }));
        assert_eq!(Manifest::parse(&m.to_toml()).unwrap(), m);
    }
}
