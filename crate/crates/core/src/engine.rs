//! The evolution loop: regression sweep over the sample, selection of
//! parents, recombination, viability filtering and survival replacement.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptors::{
    check_viability, Dataset, DescriptorProvider, ViabilityFailure, ViabilityPolicy,
};
use crate::error::{Error, Result};
use crate::genome::{crossover, mutate_with, random_genotype, GeneticTopology, Genotype, MutationMode};
use crate::regress::{fit_subset, Combinations, InterceptMode, RegressionModel, ValidityRules};
use crate::scores::{
    objective_score, selection_scores, survival_scores, transform_scores, Direction,
    NormalizationState, ObjectiveKind, ObjectiveSpec, ScoredModel, SelectionAggregate,
    DEFAULT_VS_CAP,
};
use crate::strategy::{extract, Method, StrategySpec};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    /// Sample size.
    pub p: usize,
    /// Descriptors per regression.
    pub n: usize,
    /// Parent pairs per generation.
    pub k: usize,
    /// Mutation probability of parent copies.
    pub pp: f64,
    /// Mutation probability of children.
    pub cp: f64,
    pub mutation: MutationMode,
    /// Protect the genotypes of the generation's best model from removal.
    pub keep_best: bool,
    pub objective: ObjectiveSpec,
    pub selection: StrategySpec,
    pub survival: StrategySpec,
    pub selection_aggregate: SelectionAggregate,
    pub q: f64,
    pub r: f64,
    pub vs_cap: f64,
    pub validity: ValidityRules,
    pub viability: ViabilityPolicy,
    pub intercept_mode: InterceptMode,
    pub max_generations: usize,
    pub target_objective: Option<f64>,
    pub seed: u64,
    /// Draws allowed per sample slot during initialization.
    pub init_attempts_per_slot: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            p: 20,
            n: 2,
            k: 3,
            pp: 0.1,
            cp: 0.3,
            mutation: MutationMode::PerGenotype,
            keep_best: true,
            objective: ObjectiveSpec {
                kind: ObjectiveKind::R2,
                s: 1.0,
            },
            selection: StrategySpec::new(Method::Proportional),
            survival: StrategySpec::new(Method::Proportional),
            selection_aggregate: SelectionAggregate::Max,
            q: 1.0,
            r: 1.0,
            vs_cap: DEFAULT_VS_CAP,
            validity: ValidityRules::default(),
            viability: ViabilityPolicy::default(),
            intercept_mode: InterceptMode::Fallback,
            max_generations: 100,
            target_objective: None,
            seed: 0,
            init_attempts_per_slot: 200,
        }
    }
}

impl EvolutionConfig {
    /// Checks the parameter invariants against a population of
    /// `population` genotypes.
    pub fn validate(&self, population: &BigUint) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n == 0 {
            return bad("n must be >= 1");
        }
        if self.n >= self.p {
            return bad("n must be smaller than p");
        }
        if BigUint::from(self.p) >= *population {
            return bad("p must be smaller than the number of genotypes");
        }
        if self.k == 0 || 2 * self.k > self.p {
            return bad("k must satisfy 1 <= 2k <= p");
        }
        for (name, v) in [("pp", self.pp), ("cp", self.cp)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must lie in [0, 1]")));
            }
        }
        if self.max_generations == 0 {
            return bad("max_generations must be >= 1");
        }
        if !(self.q > 0.0 && self.r > 0.0 && self.q.is_finite() && self.r.is_finite()) {
            return bad("q and r must be positive");
        }
        if !(self.vs_cap > 0.0) {
            return bad("vs_cap must be positive");
        }
        if !(self.validity.alpha > 0.0 && self.validity.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.init_attempts_per_slot == 0 {
            return bad("init_attempts_per_slot must be >= 1");
        }
        ObjectiveSpec::new(self.objective.kind, self.objective.s)?;
        self.selection.validate()?;
        self.survival.validate()?;
        self.viability.validate()?;
        if let Some(t) = self.target_objective {
            if !t.is_finite() {
                return bad("target_objective must be finite");
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        self.objective.direction()
    }
}

/// A genotype in the sample with its realized descriptor values.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub genotype: Genotype,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestModel {
    pub objective: f64,
    pub genotypes: Vec<Genotype>,
    pub model: RegressionModel,
}

/// Outcome of fitting every `n`-subset of a set of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Subsets enumerated.
    pub subsets: usize,
    /// Valid models in enumeration order.
    pub models: Vec<ScoredModel>,
    /// First-found best valid model.
    pub best: Option<(f64, RegressionModel)>,
}

/// Fits all `C(p, n)` subsets of `columns` in lexicographic order.
pub fn sweep(
    columns: &[&[f64]],
    y: &[f64],
    n: usize,
    mode: InterceptMode,
    rules: &ValidityRules,
    objective: &ObjectiveSpec,
) -> Sweep {
    let direction = objective.direction();
    let mut out = Sweep {
        subsets: 0,
        models: Vec::new(),
        best: None,
    };
    let mut cols: Vec<&[f64]> = Vec::with_capacity(n);
    for subset in Combinations::new(columns.len(), n) {
        out.subsets += 1;
        cols.clear();
        cols.extend(subset.iter().map(|&i| columns[i]));
        for model in fit_subset(&cols, y, &subset, mode, rules) {
            if !model.valid {
                continue;
            }
            let Ok(score) = objective_score(&model, objective) else {
                continue;
            };
            if !score.is_finite() {
                continue;
            }
            out.models.push(ScoredModel {
                members: subset.clone(),
                objective: score,
            });
            let better = match &out.best {
                None => true,
                Some((b, _)) => direction.better(score, *b),
            };
            if better {
                out.best = Some((score, model));
            }
        }
    }
    out
}

/// One generation of the log.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    /// 1-based generation index.
    pub generation: usize,
    /// Best objective found in this generation's sweep.
    pub best_objective: Option<f64>,
    /// Best objective over the run so far.
    pub global_best: Option<f64>,
    /// The global best strictly improved in this generation.
    pub improved: bool,
    /// Genotypes of this generation's best model.
    pub best_model: Vec<Genotype>,
    pub valid_count: usize,
    /// Sample as evaluated in this generation.
    pub sample: Vec<Genotype>,
    /// Valid models each sample member belongs to.
    pub participation: Vec<usize>,
    /// Children that replaced sample members.
    pub replaced: usize,
}

impl GenerationRecord {
    pub fn stagnant(&self) -> bool {
        self.replaced == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub best: Option<BestModel>,
    pub records: Vec<GenerationRecord>,
    pub target_reached: bool,
}

impl RunResult {
    pub fn generations(&self) -> usize {
        self.records.len()
    }
}

fn failure_histogram(h: &BTreeMap<ViabilityFailure, usize>) -> String {
    let mut out = String::new();
    for (i, (k, v)) in h.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{k}: {v}");
    }
    out
}

fn realize<P: DescriptorProvider + ?Sized>(
    provider: &P,
    dataset: &Dataset,
    policy: &ViabilityPolicy,
    genotype: &Genotype,
) -> core::result::Result<Member, ViabilityFailure> {
    let pheno = provider.provide(genotype).ok_or(ViabilityFailure::Absent)?;
    let report = check_viability(&pheno, dataset, policy).map_err(|_| ViabilityFailure::NonFinite)?;
    match report.failure() {
        Some(f) => Err(f),
        None => Ok(Member {
            genotype: pheno.genotype,
            values: pheno.values,
        }),
    }
}

/// Draws `p` distinct viable genotypes, rejecting nonviable ones.
pub fn init_sample<P, R>(
    cfg: &EvolutionConfig,
    topology: &GeneticTopology,
    provider: &P,
    dataset: &Dataset,
    rng: &mut R,
) -> Result<Vec<Member>>
where
    P: DescriptorProvider + ?Sized,
    R: rand::Rng + ?Sized,
{
    let mut histogram = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut sample = Vec::with_capacity(cfg.p);
    let mut attempts = 0;

    if let Some(mut catalog) = provider.catalog() {
        catalog.retain(|g| topology.contains(g));
        catalog.sort();
        catalog.shuffle(rng);
        for g in catalog {
            if sample.len() == cfg.p {
                break;
            }
            attempts += 1;
            match realize(provider, dataset, &cfg.viability, &g) {
                Ok(m) => sample.push(m),
                Err(f) => *histogram.entry(f).or_insert(0) += 1,
            }
        }
    } else {
        let limit = cfg.p.saturating_mul(cfg.init_attempts_per_slot);
        while sample.len() < cfg.p && attempts < limit {
            attempts += 1;
            let g = random_genotype(topology, rng);
            if !seen.insert(g.clone()) {
                *histogram.entry(ViabilityFailure::Duplicate).or_insert(0) += 1;
                continue;
            }
            match realize(provider, dataset, &cfg.viability, &g) {
                Ok(m) => sample.push(m),
                Err(f) => *histogram.entry(f).or_insert(0) += 1,
            }
        }
    }

    if sample.len() < cfg.p {
        return Err(Error::InsufficientViable {
            attempts,
            histogram: failure_histogram(&histogram),
        });
    }
    Ok(sample)
}

/// A running evolution over one sample.
pub struct Evolution<'a, P: DescriptorProvider + ?Sized> {
    cfg: EvolutionConfig,
    topology: &'a GeneticTopology,
    provider: &'a P,
    dataset: &'a Dataset,
    sample: Vec<Member>,
    generation: usize,
    best: Option<BestModel>,
    selection_norm: Option<NormalizationState>,
    survival_norm: Option<NormalizationState>,
    rng: ChaCha8Rng,
}

impl<'a, P: DescriptorProvider + ?Sized> Evolution<'a, P> {
    pub fn new(
        cfg: EvolutionConfig,
        topology: &'a GeneticTopology,
        provider: &'a P,
        dataset: &'a Dataset,
    ) -> Result<Self> {
        cfg.validate(&topology.size())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let sample = init_sample(&cfg, topology, provider, dataset, &mut rng)?;
        Ok(Self {
            selection_norm: cfg.selection.normalization_state(),
            survival_norm: cfg.survival.normalization_state(),
            cfg,
            topology,
            provider,
            dataset,
            sample,
            generation: 0,
            best: None,
            rng,
        })
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn sample(&self) -> &[Member] {
        &self.sample
    }

    pub fn best(&self) -> Option<&BestModel> {
        self.best.as_ref()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn target_reached(&self) -> bool {
        match (self.cfg.target_objective, &self.best) {
            (Some(t), Some(b)) => !self.cfg.direction().better(t, b.objective),
            _ => false,
        }
    }

    /// Runs one generation.
    pub fn step(&mut self) -> Result<GenerationRecord> {
        self.generation += 1;
        let cfg = &self.cfg;
        let direction = cfg.direction();
        let p = self.sample.len();

        // regressions over the whole sample
        let columns: Vec<&[f64]> = self.sample.iter().map(|m| m.values.as_slice()).collect();
        let sweep = sweep(
            &columns,
            self.dataset.activity(),
            cfg.n,
            cfg.intercept_mode,
            &cfg.validity,
            &cfg.objective,
        );
        let mut improved = false;
        let mut best_model = Vec::new();
        let mut elite = BTreeSet::new();
        let best_objective = sweep.best.as_ref().map(|(score, _)| *score);
        if let Some((score, model)) = &sweep.best {
            best_model = model
                .member_ids
                .iter()
                .map(|&i| self.sample[i].genotype.clone())
                .collect();
            elite.extend(model.member_ids.iter().copied());
            let replace = match &self.best {
                None => true,
                Some(b) => direction.better(*score, b.objective),
            };
            if replace {
                improved = true;
                self.best = Some(BestModel {
                    objective: *score,
                    genotypes: best_model.clone(),
                    model: model.clone(),
                });
            }
        }

        // selection of parents
        let sel = selection_scores(p, &sweep.models, cfg.selection_aggregate, direction);
        let sel_table = transform_scores(
            &sel.values,
            sel.direction,
            self.selection_norm.as_mut(),
            cfg.selection.significant_digits,
            cfg.selection.use_ranks,
        )?;
        let parents = extract(cfg.selection.method, &sel_table, 2 * cfg.k, &mut self.rng)?.indices;

        // offspring
        let mut children = Vec::with_capacity(2 * cfg.k);
        for pair in parents.chunks_exact(2) {
            let a = mutate_with(
                cfg.mutation,
                self.topology,
                &self.sample[pair[0]].genotype,
                cfg.pp,
                &mut self.rng,
            );
            let b = mutate_with(
                cfg.mutation,
                self.topology,
                &self.sample[pair[1]].genotype,
                cfg.pp,
                &mut self.rng,
            );
            let (c1, c2) = crossover(&a, &b, &mut self.rng)?;
            for c in [c1, c2] {
                children.push(mutate_with(cfg.mutation, self.topology, &c, cfg.cp, &mut self.rng));
            }
        }

        // viable, new, distinct children
        let mut present: BTreeSet<Genotype> =
            self.sample.iter().map(|m| m.genotype.clone()).collect();
        let mut viable = Vec::with_capacity(children.len());
        for child in children {
            if present.contains(&child) {
                continue;
            }
            if let Ok(m) = realize(self.provider, self.dataset, &cfg.viability, &child) {
                present.insert(child);
                viable.push(m);
            }
        }

        let sample_genotypes: Vec<Genotype> =
            self.sample.iter().map(|m| m.genotype.clone()).collect();

        // survival: remove the most redundant eligible members
        let eligible: Vec<usize> = (0..p)
            .filter(|i| !(cfg.keep_best && elite.contains(i)))
            .collect();
        let v = viable.len().min(eligible.len());
        if v > 0 {
            let vs = survival_scores(&sample_genotypes, &sel_table.fs, cfg.q, cfg.r, cfg.vs_cap)?;
            let eligible_vs: Vec<f64> = eligible.iter().map(|&i| vs[i]).collect();
            let surv_table = transform_scores(
                &eligible_vs,
                Direction::Max,
                self.survival_norm.as_mut(),
                cfg.survival.significant_digits,
                cfg.survival.use_ranks,
            )?;
            let victims = extract(cfg.survival.method, &surv_table, v, &mut self.rng)?.indices;
            for (slot, child) in victims.into_iter().zip(viable) {
                self.sample[eligible[slot]] = child;
            }
        }

        Ok(GenerationRecord {
            generation: self.generation,
            best_objective,
            global_best: self.best.as_ref().map(|b| b.objective),
            improved,
            best_model,
            valid_count: sweep.models.len(),
            sample: sample_genotypes,
            participation: sel.participation,
            replaced: v,
        })
    }

    /// Steps until the target is reached or `max_generations` have run.
    pub fn run(mut self) -> Result<RunResult> {
        let mut records = Vec::with_capacity(self.cfg.max_generations);
        while self.generation < self.cfg.max_generations {
            records.push(self.step()?);
            if self.target_reached() {
                break;
            }
        }
        Ok(RunResult {
            seed: self.cfg.seed,
            target_reached: self.target_reached(),
            best: self.best,
            records,
        })
    }
}

/// Initializes and runs one evolution.
pub fn run<P: DescriptorProvider + ?Sized>(
    cfg: &EvolutionConfig,
    topology: &GeneticTopology,
    provider: &P,
    dataset: &Dataset,
) -> Result<RunResult> {
    Evolution::new(cfg.clone(), topology, provider, dataset)?.run()
}

/// Best valid model over every `n`-subset of every viable genotype in
/// `topology`, by exhaustive enumeration. Returns the objective and the
/// member genotypes.
pub fn exhaustive_best<P: DescriptorProvider + ?Sized>(
    cfg: &EvolutionConfig,
    topology: &GeneticTopology,
    provider: &P,
    dataset: &Dataset,
) -> Result<Option<(f64, Vec<Genotype>)>> {
    let size = topology
        .size_u64()
        .ok_or_else(|| Error::InvalidArgument("topology too large to enumerate".into()))?;
    let members: Vec<Member> = (0..size)
        .filter_map(|i| topology.genotype_at(i))
        .filter_map(|g| realize(provider, dataset, &cfg.viability, &g).ok())
        .collect();
    let columns: Vec<&[f64]> = members.iter().map(|m| m.values.as_slice()).collect();
    let s = sweep(
        &columns,
        dataset.activity(),
        cfg.n,
        cfg.intercept_mode,
        &cfg.validity,
        &cfg.objective,
    );
    Ok(s.best.map(|(score, model)| {
        (
            score,
            model
                .member_ids
                .iter()
                .map(|&i| members[i].genotype.clone())
                .collect(),
        )
    }))
}
