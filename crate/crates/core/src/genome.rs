//! Genetic topologies, genotypes and the operators acting on them.
//!
//! A topology is an ordered list of genes, each with an alphabet of allele
//! symbols. A genotype picks one allele per gene and is stored as a vector
//! of allele indices.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gene {
    pub name: String,
    pub alleles: Vec<String>,
}

impl Gene {
    pub fn new<N, I, S>(name: N, alleles: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            alleles: alleles.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.alleles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alleles.is_empty()
    }
}

/// Ordered genes defining a genotype space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneticTopology {
    genes: Vec<Gene>,
}

impl GeneticTopology {
    pub fn new(genes: Vec<Gene>) -> Result<Self> {
        if genes.is_empty() {
            return Err(Error::InvalidTopology("at least one gene is required".into()));
        }
        let mut names = BTreeSet::new();
        for gene in &genes {
            if gene.name.is_empty() || gene.name.chars().any(char::is_whitespace) {
                return Err(Error::InvalidTopology(alloc::format!(
                    "invalid gene name {:?}",
                    gene.name
                )));
            }
            if !names.insert(gene.name.as_str()) {
                return Err(Error::InvalidTopology(alloc::format!(
                    "duplicate gene name {}",
                    gene.name
                )));
            }
            if gene.alleles.len() < 2 {
                return Err(Error::InvalidTopology(alloc::format!(
                    "gene {} needs at least two alleles",
                    gene.name
                )));
            }
            let mut seen = BTreeSet::new();
            for allele in &gene.alleles {
                if allele.is_empty() || allele.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidTopology(alloc::format!(
                        "gene {} has an invalid allele {:?}",
                        gene.name, allele
                    )));
                }
                if !seen.insert(allele.as_str()) {
                    return Err(Error::InvalidTopology(alloc::format!(
                        "gene {} repeats allele {}",
                        gene.name, allele
                    )));
                }
            }
        }
        Ok(Self { genes })
    }

    /// Topology whose genes all have two single-letter alleles `0`/`1`.
    pub fn binary(gene_count: usize) -> Result<Self> {
        let genes = (0..gene_count)
            .map(|i| Gene::new(alloc::format!("g{i}"), ["0", "1"]))
            .collect();
        Self::new(genes)
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    /// Number of genes in the chromosome (NC).
    pub fn gene_count(&self) -> usize {
        self.genes.len()
    }

    /// Allele count per gene.
    pub fn radices(&self) -> core::iter::Map<core::slice::Iter<'_, Gene>, fn(&Gene) -> usize> {
        self.genes.iter().map(Gene::len as fn(&Gene) -> usize)
    }

    /// Size of the genetic material: product of the allele counts.
    pub fn size(&self) -> BigUint {
        self.radices()
            .fold(BigUint::from(1u32), |acc, r| acc * BigUint::from(r))
    }

    /// [`size`](Self::size) when it fits in a `u64`.
    pub fn size_u64(&self) -> Option<u64> {
        self.radices()
            .try_fold(1u64, |acc, r| acc.checked_mul(r as u64))
    }

    pub fn contains(&self, genotype: &Genotype) -> bool {
        genotype.0.len() == self.genes.len()
            && genotype
                .0
                .iter()
                .zip(self.radices())
                .all(|(&a, r)| (a as usize) < r)
    }

    pub fn check(&self, genotype: &Genotype) -> Result<()> {
        if self.contains(genotype) {
            Ok(())
        } else {
            Err(Error::TopologyMismatch)
        }
    }

    /// Genotype at position `index` of the mixed-radix enumeration, first
    /// gene most significant.
    pub fn genotype_at(&self, mut index: u64) -> Option<Genotype> {
        let mut alleles = alloc::vec![0u32; self.genes.len()];
        for (slot, radix) in alleles.iter_mut().zip(self.radices()).rev() {
            let radix = radix as u64;
            *slot = (index % radix) as u32;
            index /= radix;
        }
        (index == 0).then_some(Genotype(alleles))
    }

    /// Inverse of [`genotype_at`](Self::genotype_at).
    pub fn index_of(&self, genotype: &Genotype) -> Option<u64> {
        if !self.contains(genotype) {
            return None;
        }
        genotype
            .0
            .iter()
            .zip(self.radices())
            .try_fold(0u64, |acc, (&a, r)| {
                acc.checked_mul(r as u64)?.checked_add(a as u64)
            })
    }

    /// Concatenates allele symbols in gene order, joined by `separator`.
    pub fn render(&self, genotype: &Genotype, separator: &str) -> String {
        let mut out = String::new();
        for (i, (&allele, gene)) in genotype.0.iter().zip(&self.genes).enumerate() {
            if i > 0 {
                out.push_str(separator);
            }
            out.push_str(&gene.alleles[allele as usize]);
        }
        out
    }

    /// Parses a rendered genotype. With an empty separator the whole string
    /// is segmented against the alphabets and must have exactly one reading.
    pub fn parse(&self, text: &str, separator: &str) -> Result<Genotype> {
        if !separator.is_empty() {
            let parts: Vec<&str> = text.split(separator).collect();
            if parts.len() != self.genes.len() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "genotype {text:?} has {} parts, expected {}",
                    parts.len(),
                    self.genes.len()
                )));
            }
            let alleles = parts
                .iter()
                .zip(&self.genes)
                .map(|(part, gene)| {
                    gene.alleles
                        .iter()
                        .position(|a| a == part)
                        .map(|i| i as u32)
                        .ok_or_else(|| {
                            Error::InvalidArgument(alloc::format!(
                                "unknown allele {part:?} for gene {}",
                                gene.name
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Genotype(alleles));
        }

        let mut found: Option<Vec<u32>> = None;
        let mut ambiguous = false;
        let mut current = Vec::with_capacity(self.genes.len());
        self.segment(text, 0, &mut current, &mut found, &mut ambiguous);
        match (found, ambiguous) {
            (Some(_), true) => Err(Error::InvalidArgument(alloc::format!(
                "genotype {text:?} is ambiguous without a separator"
            ))),
            (Some(alleles), false) => Ok(Genotype(alleles)),
            (None, _) => Err(Error::InvalidArgument(alloc::format!(
                "{text:?} is not a genotype of this topology"
            ))),
        }
    }

    fn segment(
        &self,
        rest: &str,
        gene: usize,
        current: &mut Vec<u32>,
        found: &mut Option<Vec<u32>>,
        ambiguous: &mut bool,
    ) {
        if *ambiguous {
            return;
        }
        if gene == self.genes.len() {
            if rest.is_empty() {
                if found.is_some() {
                    *ambiguous = true;
                } else {
                    *found = Some(current.clone());
                }
            }
            return;
        }
        for (i, allele) in self.genes[gene].alleles.iter().enumerate() {
            if let Some(tail) = rest.strip_prefix(allele.as_str()) {
                current.push(i as u32);
                self.segment(tail, gene + 1, current, found, ambiguous);
                current.pop();
            }
        }
    }
}

/// One allele index per gene.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Genotype(pub Vec<u32>);

impl Genotype {
    pub fn new(alleles: Vec<u32>) -> Self {
        Self(alleles)
    }

    pub fn alleles(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

/// How mutation probabilities are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MutationMode {
    /// With probability `prob`, change exactly one gene.
    #[default]
    PerGenotype,
    /// Every gene independently changes with probability `prob`.
    PerGene,
}

pub fn genome_size(topology: &GeneticTopology) -> BigUint {
    topology.size()
}

pub fn random_genotype<R: Rng + ?Sized>(topology: &GeneticTopology, rng: &mut R) -> Genotype {
    Genotype(
        topology
            .radices()
            .map(|r| rng.random_range(0..r as u32))
            .collect(),
    )
}

/// Exchanges genes `start..=end` between the two parents.
pub fn crossover_segment(
    a: &Genotype,
    b: &Genotype,
    start: usize,
    end: usize,
) -> Result<(Genotype, Genotype)> {
    if a.len() != b.len() {
        return Err(Error::TopologyMismatch);
    }
    if start > end || end >= a.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "segment [{start}, {end}] outside 0..{}",
            a.len()
        )));
    }
    let mut left = a.clone();
    let mut right = b.clone();
    left.0[start..=end].copy_from_slice(&b.0[start..=end]);
    right.0[start..=end].copy_from_slice(&a.0[start..=end]);
    Ok((left, right))
}

/// Uniform draw over all `(start, end)` pairs with `start <= end`.
pub fn random_segment<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (usize, usize) {
    let pairs = len * (len + 1) / 2;
    let mut k = rng.random_range(0..pairs);
    // Row `start` holds `len - start` pairs.
    let mut start = 0;
    while k >= len - start {
        k -= len - start;
        start += 1;
    }
    (start, start + k)
}

pub fn crossover<R: Rng + ?Sized>(
    a: &Genotype,
    b: &Genotype,
    rng: &mut R,
) -> Result<(Genotype, Genotype)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::TopologyMismatch);
    }
    let (start, end) = random_segment(a.len(), rng);
    crossover_segment(a, b, start, end)
}

fn other_allele<R: Rng + ?Sized>(current: u32, radix: usize, rng: &mut R) -> u32 {
    let pick = rng.random_range(0..radix as u32 - 1);
    if pick >= current {
        pick + 1
    } else {
        pick
    }
}

/// With probability `prob`, one uniformly chosen gene takes a different allele.
pub fn mutate<R: Rng + ?Sized>(
    topology: &GeneticTopology,
    genotype: &Genotype,
    prob: f64,
    rng: &mut R,
) -> Genotype {
    let mut out = genotype.clone();
    if prob > 0.0 && rng.random::<f64>() < prob {
        let gene = rng.random_range(0..topology.gene_count());
        let radix = topology.genes[gene].len();
        out.0[gene] = other_allele(out.0[gene], radix, rng);
    }
    out
}

pub fn mutate_per_gene<R: Rng + ?Sized>(
    topology: &GeneticTopology,
    genotype: &Genotype,
    prob: f64,
    rng: &mut R,
) -> Genotype {
    let mut out = genotype.clone();
    if prob <= 0.0 {
        return out;
    }
    for (slot, gene) in out.0.iter_mut().zip(&topology.genes) {
        if rng.random::<f64>() < prob {
            *slot = other_allele(*slot, gene.len(), rng);
        }
    }
    out
}

pub fn mutate_with<R: Rng + ?Sized>(
    mode: MutationMode,
    topology: &GeneticTopology,
    genotype: &Genotype,
    prob: f64,
    rng: &mut R,
) -> Genotype {
    match mode {
        MutationMode::PerGenotype => mutate(topology, genotype, prob, rng),
        MutationMode::PerGene => mutate_per_gene(topology, genotype, prob, rng),
    }
}

/// Number of genes whose allele differs.
pub fn ncd(a: &Genotype, b: &Genotype) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::TopologyMismatch);
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}
