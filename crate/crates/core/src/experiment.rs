//! The selection × survival strategy grid: per-genotype tallies over the
//! improving generations of repeated runs, and homogeneity tests across
//! strategy pairs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::descriptors::{Dataset, DescriptorProvider};
use crate::engine::{run, EvolutionConfig, RunResult};
use crate::error::{Error, Result};
use crate::genome::{GeneticTopology, Genotype};
use crate::stats::{chi2_homogeneity_with, ChiSquareReport, ContingencyTable, ExpectedMode};
use crate::strategy::Method;

/// Row and column order of every grid table.
pub const GRID_ORDER: [Method; 3] = [Method::Proportional, Method::Tournament, Method::Deterministic];

/// Default occurrence threshold of the top subtable.
pub const DEFAULT_TOP_THRESHOLD: u64 = 23;

/// Presence of one genotype in improving generations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    /// Improving generations whose sample contained the genotype.
    pub occ: u64,
    /// Its memberships in valid regressions of those generations.
    pub par: u64,
}

/// Tallies of one run.
pub fn tally_run(result: &RunResult) -> BTreeMap<Genotype, Tally> {
    tally_generations(
        result
            .records
            .iter()
            .filter(|r| r.improved)
            .map(|r| (r.sample.as_slice(), r.participation.as_slice())),
    )
}

/// Tallies over improving generations given as `(sample, participation)`.
pub fn tally_generations<'a, I>(generations: I) -> BTreeMap<Genotype, Tally>
where
    I: IntoIterator<Item = (&'a [Genotype], &'a [usize])>,
{
    let mut out: BTreeMap<Genotype, Tally> = BTreeMap::new();
    for (sample, participation) in generations {
        for (g, &par) in sample.iter().zip(participation) {
            let t = out.entry(g.clone()).or_default();
            t.occ += 1;
            t.par += par as u64;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub num: u64,
    pub occ: u64,
    pub par: u64,
    pub top_num: u64,
    pub top_occ: u64,
    pub top_par: u64,
}

impl CellCounts {
    pub fn from_tallies(tallies: &BTreeMap<Genotype, Tally>, threshold: u64) -> Self {
        let mut c = Self::default();
        for t in tallies.values() {
            c.num += 1;
            c.occ += t.occ;
            c.par += t.par;
            if t.occ >= threshold {
                c.top_num += 1;
                c.top_occ += t.occ;
                c.top_par += t.par;
            }
        }
        c
    }

    pub fn get(&self, measure: Measure) -> u64 {
        match measure {
            Measure::Num => self.num,
            Measure::Occ => self.occ,
            Measure::Par => self.par,
            Measure::TopNum => self.top_num,
            Measure::TopOcc => self.top_occ,
            Measure::TopPar => self.top_par,
        }
    }
}

/// Quantity compared across strategy pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Num,
    Occ,
    Par,
    TopNum,
    TopOcc,
    TopPar,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Num,
        Measure::Occ,
        Measure::Par,
        Measure::TopNum,
        Measure::TopOcc,
        Measure::TopPar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Num => "num",
            Measure::Occ => "occ",
            Measure::Par => "par",
            Measure::TopNum => "top-num",
            Measure::TopOcc => "top-occ",
            Measure::TopPar => "top-par",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown measure {s:?}")))
    }
}

/// Runs of one strategy pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub selection: Method,
    pub survival: Method,
    pub runs: usize,
    pub tallies: BTreeMap<Genotype, Tally>,
    pub counts: CellCounts,
    /// Set when a run failed; the cell's counts are then not meaningful.
    pub error: Option<String>,
}

impl Cell {
    pub fn new(selection: Method, survival: Method) -> Self {
        Self {
            selection,
            survival,
            runs: 0,
            tallies: BTreeMap::new(),
            counts: CellCounts::default(),
            error: None,
        }
    }

    pub fn label(&self) -> String {
        alloc::format!("{}:{}", self.selection.letter(), self.survival.letter())
    }

    /// Adds one run's tallies and refreshes the counts.
    pub fn add_run(&mut self, result: &RunResult, threshold: u64) {
        self.add_tallies(tally_run(result), threshold);
    }

    pub fn add_tallies(&mut self, tallies: BTreeMap<Genotype, Tally>, threshold: u64) {
        for (g, t) in tallies {
            let e = self.tallies.entry(g).or_default();
            e.occ += t.occ;
            e.par += t.par;
        }
        self.runs += 1;
        self.counts = CellCounts::from_tallies(&self.tallies, threshold);
    }
}

/// Nine cells, rows by selection and columns by survival in [`GRID_ORDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridAggregate {
    pub threshold: u64,
    pub cells: Vec<Cell>,
}

impl GridAggregate {
    pub fn empty(threshold: u64) -> Self {
        let mut cells = Vec::with_capacity(9);
        for sel in GRID_ORDER {
            for surv in GRID_ORDER {
                cells.push(Cell::new(sel, surv));
            }
        }
        Self { threshold, cells }
    }

    /// An aggregate carrying only counts, `counts[row][col]`.
    pub fn from_cell_counts(counts: [[CellCounts; 3]; 3]) -> Self {
        let mut agg = Self::empty(DEFAULT_TOP_THRESHOLD);
        for (i, cell) in agg.cells.iter_mut().enumerate() {
            cell.counts = counts[i / 3][i % 3];
        }
        agg
    }

    /// An aggregate whose single measure `measure` takes `values[row][col]`.
    pub fn from_measure(measure: Measure, values: [[u64; 3]; 3]) -> Self {
        let mut counts = [[CellCounts::default(); 3]; 3];
        for (r, row) in values.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let cell = &mut counts[r][c];
                match measure {
                    Measure::Num => cell.num = v,
                    Measure::Occ => cell.occ = v,
                    Measure::Par => cell.par = v,
                    Measure::TopNum => cell.top_num = v,
                    Measure::TopOcc => cell.top_occ = v,
                    Measure::TopPar => cell.top_par = v,
                }
            }
        }
        Self::from_cell_counts(counts)
    }

    pub fn cell(&self, selection: Method, survival: Method) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.selection == selection && c.survival == survival)
            .expect("grid holds every strategy pair")
    }

    pub fn cell_mut(&mut self, selection: Method, survival: Method) -> &mut Cell {
        self.cells
            .iter_mut()
            .find(|c| c.selection == selection && c.survival == survival)
            .expect("grid holds every strategy pair")
    }

    pub fn matrix(&self, measure: Measure) -> [[u64; 3]; 3] {
        let mut out = [[0; 3]; 3];
        for (i, cell) in self.cells.iter().enumerate() {
            out[i / 3][i % 3] = cell.counts.get(measure);
        }
        out
    }

    pub fn contingency(&self, measure: Measure) -> Result<ContingencyTable> {
        let labels = || GRID_ORDER.iter().map(|m| m.letter().to_string()).collect();
        let observed = self
            .matrix(measure)
            .iter()
            .map(|row| row.iter().map(|&v| v as f64).collect())
            .collect();
        ContingencyTable::new(observed, labels(), labels())
    }
}

pub fn homogeneity_analysis(
    agg: &GridAggregate,
    measure: Measure,
    alpha: f64,
    mode: ExpectedMode,
) -> Result<ChiSquareReport> {
    chi2_homogeneity_with(&agg.contingency(measure)?, alpha, mode)
}

/// Seed of run `index` in every cell.
pub fn run_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add(index as u64)
}

/// Config of one run in the cell `(selection, survival)`.
pub fn cell_config(
    base: &EvolutionConfig,
    selection: Method,
    survival: Method,
    seed: u64,
) -> EvolutionConfig {
    let mut cfg = base.clone();
    cfg.selection.method = selection;
    cfg.survival.method = survival;
    cfg.seed = seed;
    cfg
}

/// Runs every cell in turn.
pub fn run_grid<P: DescriptorProvider + ?Sized>(
    base: &EvolutionConfig,
    topology: &GeneticTopology,
    provider: &P,
    dataset: &Dataset,
    runs_per_cell: usize,
    master_seed: u64,
    threshold: u64,
) -> Result<GridAggregate> {
    if runs_per_cell == 0 {
        return Err(Error::InvalidConfig("runs_per_cell must be >= 1".into()));
    }
    let mut agg = GridAggregate::empty(threshold);
    for cell in &mut agg.cells {
        for index in 0..runs_per_cell {
            let cfg = cell_config(base, cell.selection, cell.survival, run_seed(master_seed, index));
            match run(&cfg, topology, provider, dataset) {
                Ok(res) => cell.add_run(&res, threshold),
                Err(e) => {
                    cell.error = Some(alloc::format!("run {index} (seed {}): {e}", cfg.seed));
                    break;
                }
            }
        }
    }
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{PlantedSignal, SyntheticProvider};
    use crate::stats::Verdict;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Dataset, GeneticTopology, SyntheticProvider) {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = Dataset::new(
            (0..25).map(|i| alloc::format!("m{i}")).collect(),
            (0..25).map(|_| 6.0 + rng.random::<f64>()).collect(),
        )
        .unwrap();
        let topo = GeneticTopology::binary(7).unwrap();
        let provider = SyntheticProvider::new(8, 0.0, 1.0, &ds)
            .unwrap()
            .with_planted(PlantedSignal {
                genotypes: vec![topo.genotype_at(5).unwrap(), topo.genotype_at(100).unwrap()],
                noise_sd: 0.02,
                locality: 2.0,
            })
            .unwrap();
        (ds, topo, provider)
    }

    fn base() -> EvolutionConfig {
        EvolutionConfig {
            p: 10,
            n: 2,
            k: 2,
            max_generations: 20,
            ..Default::default()
        }
    }

    #[test]
    fn single_generation_bound() {
        let (ds, topo, provider) = setup();
        let cfg = EvolutionConfig {
            max_generations: 1,
            ..base()
        };
        let agg = run_grid(&cfg, &topo, &provider, &ds, 1, 4, 23).unwrap();
        for cell in &agg.cells {
            assert!(cell.error.is_none());
            assert!(cell.counts.num <= 10);
            assert!(cell.counts.occ == cell.counts.num);
        }
    }

    #[test]
    fn repeated_run_doubles_counts() {
        let (ds, topo, provider) = setup();
        let res = run(&base(), &topo, &provider, &ds).unwrap();
        let mut once = Cell::new(Method::Proportional, Method::Proportional);
        once.add_run(&res, 2);
        let mut twice = once.clone();
        twice.add_run(&res, 2);
        assert_eq!(twice.counts.num, once.counts.num);
        assert_eq!(twice.counts.occ, 2 * once.counts.occ);
        assert_eq!(twice.counts.par, 2 * once.counts.par);
        assert!(twice.counts.top_num >= once.counts.top_num);
    }

    #[test]
    fn order_of_runs_does_not_matter() {
        let (ds, topo, provider) = setup();
        let results: Vec<RunResult> = (0..4)
            .map(|seed| run(&EvolutionConfig { seed, ..base() }, &topo, &provider, &ds).unwrap())
            .collect();
        let mut a = Cell::new(Method::Tournament, Method::Deterministic);
        let mut b = a.clone();
        for r in &results {
            a.add_run(r, 5);
        }
        for r in results.iter().rev() {
            b.add_run(r, 5);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn grid_counts_are_consistent() {
        let (ds, topo, provider) = setup();
        let agg = run_grid(&base(), &topo, &provider, &ds, 3, 10, 3).unwrap();
        assert_eq!(agg.cells.len(), 9);
        for cell in &agg.cells {
            let c = cell.counts;
            assert!(c.occ >= c.num);
            assert!(c.top_num <= c.num && c.top_occ <= c.occ && c.top_par <= c.par);
            assert_eq!(cell.runs, 3);
        }
        assert_eq!(agg.cell(Method::Tournament, Method::Proportional).label(), "T:P");
        assert_eq!(agg.cells[3].label(), "T:P");
    }

    #[test]
    fn equal_cells_are_homogeneous() {
        let agg = GridAggregate::from_measure(Measure::Occ, [[7; 3]; 3]);
        let rep = homogeneity_analysis(&agg, Measure::Occ, 0.05, ExpectedMode::Exact).unwrap();
        assert_eq!(rep.total.statistic, 0.0);
        assert!(rep
            .partial_row
            .iter()
            .chain(&rep.partial_col)
            .chain([&rep.total])
            .all(|t| t.verdict == Verdict::Homogeneous));
    }

    #[test]
    fn empty_margin_is_named() {
        let agg = GridAggregate::from_measure(Measure::Num, [[1, 2, 3], [0, 0, 0], [4, 5, 6]]);
        let err = homogeneity_analysis(&agg, Measure::Num, 0.05, ExpectedMode::Exact).unwrap_err();
        assert!(alloc::format!("{err}").contains("row T"));
    }

    #[test]
    fn measure_names_parse() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert!("bogus".parse::<Measure>().is_err());
    }
}
