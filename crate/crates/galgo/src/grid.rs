//! Parallel execution of the strategy grid. Runs execute on the rayon pool
//! and are folded into the aggregate in cell and run order, so the result
//! does not depend on scheduling.

use std::collections::BTreeMap;

use galgo_core::descriptors::{Dataset, DescriptorProvider};
use galgo_core::engine::{run, EvolutionConfig, RunResult};
use galgo_core::experiment::{cell_config, run_seed, tally_run, GridAggregate, Tally};
use galgo_core::genome::{GeneticTopology, Genotype};
use galgo_core::strategy::Method;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// What a finished run contributes to the grid.
#[derive(Debug)]
pub struct RunOutput {
    pub selection: Method,
    pub survival: Method,
    pub index: usize,
    pub seed: u64,
    pub outcome: Result<(BTreeMap<Genotype, Tally>, Option<String>), galgo_core::Error>,
}

/// Runs every cell in parallel. `render` turns each finished run into an
/// optional log text kept in the outputs; the run itself is dropped.
#[allow(clippy::too_many_arguments)]
pub fn run_grid_parallel<P, F>(
    base: &EvolutionConfig,
    topology: &GeneticTopology,
    provider: &P,
    dataset: &Dataset,
    runs_per_cell: usize,
    master_seed: u64,
    threshold: u64,
    render: F,
) -> CliResult<(GridAggregate, Vec<RunOutput>)>
where
    P: DescriptorProvider + Sync + ?Sized,
    F: Fn(Method, Method, &RunResult) -> Option<String> + Sync,
{
    if runs_per_cell == 0 {
        return Err(CliError::Usage("runs per cell must be >= 1".into()));
    }
    let mut agg = GridAggregate::empty(threshold);
    let jobs: Vec<(Method, Method, usize)> = agg
        .cells
        .iter()
        .flat_map(|c| (0..runs_per_cell).map(move |i| (c.selection, c.survival, i)))
        .collect();
    let outputs: Vec<RunOutput> = jobs
        .into_par_iter()
        .map(|(selection, survival, index)| {
            let seed = run_seed(master_seed, index);
            let cfg = cell_config(base, selection, survival, seed);
            let outcome = run(&cfg, topology, provider, dataset).map(|r| (tally_run(&r), render(selection, survival, &r)));
            RunOutput {
                selection,
                survival,
                index,
                seed,
                outcome,
            }
        })
        .collect();

    for out in &outputs {
        let cell = agg.cell_mut(out.selection, out.survival);
        if cell.error.is_some() {
            continue;
        }
        match &out.outcome {
            Ok((tallies, _)) => cell.add_tallies(tallies.clone(), threshold),
            Err(e) => cell.error = Some(format!("run {} (seed {}): {e}", out.index, out.seed)),
        }
    }
    Ok((agg, outputs))
}
