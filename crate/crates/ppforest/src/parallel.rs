//! Multi-threaded fitting. Every tree draws from its own RNG stream, so the
//! result does not depend on the thread count.

use ppforest_core::ensemble::ProximityAccumulator;
use ppforest_core::{
    BaselineConfig, BaselineForestModel, Dataset, Ensemble, ForestConfig, PPForestModel, ProximityMatrix, ProximityMode,
};
use ppforest_core::baseline::BaselineFitter;
use ppforest_core::forest::ForestFitter;
use rayon::prelude::*;

use crate::error::{Error, Result};

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// `threads == 0` uses one thread per core.
pub fn fit_forest_parallel(d: &Dataset, config: ForestConfig, threads: usize) -> Result<PPForestModel> {
    let fitter = ForestFitter::new(d, config)?;
    let fitted = pool(threads)?.install(|| {
        (0..fitter.n_trees()).into_par_iter().map(|k| fitter.fit_tree(k)).collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(fitter.assemble(fitted)?)
}

pub fn fit_baseline_parallel(d: &Dataset, config: BaselineConfig, threads: usize) -> Result<BaselineForestModel> {
    let fitter = BaselineFitter::new(d, config)?;
    let fitted =
        pool(threads)?.install(|| (0..fitter.n_trees()).into_par_iter().map(|k| fitter.fit_tree(k)).collect());
    Ok(fitter.assemble(fitted)?)
}

/// Proximities accumulated over tree chunks; counts are integers, so the
/// merge order cannot change the result.
pub fn proximity_parallel<E: Ensemble + Sync>(
    e: &E,
    d: &Dataset,
    mode: ProximityMode,
    threads: usize,
) -> Result<ProximityMatrix> {
    ppforest_core::ensemble::check_training_data(e, d)?;
    let prepared = e.prepare(d.features())?;
    let n = d.n();
    let acc = pool(threads)?.install(|| {
        (0..e.n_trees())
            .into_par_iter()
            .fold(
                || ProximityAccumulator::new(n, mode),
                |mut acc, k| {
                    acc.add_tree(e, k, &prepared);
                    acc
                },
            )
            .reduce(|| ProximityAccumulator::new(n, mode), ProximityAccumulator::merge)
    });
    Ok(acc.finish())
}
