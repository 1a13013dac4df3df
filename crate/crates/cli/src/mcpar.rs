//! Rayon driver for the Monte Carlo sweep. Each draw is a pure function of
//! its index, and the reduction consumes outcomes in index order, so this
//! produces bit-identical reports to the serial driver in `qsd-core`.

use rayon::prelude::*;

use qsd_core::montecarlo::{mc_draw, report_from_draws, DrawOutcome, MCReport, MonteCarloError, UncertaintyModel};
use qsd_core::optics::ReceiverParams;
use qsd_core::receiver::StateEnsemble;

pub fn mc_guess_error_parallel(
    params: &ReceiverParams,
    ens: &StateEnsemble,
    model: &UncertaintyModel,
) -> Result<MCReport, MonteCarloError> {
    model.validate()?;
    params.validate().map_err(MonteCarloError::Optics)?;
    let draws: Vec<Option<DrawOutcome>> = (0..model.n_samples as u64)
        .into_par_iter()
        .map(|k| mc_draw(params, ens, model, k))
        .collect();
    report_from_draws(&draws, ens.len(), 2 * params.n_passes)
}
