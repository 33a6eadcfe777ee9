//! Neural parameter estimator.
//!
//! A network maps a 24-hour window of measurements to RC parameters; the parameters
//! are simulated over the window and the ℓ2 distance to the measured indoor
//! temperature is backpropagated through the simulation into the network. Every
//! (estimate, loss) pair seen during training is kept in an [`EstimationTrace`], and the
//! final parameters are the per-parameter maxima of the loss-weighted marginals.

mod marginal;
mod net;
mod train;
mod window;

pub use marginal::{
    marginal_histogram, select_params, select_with_histograms, write_histograms_csv,
    EstimationTrace, MarginalHistogram, TraceRecord, DEFAULT_BINS,
};
pub use net::{sidecar_path, Activations, EstimatorNet, Standardization, WeightsHeader, HIDDEN, INPUT_SIZE};
pub use train::{
    finetune, fleet_network, fleet_scales, init_to_constant_guess, loss_and_grad, mean_fleet_loss,
    pretrain, theta_loss, train_from_scratch, window_loss, loss_and_grad_tape, EstimatorConfig,
    Trainer, TrainingOutcome, Workspace,
};
pub use window::{slice_windows, slice_windows_strided, Window, FEATURES, LOOKBACK};
