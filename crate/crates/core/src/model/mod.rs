//! The forecasting network: embeddings, LSTM encoder, autoregressive LSTM
//! decoder, and the regression and triplet losses.

mod checkpoint;
mod config;
mod network;
mod params;

#[cfg(test)]
mod tests;

pub use checkpoint::Checkpoint;
pub use config::{KernConfig, RegressionLoss, VocabSizes, SAMPLE_RANGE_GRID, TRIPLET_LAMBDA_GRID};
pub use network::{
    decode_on_tape, embed, encode_on_tape, lstm_step, regression_loss, triplet_loss, Batch, EncodedState,
    EncoderInput, FeatureBatch, Forecast, KernModel, LossParts, TripletBatch,
};
pub use params::{BoundParams, KernParams, LstmWeights};
