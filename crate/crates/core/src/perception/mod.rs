//! Pressure perception: encoder + GRU, predictive pretraining, the
//! obstacle-position head and input sensitivity maps.

pub mod cpc;
pub mod network;
pub mod sensitivity;
pub mod train;

pub use cpc::{cpc_loss, cpc_loss_from_predictions, PredictorVars};
pub use network::{
    encode_dynamic, encode_spatial, fit_input_norm, init_trunk, TrunkVars, H_DIM, SENSORS, WINDOW,
    Z_DIM,
};
pub use sensitivity::{entropy, sensitivity_map};
pub use train::{
    fit_norm_to_dataset, init_obstacle_model, init_perception, obstacle_mse, predict_obstacle,
    pretrain, train_obstacle, EpochLoss, ObstacleConfig, ObstacleEval, ObstacleResult,
    PretrainConfig, PretrainResult,
};
