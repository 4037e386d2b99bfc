pub mod backward;
pub mod data;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use backward::{backward, backward_from_output};
pub use data::{cycle_count, gen_community_nodes, gen_cycle_regression};
pub use loss::{accuracy, loss, LossGrad};
pub use optim::{adam_step, learning_rate, AdamState, TrainConfig};
pub use trainer::{evaluate, train, write_log_csv, EpochLog};
