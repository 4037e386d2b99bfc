pub mod checkpoint;
pub mod forward;
pub mod params;
pub mod tokens;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{forward, model_forward, prepare_tokens, ForwardTrace, Prediction};
pub use params::{deepnorm_constants, Gradients, LayerParams, ModelConfig, ModelParams, Task};
pub use tokens::{build_tokens, build_tokens_with_forms, TokenBatch};
