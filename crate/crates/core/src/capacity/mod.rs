pub mod coeffs;
pub mod linalg;
pub mod measure;
pub mod pattern;
pub mod theorems;

pub use coeffs::{alpha_coefficient, gamma_coefficient, lambda_coefficient};
pub use linalg::spectral_norm;
pub use measure::{
    attention_capacity, capacity_report, normalized_capacity, token_capacity, CapacityReport,
    LayerCapacity,
};
pub use pattern::PatternBasis;
pub use theorems::{
    verify_theorem1, verify_theorem2, verify_theorem3, BoundReport, OrderingReport, ShapeSpec,
    StackShape,
};
