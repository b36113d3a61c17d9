pub mod data;
pub mod datasets;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod reliability;
pub mod rng;
pub mod simlab;
pub mod uncertainty;

pub use data::LoadShareData;
pub use error::{Error, Result};
pub use estimation::{fit, FitConfig, FitResult, GridPolicy};
pub use model::{CutGrid, OrderingWarning, PlaModel, PlaParams, SystemDraw};
