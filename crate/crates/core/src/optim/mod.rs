//! The Pion optimizer family, μP adapters, comparison baselines and the
//! per-step cost model.

mod baselines;
mod config;
mod flops;
mod pion;

pub use baselines::{
    adamw_step, muon_lite_step, sgd_step, AdamWHyper, AdamWState, MuonLiteHyper, MuonLiteState,
    SgdHyper, SgdState,
};
pub use config::{ExpScheme, MomentumScheme, MupMode, PionConfig, SecondMoment, Side, UpdateMode};
pub use flops::{flop_estimate, FlopBreakdown};
pub use pion::{
    apply_mup, pion_init, pion_step, pion_step_lie, pion_step_raw, pion_step_transported, ParamState,
    StepReport,
};
