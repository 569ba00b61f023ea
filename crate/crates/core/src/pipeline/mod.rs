//! End-to-end signal flow, targets, losses, training, and streaming.

pub mod bridge;
pub mod enhance;
pub mod loss;
pub mod mask;
pub mod model;
pub mod schedule;
pub mod stream;
pub mod train;

pub use enhance::{
    dsr_mask, fme_enhance_mag, full_forward, oracle_full, oracle_mask_only, oracle_stage1,
    stage1_enhance,
};
pub use loss::{loss_dsr, loss_fme, IstdctOp};
pub use mask::{apply_mask, compute_dctirm, Dctirm, DEFAULT_CLIP_BOUND};
pub use model::FdfNet;
pub use schedule::{LrScheduler, Stage, TrainSchedule};
pub use stream::{enhance_streaming, StreamEnhancer};
pub use train::{train_stage1, train_stage2, Dataset, EpochLog, TrainItem, TrainOutcome};
