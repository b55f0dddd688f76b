//! Learnable per-filter masks and the filter-selection objective.
//!
//! Each prunable layer owns one [`FilterMask`] holding a single real scalar per
//! output filter. The mask output `O` gates the filter's latent weights
//! (`Ŵ_n = O_n · W_n`) and its output feature map.

mod loss;
mod mask;

pub use loss::{subsidiary_loss, SelectionLoss};
pub use mask::{apply_mask, mask_init, FilterMask, MaskInitConfig, MaskMode};
