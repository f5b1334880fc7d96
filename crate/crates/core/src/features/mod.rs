//! Phase-space embedding and the nonlinear estimators.

mod embed;
mod hfd;
mod lyapunov;
mod sampen;
mod spectral;

pub use embed::{ami_curve, ami_delay, AMI_FLAT_NATS, average_mutual_information, takens_embed, Embedding};
pub use hfd::{hfd, higuchi_curve_lengths};
pub use lyapunov::{lle_stabilized, lle_to_stability, LleResult};
pub use sampen::{sampen, sampen_counts, SampEnCounts};
pub use spectral::{spectral_energy, welch_psd, Psd, SPECTRAL_MIN_LEN};

/// Minimum number of embedded points (and of neighbour pairs per
/// divergence step) for a usable Lyapunov estimate.
pub const M_MIN: usize = 30;
