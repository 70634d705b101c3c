//! Prior-to-target alignment, pseudo correspondences and prior sources.

mod correspondence;
mod fit;
mod icp;
mod prior;

pub use correspondence::{pseudo_correspondence, CorrespondenceMap};
pub use fit::best_fit_similarity;
pub use icp::{icp_align, octahedral_rotations, IcpOptions, IcpResult};
pub use prior::{library_prior, sphere_prior, LibrarySource, PriorProvider, PrototypeLibrary, SphereSource};
