//! Empirical checks of the local limit law for triangle counts in the
//! Erdős–Rényi graph G(n, p).
//!
//! The crate samples graphs into packed bit matrices, counts triangles with
//! word-parallel kernels, enumerates small cases exactly, and measures how
//! closely the distribution of the triangle count follows a discrete Gaussian,
//! both pointwise and through its characteristic function.

pub mod count;
pub mod error;
pub mod graph;
pub mod limit;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod probe;
pub mod sampler;
pub mod spectral;

pub use count::{count_partitioned, count_triangles, normalize_count, PartitionedCounts};
pub use error::{Error, Result};
pub use graph::{codegree, restrict_to_edge_set, sample_gnp, BitAdjacency, GraphParams};
pub use oracle::{exact_pmf, PmfKind, PmfTable};
pub use spectral::{LatticeSpec, Region, RegionSplit};
