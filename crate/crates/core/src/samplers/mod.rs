//! Random generation of Poisson-Dirichlet weights, Bolthausen-Sznitman
//! coalescents, Ruelle probability cascades and gaussian increment fields.

pub mod coalescent;
pub mod field;
pub mod pd;
pub mod rpc;

pub use coalescent::{
    merge_rate, sample_bs_coalescent, sample_bs_coalescent_lineages, CoalescentRecord, MergeEvent,
};
pub use field::{sample_gaussian_field, FieldSampler, GaussianField};
pub use pd::sample_poisson_dirichlet;
pub use rpc::{build_rpc, build_rpc_with_record, FixedSource, OverlapMap, RostSource, RpcSource};
