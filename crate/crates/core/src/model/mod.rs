//! Signatures, policy-enhanced systems, products, unfoldings and bounded
//! bisimilarity.

mod signature;
mod system;
mod unfold;

pub use signature::{ActionId, DomainId, DomainSet, Signature, Trace, MAX_DOMAINS};
pub use system::{encode, Machine, ObsId, Pes, PesBuilder, PolicyAutomaton, StateId};
pub use unfold::{check_bisimilar, unfold, Bisimilarity};
