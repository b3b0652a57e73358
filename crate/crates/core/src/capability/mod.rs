//! A capability system in the style of decentralized information flow
//! control: processes carry secrecy sets of tags and capability sets of
//! tag rights, exchange messages and capabilities under the guard
//! `S_p ⊆ S_q`, and induce the associated policy `p ↣ q iff S_p ⊆ S_q`.

mod config;
mod model;
mod system;

pub use config::{
    full_alphabet, parse_capability, parse_script, replay, CapabilityConfig, Expectation, ObsMode,
    Replay, ReplayStep, ScriptItem,
};
pub use model::{
    associated_policy, cap_step, Cap, CapAction, CapSet, CapState, DataAction, DataUpdate, Forward,
    Load, Msg, Process, ProcessState, ProcessView, Right, SetMessage, Store, Tag, TagSet,
    TagUniverse, MAX_TAGS,
};
pub use system::{build_pes, capability_drm_interpretation, explore, interpret, CapabilitySystem};
