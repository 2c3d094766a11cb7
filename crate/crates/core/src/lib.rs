//! Building blocks for detecting excessive data exposure in web API
//! responses: an API field is excessive when deleting it from the response
//! leaves the rendered page unchanged.
//!
//! * [`script`]: the interaction-script DSL that drives a browser to the
//!   updated page.
//! * [`mutation`]: the response as a JSON tree, its leaf fields and the
//!   single-deletion mutants.
//! * [`dom`]: normalized page trees, the identity check and the ignore mask.

pub mod dom;
pub mod mutation;
pub mod script;

pub use dom::{
    build_ignore_mask, compare, parse_html, ComparisonResult, Condition, Divergence, DomError,
    DomNode, DomTree, IgnoreMask, NodeAddress, Verdict,
};
pub use mutation::{ApiResponseTree, FieldPath, Mutation, MutationError, Segment};
pub use script::{parse_script, serialize_script, Action, InteractionScript, ScriptError};
