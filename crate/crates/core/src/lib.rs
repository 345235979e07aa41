//! Feedback-driven exploration of a crafting world by text policies.
//!
//! The pieces, bottom up: [`world`] (items, skills, tasks), [`sim`] (episode
//! state and stochastic execution), [`prompt`] (templates and gap analysis),
//! [`retrieval`] (free text to catalog skill), [`policy`] (oracle, playback,
//! chat endpoint), [`explore`] (revision loop and subtask relabeling),
//! [`campaign`], [`dataset`] and [`report`].

pub mod campaign;
pub mod dataset;
pub mod explore;
pub mod http;
pub mod planner;
pub mod policy;
pub mod prompt;
pub mod qty;
pub mod replay;
pub mod report;
pub mod retrieval;
pub mod sim;
pub mod trajectory;
pub mod world;

pub use qty::Qty;
pub use world::World;
