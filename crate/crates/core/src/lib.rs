//! Grid-world object-goal navigation where the agent may ask a teacher for
//! help. Scenes and visibility live in [`gridworld`], the likelihood map and
//! its lower-bound uncertainty in [`uncertainty`], the episode state machine
//! in [`env`], policies and the teacher curriculum in [`agents`], and the
//! evaluation metrics in [`metrics`].

pub mod agents;
pub mod env;
pub mod gridworld;
pub mod metrics;
pub mod seeding;
pub mod uncertainty;
