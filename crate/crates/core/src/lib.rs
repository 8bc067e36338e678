//! Text-driven indoor layout generation: layout DSL, geometry checks,
//! rewards, model gateway, rendering, and the generation pipeline.

pub mod datagen;
pub mod gateway;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod reward;
