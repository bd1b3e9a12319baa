//! Offline data augmentation for bimanual eye-in-hand imitation-learning
//! datasets.
//!
//! The pipeline labels contact phases from wrist-camera observations, samples
//! constraint-enforced camera-pose perturbations, synthesizes perturbed wrist
//! views, derives joint-space action labels through inverse kinematics, and
//! assembles an augmented dataset. A built-in synthetic bimanual simulator
//! provides oracle data for verification end to end.

pub mod contact;
pub mod dataset;
pub mod geometry;
pub mod image;
pub mod kinematics;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod synth;
