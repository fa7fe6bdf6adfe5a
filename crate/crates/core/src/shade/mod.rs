//! Feature maps, shaders, noise and the display remap.

mod features;
mod image;
mod noise;
mod pedf;
mod shader;

pub use features::{
    face_normal_dot, normal_dot_feature, render_features, shadow_alpha, visible_faces, FeatureMaps,
};
pub use image::{ImageScale, SarImage};
pub use noise::{augment, image_rng, select_branch, NoiseBranch, NoiseConfig};
pub use pedf::{pedf, PedfConfig};
pub use shader::{
    analytic_shader, learned_shader_forward, learned_shader_raw, ConvLayer, LearnedShader, Shader,
    ShaderParams, FEATURE_CHANNELS,
};
