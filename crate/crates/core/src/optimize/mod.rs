//! Loss terms, optimizers, shader training and mesh reconstruction.

mod losses;
mod optim;
mod recon;
mod train;

pub use losses::{
    interior_face_pairs, laplacian_operator, loss_edge_length, loss_floor_plane, loss_laplacian,
    loss_mse, loss_normal_consistency, loss_total, mesh_vertices, FloorCamera, FloorLoss,
    LossTerms, LossWeights, MeshTopology, Reduction,
};
pub use optim::{linear_lr, AdamW, Sgd};
pub use recon::{
    reconstruct, render_image, BatchSampler, IterationRecord, LabelView, LevelSchedule,
    ReconResult, ReconSchedule, RenderSetup, RECON_TAU,
};
pub use train::{shader_l1, train_shader, ShaderSample, ShaderTrainConfig, ShaderTrainReport};
