pub mod chem;
pub mod codec;
pub mod pointcloud;
pub mod datagen;
pub mod metrics;
pub mod pretrain;
