//! Generator, discriminator and checkpoint container.

mod checkpoint;
mod discriminator;
mod generator;
mod mapping;

pub use checkpoint::{Checkpoint, CheckpointMeta, MAGIC, VERSION};
pub use discriminator::{Discriminator, DiscriminatorCache, DiscriminatorConfig, R1Output};
pub use generator::{normalize_latent, Generator, GeneratorCache, GeneratorConfig, ModulationParams};
pub use mapping::MappingNetwork;
