//! Discrete navigation worlds: graphs of viewpoints with panoramic
//! observations grouped into rooms.

mod format;
mod generate;
mod graph;
pub(crate) mod paths;

pub use format::{parse_environment, read_environment, serialize_environment, write_environment};
pub use generate::{generate_environment, token_embedding, GeneratorParams};
pub use graph::{heading, Edge, EnvironmentGraph, Provenance, Room, SplitTag, ViewObservation, Viewpoint};
pub use paths::{geodesic_distance, shortest_path};
