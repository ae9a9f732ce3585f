//! Image features computed from pixels (color histogram, HOG with random
//! projection) and ingestion of externally computed embeddings.

mod color;
mod embeddings;
mod hog;
mod projection;

pub use color::{color_histogram, ColorPalette, PALETTE_SIZE};
pub use embeddings::{load_embeddings, parse_embeddings, write_embeddings, EmbeddingError, EmbeddingTable};
pub use hog::{hog_features, HOG_DIM};
pub use projection::{ProjectionError, SignProjection, DEFAULT_PROJECTED_DIM};
