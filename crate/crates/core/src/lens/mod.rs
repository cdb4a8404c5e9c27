//! Expert-choice analysis: which experts a document's tokens lean towards,
//! reduced to three dimensions and compared across domains.

pub mod plot;
pub mod profile;
pub mod report;
pub mod table;
pub mod tsne;

pub use plot::emit_plot;
pub use profile::{collect_profiles, expert_profile, ExpertChoiceProfile, LabeledTokens, Pooling, ProfileSet};
pub use report::{cluster_report, cosine_distance, ClusterReport, PairDistance};
pub use table::{embedding_csv, profiles_csv, read_table};
pub use tsne::{input_affinities, max_perplexity, tsne_reduce, EmbeddingResult, TsneConfig};
