//! Embedding extraction and unsupervised structure analysis: max pooling,
//! PCA, exact t-SNE, GMM clustering, and cluster fingerprints.

mod fingerprint;
mod gmm;
mod linalg;
mod metrics;
mod pca;
mod pool;
mod report;
mod tsne;

pub use fingerprint::{cluster_fingerprint, Fingerprint};
pub use gmm::{gmm_fit, GmmConfig, GmmFit};
pub use linalg::{cholesky, eigh_symmetric};
pub use metrics::{adjusted_rand_index, silhouette_score};
pub use pca::{pca_project, PcaResult};
pub use pool::{
    embed_players, load_embeddings, max_pool_embeddings, save_embeddings, write_embeddings_csv,
    EmbeddingMatrix,
};
pub use report::{render_cluster_svg, ClusterReport};
pub use tsne::{tsne_embed, TsneConfig, TsneResult};
