//! The analysis stage in isolation: max-pooled embeddings from an untrained
//! encoder would be noise, so this example fabricates archetype-colored
//! embedding vectors and walks them through PCA, t-SNE, GMM, and
//! fingerprints. See `end_to_end.rs` for the trained-model version.
//!
//! ```bash
//! cargo run --release --example embed_and_cluster
//! ```

use evlm::analysis::{
    adjusted_rand_index, cluster_fingerprint, gmm_fit, pca_project, render_cluster_svg,
    silhouette_score, tsne_embed, GmmConfig, TsneConfig,
};
use evlm::pipeline::PlayerDocument;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    // four synthetic "behavior styles" in a 64-d embedding space
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n_per, dim, k) = (60usize, 64usize, 4usize);
    let n = n_per * k;
    let mut data = vec![0.0; n * dim];
    let mut truth = vec![0usize; n];
    let mut documents = Vec::with_capacity(n);
    let styles = ["round_start", "social_activity", "reward_claim", "purchase"];
    for c in 0..k {
        for i in 0..n_per {
            let row = c * n_per + i;
            truth[row] = c;
            for j in 0..dim {
                let center = if j % k == c { 3.0 } else { 0.0 };
                data[row * dim + j] = center + rng.gen_range(-0.6..0.6);
            }
            documents.push(PlayerDocument {
                player_id: format!("p{row:03}"),
                text: format!("[CLS] {} x:y [SEP]", styles[c]),
                session_offsets: vec![1],
            });
        }
    }

    let pca = pca_project(&data, n, dim, 20)?;
    println!(
        "PCA: top-5 explained variance ratios {:?}",
        pca.explained_variance_ratio[..5]
            .iter()
            .map(|v| (v * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );

    let tsne = tsne_embed(&pca.projected, n, 20, &TsneConfig { seed: 5, ..TsneConfig::default() })?;
    println!("t-SNE: KL {:.3} -> {:.3}", tsne.initial_kl, tsne.final_kl);
    println!(
        "silhouette of truth labels in 2-D: {:.3}",
        silhouette_score(&tsne.coords, n, 2, &truth)
    );

    let gmm = gmm_fit(&tsne.coords, n, 2, &GmmConfig { k, seed: 5, ..GmmConfig::default() })?;
    println!(
        "GMM: log-likelihood {:.1}, weights {:?}",
        gmm.log_likelihood,
        gmm.weights.iter().map(|w| (w * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
    println!(
        "adjusted Rand index vs truth: {:.3}",
        adjusted_rand_index(&gmm.assignments, &truth)
    );

    for fp in cluster_fingerprint(&gmm.assignments, &documents, k, 3) {
        let top = fp
            .histogram
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(class, share)| format!("{class} {:.0}%", share * 100.0))
            .unwrap_or_default();
        println!("cluster {} ({} players): top class {top}", fp.cluster, fp.size);
    }

    std::fs::create_dir_all("out/example_cluster")?;
    std::fs::write(
        "out/example_cluster/clusters.svg",
        render_cluster_svg(&tsne.coords, &gmm.assignments, 800),
    )?;
    println!("wrote out/example_cluster/clusters.svg");
    Ok(())
}
