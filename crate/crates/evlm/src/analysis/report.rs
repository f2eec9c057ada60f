//! Assembled cluster report plus the optional SVG scatter plot.

use std::io::Write;
use std::path::Path;

use super::fingerprint::Fingerprint;
use super::gmm::GmmFit;
use crate::error::Result;

/// Everything the cluster stage produces for downstream reporting.
#[derive(Debug, serde::Serialize)]
pub struct ClusterReport {
    pub player_ids: Vec<String>,
    pub assignments: Vec<usize>,
    pub tsne_coords: Vec<f64>,
    pub gmm: GmmFit,
    pub fingerprints: Vec<Fingerprint>,
}

impl ClusterReport {
    /// `player_id,cluster` lines.
    pub fn write_assignments_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "player_id,cluster")?;
        for (id, cluster) in self.player_ids.iter().zip(&self.assignments) {
            writeln!(w, "{id},{cluster}")?;
        }
        Ok(())
    }

    /// `player_id,x,y` lines of the 2-D embedding.
    pub fn write_coords_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "player_id,x,y")?;
        for (i, id) in self.player_ids.iter().enumerate() {
            writeln!(w, "{id},{},{}", self.tsne_coords[i * 2], self.tsne_coords[i * 2 + 1])?;
        }
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        #[derive(serde::Serialize)]
        struct Summary<'a> {
            players: usize,
            k: usize,
            log_likelihood: f64,
            weights: &'a [f64],
            means: &'a [f64],
            covariances: &'a [Vec<f64>],
            warnings: &'a [String],
            fingerprints: &'a [Fingerprint],
        }
        let summary = Summary {
            players: self.player_ids.len(),
            k: self.gmm.k,
            log_likelihood: self.gmm.log_likelihood,
            weights: &self.gmm.weights,
            means: &self.gmm.means,
            covariances: &self.gmm.covariances,
            warnings: &self.gmm.warnings,
            fingerprints: &self.fingerprints,
        };
        Ok(std::fs::write(path, serde_json::to_string_pretty(&summary)?)?)
    }
}

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Renders the 2-D embedding as an SVG scatter colored by cluster.
pub fn render_cluster_svg(coords: &[f64], assignments: &[usize], width: u32) -> String {
    let n = assignments.len();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        min_x = min_x.min(coords[i * 2]);
        max_x = max_x.max(coords[i * 2]);
        min_y = min_y.min(coords[i * 2 + 1]);
        max_y = max_y.max(coords[i * 2 + 1]);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let margin = 20.0;
    let w = width as f64;
    let scale = (w - 2.0 * margin) / span_x.max(span_y);
    let height = (span_y * scale + 2.0 * margin).ceil() as u32;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for i in 0..n {
        let x = margin + (coords[i * 2] - min_x) * scale;
        let y = margin + (max_y - coords[i * 2 + 1]) * scale;
        let color = PALETTE[assignments[i] % PALETTE.len()];
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.75\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
