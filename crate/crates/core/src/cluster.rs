//! Grouping of map neurons into a fixed number of super-clusters, used to
//! compare a trained map against known class labels.

use crate::error::{domain, Result};
use crate::som::Codebook;

/// Ward agglomerative clustering of the prototypes into `groups` clusters.
///
/// Returns one cluster id per neuron; ids are numbered by the smallest neuron
/// index they contain.
pub fn ward_clusters(codebook: &Codebook, groups: usize) -> Result<Vec<usize>> {
    let k = codebook.len();
    if groups == 0 || groups > k {
        return domain(format!("cannot cut {k} neurons into {groups} clusters"));
    }
    // squared Euclidean dissimilarities, updated by Lance-Williams
    let mut dist = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let d: f64 = codebook
                .prototype(a)
                .iter()
                .zip(codebook.prototype(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            dist[a * k + b] = d;
            dist[b * k + a] = d;
        }
    }
    let mut size = vec![1usize; k];
    let mut active = vec![true; k];
    let mut owner: Vec<usize> = (0..k).collect();
    let mut clusters = k;
    while clusters > groups {
        let mut best = (f64::INFINITY, 0, 0);
        for a in (0..k).filter(|&a| active[a]) {
            for b in ((a + 1)..k).filter(|&b| active[b]) {
                if dist[a * k + b] < best.0 {
                    best = (dist[a * k + b], a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for c in (0..k).filter(|&c| active[c] && c != a && c != b) {
            let nc = size[c] as f64;
            let merged = ((na + nc) * dist[a * k + c] + (nb + nc) * dist[b * k + c] - nc * dist[a * k + b])
                / (na + nb + nc);
            dist[a * k + c] = merged;
            dist[c * k + a] = merged;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
        clusters -= 1;
    }
    // renumber by first appearance
    let mut ids = vec![usize::MAX; k];
    let mut next = 0;
    Ok(owner
        .iter()
        .map(|&root| {
            if ids[root] == usize::MAX {
                ids[root] = next;
                next += 1;
            }
            ids[root]
        })
        .collect())
}
