//! Built-in synthetic networks.
//!
//! `fig1` is a 2-4-4-2 grid of 12 nodes with four star clusters of five
//! nodes each. `line20` chains 20 star clusters so that consecutive clusters
//! share exactly one leaf node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HawkesModel;
use crate::scan::{Cluster, ClusterSet};
use crate::score::EdgeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub model: HawkesModel,
    pub clusters: ClusterSet,
}

pub const FIXTURES: [&str; 2] = ["fig1", "line20"];

pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "fig1" => Ok(fig1()),
        "line20" => Ok(line20()),
        other => Err(Error::Config(format!(
            "unknown fixture {other:?} (expected one of {})",
            FIXTURES.join(", ")
        ))),
    }
}

fn star(name: String, center: usize, leaves: &[usize]) -> Cluster {
    let mut nodes = vec![center];
    nodes.extend_from_slice(leaves);
    let edges = EdgeSet::new(leaves.iter().map(|&l| (center, l)).collect())
        .expect("star leaves are distinct");
    Cluster { name, nodes, edges }
}

/// Node labels in the grid are 1-based; indices are label - 1.
///
/// ```text
///        1   2
///    3   4   5   6
///    7   8   9  10
///       11  12
/// ```
pub fn fig1() -> Fixture {
    let spec: [(usize, [usize; 4]); 4] =
        [(4, [1, 3, 5, 8]), (5, [2, 4, 6, 9]), (8, [4, 7, 9, 11]), (9, [5, 8, 10, 12])];
    let clusters = spec
        .iter()
        .map(|(c, leaves)| {
            let leaves: Vec<usize> = leaves.iter().map(|l| l - 1).collect();
            star(format!("center{c}"), c - 1, &leaves)
        })
        .collect();
    Fixture {
        name: "fig1".into(),
        model: HawkesModel::poisson(vec![1.0; 12], 1.0).expect("valid"),
        clusters: ClusterSet::new(clusters).expect("valid"),
    }
}

pub const LINE20_CLUSTERS: usize = 20;

/// Index of connector node `k` (shared by clusters `k-1` and `k`).
pub fn line20_connector(k: usize) -> usize {
    k
}

/// Index of the center of cluster `i` (0-based).
pub fn line20_center(i: usize) -> usize {
    LINE20_CLUSTERS + 1 + 3 * i
}

pub fn line20() -> Fixture {
    let n = LINE20_CLUSTERS;
    let clusters = (0..n)
        .map(|i| {
            let c = line20_center(i);
            star(
                format!("cluster{}", i + 1),
                c,
                &[line20_connector(i), c + 1, line20_connector(i + 1), c + 2],
            )
        })
        .collect();
    Fixture {
        name: "line20".into(),
        model: HawkesModel::poisson(vec![1.0; 4 * n + 1], 1.0).expect("valid"),
        clusters: ClusterSet::new(clusters).expect("valid"),
    }
}

/// Post-change model for `line20` with every edge of cluster `i` set to
/// `alpha`.
pub fn line20_change(i: usize, alpha: f64) -> Result<HawkesModel> {
    let fx = line20();
    let cluster = fx
        .clusters
        .clusters()
        .get(i)
        .ok_or_else(|| Error::Argument(format!("line20 has no cluster {i}")))?;
    let mut model = fx.model.clone();
    for (p, q) in cluster.edges.iter() {
        model.set_alpha(p, q, alpha);
    }
    model.validate()?;
    Ok(model)
}

pub const FIG1_CASES: [&str; 7] = ["i", "ii", "iii", "iv", "v", "vi", "vii"];

/// Changed influence entries for a named `fig1` case, as
/// `(from_label, to_label, alpha)` with 1-based labels.
pub fn fig1_case_entries(case: &str) -> Result<&'static [(usize, usize, f64)]> {
    Ok(match case {
        "i" => &[(4, 1, 0.2), (4, 3, 0.2), (4, 5, 0.2), (4, 8, 0.2)],
        "ii" => &[(4, 1, 0.5), (4, 3, 0.5), (4, 5, 0.5), (4, 8, 0.5)],
        "iii" => &[(4, 1, 0.6), (4, 3, 0.4), (4, 5, 0.5), (4, 8, 0.5)],
        "iv" => &[(4, 1, 0.5), (4, 3, 0.5), (9, 5, 0.5), (9, 8, 0.5)],
        "v" => &[(4, 5, 0.5), (4, 8, 0.5), (9, 8, 0.5), (9, 5, 0.5)],
        "vi" => &[(4, 5, 0.5), (4, 8, 0.5)],
        "vii" => &[(4, 5, 0.5)],
        other => {
            return Err(Error::Config(format!(
                "unknown case {other:?} (expected one of {})",
                FIG1_CASES.join(", ")
            )))
        }
    })
}

/// Post-change model for a named `fig1` case.
pub fn fig1_case(case: &str) -> Result<HawkesModel> {
    let mut model = fig1().model;
    for &(p, q, a) in fig1_case_entries(case)? {
        model.set_alpha(p - 1, q - 1, a);
    }
    model.validate()?;
    Ok(model)
}
