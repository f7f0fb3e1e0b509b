//! Closed-form edge-collision probability and per-query accuracy bounds.
//!
//! `D` is the vertex hash range and `L` the vertex-label hash range. An
//! edge with no shared endpoint collides with a given edge with probability
//! `p1 = (q1 + L*q2 + L^2*q3) / (D^2 L^2)`; an edge sharing one endpoint
//! with probability `p2 = (h1 + L*h2) / (D L)`. The probability that an
//! edge avoids every collision is `P = exp(-p1 (|E| - d_v) - p2 d_v)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Label-collision case probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LabelModel {
    /// Explicit case probabilities, `q1 + q2 + q3 = 1` and `h1 + h2 = 1`.
    Cases {
        q1: f64,
        q2: f64,
        q3: f64,
        h1: f64,
        h2: f64,
    },
    /// `labels` vertex labels, uniformly distributed.
    Uniform { labels: u64 },
}

impl LabelModel {
    /// `(q1, q2, q3, h1, h2)`.
    pub fn cases(&self) -> (f64, f64, f64, f64, f64) {
        match *self {
            LabelModel::Cases { q1, q2, q3, h1, h2 } => (q1, q2, q3, h1, h2),
            LabelModel::Uniform { labels } => {
                let l = labels as f64;
                (
                    (l - 1.0).powi(2) / (l * l),
                    2.0 * (l - 1.0) / (l * l),
                    1.0 / (l * l),
                    (l - 1.0) / l,
                    1.0 / l,
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollisionParams {
    pub vertex_range: f64,
    pub label_range: f64,
    pub edges: f64,
    pub degree: f64,
    pub labels: LabelModel,
}

impl CollisionParams {
    /// `D = d * F`, `L = t * F`.
    pub fn from_sketch(matrix_width: u64, fingerprint_range: u64, t: u64, edges: u64, degree: u64, labels: LabelModel) -> Self {
        CollisionParams {
            vertex_range: (matrix_width * fingerprint_range) as f64,
            label_range: (t * fingerprint_range) as f64,
            edges: edges as f64,
            degree: degree as f64,
            labels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProbabilities(m.to_string()));
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if let LabelModel::Uniform { labels: 0 } = self.labels {
            return bad("uniform label model needs at least one label");
        }
        let (q1, q2, q3, h1, h2) = self.labels.cases();
        if ![q1, q2, q3, h1, h2].into_iter().all(in_unit) {
            return bad("case probabilities must lie in [0, 1]");
        }
        if (q1 + q2 + q3 - 1.0).abs() > 1e-9 {
            return bad("q1 + q2 + q3 must equal 1");
        }
        if (h1 + h2 - 1.0).abs() > 1e-9 {
            return bad("h1 + h2 must equal 1");
        }
        if !(self.vertex_range > 0.0 && self.label_range > 0.0) {
            return bad("hash ranges must be positive");
        }
        if !(self.edges >= self.degree && self.degree >= 0.0) {
            return bad("need 0 <= d_v <= |E|");
        }
        Ok(())
    }

    /// `(p1, p2)`.
    pub fn pair_probabilities(&self) -> (f64, f64) {
        let (q1, q2, q3, h1, h2) = self.labels.cases();
        let (d, l) = (self.vertex_range, self.label_range);
        let p1 = (q1 + l * q2 + l * l * q3) / (d * d * l * l);
        let p2 = (h1 + l * h2) / (d * l);
        (p1, p2)
    }
}

/// Probability that an edge suffers no collision.
pub fn collision_free_probability(params: &CollisionParams) -> Result<f64> {
    params.validate()?;
    let (p1, p2) = params.pair_probabilities();
    Ok((-p1 * (params.edges - params.degree) - p2 * params.degree).exp())
}

/// Collapsed uniform-label form,
/// `exp(-x^2 (|E| - d_v) - x d_v)` with `x = (L + l - 1) / (D L l)`.
pub fn uniform_collision_free_probability(vertex_range: f64, label_range: f64, labels: u64, edges: f64, degree: f64) -> f64 {
    let l = labels as f64;
    let x = (label_range + l - 1.0) / (vertex_range * label_range * l);
    (-x * x * (edges - degree) - x * degree).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum QueryKind {
    /// Vertex weight query on a vertex of degree `degree` in a graph of `vertices`.
    Vertex { vertices: f64, degree: f64 },
    Edge,
    /// Reachability with average out-degree `avg_degree`.
    Path { vertices: f64, avg_degree: f64 },
    /// Approximate subgraph query over `size` pattern edges.
    Subgraph { size: f64 },
}

/// Edge-label hashing for label-restricted queries: `c` prime slots and
/// `labels` distinct edge labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeLabelHashing {
    pub slots: f64,
    pub labels: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QueryBound {
    /// Probability the query answer is unaffected by collisions.
    pub accuracy: f64,
}

impl QueryBound {
    pub fn error(&self) -> f64 {
        1.0 - self.accuracy
    }
}

/// Accuracy guarantee of a query given the collision-free probability `p`.
pub fn query_error_bound(kind: QueryKind, labeled: Option<EdgeLabelHashing>, p: f64) -> QueryBound {
    let base = match kind {
        QueryKind::Vertex { vertices, degree } => p.powf(vertices - degree),
        QueryKind::Edge => p,
        QueryKind::Path { vertices, avg_degree } => p.powf(vertices - avg_degree),
        QueryKind::Subgraph { size } => p.powf(size),
    };
    let label_factor = labeled.map_or(1.0, |h| (1.0 - 1.0 / h.slots).powf(h.labels - 1.0));
    QueryBound {
        accuracy: base * label_factor,
    }
}
