//! Directed-graph description of a steam network and the incidence-matrix
//! linear algebra used by the equilibrium and spectral analyses.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermo::BoilerParams;

/// Singular values below `RANK_TOL * σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeParams {
    /// Length (m).
    pub length: f64,
    /// Inner diameter (m).
    pub diameter: f64,
    /// Darcy friction coefficient.
    pub friction: f64,
}

impl PipeParams {
    pub fn table_default() -> Self {
        Self {
            length: 200.0,
            diameter: 0.2,
            friction: 0.016,
        }
    }

    /// Flow cross-section `π d² / 4` (m²).
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub boiler: BoilerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    /// Index of the tail vertex (flow with `u > 0` leaves here).
    pub tail: usize,
    /// Index of the head vertex.
    pub head: usize,
    pub params: PipeParams,
}

/// Sites (vertices) and pipes (links) in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    sites: Vec<Site>,
    pipes: Vec<Pipe>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SelfLoop { link: String },
    Disconnected { components: usize },
    DuplicateVertex { id: String },
    DuplicateLink { id: String },
    UnknownVertex { link: String, vertex: String },
    NonPositivePipeParameter { link: String, field: &'static str, value: f64 },
    NegativeBoilerParameter { vertex: String },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { link } => write!(f, "link {link} is a self-loop"),
            Violation::Disconnected { components } => {
                write!(f, "graph is not connected ({components} components)")
            }
            Violation::DuplicateVertex { id } => write!(f, "duplicate vertex id {id}"),
            Violation::DuplicateLink { id } => write!(f, "duplicate link id {id}"),
            Violation::UnknownVertex { link, vertex } => {
                write!(f, "link {link} references unknown vertex {vertex}")
            }
            Violation::NonPositivePipeParameter { link, field, value } => {
                write!(f, "link {link}: {field} = {value} must be positive")
            }
            Violation::NegativeBoilerParameter { vertex } => {
                write!(f, "vertex {vertex}: boiler parameters must be nonnegative")
            }
            Violation::Empty => write!(f, "network has no vertices"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct NetworkError(pub Vec<Violation>);

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a site and returns its index.
    pub fn add_site(&mut self, id: impl Into<String>, boiler: BoilerParams) -> usize {
        self.sites.push(Site {
            id: id.into(),
            boiler,
        });
        self.sites.len() - 1
    }

    /// Appends a pipe from `tail` to `head` (site ids) and returns its index.
    ///
    /// Unknown ids are recorded as an out-of-range index and reported by
    /// [`Network::validate`].
    pub fn add_pipe(
        &mut self,
        id: impl Into<String>,
        tail: &str,
        head: &str,
        params: PipeParams,
    ) -> usize {
        let tail = self.site_index(tail).unwrap_or(usize::MAX);
        let head = self.site_index(head).unwrap_or(usize::MAX);
        self.add_pipe_by_index(id, tail, head, params)
    }

    pub fn add_pipe_by_index(
        &mut self,
        id: impl Into<String>,
        tail: usize,
        head: usize,
        params: PipeParams,
    ) -> usize {
        self.pipes.push(Pipe {
            id: id.into(),
            tail,
            head,
            params,
        });
        self.pipes.len() - 1
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_pipes(&self) -> usize {
        self.pipes.len()
    }

    /// Two sites joined by one pipe `site1 → site2`, with the boiler and
    /// pipe used in the two-site experiments.
    pub fn two_site() -> Self {
        let mut net = Self::new();
        net.add_site("site1", BoilerParams::table_default());
        net.add_site("site2", BoilerParams::table_default());
        net.add_pipe("pipe1", "site1", "site2", PipeParams::table_default());
        net
    }

    /// Checks structure and parameters, collecting every violation.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut out = Vec::new();
        if self.sites.is_empty() {
            out.push(Violation::Empty);
        }
        let mut seen = HashSet::new();
        for s in &self.sites {
            if !seen.insert(s.id.as_str()) {
                out.push(Violation::DuplicateVertex { id: s.id.clone() });
            }
            if !s.boiler.is_nonnegative() {
                out.push(Violation::NegativeBoilerParameter {
                    vertex: s.id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for p in &self.pipes {
            if !seen.insert(p.id.as_str()) {
                out.push(Violation::DuplicateLink { id: p.id.clone() });
            }
            for v in [p.tail, p.head] {
                if v >= self.sites.len() {
                    out.push(Violation::UnknownVertex {
                        link: p.id.clone(),
                        vertex: if v == usize::MAX {
                            "<unresolved>".to_string()
                        } else {
                            v.to_string()
                        },
                    });
                }
            }
            if p.tail == p.head {
                out.push(Violation::SelfLoop { link: p.id.clone() });
            }
            for (field, value) in [
                ("length", p.params.length),
                ("diameter", p.params.diameter),
                ("friction", p.params.friction),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    out.push(Violation::NonPositivePipeParameter {
                        link: p.id.clone(),
                        field,
                        value,
                    });
                }
            }
        }
        if !self.sites.is_empty() {
            let components = self.components();
            if components > 1 {
                out.push(Violation::Disconnected { components });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(NetworkError(out))
        }
    }

    fn components(&self) -> usize {
        let n = self.sites.len();
        let mut adj = vec![Vec::new(); n];
        for p in &self.pipes {
            if p.tail < n && p.head < n {
                adj[p.tail].push(p.head);
                adj[p.head].push(p.tail);
            }
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    /// Vertex-by-link incidence matrix: `+1` at the tail, `-1` at the head.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.sites.len(), self.pipes.len());
        for (j, p) in self.pipes.iter().enumerate() {
            if p.tail != p.head {
                r[(p.tail, j)] = 1.0;
                r[(p.head, j)] = -1.0;
            }
        }
        r
    }

    /// Links of a BFS spanning tree rooted at vertex 0, with each tree
    /// vertex's parent link, in BFS order (root excluded).
    pub(crate) fn spanning_tree(&self) -> Vec<(usize, usize)> {
        let n = self.sites.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (j, p) in self.pipes.iter().enumerate() {
            adj[p.tail].push((p.head, j));
            adj[p.head].push((p.tail, j));
        }
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n.saturating_sub(1));
        if n == 0 {
            return order;
        }
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for &(w, j) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    order.push((w, j));
                    queue.push_back(w);
                }
            }
        }
        order
    }
}

/// Kernel/image structure of an incidence matrix.
#[derive(Debug, Clone)]
pub struct SubspaceReport {
    /// Orthonormal basis of Ker(R) (columns, `m × k`): the loop space.
    pub ker_r: DMatrix<f64>,
    /// Orthonormal basis of Ker(Rᵀ) (columns, `n × k`).
    pub ker_rt: DMatrix<f64>,
    pub rank: usize,
    pub dim_im_r: usize,
    pub dim_im_rt: usize,
    /// Absolute threshold applied to singular values.
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
    /// Set when some singular value lies within a factor 10 of the threshold.
    pub ambiguous: bool,
}

/// Appends zero rows so that the thin SVD yields a full `V`.
fn pad_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows().max(a.ncols());
    let mut out = DMatrix::zeros(k, a.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out
}

/// Orthonormal basis of the null space of `a`, plus rank data.
/// Returns (basis columns, rank, singular values, absolute tol, ambiguous).
pub(crate) fn null_space(a: &DMatrix<f64>) -> (DMatrix<f64>, usize, Vec<f64>, f64, bool) {
    let cols = a.ncols();
    if cols == 0 {
        return (DMatrix::zeros(0, 0), 0, Vec::new(), 0.0, false);
    }
    let svd = pad_rows(a).svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sigma.iter().copied().fold(0.0_f64, f64::max);
    let tol = RANK_TOL * smax.max(f64::MIN_POSITIVE);
    let ambiguous = sigma
        .iter()
        .any(|&s| s > 0.0 && s < 10.0 * tol && s > tol / 10.0);
    let mut rank = 0;
    let mut basis = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s > tol {
            rank += 1;
        } else {
            basis.push(v_t.row(i).transpose());
        }
    }
    let mut sv: Vec<f64> = sigma.clone();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ker = if basis.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&basis)
    };
    (ker, rank, sv, tol, ambiguous)
}

/// Rank-revealing SVD analysis of an incidence matrix.
pub fn subspace_analysis(r: &DMatrix<f64>) -> SubspaceReport {
    let (ker_r, rank, singular_values, tolerance, amb1) = null_space(r);
    let (ker_rt, _, _, _, amb2) = null_space(&r.transpose());
    SubspaceReport {
        ker_r,
        ker_rt,
        rank,
        dim_im_r: rank,
        dim_im_rt: rank,
        tolerance,
        singular_values,
        ambiguous: amb1 || amb2,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KirchhoffError {
    #[error("conductance {index} = {value} must be positive")]
    NonPositive { index: usize, value: f64 },
    #[error("expected {expected} conductances, got {got}")]
    Length { expected: usize, got: usize },
}

/// Weighted graph Laplacian `R Σ Rᵀ` for diagonal `Σ = diag(sigma)`.
pub fn kirchhoff_matrix(r: &DMatrix<f64>, sigma: &[f64]) -> Result<DMatrix<f64>, KirchhoffError> {
    if sigma.len() != r.ncols() {
        return Err(KirchhoffError::Length {
            expected: r.ncols(),
            got: sigma.len(),
        });
    }
    if let Some((index, &value)) = sigma
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(KirchhoffError::NonPositive { index, value });
    }
    let weighted = r * DMatrix::from_diagonal(&DVector::from_column_slice(sigma));
    Ok(&weighted * r.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Network {
        let mut net = Network::new();
        for id in ["a", "b", "c"] {
            net.add_site(id, BoilerParams::table_default());
        }
        net.add_pipe("ab", "a", "b", PipeParams::table_default());
        net.add_pipe("bc", "b", "c", PipeParams::table_default());
        net.add_pipe("ac", "a", "c", PipeParams::table_default());
        net
    }

    #[test]
    fn two_site_is_valid() {
        let net = Network::two_site();
        assert!(net.validate().is_ok());
        let r = net.incidence_matrix();
        assert_eq!(r, DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
    }

    #[test]
    fn self_loop_is_reported() {
        let mut net = Network::two_site();
        net.add_pipe("loop", "site1", "site1", PipeParams::table_default());
        let err = net.validate().unwrap_err();
        assert!(err.0.contains(&Violation::SelfLoop { link: "loop".into() }));
    }

    #[test]
    fn disconnected_pairs_are_reported() {
        let mut net = Network::two_site();
        net.add_site("x", BoilerParams::table_default());
        net.add_site("y", BoilerParams::table_default());
        net.add_pipe("xy", "x", "y", PipeParams::table_default());
        let err = net.validate().unwrap_err();
        assert_eq!(err.0, vec![Violation::Disconnected { components: 2 }]);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut net = Network::two_site();
        net.add_site("site1", BoilerParams::table_default());
        net.add_pipe(
            "pipe1",
            "site2",
            "nowhere",
            PipeParams {
                length: 0.0,
                diameter: 0.2,
                friction: 0.016,
            },
        );
        let err = net.validate().unwrap_err();
        assert!(err.0.iter().any(|v| matches!(v, Violation::DuplicateVertex { .. })));
        assert!(err.0.iter().any(|v| matches!(v, Violation::DuplicateLink { .. })));
        assert!(err.0.iter().any(|v| matches!(v, Violation::UnknownVertex { .. })));
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, Violation::NonPositivePipeParameter { field: "length", .. })));
    }

    #[test]
    fn parallel_links_are_allowed() {
        let mut net = Network::two_site();
        net.add_pipe("pipe2", "site2", "site1", PipeParams::table_default());
        assert!(net.validate().is_ok());
        let rep = subspace_analysis(&net.incidence_matrix());
        assert_eq!(rep.ker_r.ncols(), 1);
    }

    #[test]
    fn triangle_incidence_by_hand() {
        let r = triangle().incidence_matrix();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 1.0, -1.0, 1.0, 0.0, 0.0, -1.0, -1.0],
        );
        assert_eq!(r, expected);
        let ones = DVector::from_element(3, 1.0);
        assert_eq!(r.transpose() * ones, DVector::zeros(3));
    }

    #[test]
    fn two_site_subspaces() {
        let rep = subspace_analysis(&Network::two_site().incidence_matrix());
        assert_eq!(rep.ker_r.ncols(), 0);
        assert_eq!(rep.ker_rt.ncols(), 1);
        let k = rep.ker_rt.column(0);
        assert!((k[0] - k[1]).abs() < 1e-12);
        assert!(!rep.ambiguous);
    }

    #[test]
    fn triangle_loop_basis() {
        let rep = subspace_analysis(&triangle().incidence_matrix());
        assert_eq!(rep.ker_r.ncols(), 1);
        let k = rep.ker_r.column(0);
        let scale = k[0];
        let expect = [1.0, 1.0, -1.0];
        for i in 0..3 {
            assert!((k[i] / scale - expect[i]).abs() < 1e-10);
        }
        assert_eq!(rep.dim_im_rt, 2);
    }

    #[test]
    fn path_graph_image_dimension() {
        let mut net = Network::new();
        for i in 0..4 {
            net.add_site(format!("v{i}"), BoilerParams::table_default());
        }
        for i in 0..3 {
            net.add_pipe_by_index(format!("l{i}"), i, i + 1, PipeParams::table_default());
        }
        let rep = subspace_analysis(&net.incidence_matrix());
        assert_eq!(rep.dim_im_rt, 3);
        assert_eq!(rep.ker_r.ncols(), 0);
    }

    #[test]
    fn kirchhoff_two_site_and_triangle() {
        let r = Network::two_site().incidence_matrix();
        let k = kirchhoff_matrix(&r, &[1.0]).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let k = kirchhoff_matrix(&triangle().incidence_matrix(), &[1.0; 3]).unwrap();
        let mut eig: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(eig[0].abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12 && (eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kirchhoff_rejects_nonpositive() {
        let r = Network::two_site().incidence_matrix();
        assert_eq!(
            kirchhoff_matrix(&r, &[0.0]),
            Err(KirchhoffError::NonPositive { index: 0, value: 0.0 })
        );
        assert!(matches!(
            kirchhoff_matrix(&r, &[1.0, 2.0]),
            Err(KirchhoffError::Length { .. })
        ));
    }
}
