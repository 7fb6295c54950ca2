//! Meridian cross-section of the axisymmetric domain and its structured grid.
//!
//! Only rectangles `[r_min, r_max] × [z_min, z_max]` are supported. With
//! `r_min > 0` the 3-D solid is a torus of rectangular cross-section; with
//! `r_min = 0` it is a solid cylinder and the `r = 0` edge is the symmetry
//! axis rather than a wall.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Rectangle in the `(r, z)` half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeridianDomain {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl MeridianDomain {
    pub fn new(r_min: f64, r_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        let finite = [r_min, r_max, z_min, z_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidGrid("domain bounds must be finite".into()));
        }
        if r_min < 0.0 {
            return Err(Error::InvalidGrid(format!("r_min = {r_min} is negative")));
        }
        if r_max <= r_min {
            return Err(Error::InvalidGrid(format!(
                "r_max = {r_max} must exceed r_min = {r_min}"
            )));
        }
        if z_max <= z_min {
            return Err(Error::InvalidGrid(format!(
                "z_max = {z_max} must exceed z_min = {z_min}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            z_min,
            z_max,
        })
    }

    pub fn touches_axis(&self) -> bool {
        self.r_min == 0.0
    }

    /// `d = sup r` over the domain.
    pub fn sup_r(&self) -> f64 {
        self.r_max
    }

    /// The same rectangle scaled about the origin by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.r_min * factor,
            self.r_max * factor,
            self.z_min * factor,
            self.z_max * factor,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Axis,
}

/// Which wall of the rectangle a boundary point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    RMin,
    RMax,
    ZMin,
    ZMax,
}

impl Face {
    /// Outward unit normal in `(r, z)` components.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Face::RMin => [-1.0, 0.0],
            Face::RMax => [1.0, 0.0],
            Face::ZMin => [0.0, -1.0],
            Face::ZMax => [0.0, 1.0],
        }
    }
}

/// Structured node grid over a [`MeridianDomain`]. Node `(i, j)` sits at
/// `(r_min + i·h_r, z_min + j·h_z)` and is stored at flat index `j·n_r + i`.
#[derive(Debug, Clone)]
pub struct MeridianGrid {
    pub domain: MeridianDomain,
    pub n_r: usize,
    pub n_z: usize,
    pub h_r: f64,
    pub h_z: f64,
    kinds: Vec<NodeKind>,
}

impl MeridianGrid {
    pub fn new(domain: MeridianDomain, n_r: usize, n_z: usize) -> Result<Self> {
        if n_r < 3 || n_z < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per direction, got {n_r} x {n_z}"
            )));
        }
        // Re-validate in case the struct was built by hand.
        let domain = MeridianDomain::new(domain.r_min, domain.r_max, domain.z_min, domain.z_max)?;
        let h_r = (domain.r_max - domain.r_min) / (n_r - 1) as f64;
        let h_z = (domain.z_max - domain.z_min) / (n_z - 1) as f64;
        let axis = domain.touches_axis();
        let mut kinds = Vec::with_capacity(n_r * n_z);
        for j in 0..n_z {
            for i in 0..n_r {
                let on_z_wall = j == 0 || j == n_z - 1;
                let kind = if on_z_wall || i == n_r - 1 {
                    NodeKind::Boundary
                } else if i == 0 {
                    if axis {
                        NodeKind::Axis
                    } else {
                        NodeKind::Boundary
                    }
                } else {
                    NodeKind::Interior
                };
                kinds.push(kind);
            }
        }
        Ok(Self {
            domain,
            n_r,
            n_z,
            h_r,
            h_z,
            kinds,
        })
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n_r + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n_r, k / self.n_r)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.domain.r_min + i as f64 * self.h_r
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.domain.z_min + j as f64 * self.h_z
    }

    /// `(r, z)` of flat node `k`.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.r(i), self.z(j))
    }

    #[inline]
    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Zero field on every node.
    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    /// Samples `f(r, z)` on every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (r, z) = self.coords(k);
                f(r, z)
            })
            .collect()
    }

    /// Samples `f(r, z)` on interior and axis nodes, zero on the walls.
    pub fn sample_interior(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                if self.kind(k) == NodeKind::Boundary {
                    0.0
                } else {
                    let (r, z) = self.coords(k);
                    f(r, z)
                }
            })
            .collect()
    }

    /// Radial control-volume weight: `r_i` away from the axis, `h_r/8` on it
    /// (the disc of radius `h_r/2` around the axis, per unit `2π h_r h_z`).
    #[inline]
    pub fn radial_weight(&self, k: usize) -> f64 {
        match self.kind(k) {
            NodeKind::Axis => self.h_r / 8.0,
            _ => {
                let (i, _) = self.ij(k);
                self.r(i)
            }
        }
    }

    /// 3-D volume attached to node `k` for integrals of fields that vanish on
    /// the walls (`dx = 2π r dr dz`). Wall nodes get zero weight.
    #[inline]
    pub fn volume_weight(&self, k: usize) -> f64 {
        match self.kind(k) {
            NodeKind::Boundary => 0.0,
            _ => 2.0 * PI * self.radial_weight(k) * self.h_r * self.h_z,
        }
    }

    /// `∫_Ω f g dx` over the nodes carrying unknowns.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .enumerate()
            .map(|(k, (a, b))| self.volume_weight(k) * a * b)
            .sum()
    }

    /// Discrete `L²(Ω)` norm.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    pub fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Face of a physical-boundary node. Corners are ambiguous.
    pub fn boundary_face(&self, k: usize) -> Result<Face> {
        let (i, j) = self.ij(k);
        if self.kind(k) != NodeKind::Boundary {
            return Err(Error::NotBoundary { i, j });
        }
        let on_r = i == 0 || i == self.n_r - 1;
        let on_z = j == 0 || j == self.n_z - 1;
        if on_r && on_z {
            return Err(Error::AmbiguousNormal { i, j });
        }
        Ok(if i == 0 {
            Face::RMin
        } else if i == self.n_r - 1 {
            Face::RMax
        } else if j == 0 {
            Face::ZMin
        } else {
            Face::ZMax
        })
    }

    /// Outward unit normal `(n_r, n_z)` at a non-corner wall node.
    pub fn outward_normal(&self, k: usize) -> Result<[f64; 2]> {
        self.boundary_face(k).map(Face::normal)
    }

    /// True if `(r, z)` lies in the closed rectangle.
    pub fn contains(&self, r: f64, z: f64) -> bool {
        let d = &self.domain;
        r >= d.r_min && r <= d.r_max && z >= d.z_min && z <= d.z_max
    }

    /// Distance from `(r, z)` to the wall of the 3-D solid. For a rectangular
    /// meridian section this is the minimum over the faces; the axis is not
    /// a wall.
    pub fn wall_distance(&self, r: f64, z: f64) -> Result<f64> {
        if !self.contains(r, z) {
            return Err(Error::OutsideDomain { r, z });
        }
        let d = &self.domain;
        let mut dist = (d.r_max - r).min(z - d.z_min).min(d.z_max - z);
        if !d.touches_axis() {
            dist = dist.min(r - d.r_min);
        }
        Ok(dist)
    }

    /// Wall distance of every node.
    pub fn wall_distances(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (r, z) = self.coords(k);
                self.wall_distance(r, z).unwrap_or(0.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n_r: usize, n_z: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), n_r, n_z).unwrap()
    }

    #[test]
    fn three_by_three_has_one_interior_node() {
        let g = torus(3, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g.count(NodeKind::Boundary), 8);
        assert_eq!(g.count(NodeKind::Interior), 1);
        assert_eq!(g.h_r, 0.5);
    }

    #[test]
    fn axis_column_is_not_a_wall() {
        let d = MeridianDomain::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(d.touches_axis());
        let g = MeridianGrid::new(d, 5, 5).unwrap();
        for j in 1..4 {
            assert_eq!(g.kind(g.idx(0, j)), NodeKind::Axis);
        }
        assert_eq!(g.kind(g.idx(0, 0)), NodeKind::Boundary);
        assert_eq!(g.count(NodeKind::Axis), 3);
    }

    #[test]
    fn too_few_nodes_rejected() {
        let d = MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap();
        assert!(matches!(MeridianGrid::new(d, 2, 5), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn negative_r_min_rejected() {
        assert!(MeridianDomain::new(-0.1, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn node_coordinates_are_exact() {
        let g = torus(5, 9);
        assert_eq!(g.coords(g.idx(3, 4)), (1.0 + 3.0 * 0.25, 4.0 * 0.125));
    }

    #[test]
    fn normals() {
        let g = torus(5, 5);
        assert_eq!(g.outward_normal(g.idx(4, 2)).unwrap(), [1.0, 0.0]);
        assert_eq!(g.outward_normal(g.idx(2, 0)).unwrap(), [0.0, -1.0]);
        assert_eq!(g.outward_normal(g.idx(0, 2)).unwrap(), [-1.0, 0.0]);
        assert!(matches!(
            g.outward_normal(g.idx(4, 4)),
            Err(Error::AmbiguousNormal { .. })
        ));
        assert!(matches!(
            g.outward_normal(g.idx(2, 2)),
            Err(Error::NotBoundary { .. })
        ));
    }

    #[test]
    fn wall_distance_examples() {
        let g = torus(5, 5);
        assert!((g.wall_distance(1.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((g.wall_distance(1.1, 0.5).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(
            g.wall_distance(3.0, 0.5),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn wall_distance_positive_inside_zero_on_walls() {
        let g = torus(9, 7);
        for (k, d) in g.wall_distances().into_iter().enumerate() {
            match g.kind(k) {
                NodeKind::Boundary => assert_eq!(d, 0.0),
                _ => assert!(d > 0.0),
            }
        }
        let cyl = MeridianGrid::new(MeridianDomain::new(0.0, 1.0, 0.0, 1.0).unwrap(), 5, 5).unwrap();
        assert!((cyl.wall_distance(0.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn volume_weights_sum_to_solid_volume() {
        // Interior + half-cell contributions are not included, so compare
        // the interior sum against the exact volume of the shrunken solid.
        let d = MeridianDomain::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let g = MeridianGrid::new(d, 101, 3).unwrap();
        let vol: f64 = (0..g.len()).map(|k| g.volume_weight(k)).sum();
        let r_edge = 1.0 - g.h_r / 2.0;
        let exact = PI * r_edge * r_edge * g.h_z;
        assert!((vol - exact).abs() < 1e-12 * exact.max(1.0));
    }
}
