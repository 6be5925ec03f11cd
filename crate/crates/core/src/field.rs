use std::ops::Index;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshId};

/// Piecewise-linear field stored by its vertex values on a particular mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    mesh_id: MeshId,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Dimension(format!(
                "field has {} values, mesh has {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("nodal field entry {i}")));
        }
        Ok(NodalField { mesh_id: mesh.id(), values })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        NodalField { mesh_id: mesh.id(), values: vec![c; mesh.num_vertices()] }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        NodalField { mesh_id: mesh.id(), values: mesh.vertices().map(f).collect() }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same mesh binding, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        NodalField { mesh_id: self.mesh_id, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn check_on(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.num_vertices() {
            return Err(Error::Dimension(format!(
                "field bound to {:?} used on mesh {:?}",
                self.mesh_id,
                mesh.id()
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for NodalField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
