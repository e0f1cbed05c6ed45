//! Cubical complexes on pixel grids with lower-star sublevel filtrations.
//!
//! A height x width vertex grid carries vertices, horizontal/vertical edges,
//! and unit squares. Every cell takes the maximum of its incident vertex
//! values (lower-star rule), so restricting to cells with value <= t
//! reproduces the vertex sublevel set closed under faces.

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Number of cells of the full complex on an h x w vertex grid:
/// `hw` vertices + `h(w-1) + w(h-1)` edges + `(h-1)(w-1)` squares.
pub fn cell_count(h: usize, w: usize) -> usize {
    4 * h * w + 1 - 2 * h - 2 * w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Vertex,
    /// Edge from (row, col) to (row, col + 1).
    HEdge,
    /// Edge from (row, col) to (row + 1, col).
    VEdge,
    /// Square with top-left vertex (row, col).
    Square,
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub kind: CellKind,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Cell {
    pub fn dim(&self) -> u8 {
        match self.kind {
            CellKind::Vertex => 0,
            CellKind::HEdge | CellKind::VEdge => 1,
            CellKind::Square => 2,
        }
    }
}

/// All cells of the grid complex, sorted for sublevel persistence.
///
/// `cells` is in canonical enumeration order (vertices, horizontal edges,
/// vertical edges, squares; row-major within each group). `order[k]` is the
/// cell at filtration position k; ties are broken by (dimension ascending,
/// enumeration index), which guarantees every facet precedes its cofaces.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<Cell>,
    pub order: Vec<u32>,
    pub position: Vec<u32>,
}

impl FilteredComplex {
    pub fn vertex_index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    fn h_edge_index(&self, row: usize, col: usize) -> usize {
        self.height * self.width + row * (self.width - 1) + col
    }

    fn v_edge_index(&self, row: usize, col: usize) -> usize {
        self.height * self.width
            + self.height * (self.width - 1)
            + row * self.width
            + col
    }

    /// Facet indices (enumeration order) of the given cell.
    pub fn boundary(&self, idx: usize) -> Vec<u32> {
        let c = &self.cells[idx];
        match c.kind {
            CellKind::Vertex => vec![],
            CellKind::HEdge => vec![
                self.vertex_index(c.row, c.col) as u32,
                self.vertex_index(c.row, c.col + 1) as u32,
            ],
            CellKind::VEdge => vec![
                self.vertex_index(c.row, c.col) as u32,
                self.vertex_index(c.row + 1, c.col) as u32,
            ],
            CellKind::Square => vec![
                self.h_edge_index(c.row, c.col) as u32,
                self.h_edge_index(c.row + 1, c.col) as u32,
                self.v_edge_index(c.row, c.col) as u32,
                self.v_edge_index(c.row, c.col + 1) as u32,
            ],
        }
    }

    /// Vertices incident to the cell, in row-major order.
    pub fn cell_vertices(&self, idx: usize) -> Vec<(usize, usize)> {
        let c = &self.cells[idx];
        match c.kind {
            CellKind::Vertex => vec![(c.row, c.col)],
            CellKind::HEdge => vec![(c.row, c.col), (c.row, c.col + 1)],
            CellKind::VEdge => vec![(c.row, c.col), (c.row + 1, c.col)],
            CellKind::Square => vec![
                (c.row, c.col),
                (c.row, c.col + 1),
                (c.row + 1, c.col),
                (c.row + 1, c.col + 1),
            ],
        }
    }

    /// Row-major-first vertex achieving the cell's value (the lower-star
    /// argmax). Subgradients of birth/death values route here.
    pub fn argmax_vertex(&self, idx: usize, field: &ScalarField) -> (usize, usize) {
        let mut best = None;
        for (r, c) in self.cell_vertices(idx) {
            let v = field.get(r, c);
            match best {
                None => best = Some(((r, c), v)),
                Some((_, bv)) if v > bv => best = Some(((r, c), v)),
                _ => {}
            }
        }
        best.unwrap().0
    }
}

/// Builds the lower-star filtration of a scalar field.
pub fn build_lower_star(field: &ScalarField) -> Result<FilteredComplex> {
    let (h, w) = (field.height(), field.width());
    if let Some(bad) = field.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("non-finite value {bad}")));
    }
    let mut cells = Vec::with_capacity(cell_count(h, w));
    for row in 0..h {
        for col in 0..w {
            cells.push(Cell { kind: CellKind::Vertex, row, col, value: field.get(row, col) });
        }
    }
    for row in 0..h {
        for col in 0..w.saturating_sub(1) {
            let value = field.get(row, col).max(field.get(row, col + 1));
            cells.push(Cell { kind: CellKind::HEdge, row, col, value });
        }
    }
    for row in 0..h.saturating_sub(1) {
        for col in 0..w {
            let value = field.get(row, col).max(field.get(row + 1, col));
            cells.push(Cell { kind: CellKind::VEdge, row, col, value });
        }
    }
    for row in 0..h.saturating_sub(1) {
        for col in 0..w.saturating_sub(1) {
            let value = field
                .get(row, col)
                .max(field.get(row, col + 1))
                .max(field.get(row + 1, col))
                .max(field.get(row + 1, col + 1));
            cells.push(Cell { kind: CellKind::Square, row, col, value });
        }
    }
    debug_assert_eq!(cells.len(), cell_count(h, w));

    let mut order: Vec<u32> = (0..cells.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&cells[a as usize], &cells[b as usize]);
        ca.value
            .partial_cmp(&cb.value)
            .unwrap()
            .then(ca.dim().cmp(&cb.dim()))
            .then(a.cmp(&b))
    });
    let mut position = vec![0u32; cells.len()];
    for (pos, &idx) in order.iter().enumerate() {
        position[idx as usize] = pos as u32;
    }
    Ok(FilteredComplex { height: h, width: w, cells, order, position })
}
