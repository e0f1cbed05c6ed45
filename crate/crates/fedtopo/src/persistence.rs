//! Sublevel persistence of filtered grid complexes.
//!
//! H0/H1 pairs are computed by column reduction of the boundary matrix over
//! the two-element field, processed top dimension first so that positive
//! edge columns can be cleared before the edge phase. A union-find fast path
//! covers H0 alone, and `compute_diagram_fast` combines union-find H0 with
//! the square-phase H1 reduction for the training hot path.

use std::collections::HashMap;

use crate::cubical::{build_lower_star, FilteredComplex};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// One birth/death pair with critical-cell provenance.
///
/// `death` is `f64::INFINITY` for the essential class; `death_cell` is then
/// `None`. Cell indices refer to `FilteredComplex::cells` enumeration order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    pub birth_cell: usize,
    pub death_cell: Option<usize>,
}

impl PersistencePair {
    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of positive-persistence pairs of a filtration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn pairs_of_dim(&self, dim: u8) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    /// Sorted (dim, birth, death) triples, for multiset comparison.
    pub fn as_multiset(&self) -> Vec<(u8, f64, f64)> {
        let mut v: Vec<(u8, f64, f64)> =
            self.pairs.iter().map(|p| (p.dim, p.birth, p.death)).collect();
        v.sort_by(|a, b| {
            a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
        });
        v
    }

    /// CSV export with header `dim,birth,death`; essential death prints `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,birth,death\n");
        for p in &self.pairs {
            if p.is_essential() {
                out.push_str(&format!("{},{},inf\n", p.dim, p.birth));
            } else {
                out.push_str(&format!("{},{},{}\n", p.dim, p.birth, p.death));
            }
        }
        out
    }
}

/// Sorted symmetric difference over the two-element field.
fn add_columns(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Reduces one column against the pivot table, inserting it on success.
/// Returns the final pivot (the paired facet position) or None if the column
/// vanished (positive cell).
fn reduce_column(mut col: Vec<u32>, pivots: &mut HashMap<u32, Vec<u32>>) -> Option<u32> {
    while let Some(&low) = col.last() {
        match pivots.get(&low) {
            Some(other) => col = add_columns(&col, other),
            None => {
                pivots.insert(low, col);
                return Some(low);
            }
        }
    }
    None
}

fn pair_from_positions(
    cx: &FilteredComplex,
    birth_pos: u32,
    death_pos: u32,
) -> Option<PersistencePair> {
    let birth_cell = cx.order[birth_pos as usize] as usize;
    let death_cell = cx.order[death_pos as usize] as usize;
    let birth = cx.cells[birth_cell].value;
    let death = cx.cells[death_cell].value;
    // Zero-persistence pairs carry no topological content; drop them.
    (death > birth).then_some(PersistencePair {
        dim: cx.cells[birth_cell].dim(),
        birth,
        death,
        birth_cell,
        death_cell: Some(death_cell),
    })
}

/// H1 phase: reduce square columns (entries are edge positions).
/// Returns the pairs plus the set of paired (positive) edge positions.
fn reduce_squares(cx: &FilteredComplex) -> (Vec<PersistencePair>, Vec<u32>) {
    let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut pairs = Vec::new();
    let mut positive_edges = Vec::new();
    for &cell_idx in &cx.order {
        if cx.cells[cell_idx as usize].dim() != 2 {
            continue;
        }
        let mut col: Vec<u32> = cx
            .boundary(cell_idx as usize)
            .iter()
            .map(|&f| cx.position[f as usize])
            .collect();
        col.sort_unstable();
        let death_pos = cx.position[cell_idx as usize];
        match reduce_column(col, &mut pivots) {
            Some(low) => {
                positive_edges.push(low);
                pairs.extend(pair_from_positions(cx, low, death_pos));
            }
            // A vanishing square column would be an essential 2-class,
            // impossible on a planar grid.
            None => unreachable!("square column reduced to zero"),
        }
    }
    (pairs, positive_edges)
}

/// Full persistence via boundary-matrix reduction with clearing.
pub fn compute_persistence(cx: &FilteredComplex) -> Result<PersistenceDiagram> {
    validate_complex(cx)?;
    let (mut pairs, positive_edges) = reduce_squares(cx);
    let cleared: std::collections::HashSet<u32> = positive_edges.iter().copied().collect();

    // Edge phase. Columns of edges known positive from the square phase are
    // cleared: they would reduce to zero, so skipping them changes nothing.
    let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut vertex_paired = vec![false; cx.cells.len()];
    for &cell_idx in &cx.order {
        if cx.cells[cell_idx as usize].dim() != 1 {
            continue;
        }
        let pos = cx.position[cell_idx as usize];
        if cleared.contains(&pos) {
            continue;
        }
        let mut col: Vec<u32> = cx
            .boundary(cell_idx as usize)
            .iter()
            .map(|&f| cx.position[f as usize])
            .collect();
        col.sort_unstable();
        match reduce_column(col, &mut pivots) {
            Some(low) => {
                vertex_paired[cx.order[low as usize] as usize] = true;
                pairs.extend(pair_from_positions(cx, low, pos));
            }
            None => {
                // Positive edge unpaired by any square: essential 1-class.
                // Cannot arise on a full grid; kept for malformed inputs.
                let cell = cx.order[pos as usize] as usize;
                pairs.push(PersistencePair {
                    dim: 1,
                    birth: cx.cells[cell].value,
                    death: f64::INFINITY,
                    birth_cell: cell,
                    death_cell: None,
                });
            }
        }
    }

    // Vertices never used as a pivot are essential 0-classes.
    for (idx, cell) in cx.cells.iter().enumerate() {
        if cell.dim() == 0 && !vertex_paired[idx] {
            pairs.push(PersistencePair {
                dim: 0,
                birth: cell.value,
                death: f64::INFINITY,
                birth_cell: idx,
                death_cell: None,
            });
        }
    }
    Ok(PersistenceDiagram { pairs })
}

/// H0-only persistence via union-find with the elder rule.
pub fn compute_h0_fast(field: &ScalarField) -> Result<PersistenceDiagram> {
    let cx = build_lower_star(field)?;
    let (pairs, _) = h0_union_find(&cx);
    Ok(PersistenceDiagram { pairs })
}

/// Union-find sweep over edges in filtration order. Also returns the edge
/// positions that closed a cycle (the positive edges), which the fast H1
/// path needs for essential-class detection.
fn h0_union_find(cx: &FilteredComplex) -> (Vec<PersistencePair>, Vec<u32>) {
    // parent indexed by vertex enumeration index; roots carry the filtration
    // position of the component's oldest vertex.
    let n_vertices = cx.height * cx.width;
    let mut parent: Vec<u32> = (0..n_vertices as u32).collect();
    let root_birth_pos: Vec<u32> = (0..n_vertices as u32).map(|v| cx.position[v as usize]).collect();

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    let mut pairs = Vec::new();
    let mut cycle_edges = Vec::new();
    for &cell_idx in &cx.order {
        let cell = &cx.cells[cell_idx as usize];
        if cell.dim() != 1 {
            continue;
        }
        let vs = cx.cell_vertices(cell_idx as usize);
        let u = cx.vertex_index(vs[0].0, vs[0].1) as u32;
        let v = cx.vertex_index(vs[1].0, vs[1].1) as u32;
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            cycle_edges.push(cx.position[cell_idx as usize]);
            continue;
        }
        // Elder rule: the component with the earlier birth survives.
        let (elder, younger) =
            if root_birth_pos[ru as usize] <= root_birth_pos[rv as usize] { (ru, rv) } else { (rv, ru) };
        let young_birth_pos = root_birth_pos[younger as usize];
        let birth_cell = cx.order[young_birth_pos as usize] as usize;
        let birth = cx.cells[birth_cell].value;
        if cell.value > birth {
            pairs.push(PersistencePair {
                dim: 0,
                birth,
                death: cell.value,
                birth_cell,
                death_cell: Some(cell_idx as usize),
            });
        }
        parent[younger as usize] = elder;
    }
    // The surviving component is the essential class.
    let root = find(&mut parent, 0);
    let birth_cell = cx.order[root_birth_pos[root as usize] as usize] as usize;
    pairs.push(PersistencePair {
        dim: 0,
        birth: cx.cells[birth_cell].value,
        death: f64::INFINITY,
        birth_cell,
        death_cell: None,
    });
    (pairs, cycle_edges)
}

/// Full diagram on the fast path: union-find H0 plus square-phase H1.
/// Agrees with `compute_persistence` as a multiset (cross-checked in tests).
pub fn compute_diagram_fast(field: &ScalarField) -> Result<(FilteredComplex, PersistenceDiagram)> {
    let cx = build_lower_star(field)?;
    let (mut pairs, cycle_edges) = h0_union_find(&cx);
    let (h1_pairs, positive_edges) = reduce_squares(&cx);
    // Cycle edges unpaired by any square would be essential 1-classes; a
    // full grid has none, but keep the check aligned with the slow path.
    if cycle_edges.len() != positive_edges.len() {
        let paired: std::collections::HashSet<u32> = positive_edges.iter().copied().collect();
        for pos in cycle_edges {
            if !paired.contains(&pos) {
                let cell = cx.order[pos as usize] as usize;
                pairs.push(PersistencePair {
                    dim: 1,
                    birth: cx.cells[cell].value,
                    death: f64::INFINITY,
                    birth_cell: cell,
                    death_cell: None,
                });
            }
        }
    }
    pairs.extend(h1_pairs);
    Ok((cx, PersistenceDiagram { pairs }))
}

fn validate_complex(cx: &FilteredComplex) -> Result<()> {
    for idx in 0..cx.cells.len() {
        for facet in cx.boundary(idx) {
            if cx.position[facet as usize] >= cx.position[idx] {
                return Err(Error::InvalidComplex(format!(
                    "facet {facet} of cell {idx} does not precede it"
                )));
            }
        }
    }
    Ok(())
}

/// Routes per-pair (d/d birth, d/d death) gradients back onto the field.
///
/// Birth and death values are values of specific critical cells; each cell's
/// value is the max over its vertices, so the subgradient goes to the
/// row-major-first argmax vertex. The essential death contributes nothing.
pub fn pd_backward(
    cx: &FilteredComplex,
    field: &ScalarField,
    diagram: &PersistenceDiagram,
    pair_grads: &[(f64, f64)],
) -> Result<ScalarField> {
    if pair_grads.len() != diagram.pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gradients for {} pairs",
            pair_grads.len(),
            diagram.pairs.len()
        )));
    }
    let mut grad = ScalarField::zeros(field.height(), field.width());
    for (pair, &(g_birth, g_death)) in diagram.pairs.iter().zip(pair_grads) {
        if pair.birth_cell >= cx.cells.len() {
            return Err(Error::InvalidDiagram("birth cell out of range".into()));
        }
        if g_birth != 0.0 {
            let (r, c) = cx.argmax_vertex(pair.birth_cell, field);
            grad.set(r, c, grad.get(r, c) + g_birth);
        }
        if g_death != 0.0 {
            if let Some(death_cell) = pair.death_cell {
                let (r, c) = cx.argmax_vertex(death_cell, field);
                grad.set(r, c, grad.get(r, c) + g_death);
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn field_from(rows: &[&[f64]]) -> ScalarField {
        ScalarField::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn diagram_of(field: &ScalarField) -> PersistenceDiagram {
        compute_persistence(&build_lower_star(field).unwrap()).unwrap()
    }

    /// Naive oracle: reduce the full boundary matrix in one pass, no
    /// clearing, no per-dimension phases. Independent of the main path.
    pub(crate) fn naive_reduction(field: &ScalarField) -> PersistenceDiagram {
        let cx = build_lower_star(field).unwrap();
        let n = cx.cells.len();
        let mut columns: Vec<Vec<u32>> = Vec::with_capacity(n);
        for pos in 0..n {
            let cell_idx = cx.order[pos] as usize;
            let mut col: Vec<u32> =
                cx.boundary(cell_idx).iter().map(|&f| cx.position[f as usize]).collect();
            col.sort_unstable();
            columns.push(col);
        }
        let mut pivot_of: Vec<Option<usize>> = vec![None; n];
        let mut paired_birth: Vec<Option<usize>> = vec![None; n];
        for j in 0..n {
            loop {
                let Some(&low) = columns[j].last() else { break };
                match pivot_of[low as usize] {
                    Some(k) => columns[j] = add_columns(&columns[j].clone(), &columns[k]),
                    None => {
                        pivot_of[low as usize] = Some(j);
                        paired_birth[j] = Some(low as usize);
                        break;
                    }
                }
            }
        }
        let mut pairs = Vec::new();
        for j in 0..n {
            if let Some(birth_pos) = paired_birth[j] {
                let birth_cell = cx.order[birth_pos] as usize;
                let death_cell = cx.order[j] as usize;
                let birth = cx.cells[birth_cell].value;
                let death = cx.cells[death_cell].value;
                if death > birth {
                    pairs.push(PersistencePair {
                        dim: cx.cells[birth_cell].dim(),
                        birth,
                        death,
                        birth_cell,
                        death_cell: Some(death_cell),
                    });
                }
            } else if columns[j].is_empty() && pivot_of[j].is_none() {
                // Positive and never killed: essential.
                let cell = cx.order[j] as usize;
                pairs.push(PersistencePair {
                    dim: cx.cells[cell].dim(),
                    birth: cx.cells[cell].value,
                    death: f64::INFINITY,
                    birth_cell: cell,
                    death_cell: None,
                });
            }
        }
        PersistenceDiagram { pairs }
    }

    pub(crate) fn random_field(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ScalarField {
        let values: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
        ScalarField::new(h, w, values).unwrap()
    }

    #[test]
    fn constant_field_single_essential_pair() {
        let d = diagram_of(&field_from(&[&[0.0; 3]; 3].map(|r| &r[..])));
        assert_eq!(d.pairs.len(), 1);
        assert_eq!(d.pairs[0].dim, 0);
        assert!(d.pairs[0].is_essential());
        assert_eq!(d.pairs[0].birth, 0.0);
    }

    #[test]
    fn ring_field_one_loop() {
        let d = diagram_of(&field_from(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]));
        let h1: Vec<_> = d.pairs_of_dim(1).collect();
        assert_eq!(h1.len(), 1);
        assert_eq!((h1[0].birth, h1[0].death), (0.0, 1.0));
        let h0: Vec<_> = d.pairs_of_dim(0).collect();
        assert_eq!(h0.len(), 1);
        assert!(h0[0].is_essential());
    }

    #[test]
    fn saddle_two_components_no_loop() {
        let d = diagram_of(&field_from(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let mut h0 = d.as_multiset();
        h0.retain(|p| p.0 == 0);
        assert_eq!(h0, vec![(0, 0.0, 1.0), (0, 0.0, f64::INFINITY)]);
        assert_eq!(d.pairs_of_dim(1).count(), 0);
    }

    #[test]
    fn h0_fast_hand_trace() {
        let d = compute_h0_fast(&field_from(&[&[0.0, 2.0, 1.0, 3.0]])).unwrap();
        assert_eq!(d.as_multiset(), vec![(0, 0.0, f64::INFINITY), (0, 1.0, 2.0)]);
    }

    #[test]
    fn h0_fast_constant_field() {
        let d = compute_h0_fast(&field_from(&[&[2.0, 2.0], &[2.0, 2.0]])).unwrap();
        assert_eq!(d.pairs.len(), 1);
        assert!(d.pairs[0].is_essential());
    }

    #[test]
    fn reduction_matches_naive_oracle_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let h = rng.random_range(1..=8);
            let w = rng.random_range(1..=8);
            let f = random_field(&mut rng, h, w);
            let fast = diagram_of(&f);
            let oracle = naive_reduction(&f);
            assert_eq!(fast.as_multiset(), oracle.as_multiset(), "trial {trial} ({h}x{w})");
        }
    }

    #[test]
    fn h0_fast_matches_reduction_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let h = rng.random_range(1..=8);
            let w = rng.random_range(1..=8);
            let f = random_field(&mut rng, h, w);
            let mut reduction_h0 = diagram_of(&f).as_multiset();
            reduction_h0.retain(|p| p.0 == 0);
            assert_eq!(compute_h0_fast(&f).unwrap().as_multiset(), reduction_h0);
        }
    }

    #[test]
    fn fast_diagram_matches_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let h = rng.random_range(2..=8);
            let w = rng.random_range(2..=8);
            let f = random_field(&mut rng, h, w);
            let (_, fast) = compute_diagram_fast(&f).unwrap();
            assert_eq!(fast.as_multiset(), diagram_of(&f).as_multiset());
        }
    }

    #[test]
    fn exactly_one_essential_pair_and_it_is_h0() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let h = rng.random_range(2..=6);
            let w = rng.random_range(2..=6);
            let f = random_field(&mut rng, h, w);
            let d = diagram_of(&f);
            let essential: Vec<_> = d.pairs.iter().filter(|p| p.is_essential()).collect();
            assert_eq!(essential.len(), 1);
            assert_eq!(essential[0].dim, 0);
        }
    }

    #[test]
    fn monotone_reparameterization_preserves_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let phi = |x: f64| x * x * x + 2.0 * x;
        for _ in 0..30 {
            let f = random_field(&mut rng, 5, 5);
            let g = ScalarField::new(5, 5, f.values().iter().map(|&v| phi(v)).collect()).unwrap();
            let df = diagram_of(&f);
            let dg = diagram_of(&g);
            let mapped: Vec<(u8, f64, f64)> = df
                .as_multiset()
                .into_iter()
                .map(|(d, b, dd)| (d, phi(b), if dd.is_infinite() { dd } else { phi(dd) }))
                .collect();
            let expect: Vec<(u8, f64, f64)> = dg.as_multiset();
            assert_eq!(mapped.len(), expect.len());
            for (a, b) in mapped.iter().zip(&expect) {
                assert_eq!(a.0, b.0);
                assert!((a.1 - b.1).abs() < 1e-12);
                if a.2.is_infinite() || b.2.is_infinite() {
                    assert!(a.2.is_infinite() && b.2.is_infinite());
                } else {
                    assert!((a.2 - b.2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn malformed_boundary_rejected() {
        let f = field_from(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let mut cx = build_lower_star(&f).unwrap();
        // Swap two positions so a facet lands after its coface.
        cx.position.swap(0, 8);
        cx.order.swap(cx.position[0] as usize, cx.position[8] as usize);
        assert!(compute_persistence(&cx).is_err());
    }

    #[test]
    fn backward_zero_gradients_zero_field() {
        let f = field_from(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let cx = build_lower_star(&f).unwrap();
        let d = compute_persistence(&cx).unwrap();
        let grads = vec![(0.0, 0.0); d.pairs.len()];
        let g = pd_backward(&cx, &f, &d, &grads).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_ring_death_routes_to_center() {
        let f = field_from(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]);
        let cx = build_lower_star(&f).unwrap();
        let d = compute_persistence(&cx).unwrap();
        let grads: Vec<(f64, f64)> =
            d.pairs.iter().map(|p| if p.dim == 1 { (0.0, 1.0) } else { (0.0, 0.0) }).collect();
        let g = pd_backward(&cx, &f, &d, &grads).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if (r, c) == (1, 1) { 1.0 } else { 0.0 };
                assert_eq!(g.get(r, c), expect);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..10 {
            // Distinct values so the argmax routing is differentiable.
            let mut vals: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
            vals.shuffle(&mut rng);
            let f = ScalarField::new(5, 5, vals.clone()).unwrap();
            let cx = build_lower_star(&f).unwrap();
            let d = compute_persistence(&cx).unwrap();
            let grads: Vec<(f64, f64)> = d
                .pairs
                .iter()
                .map(|p| {
                    let gb = rng.random_range(-1.0..1.0);
                    let gd = if p.is_essential() { 0.0 } else { rng.random_range(-1.0..1.0) };
                    (gb, gd)
                })
                .collect();
            let analytic = pd_backward(&cx, &f, &d, &grads).unwrap();

            // Loss = sum over pairs of gb*birth + gd*death, re-deriving the
            // pairing from scratch at each perturbed input.
            let loss = |vals: &[f64]| -> f64 {
                let f = ScalarField::new(5, 5, vals.to_vec()).unwrap();
                let d2 = compute_persistence(&build_lower_star(&f).unwrap()).unwrap();
                let mut key: Vec<usize> = (0..d2.pairs.len()).collect();
                key.sort_by(|&a, &b| {
                    let (pa, pb) = (&d2.pairs[a], &d2.pairs[b]);
                    pa.dim.cmp(&pb.dim).then(pa.birth.total_cmp(&pb.birth))
                });
                let mut base: Vec<usize> = (0..d.pairs.len()).collect();
                base.sort_by(|&a, &b| {
                    let (pa, pb) = (&d.pairs[a], &d.pairs[b]);
                    pa.dim.cmp(&pb.dim).then(pa.birth.total_cmp(&pb.birth))
                });
                key.iter()
                    .zip(&base)
                    .map(|(&i2, &i1)| {
                        let p = &d2.pairs[i2];
                        let (gb, gd) = grads[i1];
                        gb * p.birth + if p.is_essential() { 0.0 } else { gd * p.death }
                    })
                    .sum()
            };
            let h = 1e-6;
            for i in 0..vals.len() {
                let mut plus = vals.clone();
                plus[i] += h;
                let mut minus = vals.clone();
                minus[i] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let a = analytic.values()[i];
                assert!(
                    (fd - a).abs() <= 1e-5 * a.abs().max(fd.abs()).max(1.0),
                    "vertex {i}: fd {fd} vs analytic {a}"
                );
            }
        }
    }

    #[test]
    fn csv_export_format() {
        let f = field_from(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]);
        let d = diagram_of(&f);
        let csv = d.to_csv();
        assert!(csv.starts_with("dim,birth,death\n"));
        assert!(csv.contains("1,0,1\n"));
        assert!(csv.contains("0,0,inf\n"));
    }
}
