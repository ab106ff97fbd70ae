//! Finite metric simplicial complexes.
//!
//! Simplices are strictly increasing vertex tuples; every simplex is realised
//! as the unit-edge regular simplex (edge lengths are stored for geometry
//! checks but do not deform the metric).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{DerhamError, Result};

/// JSON description of a complex: vertex ids plus maximal simplices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexSpec {
    pub vertices: Vec<u32>,
    pub maximal_simplices: Vec<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_lengths: Option<BTreeMap<String, f64>>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    vertices: Vec<u32>,
    /// simplices[k] holds the k-simplices, lexicographically sorted.
    simplices: Vec<Vec<Vec<u32>>>,
    edge_lengths: BTreeMap<(u32, u32), f64>,
    declared_l: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub star_bound: usize,
    pub edge_range: (f64, f64),
    pub connected: bool,
    #[serde(rename = "L_witness")]
    pub l_witness: f64,
    pub within_declared_l: bool,
}

/// A point of |K|: barycentric coordinates on a named simplex.
#[derive(Debug, Clone)]
pub struct SimplexPoint {
    pub simplex: Vec<u32>,
    pub bary: Vec<f64>,
}

fn close_faces(maximal: &[Vec<u32>]) -> Vec<BTreeSet<Vec<u32>>> {
    let dim = maximal.iter().map(|s| s.len() - 1).max().unwrap_or(0);
    let mut levels: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); dim + 1];
    for s in maximal {
        // all nonempty subsets
        let n = s.len();
        for mask in 1u32..(1 << n) {
            let face: Vec<u32> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect();
            levels[face.len() - 1].insert(face);
        }
    }
    levels
}

impl SimplicialComplex {
    pub fn build(spec: &ComplexSpec) -> Result<Self> {
        let mut vertices: BTreeSet<u32> = spec.vertices.iter().copied().collect();
        let mut maximal = Vec::new();
        for s in &spec.maximal_simplices {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(DerhamError::DuplicateVertex(w[0]));
                }
            }
            for &v in &sorted {
                vertices.insert(v);
            }
            maximal.push(sorted);
        }
        let levels = close_faces(&maximal);
        let mut simplices: Vec<Vec<Vec<u32>>> =
            levels.into_iter().map(|set| set.into_iter().collect()).collect();
        // isolated vertices enter the 0-skeleton too
        if simplices.is_empty() {
            simplices.push(Vec::new());
        }
        let zero: BTreeSet<Vec<u32>> = simplices[0]
            .iter()
            .cloned()
            .chain(vertices.iter().map(|&v| vec![v]))
            .collect();
        simplices[0] = zero.into_iter().collect();

        let mut edge_lengths = BTreeMap::new();
        if let Some(map) = &spec.edge_lengths {
            for (key, &len) in map {
                if len <= 0.0 {
                    return Err(DerhamError::NonpositiveEdgeLength(len));
                }
                let parts: Vec<&str> = key.split('-').collect();
                if parts.len() != 2 {
                    return Err(DerhamError::InvalidParameter(format!(
                        "edge key '{key}' is not of the form 'i-j'"
                    )));
                }
                let a: u32 = parts[0].parse().map_err(|_| {
                    DerhamError::InvalidParameter(format!("bad edge key '{key}'"))
                })?;
                let b: u32 = parts[1].parse().map_err(|_| {
                    DerhamError::InvalidParameter(format!("bad edge key '{key}'"))
                })?;
                edge_lengths.insert((a.min(b), a.max(b)), len);
            }
        }
        Ok(SimplicialComplex {
            vertices: vertices.into_iter().collect(),
            simplices,
            edge_lengths,
            declared_l: spec.l,
        })
    }

    pub fn from_maximal(maximal: &[&[u32]]) -> Self {
        let spec = ComplexSpec {
            vertices: Vec::new(),
            maximal_simplices: maximal.iter().map(|s| s.to_vec()).collect(),
            edge_lengths: None,
            l: None,
        };
        SimplicialComplex::build(&spec).expect("valid maximal simplices")
    }

    pub fn to_spec(&self) -> ComplexSpec {
        ComplexSpec {
            vertices: self.vertices.clone(),
            maximal_simplices: self.maximal_simplices(),
            edge_lengths: if self.edge_lengths.is_empty() {
                None
            } else {
                Some(
                    self.edge_lengths
                        .iter()
                        .map(|(&(a, b), &l)| (format!("{a}-{b}"), l))
                        .collect(),
                )
            },
            l: self.declared_l,
        }
    }

    pub fn dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    /// k-simplices, lexicographically sorted.
    pub fn simplices(&self, k: usize) -> &[Vec<u32>] {
        if k < self.simplices.len() {
            &self.simplices[k]
        } else {
            &[]
        }
    }

    pub fn top_simplices(&self) -> &[Vec<u32>] {
        self.simplices(self.dim())
    }

    pub fn contains(&self, simplex: &[u32]) -> bool {
        let k = simplex.len() - 1;
        k < self.simplices.len() && self.simplices[k].binary_search_by(|s| s.as_slice().cmp(simplex)).is_ok()
    }

    pub fn index_of(&self, simplex: &[u32]) -> Option<usize> {
        let k = simplex.len().checked_sub(1)?;
        self.simplices
            .get(k)?
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .ok()
    }

    pub fn edge_length(&self, a: u32, b: u32) -> f64 {
        *self
            .edge_lengths
            .get(&(a.min(b), a.max(b)))
            .unwrap_or(&1.0)
    }

    pub fn maximal_simplices(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for k in (0..self.simplices.len()).rev() {
            for s in &self.simplices[k] {
                let covered = out.iter().any(|m: &Vec<u32>| is_subset(s, m));
                if !covered {
                    out.push(s.clone());
                }
            }
        }
        out.sort();
        out
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, level)| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                sign * level.len() as i64
            })
            .sum()
    }

    pub fn check_geometry(&self, l: f64) -> GeometryReport {
        let mut degree: BTreeMap<u32, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        let mut min_len = f64::INFINITY;
        let mut max_len: f64 = 0.0;
        for e in self.simplices(1) {
            *degree.get_mut(&e[0]).unwrap() += 1;
            *degree.get_mut(&e[1]).unwrap() += 1;
            let len = self.edge_length(e[0], e[1]);
            min_len = min_len.min(len);
            max_len = max_len.max(len);
        }
        let star_bound = degree.values().copied().max().unwrap_or(0);
        let connected = self.is_connected();
        let l_witness = if self.simplices(1).is_empty() {
            1.0
        } else {
            f64::max(max_len, 1.0 / min_len)
        };
        let edge_range = if self.simplices(1).is_empty() {
            (1.0, 1.0)
        } else {
            (min_len, max_len)
        };
        GeometryReport {
            star_bound,
            edge_range,
            connected,
            l_witness,
            within_declared_l: l_witness <= l,
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for e in self.simplices(1) {
            adj.entry(e[0]).or_default().push(e[1]);
            adj.entry(e[1]).or_default().push(e[0]);
        }
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(self.vertices[0]);
        seen.insert(self.vertices[0]);
        while let Some(v) = queue.pop_front() {
            if let Some(ns) = adj.get(&v) {
                for &w in ns {
                    if seen.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    /// Star of a vertex: all simplices containing `v`, closed under faces.
    pub fn star(&self, v: u32) -> Result<SimplicialComplex> {
        if !self.vertices.contains(&v) {
            return Err(DerhamError::UnknownVertex(v));
        }
        let mut maximal: Vec<Vec<u32>> = Vec::new();
        for level in self.simplices.iter().rev() {
            for s in level {
                if s.contains(&v) && !maximal.iter().any(|m| is_subset(s, m)) {
                    maximal.push(s.clone());
                }
            }
        }
        if maximal.is_empty() {
            maximal.push(vec![v]);
        }
        let spec = ComplexSpec {
            vertices: Vec::new(),
            maximal_simplices: maximal,
            edge_lengths: None,
            l: self.declared_l,
        };
        SimplicialComplex::build(&spec)
    }

    pub fn skeleton(&self, m: usize) -> Result<SimplicialComplex> {
        if m > self.dim() {
            return Err(DerhamError::SkeletonOutOfRange(m, self.dim()));
        }
        Ok(SimplicialComplex {
            vertices: self.vertices.clone(),
            simplices: self.simplices[..=m].to_vec(),
            edge_lengths: if m >= 1 { self.edge_lengths.clone() } else { BTreeMap::new() },
            declared_l: self.declared_l,
        })
    }

    /// First barycentric subdivision. New vertex ids enumerate the simplices
    /// of `self` (dimension-major, lexicographic); the returned map sends each
    /// new vertex id to the simplex it is the barycenter of.
    pub fn barycentric_subdivision(&self) -> (SimplicialComplex, BTreeMap<u32, Vec<u32>>) {
        let mut id_of: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        let mut barycenter_of: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut next = 0u32;
        for level in &self.simplices {
            for s in level {
                id_of.insert(s.clone(), next);
                barycenter_of.insert(next, s.clone());
                next += 1;
            }
        }
        // maximal simplices of K' = maximal flags of faces of maximal simplices
        let mut maximal_flags: Vec<Vec<u32>> = Vec::new();
        for top in self.maximal_simplices() {
            let mut stack: Vec<Vec<Vec<u32>>> = vec![vec![top.clone()]];
            while let Some(chain) = stack.pop() {
                let last = chain.last().unwrap();
                if last.len() == 1 {
                    let mut flag: Vec<u32> = chain.iter().map(|s| id_of[s]).collect();
                    flag.sort_unstable();
                    maximal_flags.push(flag);
                } else {
                    for omit in 0..last.len() {
                        let mut face = last.clone();
                        face.remove(omit);
                        let mut next_chain = chain.clone();
                        next_chain.push(face);
                        stack.push(next_chain);
                    }
                }
            }
        }
        let spec = ComplexSpec {
            vertices: Vec::new(),
            maximal_simplices: maximal_flags,
            edge_lengths: None,
            l: None,
        };
        (SimplicialComplex::build(&spec).expect("flags are valid"), barycenter_of)
    }

    /// Distance between two barycentric points of the same unit-edge simplex:
    /// with vertices embedded as e_i/sqrt(2) this is sqrt(sum (dt_i)^2 / 2).
    fn simplex_distance(ta: &[f64], tb: &[f64]) -> f64 {
        let s: f64 = ta
            .iter()
            .zip(tb)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 2.0;
        s.sqrt()
    }

    /// Length of a piecewise-linear path; consecutive points must lie in a
    /// common simplex of the complex.
    pub fn pl_path_length(&self, path: &[SimplexPoint]) -> Result<f64> {
        for p in path {
            if !self.contains(&p.simplex) {
                return Err(DerhamError::UnknownFace(p.simplex.clone()));
            }
            if p.bary.len() != p.simplex.len() {
                return Err(DerhamError::DimensionMismatch(
                    "barycentric coordinate count != simplex vertex count".into(),
                ));
            }
        }
        let mut total = 0.0;
        for w in path.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            // common simplex spanning both supports
            let union: BTreeSet<u32> = a
                .simplex
                .iter()
                .copied()
                .chain(b.simplex.iter().copied())
                .collect();
            let union: Vec<u32> = union.into_iter().collect();
            if !self.contains(&union) {
                return Err(DerhamError::PathSegmentNotInSimplex);
            }
            let embed = |p: &SimplexPoint| -> Vec<f64> {
                union
                    .iter()
                    .map(|v| {
                        p.simplex
                            .iter()
                            .position(|w| w == v)
                            .map(|i| p.bary[i])
                            .unwrap_or(0.0)
                    })
                    .collect()
            };
            total += Self::simplex_distance(&embed(a), &embed(b));
        }
        Ok(total)
    }
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// The seven test complexes used throughout the crate.
pub mod reference {
    use super::SimplicialComplex;

    /// Boundary of a triangle: a combinatorial circle.
    pub fn circle() -> SimplicialComplex {
        SimplicialComplex::from_maximal(&[&[0, 1], &[1, 2], &[0, 2]])
    }

    /// One solid triangle.
    pub fn triangle() -> SimplicialComplex {
        SimplicialComplex::from_maximal(&[&[0, 1, 2]])
    }

    /// Boundary of a tetrahedron: a combinatorial 2-sphere.
    pub fn sphere2() -> SimplicialComplex {
        SimplicialComplex::from_maximal(&[&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[1, 2, 3]])
    }

    /// The 7-vertex triangulation of the torus (14 triangles, 21 edges).
    pub fn torus7() -> SimplicialComplex {
        // Cyclic minimal triangulation: triangles {i, i+1, i+3} and
        // {i, i+2, i+3} mod 7. Edge set is the complete graph K7.
        let mut tris: Vec<Vec<u32>> = Vec::new();
        for i in 0u32..7 {
            tris.push(vec![i, (i + 1) % 7, (i + 3) % 7]);
            tris.push(vec![i, (i + 2) % 7, (i + 3) % 7]);
        }
        let refs: Vec<&[u32]> = tris.iter().map(|t| t.as_slice()).collect();
        SimplicialComplex::from_maximal(&refs)
    }
}
