use serde::{Deserialize, Serialize};

use crate::error::{Result, SandpileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Periodic in every direction; toppling conserves mass.
    Torus,
    /// Finite box; shares sent across the edge are lost.
    DissipativeBox,
}

impl std::str::FromStr for Boundary {
    type Err = SandpileError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Boundary::Torus),
            "box" | "dissipative-box" => Ok(Boundary::DissipativeBox),
            other => Err(SandpileError::Parse(format!("unknown boundary `{other}`"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Torus => "torus",
            Boundary::DissipativeBox => "dissipative-box",
        })
    }
}

/// Shape of a finite lattice. Sites are stored row-major with the last
/// coordinate varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct Geometry {
    sides: Vec<usize>,
    boundary: Boundary,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    sides: Vec<usize>,
    boundary: Boundary,
}

impl TryFrom<GeometryRepr> for Geometry {
    type Error = SandpileError;

    fn try_from(r: GeometryRepr) -> Result<Self> {
        Geometry::new(r.sides, r.boundary)
    }
}

impl From<Geometry> for GeometryRepr {
    fn from(g: Geometry) -> Self {
        GeometryRepr {
            sides: g.sides,
            boundary: g.boundary,
        }
    }
}

impl Geometry {
    pub fn new(sides: Vec<usize>, boundary: Boundary) -> Result<Self> {
        if sides.is_empty() {
            return Err(SandpileError::InvalidParameter(
                "lattice needs at least one dimension".into(),
            ));
        }
        let min_side = if boundary == Boundary::Torus { 2 } else { 1 };
        if sides.iter().any(|&s| s < min_side) {
            return Err(SandpileError::InvalidParameter(format!(
                "every side of a {boundary} must be at least {min_side}, got {sides:?}"
            )));
        }
        let mut strides = vec![1; sides.len()];
        for i in (0..sides.len() - 1).rev() {
            strides[i] = strides[i + 1] * sides[i + 1];
        }
        Ok(Geometry {
            sides,
            boundary,
            strides,
        })
    }

    /// `d` copies of `side`.
    pub fn cube(dim: usize, side: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![side; dim], boundary)
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.sides.iter().product()
    }

    /// `2d`, the number of neighbour slots of every site.
    pub fn degree(&self) -> usize {
        2 * self.dim()
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        self.sides
            .iter()
            .zip(&self.strides)
            .map(|(&s, &st)| (x / st) % s)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim() || coords.iter().zip(&self.sides).any(|(c, s)| c >= s) {
            return Err(SandpileError::GeometryMismatch(format!(
                "coordinates {coords:?} outside {:?}",
                self.sides
            )));
        }
        Ok(coords.iter().zip(&self.strides).map(|(c, st)| c * st).sum())
    }

    /// Coordinate sum modulo 2.
    pub fn parity(&self, x: usize) -> usize {
        self.sides
            .iter()
            .zip(&self.strides)
            .map(|(&s, &st)| (x / st) % s)
            .sum::<usize>()
            % 2
    }

    /// Neighbour in direction `dir` (`2j` is `-e_j`, `2j+1` is `+e_j`), or
    /// `None` past the edge of a box.
    #[inline]
    pub fn neighbor(&self, x: usize, dir: usize) -> Option<usize> {
        let j = dir / 2;
        let (side, stride) = (self.sides[j], self.strides[j]);
        let c = (x / stride) % side;
        let wrap = self.boundary == Boundary::Torus;
        if dir.is_multiple_of(2) {
            if c > 0 {
                Some(x - stride)
            } else if wrap {
                Some(x + (side - 1) * stride)
            } else {
                None
            }
        } else if c + 1 < side {
            Some(x + stride)
        } else if wrap {
            Some(x - (side - 1) * stride)
        } else {
            None
        }
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        (0..self.degree()).map(move |dir| self.neighbor(x, dir))
    }
}
