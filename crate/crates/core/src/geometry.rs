//! Array element layouts.
//!
//! Positions are stored in wavelengths, so the phase of element `n` toward
//! direction cosines `(ux, uy)` is simply `2π (x_n ux + y_n uy)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Element position in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Position>,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit positions, rejecting empty lists,
    /// non-finite coordinates and coincident elements.
    pub fn from_positions(positions: Vec<Position>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("geometry needs at least one element"));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::invalid(format!(
                    "element {} has a non-finite position",
                    i + 1
                )));
            }
        }
        let mut sorted: Vec<(usize, Position)> = positions.iter().copied().enumerate().collect();
        sorted.sort_by(|a, b| a.1.x.total_cmp(&b.1.x).then(a.1.y.total_cmp(&b.1.y)));
        for pair in sorted.windows(2) {
            if pair[0].1 == pair[1].1 {
                return Err(Error::invalid(format!(
                    "elements {} and {} share position ({}, {})",
                    pair[0].0 + 1,
                    pair[1].0 + 1,
                    pair[0].1.x,
                    pair[0].1.y
                )));
            }
        }
        Ok(Self { positions })
    }

    /// Uniform linear array; element `k` (0-based) sits at `k * spacing` on `axis`.
    pub fn linear(n: usize, spacing: f64, axis: Axis) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("linear array needs n >= 1"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let positions = (0..n)
            .map(|k| {
                let c = k as f64 * spacing;
                match axis {
                    Axis::X => Position::new(c, 0.0),
                    Axis::Y => Position::new(0.0, c),
                }
            })
            .collect();
        Ok(Self { positions })
    }

    /// Rectangular lattice of `nx * ny` elements, row-major: element
    /// `q * nx + p` is at `(p * spacing, q * spacing)`.
    pub fn planar_grid(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("planar grid needs nx, ny >= 1"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let mut positions = Vec::with_capacity(nx * ny);
        for q in 0..ny {
            for p in 0..nx {
                positions.push(Position::new(p as f64 * spacing, q as f64 * spacing));
            }
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// The axis all elements lie on, if the layout is collinear along x or y.
    pub fn collinear_axis(&self) -> Option<Axis> {
        let x0 = self.positions[0].x;
        let y0 = self.positions[0].y;
        if self.positions.iter().all(|p| p.x == x0) {
            Some(Axis::Y)
        } else if self.positions.iter().all(|p| p.y == y0) {
            Some(Axis::X)
        } else {
            None
        }
    }

    /// Geometric center of the element positions.
    pub fn centroid(&self) -> Position {
        let n = self.len() as f64;
        let (sx, sy) = self
            .positions
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Position::new(sx / n, sy / n)
    }

    /// Loads a geometry from CSV with header `index,x_lambda,y_lambda`.
    /// Rows may appear in any order but indices must cover `1..=N` exactly once.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers()?.clone();
        let expected = ["index", "x_lambda", "y_lambda"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::input(format!(
                "{}: expected header index,x_lambda,y_lambda",
                path.display()
            )));
        }
        let mut rows: Vec<(usize, Position)> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let index: usize = parse_field(&record, 0, path)?;
            let x: f64 = parse_field(&record, 1, path)?;
            let y: f64 = parse_field(&record, 2, path)?;
            rows.push((index, Position::new(x, y)));
        }
        let positions = order_by_index(rows, path)?;
        Self::from_positions(positions)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["index", "x_lambda", "y_lambda"])?;
        for (i, p) in self.positions.iter().enumerate() {
            writer.write_record([
                (i + 1).to_string(),
                crate::io::fmt_f64(p.x),
                crate::io::fmt_f64(p.y),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    path: &Path,
) -> Result<T> {
    let raw = record.get(col).ok_or_else(|| {
        Error::input(format!(
            "{}: row {:?} is missing column {}",
            path.display(),
            record.position().map(|p| p.line()),
            col + 1
        ))
    })?;
    raw.parse().map_err(|_| {
        Error::input(format!(
            "{}: cannot parse {raw:?} in column {}",
            path.display(),
            col + 1
        ))
    })
}

/// Sorts `(1-based index, value)` rows and checks they cover `1..=len` exactly once.
pub(crate) fn order_by_index<T>(mut rows: Vec<(usize, T)>, path: &Path) -> Result<Vec<T>> {
    rows.sort_by_key(|r| r.0);
    for (k, (index, _)) in rows.iter().enumerate() {
        if *index != k + 1 {
            return Err(Error::input(format!(
                "{}: indices must run 1..={} without gaps or repeats (found {index} at position {})",
                path.display(),
                rows.len(),
                k + 1
            )));
        }
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

/// A sub-region of the aperture. Lengths are in wavelengths; boundaries are closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApertureRegion {
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Circle {
        x_c: f64,
        y_c: f64,
        radius: f64,
    },
    /// Explicit element indices, 0-based in code and 1-based when serialized.
    IndexSet {
        #[serde(with = "one_based")]
        indices: Vec<usize>,
    },
}

mod one_based {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        indices: &[usize],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(indices.iter().map(|i| i + 1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<usize>, D::Error> {
        Vec::<usize>::deserialize(d)?
            .into_iter()
            .map(|i| {
                i.checked_sub(1)
                    .ok_or_else(|| D::Error::custom("element indices start at 1"))
            })
            .collect()
    }
}

impl ApertureRegion {
    /// Checks the region's own invariants against an `n`-element array.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ApertureRegion::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                if !(x_min < x_max) || !(y_min < y_max) {
                    return Err(Error::invalid(
                        "rectangle needs x_min < x_max and y_min < y_max",
                    ));
                }
            }
            ApertureRegion::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::invalid("circle radius must be positive"));
                }
            }
            ApertureRegion::IndexSet { indices } => {
                let mut seen = vec![false; n];
                for &i in indices {
                    if i >= n {
                        return Err(Error::invalid(format!(
                            "index {} out of range for {n} elements",
                            i + 1
                        )));
                    }
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(Error::invalid(format!("index {} listed twice", i + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Position) -> bool {
        match *self {
            ApertureRegion::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max,
            ApertureRegion::Circle { x_c, y_c, radius } => {
                let (dx, dy) = (p.x - x_c, p.y - y_c);
                dx * dx + dy * dy <= radius * radius
            }
            ApertureRegion::IndexSet { .. } => false,
        }
    }
}

/// Indices (0-based, ascending for shapes, as given for index sets) of the
/// elements inside `region`.
pub fn elements_in_region(geom: &ArrayGeometry, region: &ApertureRegion) -> Vec<usize> {
    match region {
        ApertureRegion::IndexSet { indices } => indices.clone(),
        _ => geom
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| region.contains(**p))
            .map(|(i, _)| i)
            .collect(),
    }
}
