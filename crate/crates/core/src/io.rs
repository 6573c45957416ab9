//! Point CSV and terrain JSON.
//!
//! Point rows are `c₁,…,c_d[,weight]` with an optional header line; the
//! weight defaults to 1. Floats are written in the shortest form that parses
//! back to the same value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AxisRect, ConvexPolygon, Linear, PLTerrain, Point, TerrainTriangle, WeightedPointSet};

/// Reads `dim`-dimensional points. A first row whose first field is not a
/// number is taken as a header.
pub fn read_points<R: Read>(r: R, dim: usize) -> Result<WeightedPointSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
    let (mut pts, mut ws) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != dim && rec.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {dim} or {} fields, got {}",
                line + 1,
                dim + 1,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {f:?}: {e}", line + 1))))
            .collect::<Result<Vec<f64>>>()?;
        pts.push(Point::new(&vals[..dim])?);
        ws.push(vals.get(dim).copied().unwrap_or(1.0));
    }
    WeightedPointSet::new(dim, pts, ws)
}

pub fn read_points_file(path: impl AsRef<Path>, dim: usize) -> Result<WeightedPointSet> {
    read_points(BufReader::new(File::open(path)?), dim)
}

/// Writes one row per point; the weight column is present only when some
/// weight differs from 1.
pub fn write_points<W: Write>(w: W, set: &WeightedPointSet) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(w);
    let weighted = set.weights().iter().any(|&w| w != 1.0);
    for (p, wt) in set.iter() {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        if weighted {
            row.push(wt.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_points_file(path: impl AsRef<Path>, set: &WeightedPointSet) -> Result<()> {
    write_points(BufWriter::new(File::create(path)?), set)
}

/// `{"vertices": [[x,y,z],…], "triangles": [[i,j,k],…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainFile {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TerrainFile {
    /// Terrain over the bounding box of the vertices, each triangle carrying
    /// the plane through its three lifted vertices.
    pub fn to_terrain(&self) -> Result<PLTerrain> {
        if self.vertices.is_empty() {
            return Err(Error::Invalid("terrain without vertices".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let base = AxisRect::new(&lo, &hi)?;
        let tris = self
            .triangles
            .iter()
            .map(|t| {
                let v = t
                    .iter()
                    .map(|&i| {
                        self.vertices
                            .get(i)
                            .copied()
                            .ok_or_else(|| Error::Parse(format!("vertex index {i} out of range")))
                    })
                    .collect::<Result<Vec<[f64; 3]>>>()?;
                let poly = ConvexPolygon::triangle([v[0][0], v[0][1]], [v[1][0], v[1][1]], [v[2][0], v[2][1]])?;
                Ok(TerrainTriangle { poly, height: Linear::through(v[0], v[1], v[2])? })
            })
            .collect::<Result<Vec<_>>>()?;
        PLTerrain::new(tris, base)
    }

    /// Vertex list of `t` with shared corners merged.
    pub fn from_terrain(t: &PLTerrain) -> Self {
        let mut vertices: Vec<[f64; 3]> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let triangles = t
            .triangles()
            .iter()
            .map(|tri| {
                let mut ids = [0; 3];
                for (slot, v) in tri.poly.vertices().iter().enumerate() {
                    let z = tri.height.eval(v[0], v[1]);
                    let key = [v[0].to_bits(), v[1].to_bits(), z.to_bits()];
                    ids[slot] = *index.entry(key).or_insert_with(|| {
                        vertices.push([v[0], v[1], z]);
                        vertices.len() - 1
                    });
                }
                ids
            })
            .collect();
        TerrainFile { vertices, triangles }
    }
}

/// A terrain split at `h = 0`: the positive part, and the negated negative
/// part when some height is below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTerrain {
    pub positive: PLTerrain,
    pub negative: Option<PLTerrain>,
}

pub fn read_terrain<R: Read>(r: R) -> Result<LoadedTerrain> {
    let file: TerrainFile = serde_json::from_reader(r)?;
    let t = file.to_terrain()?;
    if t.has_negative_heights() {
        let (positive, negative) = t.split_sign();
        Ok(LoadedTerrain { positive, negative: Some(negative) })
    } else {
        Ok(LoadedTerrain { positive: t, negative: None })
    }
}

pub fn read_terrain_file(path: impl AsRef<Path>) -> Result<LoadedTerrain> {
    read_terrain(BufReader::new(File::open(path)?))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(set: &WeightedPointSet) -> WeightedPointSet {
        let mut buf = Vec::new();
        write_points(&mut buf, set).unwrap();
        read_points(buf.as_slice(), set.dim()).unwrap()
    }

    #[test]
    fn header_and_default_weight() {
        let s = read_points("x,y\n0.5,0.25\n1,2,3\n".as_bytes(), 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.weights(), &[1.0, 3.0]);
        assert_eq!(s.points()[1].coords(), &[1.0, 2.0]);
    }

    #[test]
    fn unit_sets_have_no_weight_column() {
        let s = WeightedPointSet::unit(2, vec![Point::xy(0.0, 0.0), Point::xy(0.5, 0.25)]).unwrap();
        let mut buf = Vec::new();
        write_points(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,0\n0.5,0.25\n");
    }

    #[test]
    fn lossless_round_trip() {
        let pts = vec![Point::xy(0.1, 1.0 / 3.0), Point::xy(1e-300, -2.5e17), Point::xy(std::f64::consts::PI, 0.0)];
        let s = WeightedPointSet::new(2, pts, vec![0.7, 1.0 / 7.0, 3.0]).unwrap();
        assert_eq!(round_trip(&s), s);
    }

    #[test]
    fn bad_rows() {
        assert!(read_points("1,2,3,4\n".as_bytes(), 2).is_err());
        assert!(read_points("1,2\n1,x\n".as_bytes(), 2).is_err());
        assert!(read_points("1,2,-1\n".as_bytes(), 2).is_err());
    }

    const SQUARE: &str = r#"{"vertices": [[0,0,1],[1,0,1],[1,1,2],[0,1,0]], "triangles": [[0,1,2],[0,2,3]]}"#;

    #[test]
    fn terrain_json() {
        let t = read_terrain(SQUARE.as_bytes()).unwrap();
        assert!(t.negative.is_none());
        assert_eq!(t.positive.height_at(1.0, 1.0), 2.0);
        let file = TerrainFile::from_terrain(&t.positive);
        assert_eq!(file.vertices.len(), 4);
        assert_eq!(file.to_terrain().unwrap().total_measure(), t.positive.total_measure());
    }

    #[test]
    fn negative_terrain_is_split() {
        let json = r#"{"vertices": [[0,0,1],[1,0,-1],[1,1,-1],[0,1,1]], "triangles": [[0,1,2],[0,2,3]]}"#;
        let t = read_terrain(json.as_bytes()).unwrap();
        let neg = t.negative.unwrap();
        assert!(!t.positive.has_negative_heights() && !neg.has_negative_heights());
        assert!((t.positive.total_measure() - neg.total_measure()).abs() < 1e-12);
    }

    #[test]
    fn bad_terrain() {
        assert!(read_terrain(r#"{"vertices": [[0,0,1]], "triangles": [[0,1,2]]}"#.as_bytes()).is_err());
        assert!(read_terrain("{".as_bytes()).is_err());
    }
}
