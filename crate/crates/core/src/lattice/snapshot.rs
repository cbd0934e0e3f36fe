//! Height snapshots on disk.
//!
//! Both formats start with one line of JSON `{dim, sides, boundary, t, seed}`.
//! The CSV body is `site,height` rows; the binary body is little-endian `f64`
//! heights in site order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SandpileError};
use crate::lattice::config::LatticeConfig;
use crate::lattice::geometry::{Boundary, Geometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub sides: Vec<usize>,
    pub boundary: Boundary,
    pub t: f64,
    pub seed: u64,
}

impl SnapshotHeader {
    pub fn new(geometry: &Geometry, t: f64, seed: u64) -> Self {
        SnapshotHeader {
            dim: geometry.dim(),
            sides: geometry.sides().to_vec(),
            boundary: geometry.boundary(),
            t,
            seed,
        }
    }

    fn geometry(&self) -> Result<Geometry> {
        if self.sides.len() != self.dim {
            return Err(SandpileError::Parse(format!(
                "header has dim {} but {} sides",
                self.dim,
                self.sides.len()
            )));
        }
        Geometry::new(self.sides.clone(), self.boundary)
    }
}

pub fn write_csv<W: Write>(mut w: W, config: &LatticeConfig, t: f64, seed: u64) -> Result<()> {
    serde_json::to_writer(&mut w, &SnapshotHeader::new(config.geometry(), t, seed))?;
    writeln!(w)?;
    writeln!(w, "site,height")?;
    for (x, h) in config.heights().iter().enumerate() {
        writeln!(w, "{x},{h:.16e}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<(SnapshotHeader, LatticeConfig)> {
    let mut lines = r.lines();
    let header: SnapshotHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(SandpileError::Parse("empty snapshot".into())),
    };
    let geometry = header.geometry()?;
    if lines.next().transpose()?.as_deref().map(str::trim) != Some("site,height") {
        return Err(SandpileError::Parse(
            "missing `site,height` column line".into(),
        ));
    }
    let mut heights = Vec::with_capacity(geometry.n_sites());
    for (i, line) in lines.enumerate() {
        let line = line?;
        let (site, h) = line
            .split_once(',')
            .ok_or_else(|| SandpileError::Parse(format!("bad row `{line}`")))?;
        if site.trim().parse::<usize>().ok() != Some(i) {
            return Err(SandpileError::Parse(format!("row {i} has site `{site}`")));
        }
        heights.push(
            h.trim()
                .parse::<f64>()
                .map_err(|e| SandpileError::Parse(format!("height `{h}`: {e}")))?,
        );
    }
    let config = LatticeConfig::new(geometry, heights)?;
    Ok((header, config))
}

pub fn write_binary<W: Write>(mut w: W, config: &LatticeConfig, t: f64, seed: u64) -> Result<()> {
    serde_json::to_writer(&mut w, &SnapshotHeader::new(config.geometry(), t, seed))?;
    w.write_all(b"\n")?;
    for h in config.heights() {
        w.write_all(&h.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: BufRead>(mut r: R) -> Result<(SnapshotHeader, LatticeConfig)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    let geometry = header.geometry()?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * geometry.n_sites() {
        return Err(SandpileError::Parse(format!(
            "{} bytes for {} sites",
            bytes.len(),
            geometry.n_sites()
        )));
    }
    let heights = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, LatticeConfig::new(geometry, heights)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::density::{generate, DensitySpec};
    use crate::rng;

    fn sample() -> LatticeConfig {
        let g = Geometry::new(vec![4, 6], Boundary::Torus).unwrap();
        generate(
            &DensitySpec::IidUniform { rho: 0.7 },
            &g,
            &mut rng::stream(5, 0),
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let c = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, &c, 2.5, 17).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"dim":2,"sides":[4,6],"boundary":"torus","t":2.5,"seed":17}"#));
        let (h, back) = read_csv(&buf[..]).unwrap();
        assert_eq!(h, SnapshotHeader::new(c.geometry(), 2.5, 17));
        assert_eq!(back, c);
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let c = sample();
        let mut buf = Vec::new();
        write_binary(&mut buf, &c, 0.0, 1).unwrap();
        let (_, back) = read_binary(&buf[..]).unwrap();
        assert_eq!(back, c);
        buf.pop();
        assert!(read_binary(&buf[..]).is_err());
    }
}
