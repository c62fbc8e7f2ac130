//! Activation-map dump files.
//!
//! The map file is a header of four little-endian `u32` values `n, c, h, w`
//! followed by `n·c·h·w` little-endian `f32` values in row-major order. The
//! label file holds `n` little-endian `u32` values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn write_activation_dump(maps: &Tensor, labels: &[usize], maps_path: &Path, labels_path: &Path) -> Result<()> {
    let &[n, c, h, w] = maps.shape() else {
        return Err(Error::dim(format!(
            "activation dump needs n × c × h × w maps, got {:?}",
            maps.shape()
        )));
    };
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} maps", labels.len())));
    }
    let mut buf = Vec::with_capacity(16 + maps.len() * 4);
    for d in [n, c, h, w] {
        buf.extend_from_slice(&to_u32(d)?.to_le_bytes());
    }
    for &v in maps.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(maps_path, &buf).map_err(|e| Error::io(maps_path, e))?;

    let mut lbuf = Vec::with_capacity(labels.len() * 4);
    for &y in labels {
        lbuf.extend_from_slice(&to_u32(y)?.to_le_bytes());
    }
    fs::write(labels_path, &lbuf).map_err(|e| Error::io(labels_path, e))
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in a u32 field")))
}

fn format_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

pub fn read_activation_dump(maps_path: &Path, labels_path: &Path) -> Result<(Tensor, Vec<usize>)> {
    let bytes = fs::read(maps_path).map_err(|e| Error::io(maps_path, e))?;
    if bytes.len() < 16 {
        return Err(format_err(maps_path, bytes.len(), "file ends inside the 16-byte header"));
    }
    let dims: Vec<usize> = (0..4).map(|i| u32_at(&bytes, 4 * i) as usize).collect();
    let count: usize = dims.iter().product();
    let expected = 16 + count * 4;
    if bytes.len() != expected {
        return Err(format_err(
            maps_path,
            bytes.len().min(expected),
            format!("header {dims:?} implies {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("four bytes")) as f64)
        .collect();
    let maps = Tensor::new(dims.clone(), data)?;

    let lbytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    if lbytes.len() != dims[0] * 4 {
        return Err(format_err(
            labels_path,
            lbytes.len().min(dims[0] * 4),
            format!("expected {} labels ({} bytes), file has {} bytes", dims[0], dims[0] * 4, lbytes.len()),
        ));
    }
    let labels = (0..dims[0]).map(|i| u32_at(&lbytes, 4 * i) as usize).collect();
    Ok((maps, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let (mp, lp) = (dir.path().join("m.bin"), dir.path().join("m.labels"));
        let maps = Tensor::new(vec![2, 1, 1, 2], vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        write_activation_dump(&maps, &[3, 7], &mp, &lp).unwrap();
        let bytes = fs::read(&mp).unwrap();
        assert_eq!(&bytes[..16], &[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
        assert_eq!(fs::read(&lp).unwrap(), vec![3, 0, 0, 0, 7, 0, 0, 0]);
        let (back, labels) = read_activation_dump(&mp, &lp).unwrap();
        assert_eq!(back, maps);
        assert_eq!(labels, vec![3, 7]);
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (mp, lp) = (dir.path().join("m.bin"), dir.path().join("m.labels"));
        let maps = Tensor::zeros(&[2, 1, 2, 2]);
        write_activation_dump(&maps, &[0, 1], &mp, &lp).unwrap();
        let bytes = fs::read(&mp).unwrap();
        fs::write(&mp, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_activation_dump(&mp, &lp), Err(Error::Format { .. })));
    }
}
