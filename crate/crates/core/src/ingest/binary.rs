use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::Points;
use crate::error::{KernetError, Result};

/// Reads a little-endian matrix: `n` and `d` as `u32`, then `n * d` `f64` values.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Points> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 8];
    r.read_exact(&mut header)
        .map_err(|_| KernetError::Schema("embedding file shorter than its 8-byte header".into()))?;
    let n = u32::from_le_bytes(header[..4].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(header[4..].try_into().expect("4 bytes")) as usize;
    if d == 0 {
        return Err(KernetError::Schema("embedding file declares dimension 0".into()));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let want = n * d * 8;
    if bytes.len() != want {
        return Err(KernetError::Schema(format!(
            "embedding file holds {} bytes of data, header implies {want} ({n} x {d})",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(KernetError::Parse {
            row: pos / d + 1,
            column: format!("embedding[{}]", pos % d),
            reason: "non-finite value".into(),
        });
    }
    Points::from_flat(d, data)
}

pub fn write_embeddings(path: impl AsRef<Path>, points: &Points) -> Result<()> {
    let n = u32::try_from(points.len()).map_err(|_| KernetError::invalid("points", "too many rows"))?;
    let d = u32::try_from(points.dim()).map_err(|_| KernetError::invalid("points", "dimension too large"))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    for x in points.as_flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let p = Points::from_rows(&[vec![1.5, -2.0, 1e-300], vec![0.1, 0.2, 0.3]]).unwrap();
        write_embeddings(&path, &p).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 6 * 8);
        assert_eq!(&bytes[..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(read_embeddings(&path).unwrap(), p);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let mut bytes = vec![2, 0, 0, 0, 1, 0, 0, 0];
        bytes.extend(1.0f64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_embeddings(&path), Err(KernetError::Schema(_))));
        std::fs::write(&path, [1u8, 0, 0]).unwrap();
        assert!(read_embeddings(&path).is_err());
    }

    #[test]
    fn nan_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let mut bytes = vec![2, 0, 0, 0, 1, 0, 0, 0];
        bytes.extend(1.0f64.to_le_bytes());
        bytes.extend(f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match read_embeddings(&path) {
            Err(KernetError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
