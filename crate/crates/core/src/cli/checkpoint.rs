//! Binary state checkpoints.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic   8 bytes  "CHEMTXCK"
//! version 1 byte   (1)
//! dim     1 byte   (1 or 2)
//! per axis: n as u64, extent as f64
//! t       f64
//! u, w, uacc: num_cells f64 each
//! ```
//!
//! Round trips are bit-exact; anything malformed (bad magic, wrong version,
//! truncation, non-finite values) is rejected with a message.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::State;

const MAGIC: &[u8; 8] = b"CHEMTXCK";
const VERSION: u8 = 1;

pub fn checkpoint_save(state: &State, path: &Path) -> Result<()> {
    let grid = state.grid();
    let mut out = Vec::with_capacity(64 + 24 * grid.num_cells());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(grid.dim() as u8);
    for a in 0..grid.dim() {
        out.extend_from_slice(&(grid.n(a) as u64).to_le_bytes());
        out.extend_from_slice(&grid.extent(a).to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    for field in [&state.u, &state.w, &state.uacc] {
        for v in field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<State> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let take = |cursor: &mut usize, len: usize| -> Result<&[u8]> {
        if *cursor + len > bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {} bytes at offset {}, have {}",
                len,
                cursor,
                bytes.len()
            )));
        }
        let slice = &bytes[*cursor..*cursor + len];
        *cursor += len;
        Ok(slice)
    };

    if take(&mut cursor, 8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let version = take(&mut cursor, 1)?[0];
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let dim = take(&mut cursor, 1)?[0] as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Checkpoint(format!("invalid dimension {dim}")));
    }
    let mut n = [1usize; 2];
    let mut extents = [1.0f64; 2];
    for a in 0..dim {
        n[a] = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        extents[a] = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        if n[a] < 3 || !(extents[a] > 0.0) {
            return Err(Error::Checkpoint(format!(
                "invalid grid axis {a}: n = {}, extent = {}",
                n[a], extents[a]
            )));
        }
    }
    let grid = if dim == 1 { Grid::line(extents[0], n[0]) } else { Grid::rectangle(extents, [n[0], n[1]]) };
    let t = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Checkpoint(format!("invalid time {t}")));
    }

    let cells = grid.num_cells();
    let read_field = |cursor: &mut usize, name: &str| -> Result<Field> {
        let raw = take(cursor, 8 * cells)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("{name} contains non-finite values")));
        }
        Ok(Field::from_values(grid, values))
    };
    let u = read_field(&mut cursor, "u")?;
    let w = read_field(&mut cursor, "w")?;
    let uacc = read_field(&mut cursor, "uacc")?;
    if cursor != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cursor)));
    }
    Ok(State { u, w, t, uacc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};

    fn sample_state() -> State {
        let grid = Grid::rectangle([2.0, 1.0], [6, 4]);
        State {
            u: Field::from_fn(grid, |x, y| 1.0 + 0.25 * x - 0.125 * y),
            w: Field::from_fn(grid, |x, _| (0.3_f64 + x).exp() * 0.1),
            t: 1.75,
            uacc: Field::from_fn(grid, |x, y| x * y),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let state = sample_state();
        checkpoint_save(&state, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        assert_eq!(loaded.t.to_bits(), state.t.to_bits());
        for (a, b) in [(&loaded.u, &state.u), (&loaded.w, &state.w), (&loaded.uacc, &state.uacc)] {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(loaded.grid(), state.grid());
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        checkpoint_save(&sample_state(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = checkpoint_load(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        let err = checkpoint_load(&path).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }
}
