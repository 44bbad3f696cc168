use std::io::{Read, Write};

use super::{ProjectionModel, TrainError};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TBLSPROJ";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Layout: magic, version byte, `d_out` and `d_in` as u32, τ as f64, hash
/// seed as u64, then `d_out × d_in` row-major f64 weights. All little-endian.
pub fn write_checkpoint<T: Scalar, W: Write>(model: &ProjectionModel<T>, mut w: W) -> Result<(), TrainError> {
    let dim = |v: usize, name: &str| u32::try_from(v).map_err(|_| TrainError::Checkpoint(format!("{name} {v} does not fit in u32")));
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION])?;
    w.write_all(&dim(model.d_out, "d_out")?.to_le_bytes())?;
    w.write_all(&dim(model.d_in, "d_in")?.to_le_bytes())?;
    w.write_all(&model.tau.as_f64().to_le_bytes())?;
    w.write_all(&model.hash_seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(model.weights.len() * 8);
    for x in &model.weights {
        buf.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<ProjectionModel<T>, TrainError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let bad = |m: &str| TrainError::Checkpoint(m.to_string());
    const HEADER: usize = 8 + 1 + 4 + 4 + 8 + 8;
    if bytes.len() < HEADER {
        return Err(bad("file shorter than header"));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    if bytes[8] != CHECKPOINT_VERSION {
        return Err(TrainError::Checkpoint(format!("unsupported version {}", bytes[8])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (d_out, d_in) = (u32_at(9), u32_at(13));
    let tau = f64::from_bits(u64_at(17));
    let hash_seed = u64_at(25);
    let n = d_out.checked_mul(d_in).ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != HEADER + n * 8 {
        return Err(TrainError::Checkpoint(format!("expected {} weight bytes, found {}", n * 8, bytes.len() - HEADER)));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(TrainError::Checkpoint(format!("temperature {tau} is not positive")));
    }
    let weights: Vec<T> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .map(|x| if x.is_finite() { Ok(T::of(x)) } else { Err(bad("non-finite weight")) })
        .collect::<Result<_, _>>()?;
    Ok(ProjectionModel { d_in, d_out, tau: T::of(tau), hash_seed, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_layout() {
        let m = ProjectionModel::<f64>::random(6, 3, 0.05, 77, 1);
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 33 + 18 * 8);
        assert_eq!(&buf[..8], b"TBLSPROJ");
        assert_eq!(buf[8], 1);
        assert_eq!(&buf[9..13], &3u32.to_le_bytes());
        assert_eq!(&buf[13..17], &6u32.to_le_bytes());
        // second weight of row 0 sits right after the first
        assert_eq!(&buf[33 + 8..33 + 16], &m.weights[1].to_le_bytes());
        assert_eq!(read_checkpoint::<f64, _>(&buf[..]).unwrap(), m);
        let f: ProjectionModel<f32> = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(f.weights[4], m.weights[4] as f32);
    }

    #[test]
    fn corrupt_files_rejected() {
        let m = ProjectionModel::<f64>::random(4, 2, 0.05, 0, 1);
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert!(read_checkpoint::<f64, _>(&buf[..buf.len() - 1]).is_err());
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint::<f64, _>(&wrong[..]).is_err());
        let mut version = buf.clone();
        version[8] = 2;
        assert!(read_checkpoint::<f64, _>(&version[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"short"[..]).is_err());
    }
}
