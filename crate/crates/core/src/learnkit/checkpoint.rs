//! Binary network checkpoints: a magic tag, a format version, a shape
//! manifest per network, then little-endian `f64` parameters.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{Activation, Dense, Mlp};

const MAGIC: &[u8; 8] = b"IOUTCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated or malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_networks(w: &mut impl Write, nets: &[&Mlp]) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u32(w, nets.len() as u32)?;
    for net in nets {
        let sizes = net.sizes();
        w.write_all(&[net.hidden.tag()])?;
        put_u32(w, sizes.len() as u32)?;
        for s in &sizes {
            put_u32(w, *s as u32)?;
        }
    }
    for net in nets {
        for p in net.params() {
            w.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_networks(r: &mut impl Read) -> Result<Vec<Mlp>, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let count = get_u32(r)? as usize;
    if count > 1024 {
        return Err(CheckpointError::Malformed(format!("{count} networks")));
    }
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let act = Activation::from_tag(tag[0])
            .ok_or_else(|| CheckpointError::Malformed(format!("activation tag {}", tag[0])))?;
        let len = get_u32(r)? as usize;
        if len == 0 || len > 64 {
            return Err(CheckpointError::Malformed(format!("{len} layer widths")));
        }
        let sizes = (0..len).map(|_| get_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        manifest.push((act, sizes));
    }
    let mut nets = Vec::with_capacity(count);
    for (act, sizes) in manifest {
        let mut layers = Vec::new();
        for w in sizes.windows(2) {
            let mut wm = Array2::zeros((w[0], w[1]));
            for v in wm.iter_mut() {
                *v = get_f64(r)?;
            }
            let mut b = Array1::zeros(w[1]);
            for v in b.iter_mut() {
                *v = get_f64(r)?;
            }
            layers.push(Dense { w: wm, b });
        }
        let net = if layers.is_empty() {
            Mlp::identity(sizes[0])
        } else {
            Mlp::from_layers(layers, act).map_err(|e| CheckpointError::Malformed(e.to_string()))?
        };
        nets.push(net);
    }
    Ok(nets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Mlp::new(&[5, 7, 3], Activation::Softplus, &mut rng);
        let b = Mlp::new(&[2, 1], Activation::Tanh, &mut rng);
        let mut buf = Vec::new();
        write_networks(&mut buf, &[&a, &b]).unwrap();
        let back = read_networks(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(read_networks(&mut &b"NOTACKPT...."[..]), Err(CheckpointError::BadMagic)));
        let mut buf = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        write_networks(&mut buf, &[&Mlp::new(&[2, 2], Activation::Relu, &mut rng)]).unwrap();
        let mut v2 = buf.clone();
        v2[8] = 2;
        assert!(matches!(read_networks(&mut v2.as_slice()), Err(CheckpointError::Version { found: 2, .. })));
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_networks(&mut buf.as_slice()), Err(CheckpointError::Malformed(_))));
    }
}
