// SPDX-License-Identifier: Apache-2.0

//! Self-contained binary model file: mixture grid plus embedding network.
//!
//! Layout, all integers `u32` and all reals `f64`, little endian:
//!
//! ```text
//! magic "TRJLINK\0" | version
//! C | sigma | body_height | C x (mu_x, mu_y, mu_z, weight)
//! feature rows | feature cols
//! input dim | input mean[dim] | input scale[dim]
//! L | sizes[L + 1] | per layer: weights (row-major, out x in), bias
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::net::{EmbeddingNet, Layer};
use crate::error::{Error, Result};
use crate::features::{GmmGrid, FEATURE_ROWS};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"TRJLINK\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write, T: Real>(w: &mut W, v: T) -> Result<()> {
    w.write_all(&v.f64().to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read, T: Real>(r: &mut R) -> Result<T> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(T::lit(f64::from_le_bytes(b)))
}

fn get_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = get_u32(r)? as usize;
    if n > 1 << 24 {
        return Err(Error::ModelFormat(format!("implausible {what} {n}")));
    }
    Ok(n)
}

pub fn write_model<W: Write, T: Real>(w: &mut W, grid: &GmmGrid<T>, net: &EmbeddingNet<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, grid.components() as u32)?;
    put_f64(w, grid.sigma)?;
    put_f64(w, grid.body_height)?;
    for (mu, wt) in grid.means.iter().zip(&grid.weights) {
        for v in mu {
            put_f64(w, *v)?;
        }
        put_f64(w, *wt)?;
    }
    put_u32(w, FEATURE_ROWS as u32)?;
    put_u32(w, grid.components() as u32)?;
    let (mean, scale) = net.input_standardization();
    put_u32(w, mean.len() as u32)?;
    for v in mean.iter().chain(scale.iter()) {
        put_f64(w, *v)?;
    }
    let sizes = net.sizes();
    put_u32(w, (sizes.len() - 1) as u32)?;
    for s in &sizes {
        put_u32(w, *s as u32)?;
    }
    for p in net.params() {
        put_f64(w, p)?;
    }
    Ok(())
}

pub fn read_model<R: Read, T: Real>(r: &mut R) -> Result<(GmmGrid<T>, EmbeddingNet<T>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let c = get_len(r, "component count")?;
    let sigma = get_f64(r)?;
    let body_height = get_f64(r)?;
    let mut means = Vec::with_capacity(c);
    let mut weights = Vec::with_capacity(c);
    for _ in 0..c {
        means.push([get_f64(r)?, get_f64(r)?, get_f64(r)?]);
        weights.push(get_f64(r)?);
    }
    let grid =
        GmmGrid::from_parts(means, sigma, weights, body_height).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let (rows, cols) = (get_u32(r)? as usize, get_u32(r)? as usize);
    if rows != FEATURE_ROWS || cols != c {
        return Err(Error::ModelFormat(format!("feature shape {rows}x{cols} does not match the grid")));
    }
    let dim = get_len(r, "input dim")?;
    let mean: Array1<T> = (0..dim).map(|_| get_f64(r)).collect::<Result<_>>()?;
    let scale: Array1<T> = (0..dim).map(|_| get_f64(r)).collect::<Result<_>>()?;
    let n_layers = get_len(r, "layer count")?;
    let sizes: Vec<usize> = (0..=n_layers).map(|_| get_len(r, "layer size")).collect::<Result<_>>()?;
    if n_layers == 0 || sizes[0] != dim || dim != rows * cols || sizes.contains(&0) {
        return Err(Error::ModelFormat("layer sizes do not match the feature size".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for w in sizes.windows(2) {
        let weights: Vec<T> = (0..w[0] * w[1]).map(|_| get_f64(r)).collect::<Result<_>>()?;
        let bias: Array1<T> = (0..w[1]).map(|_| get_f64(r)).collect::<Result<_>>()?;
        let weights = Array2::from_shape_vec((w[1], w[0]), weights).expect("length matches shape");
        layers.push(Layer { weights, bias });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::ModelFormat("trailing bytes".into()));
    }
    let mut net = EmbeddingNet::with_layers(layers);
    net.set_input_standardization(mean, scale);
    Ok((grid, net))
}

pub fn save_model<T: Real>(path: &Path, grid: &GmmGrid<T>, net: &EmbeddingNet<T>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, grid, net)?;
    w.flush()?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<(GmmGrid<T>, EmbeddingNet<T>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_model(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let grid = GmmGrid::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = EmbeddingNet::new(&[1080, 8, 4], &mut rng);
        net.set_input_standardization(Array1::from_elem(1080, 0.5), Array1::from_elem(1080, 2.0));
        let mut buf = Vec::new();
        write_model(&mut buf, &grid, &net).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let (g2, n2) = read_model::<_, f64>(&mut buf.as_slice()).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(n2, net);
    }

    #[test]
    fn rejects_garbage() {
        let err = read_model::<_, f64>(&mut &b"NOTAMODELFILE..."[..]).unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)));
        let grid = GmmGrid::<f64>::default();
        let net = EmbeddingNet::<f64>::zeros(&[1080, 2]);
        let mut buf = Vec::new();
        write_model(&mut buf, &grid, &net).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_model::<_, f64>(&mut buf.as_slice()).is_err());
    }
}
